#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sslforge {

/// Source collection an utterance belongs to. The set mirrors the corpora a
/// multilingual pre-training mix is typically drawn from, plus a dedicated
/// noise corpus (kDns) and a catch-all (kOther).
enum class Corpus {
  kMls,
  kCommonVoice,
  kGooglei18n,
  kVoxPopuli,
  kBabel,
  kFleurs,
  kDns,
  kOther,
};

/// Canonical tag used in manifest files ("MLS", "CommonVoice", ...).
std::string_view corpus_name(Corpus c);

/// Parses a canonical corpus tag. Throws Error for unknown tags.
Corpus parse_corpus(std::string_view tag);

/// One utterance (or noise clip). `path` is resolved lazily; statistics and
/// planning never touch the audio.
struct UtteranceRecord {
  std::string id;
  std::string path;
  Corpus corpus = Corpus::kOther;
  std::string language;     // opaque language code, e.g. "eng"; "und" for noise
  double duration = 0.0;    // seconds
  std::uint32_t sample_rate = 0;

  bool operator==(const UtteranceRecord&) const = default;
};

/// A corpus manifest: an ordered list of records with unique ids.
struct Manifest {
  std::vector<UtteranceRecord> records;

  bool operator==(const Manifest&) const = default;
};

/// Parses the tab-separated manifest format:
///   id <TAB> path <TAB> corpus <TAB> language <TAB> duration_seconds <TAB> sample_rate
/// Lines starting with '#' and blank lines are skipped. Every malformed row
/// (wrong field count, unknown corpus, unparsable or negative duration,
/// non-positive sample rate, empty field) raises Error naming the 1-based
/// line number; a duplicate id raises Error naming both the id and the line.
Manifest parse_manifest(std::istream& in, const std::string& source_name);

Manifest load_manifest(const std::filesystem::path& path);

/// Writes the same format load_manifest reads. Durations are printed with
/// shortest round-trip formatting, so save followed by load reproduces the
/// manifest exactly.
void save_manifest(const Manifest& m, const std::filesystem::path& path);

/// Re-checks manifest invariants (unique non-empty ids, valid numeric fields)
/// for manifests constructed in code rather than parsed. Throws Error.
void validate_manifest(const Manifest& m);

/// Aggregated hours. Map iteration order (and therefore serialization order)
/// is lexicographic, so reports are deterministic.
struct ManifestStats {
  std::size_t utterances = 0;
  double total_hours = 0.0;
  std::map<std::string, double> hours_by_language;
  std::map<Corpus, double> hours_by_corpus;

  /// Languages sorted by hours descending; ties broken by language code
  /// ascending. Returns at most k entries.
  std::vector<std::pair<std::string, double>> top_languages(std::size_t k) const;

  /// Fraction of total hours covered by the top k languages, in [0, 1].
  /// Returns 0 when the manifest is empty.
  double top_language_share(std::size_t k) const;
};

/// Computes stats, optionally threaded. Records are reduced in fixed-size
/// chunks that are merged in chunk order, so the result is bitwise identical
/// for every thread count.
ManifestStats compute_stats(const Manifest& m, unsigned threads = 1);

/// Report shape used by the CLI and the demo: totals, per-language and
/// per-corpus hours, and the top-k language list with its share.
nlohmann::json stats_to_json(const ManifestStats& stats, std::size_t top_k);

/// Keeps records with duration <= max_seconds (inclusive: a clip of exactly
/// max_seconds survives). Relative order is preserved. max_seconds must be
/// positive and finite.
Manifest filter_max_duration(const Manifest& m, double max_seconds);

/// Re-expresses relative record paths (resolved against from_dir) relative
/// to to_dir, so a manifest can be saved into a different directory without
/// breaking audio resolution. Purely lexical (no symlink resolution), so the
/// output depends only on the two directories and the record paths. Absolute
/// record paths pass through untouched.
Manifest rebase_manifest_paths(const Manifest& m,
                               const std::filesystem::path& from_dir,
                               const std::filesystem::path& to_dir);

/// Keeps records whose corpus is in `corpora`, preserving order. Used to
/// carve the later-stage training mix (e.g. FLEURS + BABEL) out of the full
/// manifest. An empty corpus set raises Error.
Manifest subset_by_corpus(const Manifest& m, const std::set<Corpus>& corpora);

}  // namespace sslforge
