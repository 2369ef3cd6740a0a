#include "sslforge/manifest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "sslforge/util.hpp"

namespace sslforge {
namespace {

constexpr std::array<std::pair<Corpus, std::string_view>, 8> kCorpusTags{{
    {Corpus::kMls, "MLS"},
    {Corpus::kCommonVoice, "CommonVoice"},
    {Corpus::kGooglei18n, "Googlei18n"},
    {Corpus::kVoxPopuli, "VoxPopuli"},
    {Corpus::kBabel, "BABEL"},
    {Corpus::kFleurs, "FLEURS"},
    {Corpus::kDns, "DNS"},
    {Corpus::kOther, "Other"},
}};

[[noreturn]] void row_error(const std::string& source, std::size_t line,
                            const std::string& what) {
  throw Error(source + ":" + std::to_string(line) + ": " + what);
}

double parse_double_field(const std::string& source, std::size_t line,
                          std::string_view field, const char* name) {
  double value = 0.0;
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    row_error(source, line,
              std::string("cannot parse ") + name + " '" + std::string(field) + "'");
  }
  return value;
}

std::uint32_t parse_u32_field(const std::string& source, std::size_t line,
                              std::string_view field, const char* name) {
  std::uint32_t value = 0;
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    row_error(source, line,
              std::string("cannot parse ") + name + " '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

// Fixed reduction granularity. Stats are accumulated per chunk and merged in
// chunk order, which makes the floating-point result independent of how many
// threads computed the chunks.
constexpr std::size_t kStatsChunk = 1024;

struct PartialStats {
  std::size_t utterances = 0;
  double total_hours = 0.0;
  std::map<std::string, double> hours_by_language;
  std::map<Corpus, double> hours_by_corpus;
};

}  // namespace

std::string_view corpus_name(Corpus c) {
  for (const auto& [corpus, tag] : kCorpusTags) {
    if (corpus == c) return tag;
  }
  throw Error("invalid corpus enum value");
}

Corpus parse_corpus(std::string_view tag) {
  for (const auto& [corpus, name] : kCorpusTags) {
    if (name == tag) return corpus;
  }
  std::string known;
  for (const auto& [corpus, name] : kCorpusTags) {
    if (!known.empty()) known += ", ";
    known += name;
  }
  throw Error("unknown corpus tag '" + std::string(tag) + "' (expected one of " +
              known + ")");
}

Manifest parse_manifest(std::istream& in, const std::string& source_name) {
  Manifest manifest;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    const auto fields = split_tabs(line);
    if (fields.size() != 6) {
      row_error(source_name, line_number,
                "expected 6 tab-separated fields, got " +
                    std::to_string(fields.size()));
    }
    UtteranceRecord rec;
    rec.id = std::string(fields[0]);
    rec.path = std::string(fields[1]);
    rec.language = std::string(fields[3]);
    if (rec.id.empty()) row_error(source_name, line_number, "empty id");
    if (rec.path.empty()) row_error(source_name, line_number, "empty path");
    if (rec.language.empty()) row_error(source_name, line_number, "empty language");
    try {
      rec.corpus = parse_corpus(fields[2]);
    } catch (const Error& e) {
      row_error(source_name, line_number, e.what());
    }
    rec.duration = parse_double_field(source_name, line_number, fields[4],
                                      "duration_seconds");
    if (rec.duration < 0.0) {
      row_error(source_name, line_number, "negative duration");
    }
    rec.sample_rate =
        parse_u32_field(source_name, line_number, fields[5], "sample_rate");
    if (rec.sample_rate == 0) {
      row_error(source_name, line_number, "sample_rate must be positive");
    }
    if (!seen_ids.insert(rec.id).second) {
      row_error(source_name, line_number,
                "duplicate utterance id '" + rec.id + "'");
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open manifest: " + path.string());
  }
  return parse_manifest(in, path.string());
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write manifest: " + path.string());
  }
  out << "# id\tpath\tcorpus\tlanguage\tduration_seconds\tsample_rate\n";
  for (const auto& rec : m.records) {
    std::array<char, 64> buf;
    const auto [ptr, ec] =
        std::to_chars(buf.data(), buf.data() + buf.size(), rec.duration);
    if (ec != std::errc{}) {
      throw Error("cannot format duration for id '" + rec.id + "'");
    }
    out << rec.id << '\t' << rec.path << '\t' << corpus_name(rec.corpus) << '\t'
        << rec.language << '\t' << std::string_view(buf.data(), ptr - buf.data())
        << '\t' << rec.sample_rate << '\n';
  }
  if (!out) {
    throw Error("short write to manifest: " + path.string());
  }
}

void validate_manifest(const Manifest& m) {
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& rec = m.records[i];
    const std::string where = "record " + std::to_string(i);
    if (rec.id.empty()) throw Error(where + ": empty id");
    if (rec.path.empty()) throw Error(where + " ('" + rec.id + "'): empty path");
    if (rec.language.empty())
      throw Error(where + " ('" + rec.id + "'): empty language");
    if (!(rec.duration >= 0.0) || !std::isfinite(rec.duration))
      throw Error(where + " ('" + rec.id + "'): invalid duration");
    if (rec.sample_rate == 0)
      throw Error(where + " ('" + rec.id + "'): sample_rate must be positive");
    if (!seen.insert(rec.id).second)
      throw Error("duplicate utterance id '" + rec.id + "'");
  }
}

std::vector<std::pair<std::string, double>> ManifestStats::top_languages(
    std::size_t k) const {
  std::vector<std::pair<std::string, double>> langs(hours_by_language.begin(),
                                                    hours_by_language.end());
  std::sort(langs.begin(), langs.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (langs.size() > k) langs.resize(k);
  return langs;
}

double ManifestStats::top_language_share(std::size_t k) const {
  if (total_hours <= 0.0) return 0.0;
  double top = 0.0;
  for (const auto& [lang, hours] : top_languages(k)) top += hours;
  return top / total_hours;
}

ManifestStats compute_stats(const Manifest& m, unsigned threads) {
  const std::size_t n = m.records.size();
  const std::size_t chunks = (n + kStatsChunk - 1) / kStatsChunk;
  std::vector<PartialStats> partials(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    PartialStats& p = partials[c];
    const std::size_t begin = c * kStatsChunk;
    const std::size_t end = std::min(n, begin + kStatsChunk);
    for (std::size_t i = begin; i < end; ++i) {
      const auto& rec = m.records[i];
      const double hours = rec.duration / 3600.0;
      p.utterances += 1;
      p.total_hours += hours;
      p.hours_by_language[rec.language] += hours;
      p.hours_by_corpus[rec.corpus] += hours;
    }
  });

  ManifestStats stats;
  for (const auto& p : partials) {
    stats.utterances += p.utterances;
    stats.total_hours += p.total_hours;
    for (const auto& [lang, hours] : p.hours_by_language) {
      stats.hours_by_language[lang] += hours;
    }
    for (const auto& [corpus, hours] : p.hours_by_corpus) {
      stats.hours_by_corpus[corpus] += hours;
    }
  }
  return stats;
}

nlohmann::json stats_to_json(const ManifestStats& stats, std::size_t top_k) {
  nlohmann::json by_language = nlohmann::json::object();
  for (const auto& [lang, hours] : stats.hours_by_language) {
    by_language[lang] = hours;
  }
  nlohmann::json by_corpus = nlohmann::json::object();
  for (const auto& [corpus, hours] : stats.hours_by_corpus) {
    by_corpus[std::string(corpus_name(corpus))] = hours;
  }
  nlohmann::json top = nlohmann::json::array();
  for (const auto& [lang, hours] : stats.top_languages(top_k)) {
    top.push_back({{"language", lang}, {"hours", hours}});
  }
  return nlohmann::json{
      {"utterances", stats.utterances},
      {"total_hours", stats.total_hours},
      {"hours_by_language", by_language},
      {"hours_by_corpus", by_corpus},
      {"top_languages", top},
      {"top_language_share", stats.top_language_share(top_k)},
  };
}

Manifest filter_max_duration(const Manifest& m, double max_seconds) {
  if (!(max_seconds > 0.0) || !std::isfinite(max_seconds)) {
    throw Error("filter_max_duration: max_seconds must be positive and finite");
  }
  Manifest out;
  for (const auto& rec : m.records) {
    if (rec.duration <= max_seconds) out.records.push_back(rec);
  }
  return out;
}

Manifest rebase_manifest_paths(const Manifest& m,
                               const std::filesystem::path& from_dir,
                               const std::filesystem::path& to_dir) {
  // std::filesystem::absolute does no filesystem access beyond reading the
  // working directory, so the rewrite is deterministic for a fixed cwd. An
  // empty directory (the parent of a bare filename) means the cwd itself.
  const std::filesystem::path from_abs =
      std::filesystem::absolute(from_dir.empty() ? "." : from_dir)
          .lexically_normal();
  const std::filesystem::path to_abs =
      std::filesystem::absolute(to_dir.empty() ? "." : to_dir)
          .lexically_normal();
  Manifest out = m;
  for (auto& rec : out.records) {
    std::filesystem::path p(rec.path);
    if (p.is_absolute()) continue;
    rec.path = (from_abs / p)
                   .lexically_normal()
                   .lexically_proximate(to_abs)
                   .generic_string();
  }
  return out;
}

Manifest subset_by_corpus(const Manifest& m, const std::set<Corpus>& corpora) {
  if (corpora.empty()) {
    throw Error("subset_by_corpus: corpus set is empty");
  }
  Manifest out;
  for (const auto& rec : m.records) {
    if (corpora.contains(rec.corpus)) out.records.push_back(rec);
  }
  return out;
}

}  // namespace sslforge
