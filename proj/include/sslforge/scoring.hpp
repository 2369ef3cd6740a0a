#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sslforge {

/// Decodes UTF-8 into Unicode codepoints. Malformed sequences raise Error.
/// Inputs are expected to be NFC-normalized already; this library compares
/// codepoints as given and performs no normalization of its own.
std::vector<std::uint32_t> utf8_codepoints(std::string_view text);

/// Levenshtein distance (unit insert/delete/substitute costs).
std::size_t edit_distance(std::span<const std::uint32_t> a,
                          std::span<const std::uint32_t> b);

/// Character error rate as a percentage:
///   100 * edit_distance(hyp, ref) / len(ref),
/// computed over codepoints after stripping leading/trailing ASCII
/// whitespace from both strings. The reference must be non-empty after
/// stripping; an empty hypothesis against a reference of length N scores
/// exactly 100.
double cer(std::string_view hypothesis, std::string_view reference);

enum class Metric { kAccuracy, kCer };

/// One evaluation cell: how `model` scored on `task`. Accuracy values are
/// percentages in [0, 100]; CER values are percentages >= 0 (and may exceed
/// 100 for badly misaligned hypotheses).
struct TaskResult {
  std::string model;
  std::string task;
  Metric metric = Metric::kAccuracy;
  double value = 0.0;
};

/// Cross-model aggregate in the style of a benchmark leaderboard score.
/// For every task the best value is found (max for accuracy, min for error
/// rates), each model contributes value/best (accuracy) or best/value
/// (error), and the mean over tasks is scaled by 1000. A model matching the
/// best on every task therefore scores exactly 1000.
///
/// Degenerate tasks are defined, not rejected: when the best value makes the
/// ratio 0/0 (best accuracy 0, or best CER 0 for a model that also scored 0)
/// the model's term is 1; a nonzero CER against a best of 0 contributes 0.
///
/// `baselines` optionally pins the per-task best to an external reference
/// (e.g. a published topline) instead of the best observed model.
///
/// The cell list must be a complete matrix: every model scored on every
/// task, exactly once, with one metric per task. Violations raise Error.
std::map<std::string, double> superb_score(
    std::span<const TaskResult> results,
    const std::optional<std::map<std::string, double>>& baselines = std::nullopt);

}  // namespace sslforge
