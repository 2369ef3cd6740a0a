#include "sslforge/scoring.hpp"

#include <algorithm>
#include <set>

#include "sslforge/util.hpp"

namespace sslforge {
namespace {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::uint32_t> utf8_codepoints(std::string_view text) {
  std::vector<std::uint32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      throw Error("invalid utf-8 byte at offset " + std::to_string(i));
    }
    if (i + len > text.size()) {
      throw Error("truncated utf-8 sequence at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        throw Error("invalid utf-8 continuation at offset " +
                    std::to_string(i + k));
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    // Reject overlong encodings and out-of-range values.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw Error("invalid utf-8 codepoint at offset " + std::to_string(i));
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::size_t edit_distance(std::span<const std::uint32_t> a,
                          std::span<const std::uint32_t> b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::size_t> prev(m + 1);
  std::vector<std::size_t> curr(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    curr[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t substitute = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      const std::size_t remove = prev[j] + 1;
      const std::size_t insert = curr[j - 1] + 1;
      curr[j] = std::min({substitute, remove, insert});
    }
    prev.swap(curr);
  }
  return prev[m];
}

double cer(std::string_view hypothesis, std::string_view reference) {
  const std::vector<std::uint32_t> hyp = utf8_codepoints(strip(hypothesis));
  const std::vector<std::uint32_t> ref = utf8_codepoints(strip(reference));
  if (ref.empty()) {
    throw Error("cer: reference is empty after stripping whitespace");
  }
  return 100.0 * static_cast<double>(edit_distance(hyp, ref)) /
         static_cast<double>(ref.size());
}

std::map<std::string, double> superb_score(
    std::span<const TaskResult> results,
    const std::optional<std::map<std::string, double>>& baselines) {
  if (results.empty()) {
    throw Error("superb_score: no results given");
  }

  std::set<std::string> models;
  std::map<std::string, Metric> task_metric;
  std::map<std::string, std::map<std::string, double>> by_task;  // task -> model -> value
  for (const auto& r : results) {
    if (r.model.empty() || r.task.empty()) {
      throw Error("superb_score: empty model or task name");
    }
    if (r.metric == Metric::kAccuracy && !(r.value >= 0.0 && r.value <= 100.0)) {
      throw Error("superb_score: accuracy for '" + r.model + "' on '" + r.task +
                  "' must be in [0, 100], got " + std::to_string(r.value));
    }
    if (r.metric == Metric::kCer && !(r.value >= 0.0)) {
      throw Error("superb_score: error rate for '" + r.model + "' on '" +
                  r.task + "' must be >= 0, got " + std::to_string(r.value));
    }
    models.insert(r.model);
    const auto [it, inserted] = task_metric.emplace(r.task, r.metric);
    if (!inserted && it->second != r.metric) {
      throw Error("superb_score: task '" + r.task +
                  "' reported with two different metrics");
    }
    if (!by_task[r.task].emplace(r.model, r.value).second) {
      throw Error("superb_score: duplicate result for model '" + r.model +
                  "' on task '" + r.task + "'");
    }
  }
  for (const auto& [task, cells] : by_task) {
    for (const auto& model : models) {
      if (!cells.contains(model)) {
        throw Error("superb_score: model '" + model +
                    "' has no result for task '" + task + "'");
      }
    }
  }
  if (baselines.has_value()) {
    for (const auto& [task, best] : *baselines) {
      if (!by_task.contains(task)) {
        throw Error("superb_score: baseline for unknown task '" + task + "'");
      }
      if (!(best >= 0.0)) {
        throw Error("superb_score: baseline for '" + task +
                    "' must be >= 0");
      }
    }
  }

  std::map<std::string, double> best_per_task;
  for (const auto& [task, cells] : by_task) {
    if (baselines.has_value() && baselines->contains(task)) {
      best_per_task[task] = baselines->at(task);
      continue;
    }
    double best = cells.begin()->second;
    for (const auto& [model, value] : cells) {
      best = task_metric.at(task) == Metric::kAccuracy ? std::max(best, value)
                                                       : std::min(best, value);
    }
    best_per_task[task] = best;
  }

  std::map<std::string, double> scores;
  const double task_count = static_cast<double>(by_task.size());
  for (const auto& model : models) {
    double sum = 0.0;
    for (const auto& [task, cells] : by_task) {
      const double value = cells.at(model);
      const double best = best_per_task.at(task);
      double term;
      if (value == best) {
        term = 1.0;  // covers the 0/0 cases uniformly
      } else if (task_metric.at(task) == Metric::kAccuracy) {
        term = best > 0.0 ? value / best : 0.0;
      } else {
        term = value > 0.0 ? best / value : 0.0;
      }
      sum += term;
    }
    scores[model] = 1000.0 * sum / task_count;
  }
  return scores;
}

}  // namespace sslforge
