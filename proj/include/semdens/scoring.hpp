#pragma once

// Per-response score sets: every metric for every response of a record.

#include <array>
#include <bitset>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "semdens/baselines.hpp"
#include "semdens/density.hpp"
#include "semdens/geometry.hpp"
#include "semdens/ranking.hpp"
#include "semdens/record.hpp"
#include "semdens/rouge.hpp"

namespace semdens {

enum class Metric : std::size_t {
  semantic_density,
  frequency_density,
  semantic_entropy,
  p_true,
  degree,
  normalized_likelihood,
  length_normalized_entropy,
  predictive_entropy,
};

inline constexpr std::size_t kMetricCount = 8;

struct MetricInfo {
  Metric id;
  std::string_view name;   // short column name
  std::string_view field;  // JSON key
  Polarity polarity;
  bool prompt_wise;
};

inline constexpr std::array<MetricInfo, kMetricCount> kMetrics{{
    {Metric::semantic_density, "SD", "semantic_density", Polarity::confidence, false},
    {Metric::frequency_density, "FD", "frequency_density", Polarity::confidence, false},
    {Metric::semantic_entropy, "SE", "semantic_entropy", Polarity::uncertainty, true},
    {Metric::p_true, "PTrue", "p_true", Polarity::confidence, false},
    {Metric::degree, "Deg", "degree", Polarity::confidence, false},
    {Metric::normalized_likelihood, "NL", "normalized_likelihood", Polarity::confidence, false},
    {Metric::length_normalized_entropy, "NE", "length_normalized_entropy", Polarity::uncertainty, true},
    {Metric::predictive_entropy, "PE", "predictive_entropy", Polarity::uncertainty, true},
}};

constexpr const MetricInfo& info(Metric m) { return kMetrics[static_cast<std::size_t>(m)]; }

/// Accepts the short name ("SD") or the JSON key ("semantic_density"),
/// case-insensitively.
inline std::optional<Metric> metric_from_name(std::string_view name) {
  auto iequal = [](std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
        return false;
      }
    }
    return true;
  };
  for (const auto& m : kMetrics) {
    if (iequal(name, m.name) || iequal(name, m.field)) return m.id;
  }
  if (iequal(name, "P(True)")) return Metric::p_true;
  return std::nullopt;
}

using MetricSet = std::bitset<kMetricCount>;

inline MetricSet all_metrics() { return MetricSet{}.set(); }

inline MetricSet metric_set(std::initializer_list<Metric> ms) {
  MetricSet s;
  for (Metric m : ms) s.set(static_cast<std::size_t>(m));
  return s;
}

/// Columns of the headline comparison table, in display order.
inline std::vector<Metric> table_metrics() {
  return {Metric::semantic_density, Metric::semantic_entropy,          Metric::p_true,
          Metric::degree,           Metric::normalized_likelihood,     Metric::length_normalized_entropy,
          Metric::predictive_entropy};
}

struct ScoreSet {
  std::string prompt_id;
  std::string model;
  std::string dataset;
  std::size_t response_index = 0;
  std::size_t beam_group = 0;
  std::string text;
  std::array<std::optional<double>, kMetricCount> values{};
  std::optional<double> rouge_l;
  std::optional<bool> correct;

  std::optional<double>& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
  const std::optional<double>& operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }

  bool operator==(const ScoreSet&) const = default;
};

struct ScoringOptions {
  DensityConfig density;
  double rouge_threshold = 0.3;
  std::vector<std::string> trim_markers = default_trim_markers();
  MetricSet metrics = all_metrics();

  bool wants(Metric m) const { return metrics.test(static_cast<std::size_t>(m)); }
};

/// Scores every response of a deduplicated record. Response-wise metrics
/// differ per response; prompt-wise ones are repeated on every line.
inline std::vector<ScoreSet> score_record(const GenerationRecord& record, const ScoringOptions& opts) {
  opts.density.validate();
  const RelationMatrix relations(record);
  const std::size_t m = record.size();

  std::optional<double> se;
  std::optional<double> ne;
  std::optional<double> pe;
  if (opts.wants(Metric::semantic_entropy)) {
    const auto clusters = cluster_by_equivalence(relations);
    se = semantic_entropy(record, clusters);
  }
  if (opts.wants(Metric::length_normalized_entropy)) ne = length_normalized_entropy(record);
  if (opts.wants(Metric::predictive_entropy)) pe = predictive_entropy(record);

  std::vector<ScoreSet> out(m);
  for (std::size_t t = 0; t < m; ++t) {
    const auto& sample = record.responses[t];
    auto& s = out[t];
    s.prompt_id = record.prompt_id;
    s.model = record.model;
    s.dataset = record.dataset;
    s.response_index = t;
    s.beam_group = sample.beam_group;
    s.text = sample.text;

    const auto refs = default_references(t, m, opts.density);
    if (opts.wants(Metric::semantic_density)) {
      s[Metric::semantic_density] = semantic_density(t, record, relations, opts.density, refs);
    }
    if (opts.wants(Metric::frequency_density)) {
      s[Metric::frequency_density] = frequency_density(t, record, relations, refs);
    }
    if (opts.wants(Metric::p_true)) s[Metric::p_true] = sample.p_true;
    if (opts.wants(Metric::degree)) s[Metric::degree] = degree_confidence(t, relations);
    if (opts.wants(Metric::normalized_likelihood)) s[Metric::normalized_likelihood] = normalized_likelihood(sample);
    s[Metric::semantic_entropy] = se;
    s[Metric::length_normalized_entropy] = ne;
    s[Metric::predictive_entropy] = pe;

    s.rouge_l = best_rouge_l(sample.text, record.gold_answers, opts.trim_markers);
    s.correct = rouge_passes(*s.rouge_l, opts.rouge_threshold);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json to_json(const ScoreSet& s) {
  nlohmann::ordered_json j;
  j["prompt_id"] = s.prompt_id;
  j["model"] = s.model;
  j["dataset"] = s.dataset;
  j["response_index"] = s.response_index;
  j["beam_group"] = s.beam_group;
  j["text"] = s.text;
  for (const auto& m : kMetrics) {
    const auto& v = s[m.id];
    j[std::string(m.field)] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  }
  j["rouge_l"] = s.rouge_l ? nlohmann::ordered_json(*s.rouge_l) : nlohmann::ordered_json(nullptr);
  j["correct"] = s.correct ? nlohmann::ordered_json(*s.correct) : nlohmann::ordered_json(nullptr);
  return j;
}

inline std::string serialize_score(const ScoreSet& s) { return to_json(s).dump(); }

inline ScoreSet parse_score(std::string_view text, std::size_t line = 0) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, "", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line, "", "expected a JSON object");

  ScoreSet s;
  s.prompt_id = detail::as_string(detail::require(j, "prompt_id", line, ""), line, "prompt_id");
  s.response_index = detail::as_index(detail::require(j, "response_index", line, ""), line, "response_index");
  if (auto it = j.find("model"); it != j.end()) s.model = detail::as_string(*it, line, "model");
  if (auto it = j.find("dataset"); it != j.end()) s.dataset = detail::as_string(*it, line, "dataset");
  if (auto it = j.find("beam_group"); it != j.end()) s.beam_group = detail::as_index(*it, line, "beam_group");
  if (auto it = j.find("text"); it != j.end()) s.text = detail::as_string(*it, line, "text");

  for (const auto& m : kMetrics) {
    auto it = j.find(m.field);
    if (it == j.end() || it->is_null()) continue;
    const std::string field(m.field);
    const double v = detail::as_double(*it, line, field);
    if (!std::isfinite(v)) throw ParseError(line, field, "must be finite");
    if ((m.id == Metric::semantic_density || m.id == Metric::degree || m.id == Metric::frequency_density ||
         m.id == Metric::p_true) &&
        (v < 0.0 || v > 1.0)) {
      throw ParseError(line, field, "must be in [0,1]");
    }
    s[m.id] = v;
  }
  if (auto it = j.find("rouge_l"); it != j.end() && !it->is_null()) {
    const double v = detail::as_double(*it, line, "rouge_l");
    if (!(v >= 0.0 && v <= 1.0)) throw ParseError(line, "rouge_l", "must be in [0,1]");
    s.rouge_l = v;
  }
  if (auto it = j.find("correct"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw ParseError(line, "correct", "expected boolean");
    s.correct = it->get<bool>();
  }
  return s;
}

}  // namespace semdens
