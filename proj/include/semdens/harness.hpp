#pragma once

// Corpus-level evaluation: AUROC / AUPR tables per (model, dataset),
// Rouge-L threshold sweeps, reference-count ablation, per-beam-group
// breakdowns and paired significance tests.
//
// Every aggregation first sorts its inputs by (model, dataset, prompt_id,
// response_index), so results do not depend on input or execution order.

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "semdens/density.hpp"
#include "semdens/geometry.hpp"
#include "semdens/ranking.hpp"
#include "semdens/record.hpp"
#include "semdens/rouge.hpp"
#include "semdens/scoring.hpp"
#include "semdens/ttest.hpp"

namespace semdens {

struct ConfigKey {
  std::string model;
  std::string dataset;

  auto operator<=>(const ConfigKey&) const = default;
};

inline std::vector<double> default_sweep_thresholds() { return {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}; }

/// Correctness at `threshold`: recomputed from rouge_l when present,
/// otherwise the stored label.
inline bool label_at(const ScoreSet& s, double threshold) {
  if (s.rouge_l) return rouge_passes(*s.rouge_l, threshold);
  if (s.correct) return *s.correct;
  throw Error("score for " + s.prompt_id + "#" + std::to_string(s.response_index) +
              " has neither rouge_l nor a correctness label");
}

inline std::vector<ScoreSet> canonical_order(std::span<const ScoreSet> scores) {
  std::vector<ScoreSet> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoreSet& a, const ScoreSet& b) {
    return std::tie(a.model, a.dataset, a.prompt_id, a.response_index) <
           std::tie(b.model, b.dataset, b.prompt_id, b.response_index);
  });
  return sorted;
}

struct MetricCell {
  std::optional<double> auroc;
  std::optional<double> aupr;
  std::size_t n = 0;
};

/// One (model, dataset) row of the comparison table.
struct EvalRow {
  ConfigKey key;
  std::size_t n = 0;
  std::size_t n_correct = 0;
  std::array<MetricCell, kMetricCount> cells{};

  const MetricCell& operator[](Metric m) const { return cells[static_cast<std::size_t>(m)]; }
  MetricCell& operator[](Metric m) { return cells[static_cast<std::size_t>(m)]; }
};

struct EvalTable {
  std::vector<Metric> metrics;
  std::vector<EvalRow> rows;  // sorted by key
  std::vector<std::string> warnings;

  const EvalRow* find(const ConfigKey& key) const {
    for (const auto& r : rows) {
      if (r.key == key) return &r;
    }
    return nullptr;
  }
};

namespace detail {

inline std::string describe(const ConfigKey& k) { return k.model + "/" + k.dataset; }

inline MetricCell evaluate_metric(std::span<const ScoreSet> group, Metric metric, double threshold,
                                  const std::string& where, std::vector<std::string>& warnings) {
  std::vector<LabeledScore> items;
  items.reserve(group.size());
  for (const auto& s : group) {
    if (const auto& v = s[metric]) items.push_back({*v, label_at(s, threshold), info(metric).polarity});
  }
  MetricCell cell;
  cell.n = items.size();
  if (items.empty()) {
    warnings.push_back(where + ": " + std::string(info(metric).name) + " has no values");
    return cell;
  }
  try {
    cell.auroc = auroc(items);
    cell.aupr = aupr_average(items);
  } catch (const UndefinedMetric&) {
    warnings.push_back(where + ": " + std::string(info(metric).name) + " undefined (single class)");
  }
  return cell;
}

template <class KeyFn>
auto group_scores(std::span<const ScoreSet> scores, KeyFn key_of) {
  std::map<decltype(key_of(scores[0])), std::vector<ScoreSet>> groups;
  for (const auto& s : canonical_order(scores)) groups[key_of(s)].push_back(s);
  return groups;
}

}  // namespace detail

/// AUROC and AUPR-average for every (model, dataset) and metric, pooling all
/// target responses of a configuration.
inline EvalTable evaluate(std::span<const ScoreSet> scores, std::span<const Metric> metrics, double threshold = 0.3) {
  EvalTable table;
  table.metrics.assign(metrics.begin(), metrics.end());
  if (scores.empty()) return table;
  const auto groups = detail::group_scores(scores, [](const ScoreSet& s) { return ConfigKey{s.model, s.dataset}; });
  for (const auto& [key, group] : groups) {
    EvalRow row;
    row.key = key;
    row.n = group.size();
    for (const auto& s : group) row.n_correct += label_at(s, threshold);
    for (Metric m : metrics) row[m] = detail::evaluate_metric(group, m, threshold, detail::describe(key), table.warnings);
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Rouge-L threshold sweep

struct SweepPoint {
  double threshold = 0.0;
  EvalTable table;
};

inline std::vector<SweepPoint> rouge_threshold_sweep(std::span<const ScoreSet> scores,
                                                     std::span<const double> thresholds,
                                                     std::span<const Metric> metrics) {
  for (const auto& s : scores) {
    if (!s.rouge_l) throw Error("threshold sweep needs rouge_l on every score");
  }
  std::vector<SweepPoint> out;
  for (double t : thresholds) out.push_back({t, evaluate(scores, metrics, t)});
  return out;
}

// ---------------------------------------------------------------------------
// Per-beam-group breakdown

struct GroupRow {
  ConfigKey key;
  std::size_t beam_group = 0;
  std::size_t n = 0;
  std::size_t n_correct = 0;
  bool skipped = false;  // single class, AUROC undefined
  std::array<std::optional<double>, kMetricCount> auroc{};

  double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(n_correct) / static_cast<double>(n); }
  const std::optional<double>& operator[](Metric m) const { return auroc[static_cast<std::size_t>(m)]; }
};

struct GroupBreakdown {
  std::vector<Metric> metrics;
  std::vector<GroupRow> rows;
  std::vector<std::string> warnings;
};

/// AUROC computed separately for the targets of each beam group. The
/// scores themselves (and so the reference sets) are unchanged.
inline GroupBreakdown per_group_auroc(std::span<const ScoreSet> scores, std::span<const Metric> metrics,
                                      double threshold = 0.3) {
  GroupBreakdown out;
  out.metrics.assign(metrics.begin(), metrics.end());
  if (scores.empty()) return out;
  const auto groups = detail::group_scores(
      scores, [](const ScoreSet& s) { return std::make_tuple(s.model, s.dataset, s.beam_group); });
  for (const auto& [key, group] : groups) {
    GroupRow row;
    row.key = {std::get<0>(key), std::get<1>(key)};
    row.beam_group = std::get<2>(key);
    row.n = group.size();
    for (const auto& s : group) row.n_correct += label_at(s, threshold);
    if (row.n_correct == 0 || row.n_correct == row.n) {
      row.skipped = true;
      out.warnings.push_back(detail::describe(row.key) + " beam group " + std::to_string(row.beam_group) +
                             ": skipped (single class)");
    } else {
      std::vector<std::string> ignored;
      for (Metric m : metrics) {
        row.auroc[static_cast<std::size_t>(m)] =
            detail::evaluate_metric(group, m, threshold, detail::describe(row.key), ignored).auroc;
      }
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference-count ablation

/// Response indices ordered by (beam_group, index).
inline std::vector<std::size_t> reference_order(const GenerationRecord& record) {
  std::vector<std::size_t> order(record.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return record.responses[a].beam_group < record.responses[b].beam_group;
  });
  return order;
}

/// The first `k` references in (beam_group, index) order, returned in index
/// order so that k = M reproduces the full computation bit for bit.
inline std::vector<std::size_t> leading_references(const GenerationRecord& record, std::size_t k) {
  auto order = reference_order(record);
  order.resize(std::min(k, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

struct AblationPoint {
  ConfigKey key;
  std::size_t k = 0;
  std::optional<double> auroc;
  std::size_t records_used = 0;
  std::size_t records_skipped = 0;
};

struct AblationCurve {
  std::vector<AblationPoint> points;  // sorted by (key, k)
  std::vector<std::string> warnings;
};

/// Semantic density AUROC when only the first k references of each record
/// are kept, for k = 1..max_k. Records with fewer than k responses are
/// skipped and counted.
inline AblationCurve ablate_reference_count(std::span<const GenerationRecord> records, std::size_t max_k,
                                            const ScoringOptions& opts) {
  opts.density.validate();
  struct Prepared {
    const GenerationRecord* record;
    RelationMatrix relations;
    std::vector<bool> labels;
  };
  std::map<ConfigKey, std::vector<Prepared>> by_config;
  {
    std::vector<const GenerationRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
      return std::tie(a->model, a->dataset, a->prompt_id) < std::tie(b->model, b->dataset, b->prompt_id);
    });
    for (const auto* r : sorted) {
      std::vector<bool> labels;
      for (const auto& s : r->responses) {
        labels.push_back(rouge_passes(best_rouge_l(s.text, r->gold_answers, opts.trim_markers), opts.rouge_threshold));
      }
      by_config[{r->model, r->dataset}].push_back({r, RelationMatrix(*r), std::move(labels)});
    }
  }

  AblationCurve curve;
  for (const auto& [key, prepared] : by_config) {
    for (std::size_t k = 1; k <= max_k; ++k) {
      AblationPoint point{key, k, std::nullopt, 0, 0};
      std::vector<LabeledScore> items;
      std::size_t targets_skipped = 0;
      for (const auto& p : prepared) {
        if (p.record->size() < k) {
          ++point.records_skipped;
          continue;
        }
        ++point.records_used;
        const auto subset = leading_references(*p.record, k);
        for (std::size_t t = 0; t < p.record->size(); ++t) {
          std::vector<std::size_t> refs;
          for (std::size_t r : subset) {
            if (r == t && !opts.density.use_target_as_reference) continue;
            refs.push_back(r);
          }
          if (refs.empty()) {
            ++targets_skipped;
            continue;
          }
          const double sd = semantic_density(t, *p.record, p.relations, opts.density, refs);
          items.push_back({sd, p.labels[t], Polarity::confidence});
        }
      }
      if (point.records_skipped > 0) {
        curve.warnings.push_back(detail::describe(key) + " k=" + std::to_string(k) + ": skipped " +
                                 std::to_string(point.records_skipped) + " record(s) with fewer than k responses");
      }
      if (targets_skipped > 0) {
        curve.warnings.push_back(detail::describe(key) + " k=" + std::to_string(k) + ": skipped " +
                                 std::to_string(targets_skipped) + " target(s) whose only reference was themselves");
      }
      try {
        if (!items.empty()) point.auroc = auroc(items);
      } catch (const UndefinedMetric&) {
        curve.warnings.push_back(detail::describe(key) + " k=" + std::to_string(k) + ": AUROC undefined (single class)");
      }
      curve.points.push_back(point);
    }
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Paired significance tests

struct TTestRow {
  Metric a{};
  Metric b{};
  std::optional<TTestResult> result;
  std::string note;  // why result is absent
};

/// Paired t-tests of `base` against each of `others` on per-configuration
/// AUROC, pairing by (model, dataset).
inline std::vector<TTestRow> paired_auroc_tests(const EvalTable& table, Metric base, std::span<const Metric> others) {
  std::vector<TTestRow> out;
  for (Metric other : others) {
    if (other == base) continue;
    TTestRow row{base, other, std::nullopt, {}};
    std::vector<double> a;
    std::vector<double> b;
    for (const auto& r : table.rows) {
      const auto& x = r[base].auroc;
      const auto& y = r[other].auroc;
      if (x && y) {
        a.push_back(*x);
        b.push_back(*y);
      }
    }
    try {
      row.result = paired_t_test(a, b);
    } catch (const Error& e) {
      row.note = e.what();
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace semdens
