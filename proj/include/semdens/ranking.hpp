#pragma once

// Threshold-free ranking metrics over (score, correct) pairs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "semdens/record.hpp"

namespace semdens {

enum class Polarity {
  confidence,   // higher means more likely correct
  uncertainty,  // higher means more likely wrong
};

struct LabeledScore {
  double score = 0.0;
  bool correct = false;
  Polarity polarity = Polarity::confidence;
};

/// Raised when a ranking metric is undefined, e.g. only one class present.
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

namespace detail {

struct Keyed {
  double key;  // confidence orientation
  bool correct;
};

inline std::vector<Keyed> confidence_keys(std::span<const LabeledScore> scores) {
  std::vector<Keyed> out;
  out.reserve(scores.size());
  for (const auto& s : scores) {
    if (!std::isfinite(s.score)) throw Error("scores must be finite");
    // + 0.0 folds -0.0 into 0.0
    const double key = (s.polarity == Polarity::uncertainty ? -s.score : s.score) + 0.0;
    out.push_back({key, s.correct});
  }
  return out;
}

inline void require_both_classes(std::size_t positives, std::size_t negatives) {
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetric("metric undefined: need at least one correct and one incorrect item");
  }
}

}  // namespace detail

/// Mann-Whitney pair credit, doubled so ties stay integral.
struct PairCredit {
  std::uint64_t twice_credit = 0;  // 2 per correctly ordered pair, 1 per tie
  std::uint64_t pairs = 0;         // correct x incorrect
};

/// Counts (correct, incorrect) pairs ordered by the confidence key in
/// O(n log n) via one sorted sweep over tie groups.
inline PairCredit auroc_pair_credit(std::span<const LabeledScore> scores) {
  auto keyed = detail::confidence_keys(scores);
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.key < b.key; });

  PairCredit credit;
  std::uint64_t incorrect_below = 0;
  std::uint64_t correct_total = 0;
  std::uint64_t incorrect_total = 0;
  for (std::size_t i = 0; i < keyed.size();) {
    std::size_t j = i;
    std::uint64_t c = 0;
    std::uint64_t w = 0;
    while (j < keyed.size() && keyed[j].key == keyed[i].key) {
      (keyed[j].correct ? c : w) += 1;
      ++j;
    }
    credit.twice_credit += 2 * c * incorrect_below + c * w;
    incorrect_below += w;
    correct_total += c;
    incorrect_total += w;
    i = j;
  }
  detail::require_both_classes(correct_total, incorrect_total);
  credit.pairs = correct_total * incorrect_total;
  return credit;
}

/// Probability that a random correct item outranks a random incorrect one
/// (ties count half).
inline double auroc(std::span<const LabeledScore> scores) {
  const PairCredit c = auroc_pair_credit(scores);
  const std::uint64_t total = 2 * c.pairs;
  // Round once on the upper half, L = fl(1 - q), and return L or 1 - L.
  // 1 - L is exact for L in [0.5, 1], so a polarity flip yields exactly 1 - x.
  const std::uint64_t flipped = total - c.twice_credit;
  const std::uint64_t smaller = std::min(c.twice_credit, flipped);
  const double upper = 1.0 - static_cast<double>(smaller) / static_cast<double>(total);
  return c.twice_credit <= flipped ? 1.0 - upper : upper;
}

/// Non-interpolated average precision with `positive` items as the target
/// class, ranked by descending key. Tied keys form a single threshold.
inline double average_precision(std::span<const detail::Keyed> ranked_desc, bool positive_is_correct) {
  std::size_t n_pos = 0;
  for (const auto& k : ranked_desc) n_pos += (k.correct == positive_is_correct);
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < ranked_desc.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < ranked_desc.size() && ranked_desc[j].key == ranked_desc[i].key) {
      group_pos += (ranked_desc[j].correct == positive_is_correct);
      ++j;
    }
    tp += group_pos;
    seen = j;
    if (group_pos > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(seen);
      ap += precision * static_cast<double>(group_pos) / static_cast<double>(n_pos);
    }
    i = j;
  }
  return ap;
}

/// Mean of the average precision with correct items as positives (ranked by
/// confidence) and with incorrect items as positives (ranked by uncertainty).
inline double aupr_average(std::span<const LabeledScore> scores) {
  auto keyed = detail::confidence_keys(scores);
  std::size_t correct = 0;
  for (const auto& k : keyed) correct += k.correct;
  detail::require_both_classes(correct, keyed.size() - correct);

  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.key > b.key; });
  const double ap_correct = average_precision(keyed, true);

  for (auto& k : keyed) k.key = -k.key + 0.0;
  std::reverse(keyed.begin(), keyed.end());
  const double ap_incorrect = average_precision(keyed, false);

  return std::clamp(0.5 * (ap_correct + ap_incorrect), 0.0, 1.0);
}

}  // namespace semdens
