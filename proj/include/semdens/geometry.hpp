#pragma once

// NLI class probabilities -> expected squared semantic distance -> kernel.
//
// Responses live on a sphere of radius 1/2 in a latent semantic space, so
// equivalent, irrelevant and contradictory pairs sit at distance 0, sqrt(2)/2
// and 1. Taking the expectation of the squared distance over the NLI classes
// gives p_c + p_n / 2, which always lies in [0,1].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "semdens/record.hpp"

namespace semdens {

/// Expected squared distance E||v_a - v_b||^2 in the unit-diameter space.
struct DistanceExpectation {
  double value = 0.0;
};

/// Rescales probabilities that drift off the simplex by rounding noise.
inline RelationProbs renormalized(const RelationProbs& p) {
  const double s = p.sum();
  if (std::abs(s - 1.0) <= 1e-12 || s <= 0.0) return p;
  return {p.p_contradiction / s, p.p_neutral / s, p.p_entailment / s};
}

inline RelationProbs bidirectional_average(const RelationProbs& ab, const RelationProbs& ba) {
  return {0.5 * (ab.p_contradiction + ba.p_contradiction), 0.5 * (ab.p_neutral + ba.p_neutral),
          0.5 * (ab.p_entailment + ba.p_entailment)};
}

/// Single-direction data degenerates to the identity.
inline RelationProbs bidirectional_average(const RelationProbs& ab, const std::optional<RelationProbs>& ba) {
  return ba ? bidirectional_average(ab, *ba) : ab;
}

/// p_c + p_n / 2 before any clamping. Exposed so callers can check that
/// valid inputs never need the clamp.
inline double raw_expected_sq_distance(const RelationProbs& rel) {
  const RelationProbs p = renormalized(rel);
  return p.p_contradiction + 0.5 * p.p_neutral;
}

inline DistanceExpectation expected_sq_distance(const RelationProbs& rel) {
  return {std::clamp(raw_expected_sq_distance(rel), 0.0, 1.0)};
}

/// Epanechnikov profile without the dimension-dependent constant:
/// (1 - d2) on d2 <= 1, zero outside.
inline double kernel(DistanceExpectation d2) {
  const double d = std::clamp(d2.value, 0.0, 1.0);
  return d <= 1.0 ? 1.0 - d : 0.0;
}

inline double kernel(const RelationProbs& rel) { return kernel(expected_sq_distance(rel)); }

/// Dense view of a record's pairwise relations.
///
/// Holds both directed entries per pair plus the bidirectional average.
/// The diagonal is fixed to certain entailment.
class RelationMatrix {
 public:
  explicit RelationMatrix(const GenerationRecord& record)
      : size_(record.responses.size()), directed_(size_ * size_), averaged_(size_ * size_), kernel_(size_ * size_, 0.0) {
    for (const auto& rel : record.relations) {
      if (rel.i >= size_ || rel.j >= size_ || rel.i == rel.j) {
        throw Error("relation (" + std::to_string(rel.i) + "," + std::to_string(rel.j) + ") out of range");
      }
      directed_[rel.i * size_ + rel.j] = rel.probs;
    }
    for (std::size_t a = 0; a < size_; ++a) {
      averaged_[a * size_ + a] = RelationProbs::equivalent();
      kernel_[a * size_ + a] = 1.0;
      for (std::size_t b = a + 1; b < size_; ++b) {
        const auto& ab = directed_[a * size_ + b];
        const auto& ba = directed_[b * size_ + a];
        std::optional<RelationProbs> avg;
        if (ab && ba) {
          avg = bidirectional_average(*ab, *ba);
        } else if (ab || ba) {
          avg = ab ? *ab : *ba;
        }
        if (!avg) continue;
        averaged_[a * size_ + b] = avg;
        averaged_[b * size_ + a] = avg;
        const double k = semdens::kernel(*avg);
        kernel_[a * size_ + b] = k;
        kernel_[b * size_ + a] = k;
      }
    }
  }

  std::size_t size() const { return size_; }

  const std::optional<RelationProbs>& directed(std::size_t from, std::size_t to) const {
    return directed_[from * size_ + to];
  }

  bool has_pair(std::size_t a, std::size_t b) const { return averaged_[a * size_ + b].has_value(); }

  /// Bidirectionally averaged probabilities; throws if the pair is missing.
  const RelationProbs& averaged(std::size_t a, std::size_t b) const {
    const auto& p = averaged_[a * size_ + b];
    if (!p) throw missing(a, b);
    return *p;
  }

  double kernel(std::size_t a, std::size_t b) const {
    if (!has_pair(a, b)) throw missing(a, b);
    return kernel_[a * size_ + b];
  }

 private:
  static Error missing(std::size_t a, std::size_t b) {
    return Error("no relation between responses " + std::to_string(a) + " and " + std::to_string(b));
  }

  std::size_t size_;
  std::vector<std::optional<RelationProbs>> directed_;
  std::vector<std::optional<RelationProbs>> averaged_;
  std::vector<double> kernel_;
};

}  // namespace semdens
