#pragma once

// Semantic density: a probability-weighted mean of kernel similarities
// between a target response and the reference responses of its prompt.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "semdens/geometry.hpp"
#include "semdens/record.hpp"

namespace semdens {

/// Natural log of a length-normalized sequence probability.
struct SequenceWeight {
  double log_norm_prob = 0.0;
  double temperature_applied = 1.0;

  double probability() const { return std::exp(log_norm_prob); }
};

struct DensityConfig {
  double temperature = 0.1;
  bool use_target_as_reference = true;
  std::size_t min_references = 1;

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      throw Error("temperature must be a positive finite number");
    }
    if (min_references < 1) throw Error("min_references must be >= 1");
  }
};

inline SequenceWeight length_normalized_logprob(const ResponseSample& sample) {
  if (sample.token_logprobs.empty()) throw Error("cannot length-normalize an empty token list");
  return {sample.sequence_logprob() / static_cast<double>(sample.token_logprobs.size()), 1.0};
}

/// Raises every token probability to the power 1/T, i.e. divides the log
/// probability by T. Applying T1 then T2 records T1*T2.
inline SequenceWeight apply_temperature(SequenceWeight w, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error("temperature must be a positive finite number");
  }
  if (temperature == 1.0) return w;
  return {w.log_norm_prob / temperature, w.temperature_applied * temperature};
}

inline double log_weight(const ResponseSample& sample, double temperature) {
  return apply_temperature(length_normalized_logprob(sample), temperature).log_norm_prob;
}

/// sum_i w_i K_i / sum_i w_i with w_i = exp(log_weights[i]).
///
/// The largest log-weight is subtracted before exponentiation so the
/// denominator is at least one. The result is clamped to [min K, max K].
inline double weighted_kernel_mean(std::span<const double> log_weights, std::span<const double> kernels) {
  if (log_weights.size() != kernels.size()) throw Error("weights and kernels differ in length");
  if (log_weights.empty()) throw Error("semantic density needs at least one reference");

  const double shift = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(shift)) throw Error("reference weights are not finite");

  double num = 0.0;
  double den = 0.0;
  double lo = kernels[0];
  double hi = kernels[0];
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    const double w = std::exp(log_weights[i] - shift);
    num += w * kernels[i];
    den += w;
    lo = std::min(lo, kernels[i]);
    hi = std::max(hi, kernels[i]);
  }
  return std::clamp(num / den, lo, hi);
}

/// Reference set used when scoring `target` against all of `record`.
inline std::vector<std::size_t> default_references(std::size_t target, std::size_t size, const DensityConfig& cfg) {
  std::vector<std::size_t> refs;
  refs.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    if (i == target && !cfg.use_target_as_reference) continue;
    refs.push_back(i);
  }
  return refs;
}

/// Semantic density of `target` against an explicit reference subset.
inline double semantic_density(std::size_t target, const GenerationRecord& record, const RelationMatrix& relations,
                               const DensityConfig& cfg, std::span<const std::size_t> references) {
  cfg.validate();
  if (target >= record.size()) throw Error("target index out of range");
  if (references.size() < cfg.min_references) {
    throw Error("semantic density needs at least " + std::to_string(cfg.min_references) + " reference(s), got " +
                std::to_string(references.size()));
  }
  std::vector<double> log_weights;
  std::vector<double> kernels;
  log_weights.reserve(references.size());
  kernels.reserve(references.size());
  for (std::size_t ref : references) {
    if (ref >= record.size()) throw Error("reference index out of range");
    log_weights.push_back(log_weight(record.responses[ref], cfg.temperature));
    kernels.push_back(ref == target ? 1.0 : relations.kernel(target, ref));
  }
  return weighted_kernel_mean(log_weights, kernels);
}

inline double semantic_density(std::size_t target, const GenerationRecord& record, const RelationMatrix& relations,
                               const DensityConfig& cfg) {
  const auto refs = default_references(target, record.size(), cfg);
  return semantic_density(target, record, relations, cfg, refs);
}

inline double semantic_density(std::size_t target, const GenerationRecord& record, const DensityConfig& cfg = {}) {
  return semantic_density(target, record, RelationMatrix(record), cfg);
}

/// Count-weighted variant: sum_i n_i K_i / sum_i n_i. Needs no sequence
/// probabilities.
inline double frequency_density(std::size_t target, const GenerationRecord& record, const RelationMatrix& relations,
                                std::span<const std::size_t> references) {
  if (target >= record.size()) throw Error("target index out of range");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t ref : references) {
    if (ref >= record.size()) throw Error("reference index out of range");
    const double n = static_cast<double>(record.responses[ref].count);
    num += n * (ref == target ? 1.0 : relations.kernel(target, ref));
    den += n;
  }
  if (!(den > 0.0)) throw Error("frequency density needs a positive total count");
  return std::clamp(num / den, 0.0, 1.0);
}

inline double frequency_density(std::size_t target, const GenerationRecord& record, const RelationMatrix& relations) {
  const auto refs = default_references(target, record.size(), DensityConfig{});
  return frequency_density(target, record, relations, refs);
}

inline double frequency_density(std::size_t target, const GenerationRecord& record) {
  return frequency_density(target, record, RelationMatrix(record));
}

}  // namespace semdens
