#pragma once

// Comparison metrics computed from the same records: semantic entropy,
// degree, normalized likelihood, length-normalized entropy and predictive
// entropy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "semdens/density.hpp"
#include "semdens/geometry.hpp"
#include "semdens/record.hpp"

namespace semdens {

struct SemanticCluster {
  std::vector<std::size_t> member_indices;
  std::size_t representative = 0;
};

/// True when entailment strictly beats both other classes.
inline bool entailment_is_argmax(const RelationProbs& p) {
  return p.p_entailment > p.p_contradiction && p.p_entailment > p.p_neutral;
}

/// Equivalence test used for clustering: entailment is the argmax class in
/// each available direction. At least one direction must exist.
inline bool mutually_entailing(const RelationMatrix& relations, std::size_t a, std::size_t b) {
  if (a == b) return true;
  const auto& ab = relations.directed(a, b);
  const auto& ba = relations.directed(b, a);
  if (!ab && !ba) {
    throw Error("no relation between responses " + std::to_string(a) + " and " + std::to_string(b));
  }
  return (!ab || entailment_is_argmax(*ab)) && (!ba || entailment_is_argmax(*ba));
}

/// Greedy single pass in response order: each response joins the first
/// cluster whose representative it is equivalent to.
inline std::vector<SemanticCluster> cluster_by_equivalence(const RelationMatrix& relations) {
  std::vector<SemanticCluster> clusters;
  for (std::size_t i = 0; i < relations.size(); ++i) {
    auto it = std::find_if(clusters.begin(), clusters.end(), [&](const SemanticCluster& c) {
      return mutually_entailing(relations, c.representative, i);
    });
    if (it != clusters.end()) {
      it->member_indices.push_back(i);
    } else {
      clusters.push_back({{i}, i});
    }
  }
  return clusters;
}

inline std::vector<SemanticCluster> cluster_by_equivalence(const GenerationRecord& record) {
  return cluster_by_equivalence(RelationMatrix(record));
}

/// Prompt-wise entropy over cluster masses, where a cluster's mass is the
/// normalized sum of its members' length-normalized probabilities.
inline double semantic_entropy(const GenerationRecord& record, std::span<const SemanticCluster> clusters) {
  if (clusters.empty()) throw Error("semantic entropy needs at least one cluster");
  std::vector<double> log_norm(record.size());
  for (std::size_t i = 0; i < record.size(); ++i) {
    log_norm[i] = length_normalized_logprob(record.responses[i]).log_norm_prob;
  }
  const double shift = *std::max_element(log_norm.begin(), log_norm.end());

  std::vector<double> mass;
  mass.reserve(clusters.size());
  double total = 0.0;
  for (const auto& c : clusters) {
    double m = 0.0;
    for (std::size_t i : c.member_indices) m += std::exp(log_norm.at(i) - shift);
    mass.push_back(m);
    total += m;
  }
  double entropy = 0.0;
  for (double m : mass) {
    if (m <= 0.0) continue;
    const double p = m / total;
    entropy -= p * std::log(p);
  }
  return std::max(entropy, 0.0);
}

/// Mean bidirectional entailment probability between `target` and every
/// response of the record, self-similarity counted as 1.
inline double degree_confidence(std::size_t target, const RelationMatrix& relations) {
  const std::size_t m = relations.size();
  if (target >= m) throw Error("target index out of range");
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sum += i == target ? 1.0 : relations.averaged(target, i).p_entailment;
  }
  return std::clamp(sum / static_cast<double>(m), 0.0, 1.0);
}

inline double normalized_likelihood(const ResponseSample& target) {
  return length_normalized_logprob(target).probability();
}

/// -(1/M) sum_i (1/L_i) log p(y_i|x)
inline double length_normalized_entropy(const GenerationRecord& record) {
  if (record.responses.empty()) throw Error("record has no responses");
  double sum = 0.0;
  for (const auto& s : record.responses) sum += length_normalized_logprob(s).log_norm_prob;
  return sum == 0.0 ? 0.0 : -sum / static_cast<double>(record.size());
}

/// -(1/M) sum_i log p(y_i|x)
inline double predictive_entropy(const GenerationRecord& record) {
  if (record.responses.empty()) throw Error("record has no responses");
  double sum = 0.0;
  for (const auto& s : record.responses) sum += s.sequence_logprob();
  return sum == 0.0 ? 0.0 : -sum / static_cast<double>(record.size());
}

}  // namespace semdens
