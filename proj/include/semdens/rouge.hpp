#pragma once

// Rouge-L F-measure and the correctness rule built on it.

#include <algorithm>
#include <cctype>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semdens/record.hpp"

namespace semdens {

using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

/// Lowercases, splits on whitespace and strips punctuation at either end of
/// each token. Tokens that are pure punctuation disappear.
inline std::vector<std::string> default_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    std::size_t b = pos;
    std::size_t e = end;
    while (b < e && std::ispunct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      std::string tok(text.substr(b, e - b));
      for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      tokens.push_back(std::move(tok));
    }
    pos = end;
  }
  return tokens;
}

inline std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double rouge_l(std::string_view candidate, std::string_view reference,
                      const Tokenizer& tokenize = default_tokenize) {
  const auto cand = tokenize(candidate);
  const auto ref = tokenize(reference);
  const std::size_t lcs = lcs_length(cand, ref);
  if (lcs == 0) return 0.0;
  const double precision = static_cast<double>(lcs) / static_cast<double>(cand.size());
  const double recall = static_cast<double>(lcs) / static_cast<double>(ref.size());
  return 2.0 * precision * recall / (precision + recall);
}

inline std::vector<std::string> default_trim_markers() { return {"Q:", "Question:"}; }

/// Cuts a generation at the first newline or continuation marker, whichever
/// comes first, then trims surrounding whitespace.
inline std::string trim_continuation(std::string_view text, std::span<const std::string> markers) {
  std::size_t cut = text.find('\n');
  for (const auto& m : markers) {
    if (m.empty()) continue;
    cut = std::min(cut, text.find(m));
  }
  return std::string(detail::trim_view(text.substr(0, cut)));
}

/// Highest Rouge-L of the trimmed response against any gold answer.
inline double best_rouge_l(std::string_view response, std::span<const std::string> gold_answers,
                           std::span<const std::string> markers, const Tokenizer& tokenize = default_tokenize) {
  if (gold_answers.empty()) throw Error("correctness needs at least one gold answer");
  const std::string trimmed = trim_continuation(response, markers);
  double best = 0.0;
  for (const auto& gold : gold_answers) best = std::max(best, rouge_l(trimmed, gold, tokenize));
  return best;
}

/// Strictly above the threshold, except that a perfect match always
/// counts, so a threshold of 1.0 keeps exactly the perfect matches.
inline bool rouge_passes(double rouge, double threshold) { return rouge > threshold || rouge >= 1.0; }

inline bool correctness(std::string_view response, std::span<const std::string> gold_answers, double threshold = 0.3,
                        const std::vector<std::string>& markers = default_trim_markers(),
                        const Tokenizer& tokenize = default_tokenize) {
  return rouge_passes(best_rouge_l(response, gold_answers, markers, tokenize), threshold);
}

}  // namespace semdens
