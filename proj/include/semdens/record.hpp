#pragma once

// Canonical data model for generation records and their JSONL wire format.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace semdens {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A record failed to parse or violated a schema invariant.
///
/// `field()` is a JSON path such as `relations[0].j`; `line()` is the
/// 1-based input line, or 0 when the record did not come from a file.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& message)
      : Error(format(line, field, message)), line_(line), field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string format(std::size_t line, const std::string& field, const std::string& message) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!field.empty()) out += field + ": ";
    return out + message;
  }

  std::size_t line_;
  std::string field_;
};

struct ResponseSample {
  std::string text;
  std::vector<double> token_logprobs;  // natural log, one per generated token
  std::size_t num_tokens = 0;
  std::size_t beam_group = 0;
  std::size_t count = 1;
  std::optional<double> p_true;  // optional self-evaluation score from the adapter

  double sequence_logprob() const {
    double sum = 0.0;
    for (double lp : token_logprobs) sum += lp;
    return sum;
  }

  bool operator==(const ResponseSample&) const = default;
};

/// NLI class probabilities for an ordered response pair.
struct RelationProbs {
  double p_contradiction = 0.0;
  double p_neutral = 0.0;
  double p_entailment = 0.0;

  double sum() const { return p_contradiction + p_neutral + p_entailment; }

  static constexpr RelationProbs equivalent() { return {0.0, 0.0, 1.0}; }

  bool operator==(const RelationProbs&) const = default;
};

inline constexpr double kSimplexTolerance = 1e-6;

struct DirectedRelation {
  std::size_t i = 0;
  std::size_t j = 0;
  RelationProbs probs;

  bool operator==(const DirectedRelation&) const = default;
};

struct GenerationRecord {
  std::string prompt_id;
  std::string prompt;
  std::string model;
  std::string dataset;
  std::vector<std::string> gold_answers;
  std::vector<ResponseSample> responses;
  std::vector<DirectedRelation> relations;
  // Set when the adapter ran NLI in one direction only; each unordered
  // pair then needs at least one direction instead of both.
  bool single_direction = false;

  std::size_t size() const { return responses.size(); }

  bool operator==(const GenerationRecord&) const = default;
};

namespace detail {

inline std::string index_path(std::string_view base, std::size_t index) {
  return std::string(base) + "[" + std::to_string(index) + "]";
}

inline std::string_view trim_view(std::string_view s) {
  constexpr std::string_view ws = " \t\n\r\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

inline void check_probability(double p, std::size_t line, const std::string& field) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
    throw ParseError(line, field, "probability must be in [0,1]");
  }
}

}  // namespace detail

/// Checks every schema invariant. Throws ParseError naming the first
/// offending field.
inline void validate(const GenerationRecord& r, std::size_t line = 0) {
  if (r.prompt_id.empty()) throw ParseError(line, "prompt_id", "must be non-empty");
  if (r.gold_answers.empty()) throw ParseError(line, "gold_answers", "must be non-empty");
  if (r.responses.empty()) throw ParseError(line, "responses", "must be non-empty");

  const std::size_t m = r.responses.size();
  for (std::size_t k = 0; k < m; ++k) {
    const auto& s = r.responses[k];
    const auto path = detail::index_path("responses", k);
    if (s.num_tokens < 1) throw ParseError(line, path + ".num_tokens", "must be >= 1");
    if (s.token_logprobs.size() != s.num_tokens) {
      throw ParseError(line, path + ".token_logprobs",
                       "length " + std::to_string(s.token_logprobs.size()) +
                           " does not match num_tokens " + std::to_string(s.num_tokens));
    }
    for (std::size_t t = 0; t < s.token_logprobs.size(); ++t) {
      const double lp = s.token_logprobs[t];
      if (!std::isfinite(lp) || lp > 0.0) {
        throw ParseError(line, detail::index_path(path + ".token_logprobs", t),
                         "log-probability must be finite and <= 0");
      }
    }
    if (s.count < 1) throw ParseError(line, path + ".count", "must be >= 1");
    if (s.p_true) detail::check_probability(*s.p_true, line, path + ".p_true");
  }

  std::vector<char> seen(m * m, 0);
  for (std::size_t k = 0; k < r.relations.size(); ++k) {
    const auto& rel = r.relations[k];
    const auto path = detail::index_path("relations", k);
    if (rel.i >= m) throw ParseError(line, path + ".i", "index " + std::to_string(rel.i) + " out of range");
    if (rel.j >= m) throw ParseError(line, path + ".j", "index " + std::to_string(rel.j) + " out of range");
    if (rel.i == rel.j) throw ParseError(line, path, "self-relation (i == j)");
    detail::check_probability(rel.probs.p_contradiction, line, path + ".p_contradiction");
    detail::check_probability(rel.probs.p_neutral, line, path + ".p_neutral");
    detail::check_probability(rel.probs.p_entailment, line, path + ".p_entailment");
    if (std::abs(rel.probs.sum() - 1.0) > kSimplexTolerance) {
      throw ParseError(line, path, "class probabilities must sum to 1 (got " + std::to_string(rel.probs.sum()) + ")");
    }
    auto& slot = seen[rel.i * m + rel.j];
    if (slot) throw ParseError(line, path, "duplicate relation for ordered pair");
    slot = 1;
  }

  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      const bool ab = seen[a * m + b] != 0;
      const bool ba = seen[b * m + a] != 0;
      const bool ok = r.single_direction ? (ab || ba) : (ab && ba);
      if (!ok) {
        throw ParseError(line, "relations",
                         "missing relation between responses " + std::to_string(a) + " and " + std::to_string(b));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, std::string_view key, std::size_t line, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(line, path.empty() ? std::string(key) : path + "." + std::string(key), "missing required field");
  }
  return *it;
}

inline std::string child(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

inline std::string as_string(const json& v, std::size_t line, const std::string& path) {
  if (!v.is_string()) throw ParseError(line, path, "expected string");
  return v.get<std::string>();
}

inline double as_double(const json& v, std::size_t line, const std::string& path) {
  if (!v.is_number()) throw ParseError(line, path, "expected number");
  return v.get<double>();
}

inline std::size_t as_index(const json& v, std::size_t line, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer()) throw ParseError(line, path, "expected non-negative integer");
  throw ParseError(line, path, "expected integer");
}

inline ResponseSample response_from_json(const json& j, std::size_t line, const std::string& path) {
  if (!j.is_object()) throw ParseError(line, path, "expected object");
  ResponseSample s;
  s.text = as_string(require(j, "text", line, path), line, child(path, "text"));
  const auto& lps = require(j, "token_logprobs", line, path);
  if (!lps.is_array()) throw ParseError(line, child(path, "token_logprobs"), "expected array");
  s.token_logprobs.reserve(lps.size());
  for (std::size_t t = 0; t < lps.size(); ++t) {
    s.token_logprobs.push_back(as_double(lps[t], line, index_path(child(path, "token_logprobs"), t)));
  }
  s.num_tokens = as_index(require(j, "num_tokens", line, path), line, child(path, "num_tokens"));
  if (auto it = j.find("beam_group"); it != j.end()) s.beam_group = as_index(*it, line, child(path, "beam_group"));
  if (auto it = j.find("count"); it != j.end()) s.count = as_index(*it, line, child(path, "count"));
  if (auto it = j.find("p_true"); it != j.end() && !it->is_null()) {
    s.p_true = as_double(*it, line, child(path, "p_true"));
  }
  return s;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ResponseSample& s) {
  nlohmann::ordered_json j;
  j["text"] = s.text;
  j["token_logprobs"] = s.token_logprobs;
  j["num_tokens"] = s.num_tokens;
  j["beam_group"] = s.beam_group;
  j["count"] = s.count;
  if (s.p_true) j["p_true"] = *s.p_true;
  return j;
}

inline nlohmann::ordered_json to_json(const GenerationRecord& r) {
  nlohmann::ordered_json j;
  j["prompt_id"] = r.prompt_id;
  j["prompt"] = r.prompt;
  j["model"] = r.model;
  j["dataset"] = r.dataset;
  j["gold_answers"] = r.gold_answers;
  auto& responses = j["responses"] = nlohmann::ordered_json::array();
  for (const auto& s : r.responses) responses.push_back(to_json(s));
  auto& relations = j["relations"] = nlohmann::ordered_json::array();
  for (const auto& rel : r.relations) {
    relations.push_back({{"i", rel.i},
                         {"j", rel.j},
                         {"p_contradiction", rel.probs.p_contradiction},
                         {"p_neutral", rel.probs.p_neutral},
                         {"p_entailment", rel.probs.p_entailment}});
  }
  if (r.single_direction) j["single_direction"] = true;
  return j;
}

/// One JSONL line, without the trailing newline.
inline std::string serialize_record(const GenerationRecord& r) { return to_json(r).dump(); }

/// Parses and validates one JSONL line. Throws ParseError.
inline GenerationRecord parse_record(std::string_view text, std::size_t line = 0) {
  using detail::as_string;
  using detail::json;
  using detail::require;

  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, "", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line, "", "expected a JSON object");

  GenerationRecord r;
  r.prompt_id = as_string(require(j, "prompt_id", line, ""), line, "prompt_id");
  r.prompt = as_string(require(j, "prompt", line, ""), line, "prompt");
  if (auto it = j.find("model"); it != j.end()) r.model = as_string(*it, line, "model");
  if (auto it = j.find("dataset"); it != j.end()) r.dataset = as_string(*it, line, "dataset");

  const auto& gold = require(j, "gold_answers", line, "");
  if (!gold.is_array()) throw ParseError(line, "gold_answers", "expected array");
  for (std::size_t k = 0; k < gold.size(); ++k) {
    r.gold_answers.push_back(as_string(gold[k], line, detail::index_path("gold_answers", k)));
  }

  const auto& responses = require(j, "responses", line, "");
  if (!responses.is_array()) throw ParseError(line, "responses", "expected array");
  for (std::size_t k = 0; k < responses.size(); ++k) {
    r.responses.push_back(detail::response_from_json(responses[k], line, detail::index_path("responses", k)));
  }

  if (auto it = j.find("relations"); it != j.end()) {
    if (!it->is_array()) throw ParseError(line, "relations", "expected array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const auto& e = (*it)[k];
      const auto path = detail::index_path("relations", k);
      if (!e.is_object()) throw ParseError(line, path, "expected object");
      DirectedRelation rel;
      rel.i = detail::as_index(require(e, "i", line, path), line, path + ".i");
      rel.j = detail::as_index(require(e, "j", line, path), line, path + ".j");
      rel.probs.p_contradiction =
          detail::as_double(require(e, "p_contradiction", line, path), line, path + ".p_contradiction");
      rel.probs.p_neutral = detail::as_double(require(e, "p_neutral", line, path), line, path + ".p_neutral");
      rel.probs.p_entailment =
          detail::as_double(require(e, "p_entailment", line, path), line, path + ".p_entailment");
      r.relations.push_back(rel);
    }
  }
  if (auto it = j.find("single_direction"); it != j.end()) {
    if (!it->is_boolean()) throw ParseError(line, "single_direction", "expected boolean");
    r.single_direction = it->get<bool>();
  }

  validate(r, line);
  return r;
}

// ---------------------------------------------------------------------------
// Deduplication

/// Text key used for duplicate detection: exact match after trimming
/// leading and trailing whitespace.
inline std::string dedup_key(std::string_view text) { return std::string(detail::trim_view(text)); }

/// Merges responses whose trimmed text is identical.
///
/// Groups keep the order of their first occurrence. Each group retains the
/// sample with the highest length-normalized probability (first one on
/// ties) and the sum of the group's counts. Only relations between
/// retained samples survive, remapped to the new indices.
inline GenerationRecord dedup_responses(const GenerationRecord& record) {
  const std::size_t m = record.responses.size();
  std::unordered_map<std::string, std::size_t> group_of_key;
  std::vector<std::size_t> retained;  // original index per group
  std::vector<std::size_t> counts;

  auto mean_logprob = [&](std::size_t k) {
    const auto& s = record.responses[k];
    return s.sequence_logprob() / static_cast<double>(s.num_tokens);
  };

  for (std::size_t k = 0; k < m; ++k) {
    auto [it, inserted] = group_of_key.try_emplace(dedup_key(record.responses[k].text), retained.size());
    if (inserted) {
      retained.push_back(k);
      counts.push_back(record.responses[k].count);
      continue;
    }
    const std::size_t g = it->second;
    counts[g] += record.responses[k].count;
    if (mean_logprob(k) > mean_logprob(retained[g])) retained[g] = k;
  }

  GenerationRecord out;
  out.prompt_id = record.prompt_id;
  out.prompt = record.prompt;
  out.model = record.model;
  out.dataset = record.dataset;
  out.gold_answers = record.gold_answers;
  out.single_direction = record.single_direction;

  constexpr std::size_t kDropped = static_cast<std::size_t>(-1);
  std::vector<std::size_t> new_index(m, kDropped);
  for (std::size_t g = 0; g < retained.size(); ++g) {
    new_index[retained[g]] = g;
    out.responses.push_back(record.responses[retained[g]]);
    out.responses.back().count = counts[g];
  }
  for (const auto& rel : record.relations) {
    if (new_index[rel.i] == kDropped || new_index[rel.j] == kDropped) continue;
    out.relations.push_back({new_index[rel.i], new_index[rel.j], rel.probs});
  }
  validate(out);
  return out;
}

}  // namespace semdens
