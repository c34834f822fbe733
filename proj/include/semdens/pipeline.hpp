#pragma once

// Batch plumbing: JSONL loading, parallel map, corpus scoring.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <fstream>
#include <optional>
#include <string>
#include <span>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "semdens/record.hpp"
#include "semdens/scoring.hpp"

namespace semdens {

/// An input or output file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

inline std::size_t resolve_jobs(std::size_t jobs) {
  if (jobs > 0) return jobs;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Applies `fn` to 0..n-1 on `jobs` threads (0 = hardware concurrency).
/// Workers pull indices from a shared counter; results keep index order.
/// If any call throws, the exception with the lowest index is rethrown.
template <class Fn>
auto parallel_map(std::size_t n, std::size_t jobs, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}));
  std::vector<std::optional<Result>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(resolve_jobs(jobs), std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<Result> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct InputLine {
  std::size_t line = 0;  // 1-based
  std::string text;
};

/// Non-blank lines of a file with their line numbers.
inline std::vector<InputLine> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open input file '" + path + "'");
  std::vector<InputLine> lines;
  std::string text;
  std::size_t no = 0;
  while (std::getline(in, text)) {
    ++no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (detail::trim_view(text).empty()) continue;
    lines.push_back({no, std::move(text)});
  }
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return lines;
}

struct LineError {
  std::string file;
  std::size_t line = 0;
  std::string message;

  std::string describe() const { return file + ":" + std::to_string(line) + ": " + message; }
};

struct LoadedRecords {
  std::vector<GenerationRecord> records;
  std::vector<std::size_t> source_lines;  // parallel to records
  std::vector<LineError> errors;
};

/// Parses, validates and deduplicates every record of a JSONL file.
/// Invalid lines become LineErrors; prompt_id must be unique per file.
inline LoadedRecords load_records(const std::string& path, std::size_t jobs = 0) {
  const auto lines = read_lines(path);
  using Parsed = std::variant<GenerationRecord, std::string>;
  auto parsed = parallel_map(lines.size(), jobs, [&](std::size_t i) -> Parsed {
    try {
      return dedup_responses(parse_record(lines[i].text, lines[i].line));
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
  });

  LoadedRecords out;
  std::unordered_map<std::string, std::size_t> first_line;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (auto* err = std::get_if<std::string>(&parsed[i])) {
      out.errors.push_back({path, lines[i].line, *err});
      continue;
    }
    auto& rec = std::get<GenerationRecord>(parsed[i]);
    auto [it, inserted] = first_line.try_emplace(rec.prompt_id, lines[i].line);
    if (!inserted) {
      out.errors.push_back({path, lines[i].line,
                            "prompt_id: duplicate '" + rec.prompt_id + "' (first seen on line " +
                                std::to_string(it->second) + ")"});
      continue;
    }
    out.records.push_back(std::move(rec));
    out.source_lines.push_back(lines[i].line);
  }
  return out;
}

struct LoadedScores {
  std::vector<ScoreSet> scores;
  std::vector<LineError> errors;
};

inline LoadedScores load_scores(const std::string& path) {
  LoadedScores out;
  for (const auto& l : read_lines(path)) {
    try {
      out.scores.push_back(parse_score(l.text, l.line));
    } catch (const ParseError& e) {
      out.errors.push_back({path, l.line, e.what()});
    }
  }
  return out;
}

enum class InputKind { empty, records, scores };

/// Looks at the first non-blank line: records carry "responses", score
/// lines carry "response_index".
inline InputKind detect_input_kind(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open input file '" + path + "'");
  std::string text;
  while (std::getline(in, text)) {
    if (detail::trim_view(text).empty()) continue;
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_object() && j.contains("responses")) return InputKind::records;
    if (j.is_object() && j.contains("response_index")) return InputKind::scores;
    throw ParseError(0, "", "'" + path + "' is neither a record nor a score file");
  }
  return InputKind::empty;
}

struct ScoredRecord {
  std::vector<ScoreSet> scores;
  std::string error;  // non-empty when scoring failed
};

/// Scores records in parallel; output order follows input order.
inline std::vector<ScoredRecord> score_corpus(std::span<const GenerationRecord> records, const ScoringOptions& opts,
                                              std::size_t jobs = 0) {
  opts.density.validate();
  return parallel_map(records.size(), jobs, [&](std::size_t i) {
    ScoredRecord r;
    try {
      r.scores = score_record(records[i], opts);
    } catch (const Error& e) {
      r.error = records[i].prompt_id + ": " + e.what();
    }
    return r;
  });
}

}  // namespace semdens
