// semdens: batch scoring and evaluation of response confidence.
//
//   semdens score  --input records.jsonl --output scores.jsonl
//   semdens eval   --input scores.jsonl  --output report_dir
//   semdens ablate --input records.jsonl --output ablation.csv --max-refs 10
//   semdens sweep  --input scores.jsonl  --output sweep.csv
//   semdens ttest  --input report_dir/auroc.csv
//   semdens report --input records.jsonl --output report_dir
//
// Exit codes: 0 success, 1 validation errors, 2 I/O errors.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "semdens/semdens.hpp"

namespace {

using namespace semdens;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct RunConfig {
  std::vector<std::string> inputs;
  std::string output;
  double temperature = 0.1;
  double rouge_threshold = 0.3;
  std::vector<std::string> metrics;
  std::size_t max_refs = 0;  // 0 = largest record
  std::vector<double> thresholds = default_sweep_thresholds();
  std::vector<std::string> trim_markers = default_trim_markers();
  std::size_t jobs = 0;
  bool keep_going = false;
  bool exclude_target = false;
};

/// Validation failure that has already been reported on stderr.
struct Reported {
  int code;
};

ScoringOptions scoring_options(const RunConfig& cfg, MetricSet metrics = all_metrics()) {
  ScoringOptions opts;
  opts.density.temperature = cfg.temperature;
  opts.density.use_target_as_reference = !cfg.exclude_target;
  opts.rouge_threshold = cfg.rouge_threshold;
  opts.trim_markers = cfg.trim_markers;
  opts.metrics = metrics;
  return opts;
}

std::vector<Metric> parse_metrics(const std::vector<std::string>& names) {
  std::vector<Metric> out;
  for (const auto& n : names) {
    const auto m = metric_from_name(n);
    if (!m) throw Error("unknown metric '" + n + "' (expected one of SD, FD, SE, PTrue, Deg, NL, NE, PE)");
    if (std::find(out.begin(), out.end(), *m) == out.end()) out.push_back(*m);
  }
  return out;
}

void report_errors(const std::vector<LineError>& errors, bool keep_going) {
  if (errors.empty()) return;
  if (!keep_going) {
    std::cerr << "error: " << errors.front().describe() << '\n';
    std::cerr << "aborting; pass --keep-going to skip invalid lines\n";
    throw Reported{kExitValidation};
  }
  for (const auto& e : errors) std::cerr << "skipped: " << e.describe() << '\n';
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw IoError("cannot open output file '" + path + "'");
    path_ = path;
  }

  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

  void close() {
    stream().flush();
    if (!stream()) throw IoError("error writing '" + (path_.empty() ? std::string("stdout") : path_) + "'");
  }

 private:
  std::ofstream file_;
  std::string path_;
};

std::filesystem::path output_dir(const RunConfig& cfg) {
  if (cfg.output.empty() || cfg.output == "-") throw Error("--output must name a directory for this command");
  std::error_code ec;
  std::filesystem::create_directories(cfg.output, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.output + "': " + ec.message());
  return cfg.output;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  Output out(path.string());
  out.stream() << content;
  out.close();
}

struct Corpus {
  std::vector<GenerationRecord> records;  // empty when the inputs were score files
  std::vector<ScoreSet> scores;
  std::size_t errors = 0;
  bool all_records = true;
};

/// Loads every input. Record files are scored; score files are used as is.
Corpus load_corpus(const RunConfig& cfg, bool need_scores = true) {
  Corpus corpus;
  std::vector<LineError> errors;
  const auto opts = scoring_options(cfg);
  for (const auto& path : cfg.inputs) {
    switch (detect_input_kind(path)) {
      case InputKind::empty:
        break;
      case InputKind::records: {
        auto loaded = load_records(path, cfg.jobs);
        errors.insert(errors.end(), loaded.errors.begin(), loaded.errors.end());
        if (need_scores) {
          const auto scored = score_corpus(loaded.records, opts, cfg.jobs);
          for (std::size_t i = 0; i < scored.size(); ++i) {
            if (!scored[i].error.empty()) {
              errors.push_back({path, loaded.source_lines[i], scored[i].error});
              continue;
            }
            corpus.scores.insert(corpus.scores.end(), scored[i].scores.begin(), scored[i].scores.end());
          }
        }
        corpus.records.insert(corpus.records.end(), std::make_move_iterator(loaded.records.begin()),
                              std::make_move_iterator(loaded.records.end()));
        break;
      }
      case InputKind::scores: {
        corpus.all_records = false;
        auto loaded = load_scores(path);
        errors.insert(errors.end(), loaded.errors.begin(), loaded.errors.end());
        corpus.scores.insert(corpus.scores.end(), loaded.scores.begin(), loaded.scores.end());
        break;
      }
    }
  }
  report_errors(errors, cfg.keep_going);
  corpus.errors = errors.size();
  return corpus;
}

/// Table columns: explicit --metrics, else the headline set minus P(True)
/// when no score carries it.
std::vector<Metric> table_columns(const RunConfig& cfg, const std::vector<ScoreSet>& scores) {
  if (!cfg.metrics.empty()) return parse_metrics(cfg.metrics);
  auto cols = table_metrics();
  const bool has_ptrue =
      std::any_of(scores.begin(), scores.end(), [](const ScoreSet& s) { return s[Metric::p_true].has_value(); });
  if (!has_ptrue) cols.erase(std::remove(cols.begin(), cols.end(), Metric::p_true), cols.end());
  return cols;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::string render(auto&& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

int finish(std::size_t errors) { return errors > 0 ? kExitValidation : kExitOk; }

// ---------------------------------------------------------------------------

int cmd_score(const RunConfig& cfg) {
  MetricSet selected = all_metrics();
  if (!cfg.metrics.empty()) {
    selected.reset();
    for (Metric m : parse_metrics(cfg.metrics)) selected.set(static_cast<std::size_t>(m));
  }
  const auto opts = scoring_options(cfg, selected);
  opts.density.validate();

  std::vector<LineError> errors;
  std::vector<GenerationRecord> records;
  std::vector<std::pair<std::string, std::size_t>> origin;
  for (const auto& path : cfg.inputs) {
    auto loaded = load_records(path, cfg.jobs);
    errors.insert(errors.end(), loaded.errors.begin(), loaded.errors.end());
    for (std::size_t i = 0; i < loaded.records.size(); ++i) {
      records.push_back(std::move(loaded.records[i]));
      origin.emplace_back(path, loaded.source_lines[i]);
    }
  }
  report_errors(errors, cfg.keep_going);

  const auto scored = score_corpus(records, opts, cfg.jobs);
  std::vector<LineError> scoring_errors;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (!scored[i].error.empty()) scoring_errors.push_back({origin[i].first, origin[i].second, scored[i].error});
  }
  report_errors(scoring_errors, cfg.keep_going);

  Output out(cfg.output);
  std::size_t lines = 0;
  std::size_t ok_records = 0;
  for (const auto& r : scored) {
    if (!r.error.empty()) continue;
    ++ok_records;
    for (const auto& s : r.scores) {
      out.stream() << serialize_score(s) << '\n';
      ++lines;
    }
  }
  out.close();

  const std::size_t n_errors = errors.size() + scoring_errors.size();
  std::cerr << ok_records << " records, " << lines << " score lines, " << n_errors << " errors\n";
  return finish(n_errors);
}

int cmd_eval(const RunConfig& cfg) {
  const auto corpus = load_corpus(cfg);
  const auto columns = table_columns(cfg, corpus.scores);
  const auto table = evaluate(corpus.scores, columns, cfg.rouge_threshold);
  print_warnings(table.warnings);

  const auto dir = output_dir(cfg);
  write_file(dir / "auroc.csv", render([&](auto& os) { write_table_csv(os, table, TableValue::auroc); }));
  write_file(dir / "auroc.md", render([&](auto& os) { write_table_markdown(os, table, TableValue::auroc); }));
  write_file(dir / "aupr.csv", render([&](auto& os) { write_table_csv(os, table, TableValue::aupr); }));
  write_file(dir / "aupr.md", render([&](auto& os) { write_table_markdown(os, table, TableValue::aupr); }));
  std::cerr << corpus.scores.size() << " scored responses, " << table.rows.size() << " configurations\n";
  return finish(corpus.errors);
}

AblationCurve run_ablation(const RunConfig& cfg, const std::vector<GenerationRecord>& records) {
  std::size_t max_k = cfg.max_refs;
  if (max_k == 0) {
    for (const auto& r : records) max_k = std::max(max_k, r.size());
  }
  return ablate_reference_count(records, max_k, scoring_options(cfg));
}

int cmd_ablate(const RunConfig& cfg) {
  const auto corpus = load_corpus(cfg, false);
  if (!corpus.all_records) throw Error("ablate needs generation records, not score files");
  const auto curve = run_ablation(cfg, corpus.records);
  print_warnings(curve.warnings);
  Output out(cfg.output);
  write_ablation_csv(out.stream(), curve);
  out.close();
  return finish(corpus.errors);
}

int cmd_sweep(const RunConfig& cfg) {
  const auto corpus = load_corpus(cfg);
  const auto columns = table_columns(cfg, corpus.scores);
  const auto sweep = rouge_threshold_sweep(corpus.scores, cfg.thresholds, columns);
  for (const auto& p : sweep) print_warnings(p.table.warnings);
  Output out(cfg.output);
  write_sweep_csv(out.stream(), sweep, columns);
  out.close();
  return finish(corpus.errors);
}

bool is_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input file '" + path + "'");
  std::string first;
  std::getline(in, first);
  return first.rfind("model,dataset", 0) == 0;
}

std::vector<TTestRow> run_ttests(const RunConfig& cfg, const EvalTable& table) {
  std::vector<Metric> metrics = cfg.metrics.empty() ? table.metrics : parse_metrics(cfg.metrics);
  if (metrics.empty()) throw Error("no metrics to compare");
  // First metric is the reference; default to SD when it is present.
  if (cfg.metrics.empty()) {
    auto sd = std::find(metrics.begin(), metrics.end(), Metric::semantic_density);
    if (sd != metrics.end()) std::rotate(metrics.begin(), sd, sd + 1);
  }
  const Metric base = metrics.front();
  const std::vector<Metric> others(metrics.begin() + 1, metrics.end());
  return paired_auroc_tests(table, base, others);
}

int cmd_ttest(const RunConfig& cfg) {
  EvalTable table;
  std::size_t errors = 0;
  if (cfg.inputs.size() == 1 && is_table_csv(cfg.inputs.front())) {
    std::ifstream in(cfg.inputs.front());
    table = read_table_csv(in);
  } else {
    const auto corpus = load_corpus(cfg);
    RunConfig all = cfg;
    all.metrics.clear();
    table = evaluate(corpus.scores, table_columns(all, corpus.scores), cfg.rouge_threshold);
    print_warnings(table.warnings);
    errors = corpus.errors;
  }
  const auto rows = run_ttests(cfg, table);
  for (const auto& r : rows) {
    if (!r.result) std::cerr << "warning: " << info(r.a).name << " vs " << info(r.b).name << ": " << r.note << '\n';
  }
  Output out(cfg.output);
  write_ttest_csv(out.stream(), rows);
  out.close();
  return finish(errors);
}

int cmd_report(const RunConfig& cfg) {
  const auto corpus = load_corpus(cfg);
  const auto columns = table_columns(cfg, corpus.scores);
  const auto dir = output_dir(cfg);

  const auto table = evaluate(corpus.scores, columns, cfg.rouge_threshold);
  print_warnings(table.warnings);
  write_file(dir / "auroc.csv", render([&](auto& os) { write_table_csv(os, table, TableValue::auroc); }));
  write_file(dir / "auroc.md", render([&](auto& os) { write_table_markdown(os, table, TableValue::auroc); }));
  write_file(dir / "aupr.csv", render([&](auto& os) { write_table_csv(os, table, TableValue::aupr); }));
  write_file(dir / "aupr.md", render([&](auto& os) { write_table_markdown(os, table, TableValue::aupr); }));

  bool have_rouge = std::all_of(corpus.scores.begin(), corpus.scores.end(),
                                [](const ScoreSet& s) { return s.rouge_l.has_value(); });
  if (have_rouge) {
    const auto sweep = rouge_threshold_sweep(corpus.scores, cfg.thresholds, columns);
    write_file(dir / "sweep.csv", render([&](auto& os) { write_sweep_csv(os, sweep, columns); }));
  } else {
    std::cerr << "warning: scores without rouge_l; skipping sweep.csv\n";
  }

  const auto groups = per_group_auroc(corpus.scores, columns, cfg.rouge_threshold);
  print_warnings(groups.warnings);
  write_file(dir / "by_group.csv", render([&](auto& os) { write_groups_csv(os, groups); }));

  const auto tests = run_ttests(cfg, table);
  write_file(dir / "ttest.csv", render([&](auto& os) { write_ttest_csv(os, tests); }));

  if (corpus.all_records && !corpus.records.empty()) {
    const auto curve = run_ablation(cfg, corpus.records);
    print_warnings(curve.warnings);
    write_file(dir / "ablation.csv", render([&](auto& os) { write_ablation_csv(os, curve); }));
  }
  std::cerr << corpus.scores.size() << " scored responses, " << table.rows.size() << " configurations\n";
  return finish(corpus.errors);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic density scoring and evaluation"};
  app.set_config("--config", "", "TOML/INI file with option defaults (flags win)");
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  app.add_option("-i,--input", cfg.inputs, "Input file(s): records JSONL, scores JSONL, or an AUROC CSV for ttest")
      ->envname("SEMDENS_INPUT");
  app.add_option("-o,--output", cfg.output, "Output file, or directory for eval/report (default stdout)")
      ->envname("SEMDENS_OUTPUT");
  app.add_option("--temperature", cfg.temperature, "Post-processing temperature for sequence weights")
      ->envname("SEMDENS_TEMPERATURE")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--rouge-threshold", cfg.rouge_threshold, "Rouge-L above which a response is correct")
      ->envname("SEMDENS_ROUGE_THRESHOLD")
      ->capture_default_str();
  app.add_option("--metrics", cfg.metrics, "Metrics to compute or report (SD,FD,SE,PTrue,Deg,NL,NE,PE)")
      ->envname("SEMDENS_METRICS")
      ->delimiter(',');
  app.add_option("--max-refs", cfg.max_refs, "Largest reference count for ablation (0 = all)")
      ->envname("SEMDENS_MAX_REFS");
  app.add_option("--thresholds", cfg.thresholds, "Rouge-L thresholds for sweeps")
      ->envname("SEMDENS_THRESHOLDS")
      ->delimiter(',');
  app.add_option("--trim-markers", cfg.trim_markers, "Continuation markers cut from responses")
      ->envname("SEMDENS_TRIM_MARKERS")
      ->delimiter(',');
  app.add_option("-j,--jobs", cfg.jobs, "Worker threads (0 = auto)")->envname("SEMDENS_JOBS");
  app.add_flag("--keep-going", cfg.keep_going, "Skip invalid lines instead of aborting")
      ->envname("SEMDENS_KEEP_GOING");
  app.add_flag("--exclude-target", cfg.exclude_target, "Do not use the target as one of its own references")
      ->envname("SEMDENS_EXCLUDE_TARGET");

  auto* score = app.add_subcommand("score", "Score every response of every record");
  auto* eval = app.add_subcommand("eval", "AUROC and AUPR tables per model and dataset");
  auto* ablate = app.add_subcommand("ablate", "Semantic density AUROC as the reference count grows");
  auto* sweep = app.add_subcommand("sweep", "AUROC across Rouge-L correctness thresholds");
  auto* ttest = app.add_subcommand("ttest", "Paired t-tests of AUROC across model/dataset pairs");
  auto* report = app.add_subcommand("report", "Every table and curve in one directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (cfg.inputs.empty()) throw Error("--input is required");
    if (*score) return cmd_score(cfg);
    if (*eval) return cmd_eval(cfg);
    if (*ablate) return cmd_ablate(cfg);
    if (*sweep) return cmd_sweep(cfg);
    if (*ttest) return cmd_ttest(cfg);
    if (*report) return cmd_report(cfg);
  } catch (const Reported& r) {
    return r.code;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}
