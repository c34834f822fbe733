#include <gtest/gtest.h>

#include <sstream>
#include <vector>

#include "semdens/harness.hpp"
#include "semdens/report.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace semdens;

namespace {

ScoreSet score(const std::string& id, double sd, double rouge, std::size_t group = 0,
               const std::string& dataset = "d") {
  ScoreSet s;
  s.prompt_id = id;
  s.model = "m";
  s.dataset = dataset;
  s.beam_group = group;
  s[Metric::semantic_density] = sd;
  s[Metric::semantic_entropy] = 1.0 - sd;
  s.rouge_l = rouge;
  return s;
}

std::vector<ScoreSet> hand_fixture() {
  return {score("a", 0.9, 1.0), score("b", 0.7, 1.0), score("c", 0.8, 0.0), score("d", 0.6, 0.0)};
}

std::vector<ScoreSet> score_all(const std::vector<GenerationRecord>& records, const ScoringOptions& opts = {}) {
  std::vector<ScoreSet> out;
  for (const auto& r : records) {
    auto s = score_record(r, opts);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

const std::vector<Metric> kSD{Metric::semantic_density};

}  // namespace

TEST(Evaluate, HandCountedFixture) {
  const auto scores = hand_fixture();
  const std::vector<Metric> metrics{Metric::semantic_density, Metric::semantic_entropy};
  const auto table = evaluate(scores, metrics);
  ASSERT_EQ(table.rows.size(), 1u);
  const auto& row = table.rows[0];
  EXPECT_EQ(row.n, 4u);
  EXPECT_EQ(row.n_correct, 2u);
  EXPECT_EQ(row[Metric::semantic_density].auroc, 0.75);
  // Uncertainty polarity: 1 - sd ranks identically.
  EXPECT_EQ(row[Metric::semantic_entropy].auroc, 0.75);
  EXPECT_TRUE(table.warnings.empty());
}

TEST(Evaluate, SingleClassCellIsAbsentWithWarning) {
  const std::vector<ScoreSet> scores{score("a", 0.9, 1.0), score("b", 0.2, 1.0)};
  const auto table = evaluate(scores, kSD);
  EXPECT_FALSE(table.rows[0][Metric::semantic_density].auroc.has_value());
  EXPECT_EQ(table.warnings.size(), 1u);
}

TEST(Evaluate, MissingLabelThrows) {
  ScoreSet s = score("a", 0.5, 0.0);
  s.rouge_l.reset();
  const std::vector<ScoreSet> scores{s};
  EXPECT_THROW(evaluate(scores, kSD), Error);
  s.correct = true;
  EXPECT_TRUE(label_at(s, 0.99));
}

TEST(Evaluate, ConfigurationsAreSeparated) {
  auto scores = hand_fixture();
  scores.push_back(score("e", 0.1, 1.0, 0, "other"));
  scores.push_back(score("f", 0.9, 0.0, 0, "other"));
  const auto table = evaluate(scores, kSD);
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.find({"m", "d"})->operator[](Metric::semantic_density).auroc, 0.75);
  EXPECT_EQ(table.find({"m", "other"})->operator[](Metric::semantic_density).auroc, 0.0);
  EXPECT_EQ(table.find({"m", "none"}), nullptr);
}

TEST(Evaluate, InputOrderDoesNotMatter) {
  auto scores = score_all(testkit::planted_corpus({30, 10, 3}));
  const auto a = evaluate(scores, table_metrics());
  std::reverse(scores.begin(), scores.end());
  const auto b = evaluate(scores, table_metrics());
  std::ostringstream sa;
  std::ostringstream sb;
  write_table_csv(sa, a, TableValue::aupr);
  write_table_csv(sb, b, TableValue::aupr);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Sweep, ThresholdExtremes) {
  std::vector<ScoreSet> scores{score("a", 0.9, 1.0), score("b", 0.8, 0.5), score("c", 0.1, 0.0),
                               score("d", 0.7, 0.2)};
  const std::vector<double> thresholds{0.0, 0.3, 1.0};
  const auto sweep = rouge_threshold_sweep(scores, thresholds, kSD);
  ASSERT_EQ(sweep.size(), 3u);
  EXPECT_EQ(sweep[0].table.rows[0].n_correct, 3u);  // any overlap
  EXPECT_EQ(sweep[1].table.rows[0].n_correct, 2u);
  EXPECT_EQ(sweep[2].table.rows[0].n_correct, 1u);  // perfect only
}

TEST(Sweep, AtDefaultThresholdEqualsEvaluate) {
  const auto scores = score_all(testkit::planted_corpus({20, 10, 4}));
  const std::vector<double> grid{0.3};
  const auto sweep = rouge_threshold_sweep(scores, grid, table_metrics());
  const auto table = evaluate(scores, table_metrics());
  for (Metric m : table_metrics()) {
    EXPECT_EQ(sweep[0].table.rows[0][m].auroc, table.rows[0][m].auroc);
  }
}

TEST(Sweep, RelabelingMatchesBruteForce) {
  testkit::Rng rng(61);
  std::vector<ScoreSet> scores;
  for (int i = 0; i < 200; ++i) {
    scores.push_back(score("p" + std::to_string(i), testkit::uniform(rng, 0, 1),
                           static_cast<double>(testkit::uniform_index(rng, 0, 10)) / 10.0));
  }
  const auto thresholds = default_sweep_thresholds();
  const auto sweep = rouge_threshold_sweep(scores, thresholds, kSD);
  for (const auto& point : sweep) {
    std::vector<LabeledScore> items;
    for (const auto& s : scores) {
      items.push_back({*s[Metric::semantic_density], rouge_passes(*s.rouge_l, point.threshold), Polarity::confidence});
    }
    EXPECT_NEAR(*point.table.rows[0][Metric::semantic_density].auroc, testkit::brute_force_auroc(items), 1e-12);
  }
}

TEST(Sweep, RequiresRouge) {
  auto s = score("a", 0.5, 0.0);
  s.rouge_l.reset();
  s.correct = false;
  const std::vector<ScoreSet> scores{s};
  const std::vector<double> grid{0.3};
  EXPECT_THROW(rouge_threshold_sweep(scores, grid, kSD), Error);
}

TEST(Groups, SingleGroupEqualsGlobal) {
  const auto scores = hand_fixture();
  const auto groups = per_group_auroc(scores, kSD);
  ASSERT_EQ(groups.rows.size(), 1u);
  EXPECT_EQ(groups.rows[0][Metric::semantic_density], 0.75);
}

TEST(Groups, AllCorrectGroupIsSkippedWithOneWarning) {
  auto scores = hand_fixture();
  scores.push_back(score("x", 0.3, 1.0, 1));
  scores.push_back(score("y", 0.4, 1.0, 1));
  const auto groups = per_group_auroc(scores, kSD);
  ASSERT_EQ(groups.rows.size(), 2u);
  EXPECT_TRUE(groups.rows[1].skipped);
  EXPECT_EQ(groups.warnings.size(), 1u);
}

TEST(Groups, PlantedAccuracyDegradesWhileDensityStaysSeparating) {
  const auto records = testkit::planted_corpus({400, 10, 7});
  const auto scores = score_all(records);
  const auto groups = per_group_auroc(scores, kSD);
  ASSERT_EQ(groups.rows.size(), 10u);
  for (std::size_t g = 0; g < 10; ++g) {
    const auto& row = groups.rows[g];
    EXPECT_EQ(row.beam_group, g);
    if (g >= 4) {
      EXPECT_LT(row.accuracy(), groups.rows[g - 3].accuracy()) << g;
    }
    std::vector<LabeledScore> items;
    for (const auto& s : scores) {
      if (s.beam_group == g) items.push_back({*s[Metric::semantic_density], *s.correct, Polarity::confidence});
    }
    EXPECT_NEAR(*row[Metric::semantic_density], testkit::brute_force_auroc(items), 1e-12);
    EXPECT_EQ(*row[Metric::semantic_density], 1.0);
  }
}

TEST(Ablation, FullReferenceSetEqualsEvaluate) {
  const auto records = testkit::planted_corpus({40, 10, 5});
  const ScoringOptions opts;
  const auto curve = ablate_reference_count(records, 10, opts);
  ASSERT_EQ(curve.points.size(), 10u);
  const auto table = evaluate(score_all(records, opts), kSD);
  EXPECT_EQ(curve.points.back().auroc, table.rows[0][Metric::semantic_density].auroc);
}

TEST(Ablation, FullReferenceSetEqualsEvaluateOnRandomRecords) {
  testkit::Rng rng(62);
  std::vector<GenerationRecord> records;
  for (int i = 0; i < 30; ++i) {
    auto r = testkit::random_record(rng, 6, "r" + std::to_string(i));
    for (std::size_t k = 0; k < r.size(); ++k) {
      r.responses[k].beam_group = 5 - k;
      r.responses[k].text = k % 2 == 0 ? "gold answer" : "nothing";
    }
    records.push_back(std::move(r));
  }
  ScoringOptions opts;
  opts.density.use_target_as_reference = false;
  const auto curve = ablate_reference_count(records, 6, opts);
  const auto table = evaluate(score_all(records, opts), kSD);
  EXPECT_EQ(curve.points.back().auroc, table.rows[0][Metric::semantic_density].auroc);
}

TEST(Ablation, SingleReferenceIsTheKernelToGroupZero) {
  const auto records = testkit::planted_corpus({1, 10, 9});
  const auto& r = records[0];
  const RelationMatrix m(r);
  const auto refs = leading_references(r, 1);
  ASSERT_EQ(refs, std::vector<std::size_t>{0});
  for (std::size_t t = 1; t < r.size(); ++t) {
    EXPECT_EQ(semantic_density(t, r, m, DensityConfig{}, refs), m.kernel(t, 0));
  }
}

TEST(Ablation, ShortRecordsAreSkippedAndCounted) {
  auto records = testkit::planted_corpus({5, 10, 5});
  auto shorter = testkit::planted_corpus({1, 3, 6});
  shorter[0].prompt_id = "short";
  records.push_back(shorter[0]);
  const auto curve = ablate_reference_count(records, 4, ScoringOptions{});
  EXPECT_EQ(curve.points[2].records_skipped, 0u);
  EXPECT_EQ(curve.points[3].records_skipped, 1u);
  EXPECT_EQ(curve.points[3].records_used, 5u);
  EXPECT_FALSE(curve.warnings.empty());
}

TEST(Ablation, PlantedCurvePlateausByFour) {
  const auto records = testkit::planted_corpus();
  const auto curve = ablate_reference_count(records, 10, ScoringOptions{});
  const double full = *curve.points[9].auroc;
  for (std::size_t k = 4; k <= 10; ++k) {
    EXPECT_NEAR(*curve.points[k - 1].auroc, full, 0.02) << k;
  }
}

TEST(TTests, PairsConfigurations) {
  EvalTable table;
  table.metrics = {Metric::semantic_density, Metric::semantic_entropy, Metric::degree};
  const double sd[] = {0.9, 0.8, 0.7};
  for (int i = 0; i < 3; ++i) {
    EvalRow row;
    row.key = {"m" + std::to_string(i), "d"};
    row[Metric::semantic_density].auroc = sd[i];
    row[Metric::semantic_entropy].auroc = 0.6;
    row[Metric::degree].auroc = sd[i] - 0.1;
    table.rows.push_back(row);
  }
  const std::vector<Metric> others{Metric::semantic_density, Metric::semantic_entropy, Metric::degree};
  const auto rows = paired_auroc_tests(table, Metric::semantic_density, others);
  ASSERT_EQ(rows.size(), 2u);
  ASSERT_TRUE(rows[0].result.has_value());
  EXPECT_NEAR(rows[0].result->t, 3.4641016151377544, 1e-12);
  EXPECT_NEAR(rows[0].result->p, 0.07417990022744855, 1e-12);
  EXPECT_FALSE(rows[1].result.has_value());
  EXPECT_NE(rows[1].note.find("zero variance"), std::string::npos);
}

TEST(Report, CsvRoundTrip) {
  const auto scores = score_all(testkit::planted_corpus({10, 10, 8}));
  const auto table = evaluate(scores, table_metrics());
  std::stringstream ss;
  write_table_csv(ss, table, TableValue::auroc);
  const auto back = read_table_csv(ss);
  ASSERT_EQ(back.rows.size(), table.rows.size());
  EXPECT_EQ(back.metrics, table.metrics);
  for (Metric m : table.metrics) {
    const auto& a = table.rows[0][m].auroc;
    const auto& b = back.rows[0][m].auroc;
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_NEAR(*a, *b, 1e-11);
    }
  }
}

TEST(Report, MarkdownMarksRowBest) {
  const auto table = evaluate(hand_fixture(), std::vector<Metric>{Metric::semantic_density, Metric::degree});
  std::ostringstream os;
  write_table_markdown(os, table, TableValue::auroc);
  const auto text = os.str();
  EXPECT_NE(text.find("### d"), std::string::npos);
  EXPECT_NE(text.find("**0.750**"), std::string::npos);
  EXPECT_NE(text.find("n/a"), std::string::npos);
}
