#include <gtest/gtest.h>

#include <string>

#include "semdens/record.hpp"
#include "support/synthetic.hpp"

using namespace semdens;
using semdens::testkit::random_record;
using semdens::testkit::Rng;

namespace {

const char* kMinimal = R"({"prompt_id":"p1","prompt":"Q?","gold_answers":["a"],
  "responses":[{"text":"a","token_logprobs":[-0.1,-0.2],"num_tokens":2},
               {"text":"b","token_logprobs":[-1.0],"num_tokens":1}],
  "relations":[{"i":0,"j":1,"p_contradiction":0.1,"p_neutral":0.2,"p_entailment":0.7},
               {"i":1,"j":0,"p_contradiction":0.1,"p_neutral":0.2,"p_entailment":0.7}]})";

std::string field_of_error(const std::string& text) {
  try {
    parse_record(text, 7);
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
    return e.field();
  }
  ADD_FAILURE() << "expected a ParseError";
  return {};
}

std::string with(std::string base, const std::string& from, const std::string& to) {
  const auto pos = base.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return base.replace(pos, from.size(), to);
}

}  // namespace

TEST(Record, ParsesMinimalRecordWithDefaults) {
  const auto r = parse_record(kMinimal);
  EXPECT_EQ(r.prompt_id, "p1");
  EXPECT_EQ(r.model, "");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.responses[0].count, 1u);
  EXPECT_EQ(r.responses[1].beam_group, 0u);
  EXPECT_FALSE(r.responses[0].p_true.has_value());
  EXPECT_DOUBLE_EQ(r.responses[0].sequence_logprob(), -0.1 + -0.2);
  EXPECT_EQ(r.relations.size(), 2u);
  EXPECT_FALSE(r.single_direction);
}

TEST(Record, MissingRequiredFieldsAreNamed) {
  EXPECT_EQ(field_of_error(with(kMinimal, R"("prompt_id":"p1",)", "")), "prompt_id");
  EXPECT_EQ(field_of_error(with(kMinimal, R"("gold_answers":["a"],)", "")), "gold_answers");
  EXPECT_EQ(field_of_error(with(kMinimal, R"(,"num_tokens":1})", "}")), "responses[1].num_tokens");
}

TEST(Record, RelationIndexOutOfRangeNamesTheIndexField) {
  const auto bad = with(kMinimal, R"({"i":1,"j":0,)", R"({"i":1,"j":5,)");
  EXPECT_EQ(field_of_error(bad), "relations[1].j");
  try {
    parse_record(bad, 3);
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Record, RejectsInvalidValues) {
  EXPECT_EQ(field_of_error(with(kMinimal, "[-0.1,-0.2]", "[-0.1,0.2]")), "responses[0].token_logprobs[1]");
  EXPECT_EQ(field_of_error(with(kMinimal, R"("num_tokens":2)", R"("num_tokens":3)")), "responses[0].token_logprobs");
  EXPECT_EQ(field_of_error(with(kMinimal, R"("p_entailment":0.7},
               {"i":1)", R"("p_entailment":0.8},
               {"i":1)")),
            "relations[0]");
  EXPECT_EQ(field_of_error(with(kMinimal, R"("p_neutral":0.2,)", R"("p_neutral":-0.2,)")),
            "relations[0].p_neutral");
  EXPECT_EQ(field_of_error(with(kMinimal, R"({"i":1,"j":0,)", R"({"i":1,"j":1,)")), "relations[1]");
  EXPECT_EQ(field_of_error(with(kMinimal, R"({"i":1,"j":0,)", R"({"i":0,"j":1,)")), "relations[1]");
  EXPECT_EQ(field_of_error("{not json"), "");
  EXPECT_EQ(field_of_error("[1,2]"), "");
}

TEST(Record, RequiresBothDirectionsUnlessFlagged) {
  const std::string one_way = R"({"prompt_id":"p","prompt":"","gold_answers":["a"],
    "responses":[{"text":"a","token_logprobs":[-0.1],"num_tokens":1},
                 {"text":"b","token_logprobs":[-0.1],"num_tokens":1}],
    "relations":[{"i":1,"j":0,"p_contradiction":0,"p_neutral":0,"p_entailment":1})";
  EXPECT_EQ(field_of_error(one_way + "]}"), "relations");
  const auto r = parse_record(one_way + R"(],"single_direction":true})");
  EXPECT_TRUE(r.single_direction);
}

TEST(Record, SimplexToleranceIsOneMicro) {
  auto r = parse_record(kMinimal);
  r.relations[0].probs.p_entailment += 0.9e-6;
  EXPECT_NO_THROW(validate(r));
  r.relations[0].probs.p_entailment += 0.2e-6;
  EXPECT_THROW(validate(r), ParseError);
}

TEST(Record, RoundTripIsIdentity) {
  Rng rng(11);
  for (int n = 0; n < 300; ++n) {
    auto r = random_record(rng, 1 + n % 7, "rt-" + std::to_string(n));
    if (n % 3 == 0) r.responses[0].p_true = 0.25 * (n % 5);
    const auto text = serialize_record(r);
    const auto back = parse_record(text);
    ASSERT_EQ(back, r);
    ASSERT_EQ(serialize_record(back), text);
  }
}

TEST(Dedup, MergesTrimmedDuplicatesKeepingTheMostLikely) {
  auto r = testkit::uniform_pair_record({0.2, 0.5, 0.9}, {0.0, 0.0, 1.0});
  r.responses[0].text = "Paris";
  r.responses[1].text = "Rome";
  r.responses[2].text = "  Paris\n";
  r.responses[0].count = 2;
  const auto d = dedup_responses(r);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.responses[0].text, "  Paris\n");
  EXPECT_EQ(d.responses[0].count, 3u);
  EXPECT_EQ(d.responses[1].text, "Rome");
  EXPECT_EQ(d.relations.size(), 2u);
  for (const auto& rel : d.relations) EXPECT_LT(std::max(rel.i, rel.j), 2u);
}

TEST(Dedup, TieKeepsFirstOccurrence) {
  auto r = testkit::uniform_pair_record({0.5, 0.5}, {0.0, 0.0, 1.0});
  r.responses[0].text = r.responses[1].text = "same";
  r.responses[1].beam_group = 9;
  const auto d = dedup_responses(r);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.responses[0].beam_group, 0u);
  EXPECT_EQ(d.responses[0].count, 2u);
}

TEST(Dedup, PropertyIdempotentAndCountPreserving) {
  Rng rng(5);
  for (int n = 0; n < 500; ++n) {
    auto r = random_record(rng, 1 + n % 9);
    for (auto& s : r.responses) s.text = "t" + std::to_string(testkit::uniform_index(rng, 0, 3));
    std::size_t total = 0;
    for (const auto& s : r.responses) total += s.count;

    const auto once = dedup_responses(r);
    const auto twice = dedup_responses(once);
    ASSERT_EQ(once, twice);
    std::size_t after = 0;
    for (const auto& s : once.responses) after += s.count;
    ASSERT_EQ(after, total);
    ASSERT_EQ(once.relations.size(), once.size() * (once.size() - 1));
  }
}

TEST(Record, SingleResponseWithoutRelations) {
  const auto r = parse_record(R"({"prompt_id":"p","prompt":"","gold_answers":["a"],
    "responses":[{"text":"a","token_logprobs":[-0.3],"num_tokens":1}]})");
  EXPECT_EQ(r.size(), 1u);
  EXPECT_TRUE(r.relations.empty());
}

TEST(Record, ProbabilitiesSummingToPointNineAreRejected) {
  EXPECT_EQ(field_of_error(with(kMinimal, R"("p_entailment":0.7},
               {"i":1)", R"("p_entailment":0.6},
               {"i":1)")),
            "relations[0]");
}

TEST(Dedup, TrailingWhitespaceMerges) {
  auto r = testkit::uniform_pair_record({0.5, 0.5}, {0, 0, 1});
  r.responses[0].text = "Paris";
  r.responses[1].text = "Paris ";
  const auto d = dedup_responses(r);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.responses[0].count, 2u);
  EXPECT_TRUE(d.relations.empty());
}

TEST(Dedup, DistinctTextsAreUnchanged) {
  Rng rng(9);
  const auto r = random_record(rng, 5);
  EXPECT_EQ(dedup_responses(r), r);
}
