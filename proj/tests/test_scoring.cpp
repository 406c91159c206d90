#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "vidharness/report.hpp"
#include "vidharness/scoring.hpp"

using namespace vidharness;
using namespace vidharness::scoring;
using benchmark::Outcome;
using benchmark::RequestKind;
using benchmark::RunRecord;
using parsing::KeyframeEntry;

namespace {

RunRecord mcq_record(const std::string& ref, bool with_transcript, Outcome o, const std::string& model = "M",
                     std::int64_t latency = 1000) {
    RunRecord r;
    r.item_ref = ref;
    r.video_id = ref.substr(0, 3);
    r.request_kind = RequestKind::mcq;
    r.condition = {0.1, with_transcript, providers::Attention::sdpa, "A10G", model};
    r.outcome = o;
    r.response.latency_ms = latency;
    return r;
}

benchmark::BenchmarkItem item(const std::string& qid, const std::string& task, benchmark::DurationClass d) {
    benchmark::BenchmarkItem i;
    i.question_id = qid;
    i.video_id = qid.substr(0, 3);
    i.task_type = task;
    i.duration_class = d;
    return i;
}

}  // namespace

TEST(MatchingNodeScore, EqualsCountOverLength) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> len(1, 200);
    std::bernoulli_distribution coin(0.35);
    for (int i = 0; i < 300; ++i) {
        MatchVector v;
        v.matches.resize(len(rng));
        for (std::size_t k = 0; k < v.matches.size(); ++k) v.matches[k] = coin(rng);
        const auto hits = std::count(v.matches.begin(), v.matches.end(), true);
        EXPECT_EQ(matching_node_score(v), double(hits) / double(v.matches.size()));
    }
    EXPECT_THROW(matching_node_score(MatchVector{}), EmptyVector);
}

TEST(MatchingNodeScore, TwentySixOfSeventyFour) {
    MatchVector v;
    v.matches.assign(74, false);
    std::fill_n(v.matches.begin(), 26, true);
    EXPECT_EQ(report::format_fixed(matching_node_score(v) * 100, 1), "35.1");
}

TEST(Keyframes, ToleranceBoundary) {
    const KeyframeEntry truth{100, "x"};
    EXPECT_TRUE(keyframe_match({100, ""}, truth, 0));
    EXPECT_FALSE(keyframe_match({101, ""}, truth, 0));
    EXPECT_TRUE(keyframe_match({102, ""}, truth, 2));
    EXPECT_TRUE(keyframe_match({98, ""}, truth, 2));
    EXPECT_FALSE(keyframe_match({97, ""}, truth, 2));
    EXPECT_THROW(keyframe_match({1, ""}, truth, -1), std::invalid_argument);
}

TEST(Keyframes, AgreementNeedsDistinctMatches) {
    const std::vector<KeyframeEntry> truth{{10, "a"}, {12, "b"}};
    EXPECT_TRUE(keyframes_agree({{11, ""}, {13, ""}}, truth, 2));
    EXPECT_FALSE(keyframes_agree({{11, ""}}, truth, 2));
    EXPECT_FALSE(keyframes_agree({{40, ""}, {50, ""}}, truth, 2));
    EXPECT_TRUE(keyframes_agree({}, {}, 2));
}

TEST(Rates, McqAccuracyOverRecords) {
    std::vector<RunRecord> rs{mcq_record("001-1", false, Outcome::answered_correct),
                              mcq_record("001-2", false, Outcome::answered_wrong),
                              mcq_record("001-3", false, Outcome::unanswered), mcq_record("001-4", false, Outcome::oom)};
    const auto r = mcq_accuracy(rs);
    EXPECT_EQ(r.total, 4u);
    EXPECT_EQ(r.answered, 2u);
    EXPECT_EQ(r.correct, 1u);
    EXPECT_DOUBLE_EQ(r.total_answered, 0.5);
    EXPECT_DOUBLE_EQ(r.correct_answered, 0.5);
    EXPECT_THROW(mcq_accuracy(std::vector<RunRecord>{}), NoRecords);
    rs[0].request_kind = RequestKind::summary_keyframes;
    EXPECT_THROW(mcq_accuracy(rs), std::invalid_argument);
    EXPECT_DOUBLE_EQ(answer_rates(10, 0, 0).correct_answered, 0.0);
}

TEST(Compare, DeltasAndUnweightedAverage) {
    const std::vector<RowInput> in{{"a", 0.8, 0.5}, {"b", 0.4, 0.6}, {"c", 0.9, 0.9}};
    const auto t = compare_rows(in);
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_DOUBLE_EQ(t.rows[0].delta, 0.8 - 0.5);
    EXPECT_DOUBLE_EQ(t.rows[1].delta, 0.4 - 0.6);
    EXPECT_DOUBLE_EQ(t.average.with_value, (0.8 + 0.4 + 0.9) / 3);
    EXPECT_DOUBLE_EQ(t.average.without_value, (0.5 + 0.6 + 0.9) / 3);
    EXPECT_DOUBLE_EQ(t.average.delta, t.average.with_value - t.average.without_value);
    EXPECT_THROW(compare_rows({}), NoRecords);
}

TEST(Rounding, HalfAwayFromZero) {
    EXPECT_DOUBLE_EQ(round_to(0.0575, 3), 0.058);
    EXPECT_DOUBLE_EQ(round_to(-0.0355, 3), -0.036);
    EXPECT_DOUBLE_EQ(round_to(68.45, 1), 68.5);
    EXPECT_DOUBLE_EQ(round_to(0.5873, 4), 0.5873);
    EXPECT_DOUBLE_EQ(round_to(2.5, 0), 3.0);
}

TEST(Aggregate, GroupsAndCompleteness) {
    using benchmark::DurationClass;
    const std::vector<benchmark::BenchmarkItem> items{item("001-1", "OCR Problems", DurationClass::short_video),
                                                      item("001-2", "OCR Problems", DurationClass::short_video),
                                                      item("002-1", "Counting Problem", DurationClass::long_video)};
    std::vector<RunRecord> rs{
        mcq_record("001-1", false, Outcome::answered_correct, "M", 1000),
        mcq_record("001-2", false, Outcome::answered_wrong, "M", 2000),
        mcq_record("002-1", false, Outcome::answered_correct, "M", 3000),
        mcq_record("001-1", true, Outcome::answered_correct, "M", 4000),
        mcq_record("001-2", true, Outcome::answered_correct, "M", 5000),
        mcq_record("002-1", true, Outcome::oom, "M", 0),
    };
    ReportSpec spec{&items, {}};
    const auto rep = aggregate(spec, rs);
    EXPECT_DOUBLE_EQ(rep.overall_accuracy, 4.0 / 5.0);
    ASSERT_EQ(rep.by_task_type.rows.size(), 2u);
    EXPECT_EQ(rep.by_task_type.rows[1].label, "OCR Problems");
    EXPECT_DOUBLE_EQ(rep.by_task_type.rows[1].with_value, 1.0);
    EXPECT_DOUBLE_EQ(rep.by_task_type.rows[1].without_value, 0.5);
    ASSERT_EQ(rep.completeness.size(), 2u);
    EXPECT_EQ(rep.completeness[0].label, "SDPA (0.1 FPS)");
    EXPECT_EQ(rep.completeness[0].processing_ms, 6000);
    EXPECT_DOUBLE_EQ(rep.completeness[1].rates.total_answered, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(rep.completeness[1].rates.correct_answered, 1.0);
    ASSERT_EQ(rep.by_duration.rows.size(), 2u);
    EXPECT_EQ(rep.by_model.rows.size(), 1u);
}

TEST(Aggregate, PermutationInvariant) {
    std::mt19937_64 rng(3);
    std::vector<benchmark::BenchmarkItem> items;
    std::vector<RunRecord> rs;
    const char* tasks[] = {"A", "B", "C"};
    const Outcome outcomes[] = {Outcome::answered_correct, Outcome::answered_wrong, Outcome::unanswered, Outcome::oom};
    for (int i = 0; i < 60; ++i) {
        char qid[16];
        std::snprintf(qid, sizeof qid, "%03d-%d", i / 3, i % 3);
        items.push_back(item(qid, tasks[i % 3], benchmark::DurationClass::medium_video));
        for (bool w : {false, true}) rs.push_back(mcq_record(qid, w, outcomes[rng() % 4], i % 2 ? "M1" : "M2"));
    }
    ReportSpec spec{&items, {rs[0].condition, rs[1].condition}};
    const auto base = nlohmann::json(to_json(aggregate(spec, rs))).dump();
    for (int k = 0; k < 20; ++k) {
        std::shuffle(rs.begin(), rs.end(), rng);
        EXPECT_EQ(nlohmann::json(to_json(aggregate(spec, rs))).dump(), base);
    }
}

TEST(Aggregate, MissingConditionAndEmpty) {
    std::vector<RunRecord> rs{mcq_record("001-1", false, Outcome::answered_correct)};
    EXPECT_THROW(aggregate(ReportSpec{}, rs), MissingCondition);
    EXPECT_THROW(aggregate(ReportSpec{}, {}), NoRecords);
}

TEST(Headline, MismatchIsAWarning) {
    ComparisonRow avg;
    avg.without_value = 68.4;
    avg.with_value = 72.3;
    avg.delta = 3.9;
    EXPECT_FALSE(headline_mismatch(avg, 68.4, 72.3, 0.05).has_value());
    const auto w = headline_mismatch(avg, 58.4, 62.3, 0.05);
    ASSERT_TRUE(w.has_value());
    EXPECT_NE(w->find("58.4"), std::string::npos);
}

TEST(Annotations, ScoreOutputs) {
    const auto ann = annotations_from_json(nlohmann::json::parse(R"({"videos":{
        "v1":{"keyframes":[{"time":"00:10","caption":"a"}],"summary_verdicts":{"M":true}},
        "v2":{"keyframes":[{"timestamp_s":50}],"summary_verdicts":{"M":false},"keyframe_verdicts":{"M":true}}}})"));
    parsing::ParsedVideoOutput good{"s", {{11, "a"}}, true};
    parsing::ParsedVideoOutput far{"s", {{90, "a"}}, true};
    parsing::ParsedVideoOutput invalid{"", {{10, "a"}}, false};
    VideoOutputs outputs{{"v1", {{"M", good}, {"N", invalid}}}, {"v2", {{"M", far}}}};
    const auto scores = score_outputs(outputs, ann, 2);
    const auto& m = scores.at("M");
    EXPECT_EQ(m.keyframe.matches, (std::vector<bool>{true, true}));
    EXPECT_EQ(m.summary.matches, (std::vector<bool>{true, false}));
    EXPECT_DOUBLE_EQ(matching_node_score(m.summary), 0.5);
    EXPECT_EQ(scores.at("N").valid_outputs, 0u);
    EXPECT_EQ(scores.at("N").total_outputs, 1u);
    EXPECT_THROW(matching_node_score(scores.at("N").summary), EmptyVector);
}
