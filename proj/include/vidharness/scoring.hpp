#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ranges>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vidharness/benchmark.hpp"
#include "vidharness/errors.hpp"
#include "vidharness/parsing.hpp"

namespace vidharness::scoring {

enum class Scenario { keyframe, summary };
std::string_view to_string(Scenario s);

/// One indicator per valid output: true when the output agrees with its
/// ground truth.
struct MatchVector {
    Scenario scenario = Scenario::keyframe;
    std::vector<bool> matches;
};

/// Mean of the indicators. Throws EmptyVector for zero valid outputs.
double matching_node_score(const MatchVector& v);

/// |pred - truth| <= tolerance_s. tolerance_s = 0 is strict equality.
bool keyframe_match(const parsing::KeyframeEntry& pred, const parsing::KeyframeEntry& truth,
                    std::int64_t tolerance_s);

/// Video-level keyframe verdict: every ground-truth keyframe is matched by
/// a distinct predicted keyframe within the tolerance (greedy, in order).
bool keyframes_agree(const std::vector<parsing::KeyframeEntry>& predicted,
                     const std::vector<parsing::KeyframeEntry>& truth, std::int64_t tolerance_s);

struct AnswerRates {
    std::size_t total = 0;
    std::size_t answered = 0;
    std::size_t correct = 0;
    double total_answered = 0.0;  // answered / total
    double correct_answered = 0.0;  // correct / answered (0 when nothing answered)
};

/// Rates from raw counts.
AnswerRates answer_rates(std::size_t total, std::size_t answered, std::size_t correct);

/// Completeness and accuracy over mcq records. "Correct" is conditioned on
/// answered records. Works on any input range of RunRecord, including
/// lazily generated ones. Throws NoRecords on an empty range.
template <std::ranges::input_range R>
    requires std::same_as<std::remove_cvref_t<std::ranges::range_reference_t<R>>, benchmark::RunRecord>
AnswerRates mcq_accuracy(R&& records) {
    std::size_t total = 0;
    std::size_t answered = 0;
    std::size_t correct = 0;
    for (auto&& r : records) {
        if (r.request_kind != benchmark::RequestKind::mcq) {
            throw std::invalid_argument("mcq_accuracy expects mcq records only");
        }
        ++total;
        if (r.outcome == benchmark::Outcome::answered_correct) {
            ++answered;
            ++correct;
        } else if (r.outcome == benchmark::Outcome::answered_wrong) {
            ++answered;
        }
    }
    if (total == 0) throw NoRecords("no mcq records");
    return answer_rates(total, answered, correct);
}

/// One (with, without, delta) row.
struct ComparisonRow {
    std::string label;
    double with_value = 0.0;
    double without_value = 0.0;
    double delta = 0.0;  // with - without on unrounded values
    std::size_t with_n = 0;
    std::size_t without_n = 0;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;
    ComparisonRow average;  // unweighted mean of the listed rows
};

struct RowInput {
    std::string label;
    double with_value = 0.0;
    double without_value = 0.0;
};

/// Deltas plus the average row. Throws NoRecords for an empty input.
ComparisonTable compare_rows(const std::vector<RowInput>& rows);

struct CompletenessRow {
    std::string label;
    providers::ConditionTag condition;
    AnswerRates rates;
    std::int64_t processing_ms = 0;  // sum of recorded response latencies
};

struct ScoreReport {
    double overall_accuracy = 0.0;
    ComparisonTable by_task_type;
    ComparisonTable by_duration;
    ComparisonTable by_model;
    std::vector<CompletenessRow> completeness;
    std::vector<std::string> warnings;
};

struct ReportSpec {
    const std::vector<benchmark::BenchmarkItem>* items = nullptr;
    /// Condition order for the completeness table; defaults to first
    /// appearance in the records.
    std::vector<providers::ConditionTag> conditions;
};

/// Per-task, per-duration and per-model with/without-transcript triples
/// plus per-condition completeness. Accuracy is correct / answered.
/// Throws MissingCondition unless both transcript settings are present.
ScoreReport aggregate(const ReportSpec& spec, const std::vector<benchmark::RunRecord>& records);

/// Compares a separately reported headline (without -> with) against the
/// table's average row. Returns a warning when they differ by more than
/// `tolerance` on either side.
std::optional<std::string> headline_mismatch(const ComparisonRow& average, double reported_without,
                                             double reported_with, double tolerance);

/// Rounds half away from zero to `decimals` places.
double round_to(double value, int decimals);

// ---------------------------------------------------------------------------
// Annotations: ground-truth keyframes and binary summary verdicts.
// ---------------------------------------------------------------------------

struct VideoAnnotation {
    std::vector<parsing::KeyframeEntry> keyframes;
    std::map<std::string, bool> summary_verdicts;   // model -> verdict
    std::map<std::string, bool> keyframe_verdicts;  // model -> verdict (overrides timestamp matching)
};

using Annotations = std::map<std::string, VideoAnnotation>;

/// {"videos": {"<video_id>": {"keyframes": [{"time", "caption"}],
///   "summary_verdicts": {...}, "keyframe_verdicts": {...}}}}
Annotations annotations_from_json(const nlohmann::json& j);

/// Model outputs per video, in model order.
using ModelOutputs = std::vector<std::pair<std::string, parsing::ParsedVideoOutput>>;
using VideoOutputs = std::map<std::string, ModelOutputs>;

struct ModelScores {
    MatchVector keyframe{Scenario::keyframe, {}};
    MatchVector summary{Scenario::summary, {}};
    std::size_t valid_outputs = 0;
    std::size_t total_outputs = 0;
};

/// Builds per-model match vectors over valid outputs that have ground
/// truth for the scenario.
std::map<std::string, ModelScores> score_outputs(const VideoOutputs& outputs, const Annotations& annotations,
                                                 std::int64_t tolerance_s);

nlohmann::json to_json(const AnswerRates& r);
nlohmann::json to_json(const ComparisonTable& t);
nlohmann::json to_json(const ScoreReport& r);

}  // namespace vidharness::scoring
