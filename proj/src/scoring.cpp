#include <algorithm>
#include "vidharness/scoring.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace vidharness::scoring {

using benchmark::Outcome;
using benchmark::RequestKind;
using benchmark::RunRecord;

std::string_view to_string(Scenario s) { return s == Scenario::keyframe ? "keyframe" : "summary"; }

double matching_node_score(const MatchVector& v) {
    if (v.matches.empty()) throw EmptyVector("no valid outputs to score");
    std::size_t hits = 0;
    for (bool m : v.matches) hits += m ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(v.matches.size());
}

bool keyframe_match(const parsing::KeyframeEntry& pred, const parsing::KeyframeEntry& truth,
                    std::int64_t tolerance_s) {
    if (tolerance_s < 0) throw std::invalid_argument("tolerance must be non-negative");
    const auto diff = pred.timestamp_s > truth.timestamp_s ? pred.timestamp_s - truth.timestamp_s
                                                           : truth.timestamp_s - pred.timestamp_s;
    return diff <= tolerance_s;
}

bool keyframes_agree(const std::vector<parsing::KeyframeEntry>& predicted,
                     const std::vector<parsing::KeyframeEntry>& truth, std::int64_t tolerance_s) {
    if (truth.empty()) return predicted.empty();
    std::vector<bool> used(predicted.size(), false);
    for (const auto& t : truth) {
        bool found = false;
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            if (!used[i] && keyframe_match(predicted[i], t, tolerance_s)) {
                used[i] = true;
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

AnswerRates answer_rates(std::size_t total, std::size_t answered, std::size_t correct) {
    AnswerRates r;
    r.total = total;
    r.answered = answered;
    r.correct = correct;
    r.total_answered = total == 0 ? 0.0 : static_cast<double>(answered) / static_cast<double>(total);
    r.correct_answered = answered == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(answered);
    return r;
}

ComparisonTable compare_rows(const std::vector<RowInput>& rows) {
    if (rows.empty()) throw NoRecords("no rows to compare");
    ComparisonTable table;
    double sum_with = 0.0;
    double sum_without = 0.0;
    for (const auto& r : rows) {
        table.rows.push_back({r.label, r.with_value, r.without_value, r.with_value - r.without_value, 0, 0});
        sum_with += r.with_value;
        sum_without += r.without_value;
    }
    const auto n = static_cast<double>(rows.size());
    table.average.label = "Average";
    table.average.with_value = sum_with / n;
    table.average.without_value = sum_without / n;
    table.average.delta = table.average.with_value - table.average.without_value;
    return table;
}

namespace {

struct Tally {
    std::size_t answered = 0;
    std::size_t correct = 0;
    std::size_t total = 0;

    void add(Outcome o) {
        ++total;
        if (o == Outcome::answered_correct) {
            ++answered;
            ++correct;
        } else if (o == Outcome::answered_wrong) {
            ++answered;
        }
    }
    double accuracy() const { return answered == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(answered); }
};

struct PairTally {
    Tally with;
    Tally without;
};

ComparisonTable table_from(const std::map<std::string, PairTally>& groups, const std::string& dimension,
                           std::vector<std::string>& warnings) {
    std::vector<RowInput> inputs;
    std::vector<std::pair<std::size_t, std::size_t>> counts;
    for (const auto& [label, t] : groups) {
        if (t.with.total == 0 || t.without.total == 0) {
            warnings.push_back(dimension + " '" + label + "' lacks a " +
                               (t.with.total == 0 ? "with" : "without") + "-transcript condition; row omitted");
            continue;
        }
        if (t.with.answered == 0 || t.without.answered == 0) {
            warnings.push_back(dimension + " '" + label + "' has a side with no answered records");
        }
        inputs.push_back({label, t.with.accuracy(), t.without.accuracy()});
        counts.emplace_back(t.with.total, t.without.total);
    }
    if (inputs.empty()) return {};
    auto table = compare_rows(inputs);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        table.rows[i].with_n = counts[i].first;
        table.rows[i].without_n = counts[i].second;
    }
    return table;
}

}  // namespace

ScoreReport aggregate(const ReportSpec& spec, const std::vector<RunRecord>& records) {
    std::map<std::string, const benchmark::BenchmarkItem*> items;
    if (spec.items != nullptr) {
        for (const auto& i : *spec.items) items[i.question_id] = &i;
    }

    ScoreReport report;
    std::map<std::string, PairTally> by_task;
    std::map<std::string, PairTally> by_duration;
    std::map<std::string, PairTally> by_model;
    Tally overall;
    bool any_with = false;
    bool any_without = false;

    // Listed conditions keep their order; unlisted ones follow in a fixed
    // order so the result does not depend on record order.
    std::vector<providers::ConditionTag> order = spec.conditions;
    std::vector<providers::ConditionTag> extra;
    auto listed = [&order](const providers::ConditionTag& c) {
        return std::find(order.begin(), order.end(), c) != order.end();
    };
    for (const auto& r : records) {
        if (r.request_kind == RequestKind::mcq && !listed(r.condition) &&
            std::find(extra.begin(), extra.end(), r.condition) == extra.end()) {
            extra.push_back(r.condition);
        }
    }
    std::sort(extra.begin(), extra.end(), [](const auto& a, const auto& b) {
        return providers::to_json(a).dump() < providers::to_json(b).dump();
    });
    order.insert(order.end(), extra.begin(), extra.end());
    auto condition_slot = [&order](const providers::ConditionTag& c) {
        return static_cast<std::size_t>(std::find(order.begin(), order.end(), c) - order.begin());
    };
    std::map<std::size_t, Tally> per_condition;
    std::map<std::size_t, std::int64_t> latency;

    std::size_t missing_items = 0;
    for (const auto& r : records) {
        if (r.request_kind != RequestKind::mcq) continue;
        const auto slot = condition_slot(r.condition);
        per_condition[slot].add(r.outcome);
        latency[slot] += r.response.latency_ms;
        overall.add(r.outcome);
        (r.condition.with_transcript ? any_with : any_without) = true;

        auto side = [&](PairTally& t) -> Tally& { return r.condition.with_transcript ? t.with : t.without; };
        side(by_model[r.condition.model_name]).add(r.outcome);
        const auto it = items.find(r.item_ref);
        if (it == items.end()) {
            ++missing_items;
            continue;
        }
        side(by_task[it->second->task_type]).add(r.outcome);
        side(by_duration[std::string(benchmark::to_string(it->second->duration_class))]).add(r.outcome);
    }
    if (overall.total == 0) throw NoRecords("no mcq records to aggregate");
    if (!any_with || !any_without) {
        throw MissingCondition(std::string("records lack a ") + (any_with ? "without" : "with") +
                               "-transcript condition");
    }
    if (missing_items > 0) {
        report.warnings.push_back(std::to_string(missing_items) + " records reference items outside the dataset");
    }

    report.overall_accuracy = overall.accuracy();
    report.by_task_type = table_from(by_task, "task type", report.warnings);
    report.by_duration = table_from(by_duration, "duration", report.warnings);
    report.by_model = table_from(by_model, "model", report.warnings);

    std::set<std::string> models;
    for (const auto& c : order) models.insert(c.model_name);
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (per_condition.count(i) == 0) continue;
        CompletenessRow row;
        row.condition = order[i];
        row.label = (models.size() > 1 ? order[i].model_name + " " : std::string()) + order[i].label();
        const auto& t = per_condition.at(i);
        row.rates = answer_rates(t.total, t.answered, t.correct);
        row.processing_ms = latency[i];
        report.completeness.push_back(std::move(row));
    }
    return report;
}

std::optional<std::string> headline_mismatch(const ComparisonRow& average, double reported_without,
                                             double reported_with, double tolerance) {
    const bool off = std::fabs(average.without_value - reported_without) > tolerance ||
                     std::fabs(average.with_value - reported_with) > tolerance;
    if (!off) return std::nullopt;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "reported headline %.1f -> %.1f (%+.1f) disagrees with the table average %.1f -> %.1f (%+.1f)",
                  reported_without, reported_with, reported_with - reported_without, average.without_value,
                  average.with_value, average.delta);
    return std::string(buf);
}

double round_to(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    // Nudge by a few ulps so printed decimals like 0.0575 round the way the
    // decimal literal reads.
    const double scaled = value * scale;
    const double nudged = scaled + std::copysign(1e-9 * std::max(1.0, std::fabs(scaled)), scaled);
    return std::round(nudged) / scale;
}

Annotations annotations_from_json(const nlohmann::json& j) {
    Annotations out;
    if (!j.contains("videos") || !j.at("videos").is_object()) {
        throw SchemaError("annotations need a 'videos' object");
    }
    for (const auto& [video_id, a] : j.at("videos").items()) {
        VideoAnnotation ann;
        if (a.contains("keyframes")) {
            for (const auto& k : a.at("keyframes")) {
                parsing::KeyframeEntry e;
                e.timestamp_s = k.contains("timestamp_s") ? k.at("timestamp_s").get<std::int64_t>()
                                                          : parsing::parse_timestamp(k.at("time").get<std::string>());
                e.caption = k.value("caption", "");
                ann.keyframes.push_back(std::move(e));
            }
        }
        if (a.contains("summary_verdicts")) {
            ann.summary_verdicts = a.at("summary_verdicts").get<std::map<std::string, bool>>();
        }
        if (a.contains("keyframe_verdicts")) {
            ann.keyframe_verdicts = a.at("keyframe_verdicts").get<std::map<std::string, bool>>();
        }
        out.emplace(video_id, std::move(ann));
    }
    return out;
}

std::map<std::string, ModelScores> score_outputs(const VideoOutputs& outputs, const Annotations& annotations,
                                                 std::int64_t tolerance_s) {
    std::map<std::string, ModelScores> scores;
    for (const auto& [video_id, models] : outputs) {
        const auto ann = annotations.find(video_id);
        for (const auto& [model, output] : models) {
            auto& s = scores[model];
            ++s.total_outputs;
            if (!output.valid) continue;
            ++s.valid_outputs;
            if (ann == annotations.end()) continue;
            const auto& a = ann->second;
            if (auto v = a.keyframe_verdicts.find(model); v != a.keyframe_verdicts.end()) {
                s.keyframe.matches.push_back(v->second);
            } else if (!a.keyframes.empty()) {
                s.keyframe.matches.push_back(keyframes_agree(output.keyframes, a.keyframes, tolerance_s));
            }
            if (auto v = a.summary_verdicts.find(model); v != a.summary_verdicts.end()) {
                s.summary.matches.push_back(v->second);
            }
        }
    }
    return scores;
}

nlohmann::json to_json(const AnswerRates& r) {
    return {{"total", r.total},
            {"answered", r.answered},
            {"correct", r.correct},
            {"total_answered", r.total_answered},
            {"correct_answered", r.correct_answered}};
}

namespace {

nlohmann::json row_json(const ComparisonRow& r) {
    return {{"label", r.label},
            {"with", r.with_value},
            {"without", r.without_value},
            {"delta", r.delta},
            {"with_n", r.with_n},
            {"without_n", r.without_n}};
}

}  // namespace

nlohmann::json to_json(const ComparisonTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) rows.push_back(row_json(r));
    return {{"rows", rows}, {"average", row_json(t.average)}};
}

nlohmann::json to_json(const ScoreReport& r) {
    nlohmann::json completeness = nlohmann::json::array();
    for (const auto& c : r.completeness) {
        completeness.push_back({{"label", c.label},
                                {"condition", providers::to_json(c.condition)},
                                {"rates", to_json(c.rates)},
                                {"processing_ms", c.processing_ms}});
    }
    return {{"overall_accuracy", r.overall_accuracy},
            {"by_task_type", to_json(r.by_task_type)},
            {"by_duration", to_json(r.by_duration)},
            {"by_model", to_json(r.by_model)},
            {"completeness", completeness},
            {"warnings", r.warnings}};
}

}  // namespace vidharness::scoring
