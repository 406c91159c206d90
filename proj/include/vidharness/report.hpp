#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vidharness/knowledge_graph.hpp"
#include "vidharness/scoring.hpp"

namespace vidharness::report {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    friend bool operator==(const Table&, const Table&) = default;
};

/// "+0.057" / "-0.035". Rounds half away from zero.
std::string format_signed(double value, int decimals);
std::string format_fixed(double value, int decimals);
/// 16622000 ms -> "4h 37m 2s".
std::string format_duration_ms(std::int64_t ms);

/// Task Type | With ALM | Without ALM | Δ, three decimals on fractions.
Table task_type_table(const scoring::ComparisonTable& t);
/// <first_column> | w/o | w/ | Δ, one decimal on percentages. `scale`
/// converts the stored values (100 for fractions).
Table model_table(const scoring::ComparisonTable& t, const std::string& first_column = "Model",
                  double scale = 100.0);
/// Experiments | Processing Time | Total Answered (%) | Correct Answered (%).
Table completeness_table(const std::vector<scoring::CompletenessRow>& rows);

std::string to_markdown(const Table& t);
std::string to_csv(const Table& t);

/// Parses a pipe table as written by to_markdown. Throws SchemaError.
Table parse_markdown(std::string_view text);

/// Numeric value of a cell: strips '%', a leading '+', and maps the
/// Unicode minus. Throws SchemaError when nothing numeric remains.
double cell_value(const std::string& cell);

struct ReportBundle {
    scoring::ScoreReport score;
    /// video_id -> center node -> metrics
    std::map<std::string, std::map<std::string, graph::GraphMetrics>> graph_metrics;
    /// Matching-node scores per model, when annotations are configured.
    std::map<std::string, scoring::ModelScores> matching;
    std::vector<std::filesystem::path> manifests;
    std::vector<std::filesystem::path> files;
};

/// Writes table1_task_type, table2_model, table3_completeness and
/// table_duration as .md and .csv, plus report.json. Returns the paths in
/// write order. Throws IoError.
std::vector<std::filesystem::path> write_report(const ReportBundle& bundle, const std::filesystem::path& dir);

nlohmann::json to_json(const ReportBundle& bundle);

/// Writes `text` to `path`, creating parent directories. Throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace vidharness::report
