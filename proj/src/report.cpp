#include "vidharness/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vidharness::report {

namespace fs = std::filesystem;

std::string format_fixed(double value, int decimals) {
    double r = scoring::round_to(value, decimals);
    if (r == 0.0) r = 0.0;  // drop negative zero
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, r);
    return buf;
}

std::string format_signed(double value, int decimals) {
    const auto body = format_fixed(value, decimals);
    return body.front() == '-' ? body : "+" + body;
}

std::string format_duration_ms(std::int64_t ms) {
    if (ms < 0) ms = 0;
    const std::int64_t total = (ms + 500) / 1000;
    return std::to_string(total / 3600) + "h " + std::to_string(total / 60 % 60) + "m " +
           std::to_string(total % 60) + "s";
}

namespace {

void add_average(Table& out, const scoring::ComparisonTable& t, const std::vector<std::string>& cells) {
    if (!t.rows.empty()) out.rows.push_back(cells);
}

}  // namespace

Table task_type_table(const scoring::ComparisonTable& t) {
    Table out{{"Task Type", "With ALM", "Without ALM", "Δ"}, {}};
    for (const auto& r : t.rows) {
        out.rows.push_back({r.label, format_fixed(r.with_value, 3), format_fixed(r.without_value, 3),
                            format_signed(r.delta, 3)});
    }
    add_average(out, t,
                {"Average", format_fixed(t.average.with_value, 3), format_fixed(t.average.without_value, 3),
                 format_signed(t.average.delta, 3)});
    return out;
}

Table model_table(const scoring::ComparisonTable& t, const std::string& first_column, double scale) {
    Table out{{first_column, "w/o", "w/", "Δ"}, {}};
    for (const auto& r : t.rows) {
        out.rows.push_back({r.label, format_fixed(r.without_value * scale, 1), format_fixed(r.with_value * scale, 1),
                            format_signed(r.delta * scale, 1)});
    }
    add_average(out, t,
                {"Average", format_fixed(t.average.without_value * scale, 1),
                 format_fixed(t.average.with_value * scale, 1), format_signed(t.average.delta * scale, 1)});
    return out;
}

Table completeness_table(const std::vector<scoring::CompletenessRow>& rows) {
    Table out{{"Experiments", "Processing Time", "Total Answered (%)", "Correct Answered (%)"}, {}};
    for (const auto& r : rows) {
        out.rows.push_back({r.label, format_duration_ms(r.processing_ms),
                            format_fixed(r.rates.total_answered * 100.0, 0) + "%",
                            format_fixed(r.rates.correct_answered * 100.0, 2) + "%"});
    }
    return out;
}

std::string to_markdown(const Table& t) {
    std::ostringstream os;
    auto line = [&os](const std::vector<std::string>& cells) {
        os << '|';
        for (const auto& c : cells) {
            os << ' ';
            for (const char ch : c) {
                if (ch == '|') os << '\\';
                os << (ch == '\n' ? ' ' : ch);
            }
            os << " |";
        }
        os << '\n';
    };
    line(t.header);
    os << '|';
    for (std::size_t i = 0; i < t.header.size(); ++i) os << (i == 0 ? " --- |" : " ---: |");
    os << '\n';
    for (const auto& r : t.rows) line(r);
    return os.str();
}

std::string to_csv(const Table& t) {
    std::ostringstream os;
    auto line = [&os](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) os << ',';
            const auto& c = cells[i];
            if (c.find_first_of(",\"\n") != std::string::npos) {
                os << '"';
                for (const char ch : c) os << (ch == '"' ? "\"\"" : std::string(1, ch));
                os << '"';
            } else {
                os << c;
            }
        }
        os << '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return os.str();
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool is_separator(const std::vector<std::string>& cells) {
    for (const auto& c : cells) {
        if (c.empty() || c.find_first_not_of("-: ") != std::string::npos) return false;
    }
    return !cells.empty();
}

}  // namespace

Table parse_markdown(std::string_view text) {
    Table t;
    bool have_header = false;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        const auto line = trim(raw);
        if (line.empty()) continue;
        if (line.front() != '|' || line.back() != '|' || line.size() < 2) {
            throw SchemaError("not a pipe table line: " + line);
        }
        std::vector<std::string> cells;
        std::string cell;
        for (std::size_t i = 1; i < line.size(); ++i) {
            if (line[i] == '\\' && i + 1 < line.size() && line[i + 1] == '|') {
                cell += '|';
                ++i;
            } else if (line[i] == '|') {
                cells.push_back(trim(cell));
                cell.clear();
            } else {
                cell += line[i];
            }
        }
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (is_separator(cells)) continue;
        if (cells.size() != t.header.size()) throw SchemaError("row width differs from header: " + line);
        t.rows.push_back(std::move(cells));
    }
    if (!have_header) throw SchemaError("empty table");
    return t;
}

double cell_value(const std::string& cell) {
    std::string s = trim(cell);
    if (s.rfind("\xE2\x88\x92", 0) == 0) s = "-" + s.substr(3);
    if (!s.empty() && s.back() == '%') s.pop_back();
    if (!s.empty() && s.front() == '+') s.erase(0, 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw SchemaError("not a number: " + cell);
    }
    if (used != s.size()) throw SchemaError("not a number: " + cell);
    return v;
}

void write_text(const fs::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << text;
    if (!f) throw IoError("cannot write " + path.string());
}

nlohmann::json to_json(const ReportBundle& bundle) {
    nlohmann::json graphs = nlohmann::json::object();
    for (const auto& [id, by_center] : bundle.graph_metrics) {
        for (const auto& [center, m] : by_center) graphs[id][center] = graph::to_json(m);
    }
    nlohmann::json matching = nlohmann::json::object();
    for (const auto& [model, s] : bundle.matching) {
        auto score = [](const scoring::MatchVector& v) -> nlohmann::json {
            if (v.matches.empty()) return nullptr;
            return scoring::matching_node_score(v);
        };
        matching[model] = {{"keyframe_score", score(s.keyframe)},
                           {"keyframe_matches", s.keyframe.matches.size()},
                           {"summary_score", score(s.summary)},
                           {"summary_matches", s.summary.matches.size()},
                           {"valid_outputs", s.valid_outputs},
                           {"total_outputs", s.total_outputs}};
    }
    nlohmann::json manifests = nlohmann::json::array();
    for (const auto& p : bundle.manifests) manifests.push_back(p.filename().string());
    return {{"score", scoring::to_json(bundle.score)}, {"graphs", graphs}, {"matching", matching}, {"manifests", manifests}};
}

std::vector<fs::path> write_report(const ReportBundle& bundle, const fs::path& dir) {
    std::vector<fs::path> written;
    auto emit = [&](const std::string& stem, const Table& t) {
        write_text(dir / (stem + ".md"), to_markdown(t));
        write_text(dir / (stem + ".csv"), to_csv(t));
        written.push_back(dir / (stem + ".md"));
        written.push_back(dir / (stem + ".csv"));
    };
    emit("table1_task_type", task_type_table(bundle.score.by_task_type));
    emit("table2_model", model_table(bundle.score.by_model));
    emit("table3_completeness", completeness_table(bundle.score.completeness));
    emit("table_duration", model_table(bundle.score.by_duration, "Duration"));
    write_text(dir / "report.json", to_json(bundle).dump(2) + "\n");
    written.push_back(dir / "report.json");
    return written;
}

}  // namespace vidharness::report
