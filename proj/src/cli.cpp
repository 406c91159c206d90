#include "vidharness/cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "vidharness/config.hpp"
#include "vidharness/media.hpp"
#include "vidharness/parsing.hpp"
#include "vidharness/providers.hpp"
#include "vidharness/report.hpp"

namespace vidharness::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config_path;
    bool replay = false;
    bool live = false;
    std::vector<std::string> conditions;
    std::string out_dir;
    std::optional<std::int64_t> tolerance_s;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> paths;
    std::vector<std::string> manifests;
    std::string probe_command;
};

// Exit-code carrier for failures detected after the work itself succeeded.
struct Exit {
    int code;
    std::string message;
};

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string file_stem_for(const std::string& id) {
    std::string out;
    for (const char c : id) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        out += ok ? c : '_';
    }
    return out.empty() ? "_" : out;
}

config::HarnessConfig load(const Options& o) {
    if (o.config_path.empty()) throw ConfigError("--config is required for this command");
    auto cfg = config::load_config(o.config_path);
    config::select_conditions(cfg, o.conditions);
    if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
    if (o.tolerance_s) {
        if (*o.tolerance_s < 0) throw ConfigError("--tolerance-s must be non-negative");
        cfg.tolerance_s = *o.tolerance_s;
    }
    if (o.seed) cfg.layout.seed = *o.seed;
    return cfg;
}

providers::Mode mode_of(const Options& o) { return o.live ? providers::Mode::live : providers::Mode::replay; }

std::unique_ptr<providers::ProviderHub> make_hub(const config::HarnessConfig& cfg, providers::Mode mode) {
    auto hub = std::make_unique<providers::ProviderHub>(mode, cfg.cassette_dir, cfg.max_in_flight);
    for (const auto& p : cfg.providers) hub->add_provider(p);
    return hub;
}

std::string dataset_ref(const config::HarnessConfig& cfg) {
    const auto base = fs::absolute(cfg.source).parent_path();
    return fs::absolute(cfg.dataset).lexically_relative(base).generic_string();
}

std::vector<std::string> provider_ids(const config::HarnessConfig& cfg) {
    std::set<std::string> ids;
    for (const auto& id : {cfg.vlm_provider, cfg.asr_provider, cfg.llm_provider}) {
        if (!id.empty()) ids.insert(id);
    }
    for (const auto& [model, id] : cfg.vlm_provider_by_model) ids.insert(id);
    return {ids.begin(), ids.end()};
}

// Graphs for every video with at least one valid output.
// Metrics are taken from both core nodes, plus `center` when it names
// another node of the graph.
void emit_graphs(const std::map<std::string, scoring::ModelOutputs>& outputs, const graph::LayoutParams& layout,
                 const std::string& center, const fs::path& dir, report::ReportBundle& bundle, std::ostream& err) {
    for (const auto& [video_id, models] : outputs) {
        graph::EvalGraph g;
        try {
            g = graph::build_comparison_graph(models);
        } catch (const NoValidOutputs&) {
            err << "warning: no valid outputs for video " << video_id << "; graph skipped\n";
            continue;
        }
        const auto positions = graph::fr_layout(g, layout);
        std::vector<std::string> centers{graph::kKeyFramesNode, graph::kVideoSummaryNode};
        if (g.has_node(center) && center != centers[0] && center != centers[1]) centers.push_back(center);
        for (const auto& c : centers) bundle.graph_metrics[video_id][c] = graph::graph_metrics(g, positions, c);
        for (auto& p : graph::export_graph(g, positions, dir, file_stem_for(video_id))) bundle.files.push_back(p);
    }
}

void finish_report(const config::HarnessConfig& cfg, const benchmark::RunManifest& manifest,
                   const std::vector<benchmark::BenchmarkItem>& items, report::ReportBundle& bundle,
                   std::ostream& out, std::ostream& err) {
    scoring::ReportSpec spec;
    spec.items = &items;
    spec.conditions = manifest.conditions;

    std::vector<benchmark::RunRecord> mcq;
    for (const auto& r : manifest.records) {
        if (r.request_kind == benchmark::RequestKind::mcq) mcq.push_back(r);
    }
    if (!mcq.empty()) {
        try {
            bundle.score = scoring::aggregate(spec, mcq);
        } catch (const MissingCondition& e) {
            // Completeness still applies with a single transcript setting.
            err << "warning: " << e.what() << "; comparison tables left empty\n";
            bundle.score = {};
            bundle.score.warnings.push_back(e.what());
            std::map<std::size_t, std::vector<benchmark::RunRecord>> by_condition;
            for (const auto& r : mcq) by_condition[*benchmark::condition_index(manifest, r.condition)].push_back(r);
            for (const auto& [ci, records] : by_condition) {
                scoring::CompletenessRow row;
                row.condition = manifest.conditions[ci];
                row.label = row.condition.label();
                row.rates = scoring::mcq_accuracy(records);
                for (const auto& r : records) row.processing_ms += r.response.latency_ms;
                bundle.score.completeness.push_back(std::move(row));
            }
        }
        if (cfg.headline && !bundle.score.by_model.rows.empty()) {
            auto avg = bundle.score.by_model.average;
            avg.with_value *= 100.0;
            avg.without_value *= 100.0;
            avg.delta *= 100.0;
            if (auto w = scoring::headline_mismatch(avg, cfg.headline->without_value, cfg.headline->with_value,
                                                    cfg.headline->tolerance)) {
                bundle.score.warnings.push_back(*w);
            }
        }
    }

    const auto outputs = outputs_from_records(manifest);
    if (!outputs.empty()) {
        emit_graphs(outputs, cfg.layout, cfg.graph_center, cfg.output_dir / "graphs", bundle, err);
        if (cfg.annotations) {
            std::map<std::string, scoring::ModelOutputs> by_video = outputs;
            scoring::VideoOutputs vo(by_video.begin(), by_video.end());
            const auto ann = scoring::annotations_from_json(nlohmann::json::parse(slurp(*cfg.annotations)));
            bundle.matching = scoring::score_outputs(vo, ann, cfg.tolerance_s);
        }
    }

    const auto files = report::write_report(bundle, cfg.output_dir);
    bundle.files.insert(bundle.files.end(), files.begin(), files.end());
    for (const auto& w : bundle.score.warnings) err << "warning: " << w << '\n';
    if (!mcq.empty()) {
        out << "overall accuracy (correct/answered): " << report::format_fixed(bundle.score.overall_accuracy, 4)
            << '\n';
        out << report::to_markdown(report::completeness_table(bundle.score.completeness));
    }
    out << "wrote " << bundle.files.size() << " files under " << cfg.output_dir.generic_string() << '\n';
}

int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
    media::ToolCommands tools;
    fs::path out_dir = o.out_dir.empty() ? fs::path("out") : fs::path(o.out_dir);
    if (!o.config_path.empty()) {
        const auto cfg = load(o);
        tools = cfg.tools;
        out_dir = cfg.output_dir;
    }
    if (!o.probe_command.empty()) tools.probe = o.probe_command;
    if (o.paths.empty()) throw ConfigError("ingest needs at least one path");

    std::vector<fs::path> files;
    for (const auto& p : o.paths) {
        if (fs::is_directory(p)) {
            for (const auto& e : fs::recursive_directory_iterator(p)) {
                if (e.is_regular_file()) files.push_back(e.path());
            }
        } else if (fs::exists(p)) {
            files.push_back(p);
        } else {
            err << "warning: " << p << " does not exist\n";
        }
    }
    std::sort(files.begin(), files.end());

    const media::MediaTool tool(tools);
    nlohmann::json inventory = nlohmann::json::array();
    std::map<std::string, std::size_t> by_container;
    std::map<std::string, std::size_t> by_duration;
    std::size_t skipped = 0;
    for (const auto& f : files) {
        if (!media::container_from_extension(f)) {
            ++skipped;
            continue;
        }
        try {
            const auto asset = tool.probe(f);
            inventory.push_back(media::to_json(asset));
            ++by_container[std::string(media::to_string(asset.container))];
            const char* bucket = asset.duration_s <= 120 ? "short" : asset.duration_s <= 900 ? "medium" : "long";
            ++by_duration[bucket];
        } catch (const Error& e) {
            err << "warning: " << e.what() << '\n';
            ++skipped;
        }
    }
    out << inventory.size() << " usable assets (" << skipped << " skipped)\n";
    if (inventory.empty()) {
        err << "0 usable assets\n";
        return kBadInput;
    }
    for (const auto& [c, n] : by_container) out << "  format " << c << ": " << n << '\n';
    for (const auto& [d, n] : by_duration) out << "  duration " << d << ": " << n << '\n';
    report::write_text(out_dir / "inventory.json", inventory.dump(2) + "\n");
    out << "wrote " << (out_dir / "inventory.json").generic_string() << '\n';
    return kOk;
}

int cmd_transcribe(const Options& o, std::ostream& out, std::ostream& err) {
    const auto cfg = load(o);
    if (cfg.asr_provider.empty()) throw ConfigError("no asr role configured");
    auto hub = make_hub(cfg, mode_of(o));
    const media::MediaTool tool(cfg.tools);

    std::vector<std::pair<std::string, fs::path>> targets;
    if (o.paths.empty()) {
        std::set<std::string> seen;
        for (const auto& item : benchmark::load_dataset(cfg.dataset)) {
            if (!seen.insert(item.video_id).second) continue;
            if (auto p = config::find_media(cfg.media_dir, item.video_id)) {
                targets.emplace_back(item.video_id, *p);
            } else {
                err << "warning: no media for video " << item.video_id << '\n';
            }
        }
    } else {
        for (const auto& p : o.paths) targets.emplace_back(fs::path(p).stem().string(), p);
    }
    if (targets.empty()) {
        err << "nothing to transcribe\n";
        return kBadInput;
    }

    std::size_t ok = 0;
    std::size_t transport = 0;
    for (const auto& [id, path] : targets) {
        try {
            const auto asset = tool.probe(path);
            std::optional<fs::path> audio;
            if (!cfg.audio_cache_dir.empty() && asset.kind == media::MediaKind::video) {
                audio = tool.extract_audio(asset.path, cfg.audio_cache_dir / (id + ".wav"));
            }
            const auto t = hub->transcribe(asset, cfg.asr_provider, audio);
            report::write_text(cfg.output_dir / "transcripts" / (file_stem_for(id) + ".json"),
                               providers::to_json(t).dump(2) + "\n");
            ++ok;
        } catch (const ProviderUnavailable& e) {
            ++transport;
            err << "error: " << id << ": " << e.what() << '\n';
        } catch (const Error& e) {
            err << "error: " << id << ": " << e.what() << '\n';
        }
    }
    out << ok << " of " << targets.size() << " transcribed\n";
    if (ok == 0) return (o.live && transport > 0) ? kProviderFailure : kBadInput;
    return kOk;
}

benchmark::RunManifest fresh_manifest(const config::HarnessConfig& cfg) {
    benchmark::RunManifest m;
    m.dataset_path = dataset_ref(cfg);
    m.conditions = config::condition_tags(cfg);
    m.providers = provider_ids(cfg);
    m.tasks = cfg.tasks;
    return m;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
    const auto cfg = load(o);
    if (cfg.vlm_provider.empty() && cfg.vlm_provider_by_model.empty()) throw ConfigError("no vlm role configured");
    const auto items = benchmark::load_dataset(cfg.dataset);
    if (items.empty()) {
        err << "dataset is empty\n";
        return kBadInput;
    }
    auto hub = make_hub(cfg, mode_of(o));
    const media::MediaTool tool(cfg.tools);

    auto manifest = fresh_manifest(cfg);
    const auto manifest_path = cfg.output_dir / "manifest.jsonl";
    if (fs::exists(manifest_path)) {
        auto previous = benchmark::read_manifest(manifest_path);
        if (previous.dataset_path == manifest.dataset_path && previous.conditions == manifest.conditions &&
            previous.providers == manifest.providers && previous.tasks == manifest.tasks) {
            manifest = std::move(previous);
            out << "resuming manifest with " << manifest.records.size() << " records\n";
        }
    }

    benchmark::RunContext ctx;
    ctx.items = items;
    ctx.hub = hub.get();
    ctx.tool = &tool;
    ctx.resolve_media = [&cfg](const benchmark::BenchmarkItem& item) {
        return config::find_media(cfg.media_dir, item.video_id);
    };
    ctx.frame_cache_dir = cfg.frame_cache_dir;
    ctx.audio_cache_dir = cfg.audio_cache_dir;
    ctx.vlm_provider = cfg.vlm_provider;
    ctx.vlm_provider_by_model = cfg.vlm_provider_by_model;
    ctx.asr_provider = cfg.asr_provider;
    ctx.llm_provider = cfg.llm_provider;
    ctx.mcq_template = cfg.mcq_template;
    ctx.summary_template = cfg.summary_template;
    ctx.refine_template = cfg.refine_template;
    ctx.workers = cfg.workers;

    manifest = benchmark::run_benchmark(std::move(manifest), ctx);
    benchmark::write_manifest(manifest, manifest_path);

    std::size_t ok = 0;
    std::size_t transport = 0;
    for (const auto& r : manifest.records) {
        if (r.response.status == providers::ResponseStatus::ok) ++ok;
        if (r.response.detail == "ProviderUnavailable") ++transport;
    }
    out << manifest.records.size() << " records (" << ok << " with a model response)\n";

    report::ReportBundle bundle;
    bundle.manifests.push_back(manifest_path);
    bundle.files.push_back(manifest_path);
    finish_report(cfg, manifest, items, bundle, out, err);
    if (o.live && ok == 0 && transport > 0) {
        err << "every provider call failed\n";
        return kProviderFailure;
    }
    return kOk;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
    const auto cfg = load(o);
    const auto items = benchmark::load_dataset(cfg.dataset);
    std::vector<fs::path> paths(o.manifests.begin(), o.manifests.end());
    if (paths.empty()) paths.push_back(cfg.output_dir / "manifest.jsonl");

    benchmark::RunManifest merged;
    merged.dataset_path = dataset_ref(cfg);
    report::ReportBundle bundle;
    for (const auto& p : paths) {
        if (!fs::exists(p)) throw NoRecords("manifest not found: " + p.string());
        auto m = benchmark::read_manifest(p);
        for (const auto& c : m.conditions) {
            if (!benchmark::condition_index(merged, c)) merged.conditions.push_back(c);
        }
        for (auto& r : m.records) merged.records.push_back(std::move(r));
        bundle.manifests.push_back(p);
    }
    if (merged.records.empty()) throw NoRecords("manifests hold no records");
    finish_report(cfg, merged, items, bundle, out, err);
    return kOk;
}

int cmd_graph(const Options& o, std::ostream& out, std::ostream& err) {
    graph::LayoutParams layout;
    std::string center = graph::kVideoSummaryNode;
    fs::path out_dir = o.out_dir.empty() ? fs::path("out") : fs::path(o.out_dir);
    if (!o.config_path.empty()) {
        const auto cfg = load(o);
        layout = cfg.layout;
        center = cfg.graph_center;
        out_dir = cfg.output_dir;
    }
    if (o.seed) layout.seed = *o.seed;
    if (o.paths.size() != 1) throw ConfigError("graph takes exactly one outputs file");

    const auto outputs = parse_outputs_file(o.paths.front());
    report::ReportBundle bundle;
    emit_graphs(outputs, layout, center, out_dir, bundle, err);
    if (bundle.graph_metrics.empty()) throw NoValidOutputs("no video has a valid model output");

    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [video_id, by_center] : bundle.graph_metrics) {
        for (const auto& [center, m] : by_center) metrics[video_id][center] = graph::to_json(m);
    }
    report::write_text(out_dir / "metrics.json", metrics.dump(2) + "\n");
    for (const auto& [video_id, by_center] : bundle.graph_metrics) {
        const auto& m = by_center.begin()->second;
        out << video_id << ": " << m.node_count << " nodes, " << m.edge_count << " edges\n";
    }
    out << "wrote " << bundle.files.size() + 1 << " files under " << out_dir.generic_string() << '\n';
    return kOk;
}

}  // namespace

std::map<std::string, scoring::ModelOutputs> parse_outputs_file(const fs::path& path) {
    const auto text = slurp(path);
    std::map<std::string, scoring::ModelOutputs> result;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return result;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("outputs file is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("videos") || !j.at("videos").is_object()) {
        throw SchemaError("outputs file needs a 'videos' object");
    }
    for (const auto& [video_id, list] : j.at("videos").items()) {
        if (!list.is_array()) throw SchemaError("outputs for " + video_id + " must be an array");
        auto& models = result[video_id];
        for (const auto& entry : list) {
            if (!entry.contains("model")) throw SchemaError("output entry without 'model' in " + video_id);
            parsing::ParsedVideoOutput parsed;
            if (entry.contains("raw_text")) {
                parsed = parsing::parse_video_output(entry.at("raw_text").get<std::string>());
            } else {
                parsed = parsing::parsed_output_from_json(entry);
            }
            models.emplace_back(entry.at("model").get<std::string>(), std::move(parsed));
        }
    }
    return result;
}

std::map<std::string, scoring::ModelOutputs> outputs_from_records(const benchmark::RunManifest& manifest) {
    std::map<std::string, std::size_t> conditions_per_model;
    for (const auto& c : manifest.conditions) ++conditions_per_model[c.model_name];

    std::map<std::string, scoring::ModelOutputs> result;
    for (const auto& r : manifest.records) {
        if (r.request_kind != benchmark::RequestKind::summary_keyframes) continue;
        const auto* parsed = std::get_if<parsing::ParsedVideoOutput>(&r.parsed);
        parsing::ParsedVideoOutput output = parsed != nullptr ? *parsed : parsing::ParsedVideoOutput{};
        std::string name = r.condition.model_name.empty() ? "model" : r.condition.model_name;
        if (conditions_per_model[r.condition.model_name] > 1) name += " [" + r.condition.label() + "]";
        result[r.video_id].emplace_back(std::move(name), std::move(output));
    }
    return result;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Video QA benchmark harness", "vidharness"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config_path, "JSON config file");
    auto* replay = app.add_flag("--replay", o.replay, "answer only from cassettes (default)");
    auto* live = app.add_flag("--live", o.live, "call providers and record cassettes");
    replay->excludes(live);
    app.add_option("--conditions", o.conditions, "condition ids to run")->delimiter(',');
    app.add_option("--out-dir", o.out_dir, "output directory");
    app.add_option("--tolerance-s", o.tolerance_s, "keyframe timestamp tolerance in seconds");
    app.add_option("--seed", o.seed, "layout seed");

    auto* ingest = app.add_subcommand("ingest", "probe media files and write an inventory");
    ingest->add_option("paths", o.paths, "files or directories")->required();
    ingest->add_option("--probe", o.probe_command, "probe command template");
    auto* transcribe = app.add_subcommand("transcribe", "run the ASR stage");
    transcribe->add_option("paths", o.paths, "media files (default: dataset videos)");
    auto* evaluate = app.add_subcommand("evaluate", "run the benchmark and write reports");
    auto* graph_cmd = app.add_subcommand("graph", "build comparison graphs from model outputs");
    graph_cmd->add_option("outputs", o.paths, "outputs JSON file")->required();
    auto* report_cmd = app.add_subcommand("report", "rebuild report tables from manifests");
    report_cmd->add_option("--manifest", o.manifests, "manifest files");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return kConfigError;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(o, out, err);
        if (transcribe->parsed()) return cmd_transcribe(o, out, err);
        if (evaluate->parsed()) return cmd_evaluate(o, out, err);
        if (graph_cmd->parsed()) return cmd_graph(o, out, err);
        if (report_cmd->parsed()) return cmd_report(o, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    }
    return kConfigError;
}

}  // namespace vidharness::cli
