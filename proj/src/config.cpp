#include "vidharness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace vidharness::config {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path, const char* what) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError(std::string("cannot read ") + what + " " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        return nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string(what) + " " + path.string() + " is not valid JSON: " + e.what());
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string template_value(const nlohmann::json& v, const fs::path& base, const char* name) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_object() && v.contains("file")) {
        const auto path = resolve(base, v.at("file").get<std::string>());
        std::ifstream f(path, std::ios::binary);
        if (!f) throw ConfigError(std::string("prompt file for ") + name + " not found: " + path.string());
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }
    throw ConfigError(std::string("prompt ") + name + " must be a string or {\"file\": path}");
}

void require_exists(const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw ConfigError(std::string(what) + " does not exist: " + p.string());
}

}  // namespace

HarnessConfig parse_config(const nlohmann::json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    HarnessConfig cfg;
    try {
        if (!j.contains("dataset")) throw ConfigError("config is missing 'dataset'");
        cfg.dataset = resolve(base_dir, j.at("dataset").get<std::string>());
        require_exists(cfg.dataset, "dataset");

        cfg.media_dir = resolve(base_dir, j.value("media_dir", "media"));
        cfg.cassette_dir = resolve(base_dir, j.value("cassette_dir", "cassettes"));
        cfg.frame_cache_dir = resolve(base_dir, j.value("frame_cache_dir", "frames"));
        if (const auto a = j.value("audio_cache_dir", std::string()); !a.empty()) {
            cfg.audio_cache_dir = resolve(base_dir, a);
        }
        cfg.output_dir = resolve(base_dir, j.value("output_dir", "out"));
        if (j.contains("annotations")) {
            cfg.annotations = resolve(base_dir, j.at("annotations").get<std::string>());
            require_exists(*cfg.annotations, "annotations");
        }

        nlohmann::json provider_list = j.value("providers", nlohmann::json::array());
        if (provider_list.is_string()) {
            const auto p = resolve(base_dir, provider_list.get<std::string>());
            require_exists(p, "providers file");
            provider_list = read_json(p, "providers file");
            if (provider_list.is_object() && provider_list.contains("providers")) {
                provider_list = provider_list.at("providers");
            }
        }
        if (!provider_list.is_array()) throw ConfigError("'providers' must be an array or a file path");
        std::set<std::string> ids;
        for (const auto& p : provider_list) {
            auto pc = providers::provider_config_from_json(p);
            if (!ids.insert(pc.id).second) throw ConfigError("duplicate provider id " + pc.id);
            cfg.providers.push_back(std::move(pc));
        }

        if (j.contains("tools")) {
            const auto& t = j.at("tools");
            cfg.tools.probe = t.value("probe", cfg.tools.probe);
            cfg.tools.extract_frame = t.value("extract_frame", cfg.tools.extract_frame);
            cfg.tools.extract_audio = t.value("extract_audio", cfg.tools.extract_audio);
        }

        const auto roles = j.value("roles", nlohmann::json::object());
        cfg.vlm_provider = roles.value("vlm", "");
        cfg.asr_provider = roles.value("asr", "");
        cfg.llm_provider = roles.value("llm", "");
        if (roles.contains("vlm_by_model")) {
            cfg.vlm_provider_by_model = roles.at("vlm_by_model").get<std::map<std::string, std::string>>();
        }
        auto check_role = [&ids](const std::string& id, const char* role) {
            if (!id.empty() && ids.count(id) == 0) {
                throw ConfigError(std::string("role ") + role + " names unknown provider " + id);
            }
        };
        check_role(cfg.vlm_provider, "vlm");
        check_role(cfg.asr_provider, "asr");
        check_role(cfg.llm_provider, "llm");
        for (const auto& [model, id] : cfg.vlm_provider_by_model) check_role(id, "vlm_by_model");

        if (!j.contains("conditions") || !j.at("conditions").is_array() || j.at("conditions").empty()) {
            throw ConfigError("config needs a non-empty 'conditions' array");
        }
        std::set<std::string> condition_ids;
        for (const auto& c : j.at("conditions")) {
            NamedCondition nc;
            nc.tag = providers::condition_from_json(c);
            nc.id = c.value("id", nc.tag.label());
            if (!condition_ids.insert(nc.id).second) throw ConfigError("duplicate condition id " + nc.id);
            cfg.conditions.push_back(std::move(nc));
        }

        if (j.contains("tasks")) {
            cfg.tasks.clear();
            for (const auto& t : j.at("tasks")) {
                cfg.tasks.push_back(benchmark::request_kind_from_string(t.get<std::string>()));
            }
            if (cfg.tasks.empty()) throw ConfigError("'tasks' must not be empty");
        }

        if (j.contains("prompts")) {
            const auto& p = j.at("prompts");
            if (p.contains("mcq")) cfg.mcq_template = template_value(p.at("mcq"), base_dir, "mcq");
            if (p.contains("summary")) cfg.summary_template = template_value(p.at("summary"), base_dir, "summary");
            if (p.contains("refine")) cfg.refine_template = template_value(p.at("refine"), base_dir, "refine");
        }

        cfg.tolerance_s = j.value("tolerance_s", cfg.tolerance_s);
        if (cfg.tolerance_s < 0) throw ConfigError("tolerance_s must be non-negative");

        if (j.contains("layout")) {
            const auto& l = j.at("layout");
            cfg.layout.C = l.value("C", cfg.layout.C);
            cfg.layout.area_A = l.value("area_A", cfg.layout.area_A);
            cfg.layout.seed = l.value("seed", cfg.layout.seed);
            cfg.layout.cooling = l.value("cooling", cfg.layout.cooling);
            if (l.contains("iterations")) cfg.layout.iterations = l.at("iterations").get<int>();
            if (l.contains("initial_temperature")) {
                cfg.layout.initial_temperature = l.at("initial_temperature").get<double>();
            }
        }
        cfg.graph_center = j.value("graph_center", cfg.graph_center);
        cfg.workers = j.value("workers", cfg.workers);
        cfg.max_in_flight = j.value("max_in_flight", cfg.max_in_flight);
        if (cfg.workers == 0 || cfg.max_in_flight == 0) throw ConfigError("workers and max_in_flight must be positive");

        if (j.contains("headline")) {
            const auto& h = j.at("headline");
            cfg.headline = Headline{h.at("without").get<double>(), h.at("with").get<double>(),
                                    h.value("tolerance", 0.05)};
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    return cfg;
}

HarnessConfig load_config(const fs::path& path) {
    const auto j = read_json(path, "config");
    auto cfg = parse_config(j, fs::absolute(path).parent_path());
    cfg.source = path;
    return cfg;
}

void select_conditions(HarnessConfig& cfg, const std::vector<std::string>& ids) {
    if (ids.empty()) return;
    std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<NamedCondition> kept;
    for (auto& c : cfg.conditions) {
        if (wanted.erase(c.id) > 0) kept.push_back(std::move(c));
    }
    if (!wanted.empty()) throw ConfigError("unknown condition id " + *wanted.begin());
    cfg.conditions = std::move(kept);
}

std::optional<fs::path> find_media(const fs::path& media_dir, const std::string& video_id) {
    static const char* kExtensions[] = {".mp4", ".m4v", ".mov", ".qt", ".webm", ".avi", ".wmv",
                                        ".mpg", ".mpeg", ".mpe", ".3gp", ".3g2", ".mp3", ".wav", ".m4a", ".flac"};
    for (const char* ext : kExtensions) {
        auto p = media_dir / (video_id + ext);
        if (fs::is_regular_file(p)) return p;
    }
    return std::nullopt;
}

std::vector<providers::ConditionTag> condition_tags(const HarnessConfig& cfg) {
    std::vector<providers::ConditionTag> out;
    for (const auto& c : cfg.conditions) out.push_back(c.tag);
    return out;
}

}  // namespace vidharness::config
