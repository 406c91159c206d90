#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vidharness/benchmark.hpp"
#include "vidharness/errors.hpp"
#include "vidharness/knowledge_graph.hpp"
#include "vidharness/media.hpp"
#include "vidharness/providers.hpp"

namespace vidharness::config {

struct NamedCondition {
    std::string id;
    providers::ConditionTag tag;
};

/// Headline numbers quoted alongside a per-model table (without -> with),
/// checked against the computed average.
struct Headline {
    double without_value = 0.0;
    double with_value = 0.0;
    double tolerance = 0.05;
};

struct HarnessConfig {
    std::filesystem::path source;  // the config file itself
    std::filesystem::path dataset;
    std::filesystem::path media_dir;
    std::filesystem::path cassette_dir;
    std::filesystem::path frame_cache_dir;
    std::filesystem::path audio_cache_dir;
    std::filesystem::path output_dir;
    std::optional<std::filesystem::path> annotations;
    std::vector<providers::ProviderConfig> providers;
    media::ToolCommands tools;
    std::string vlm_provider;
    std::map<std::string, std::string> vlm_provider_by_model;
    std::string asr_provider;
    std::string llm_provider;
    std::vector<NamedCondition> conditions;
    std::vector<benchmark::RequestKind> tasks{benchmark::RequestKind::mcq};
    std::string mcq_template = benchmark::kDefaultMcqTemplate;
    std::string summary_template = providers::kSummaryPromptQwen;
    std::string refine_template = providers::kRefinePrompt;
    std::int64_t tolerance_s = 2;
    graph::LayoutParams layout;
    std::string graph_center = graph::kVideoSummaryNode;
    std::size_t workers = 4;
    std::size_t max_in_flight = 4;
    std::optional<Headline> headline;
};

/// Reads a JSON config. Relative paths resolve against the config file's
/// directory. "providers" is either an array or a path to a JSON file
/// holding one. Throws ConfigError for missing or malformed entries and for
/// referenced inputs that do not exist.
HarnessConfig load_config(const std::filesystem::path& path);
HarnessConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Keeps only the named conditions, in config order. Throws ConfigError on
/// an unknown id.
void select_conditions(HarnessConfig& cfg, const std::vector<std::string>& ids);

/// Media file for a video id: the first supported file named <video_id>.*
/// in media_dir, in extension order.
std::optional<std::filesystem::path> find_media(const std::filesystem::path& media_dir,
                                                const std::string& video_id);

std::vector<providers::ConditionTag> condition_tags(const HarnessConfig& cfg);

}  // namespace vidharness::config
