#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "vidharness/benchmark.hpp"
#include "vidharness/knowledge_graph.hpp"
#include "vidharness/scoring.hpp"

namespace vidharness::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kBadInput = 3,
    kProviderFailure = 4,
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Graph-command input: {"videos": {"<video_id>": [{"model", "raw_text"} or
/// {"model", "summary", "keyframes"}]}}. Model order is kept. An empty
/// document yields no videos.
std::map<std::string, scoring::ModelOutputs> parse_outputs_file(const std::filesystem::path& path);

/// Summary records of a manifest grouped per video. Outputs are keyed by
/// model name, or "<model> [<condition label>]" when one model runs under
/// several conditions.
std::map<std::string, scoring::ModelOutputs> outputs_from_records(const benchmark::RunManifest& manifest);

}  // namespace vidharness::cli
