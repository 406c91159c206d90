#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "vidharness/media.hpp"
#include "vidharness/parsing.hpp"
#include "vidharness/providers.hpp"

namespace vidharness::benchmark {

enum class DurationClass { short_video, medium_video, long_video };

std::string_view to_string(DurationClass d);
/// Accepts "short"/"medium"/"long" in any case (with optional "-term"),
/// or a number of seconds.
DurationClass duration_class_from_json(const nlohmann::json& value);

/// One Video-MME question.
struct BenchmarkItem {
    std::string video_id;
    DurationClass duration_class = DurationClass::short_video;
    std::string domain;
    std::string sub_category;
    std::string url;
    std::string youtube_id;  // "videoID", optional
    std::string question_id;
    std::string task_type;
    std::string question;
    std::array<std::string, 4> options;  // indexed by letter A..D
    parsing::AnswerLetter answer = parsing::AnswerLetter::A;
};

/// Parses one raw record. Throws SchemaError.
BenchmarkItem item_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BenchmarkItem& item);

/// Loads a JSON array or JSON-lines file of Video-MME records and checks
/// question_id uniqueness. Throws SchemaError / IoError.
std::vector<BenchmarkItem> load_dataset(const std::filesystem::path& path);
std::vector<BenchmarkItem> parse_dataset(std::string_view text);

inline const std::string kDefaultMcqTemplate =
    "{transcript}Select the best answer to the following multiple-choice question based on the "
    "video. Respond with only the letter (A, B, C, or D) of the correct option.\n"
    "Question: {question}\nOptions:\n{options}\nThe best answer is:";

/// Renders options as "A. ...\nB. ...". The transcript block goes to
/// `{transcript}` (or in front when the template has no such placeholder)
/// and only when `with_transcript` holds and the transcript is non-empty.
/// Throws TemplateError when {question} or {options} is missing.
std::string build_question_prompt(const BenchmarkItem& item, const providers::Transcript* transcript,
                                  const std::string& prompt_template, bool with_transcript);

/// Same transcript-block rules for free-form (summary) prompts.
std::string with_transcript_block(const std::string& prompt_template, const providers::Transcript* transcript,
                                  bool with_transcript);

enum class RequestKind { mcq, summary_keyframes };
enum class Outcome { answered_correct, answered_wrong, unanswered, invalid_output, oom };

std::string_view to_string(RequestKind k);
std::string_view to_string(Outcome o);
RequestKind request_kind_from_string(std::string_view s);
Outcome outcome_from_string(std::string_view s);

using Parsed = std::variant<std::monostate, parsing::ParsedVideoOutput, parsing::McqAnswer>;

struct RunRecord {
    std::string item_ref;  // question_id (mcq) or video_id (summary_keyframes)
    std::string video_id;
    providers::ConditionTag condition;
    RequestKind request_kind = RequestKind::mcq;
    providers::ModelResponse response;
    Parsed parsed;
    Outcome outcome = Outcome::unanswered;
    std::string error;  // pipeline failure before/around the model call
    std::int64_t wall_ms = 0;  // not persisted in the manifest
};

/// Outcome as a pure function of the stored response. For mcq records
/// `answer` is the item's key; summary records ignore it.
struct Classified {
    Parsed parsed;
    Outcome outcome = Outcome::unanswered;
};
Classified classify(RequestKind kind, const providers::ModelResponse& response,
                    std::optional<parsing::AnswerLetter> answer);

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

struct RunManifest {
    std::string dataset_path;
    std::vector<providers::ConditionTag> conditions;
    std::vector<std::string> providers;
    std::vector<RequestKind> tasks{RequestKind::mcq};
    std::string started_at;  // kept out of the persisted manifest
    std::vector<RunRecord> records;
};

/// JSON-lines: a header line followed by one line per record.
std::string serialize_manifest(const RunManifest& m);
RunManifest parse_manifest(std::string_view text);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// Index of `c` within `m.conditions`, or nullopt.
std::optional<std::size_t> condition_index(const RunManifest& m, const providers::ConditionTag& c);

/// Everything run_benchmark needs besides the manifest.
struct RunContext {
    std::vector<BenchmarkItem> items;
    providers::ProviderHub* hub = nullptr;
    const media::MediaTool* tool = nullptr;
    /// video_id -> media file; unresolved videos produce failed records.
    std::function<std::optional<std::filesystem::path>(const BenchmarkItem&)> resolve_media;
    std::filesystem::path frame_cache_dir;
    std::filesystem::path audio_cache_dir;   // empty: send the media file itself to ASR
    std::string vlm_provider;
    /// Per-model override of the VLM provider (ConditionTag::model_name -> id).
    std::map<std::string, std::string> vlm_provider_by_model;
    std::string asr_provider;
    std::string llm_provider;                // empty: no refinement stage
    std::string mcq_template = kDefaultMcqTemplate;
    std::string summary_template = providers::kSummaryPromptQwen;
    std::string refine_template = providers::kRefinePrompt;
    parsing::ParseOptions parse_options;
    std::size_t workers = 4;
};

/// Fills the manifest up to one record per (condition, task, item).
/// Existing records are kept; a completed manifest comes back unchanged.
/// Per-record failures are recorded, never thrown. Records end sorted by
/// (condition order, request kind, item_ref).
RunManifest run_benchmark(RunManifest manifest, const RunContext& context);

/// Number of records a completed manifest holds for these items.
std::size_t expected_record_count(const RunManifest& m, const std::vector<BenchmarkItem>& items);

}  // namespace vidharness::benchmark
