#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vidharness/media.hpp"

namespace vidharness::providers {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct TranscriptSegment {
    std::int64_t id = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    std::string text;

    friend bool operator==(const TranscriptSegment&, const TranscriptSegment&) = default;
};

struct Transcript {
    std::vector<TranscriptSegment> segments;
    std::string full_text;
    std::optional<std::string> language;

    bool empty() const { return full_text.empty(); }
    friend bool operator==(const Transcript&, const Transcript&) = default;
};

/// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

/// Parses an ASR payload in the Whisper `verbose_json` shape
/// (`{"segments": [{"id", "start", "end", "text"}], "language"}`).
/// full_text is always re-assembled from the segments.
/// Throws MalformedProviderOutput.
Transcript parse_transcript(std::string_view raw);

nlohmann::json to_json(const Transcript& transcript);

enum class Modality { asr, vlm, llm };
enum class Attention { sdpa, flash_attention, other };
enum class ResponseStatus { ok, oom, timeout, invalid };

std::string_view to_string(Modality m);
std::string_view to_string(Attention a);
std::string_view to_string(ResponseStatus s);
Modality modality_from_string(std::string_view s);
Attention attention_from_string(std::string_view s);
ResponseStatus status_from_string(std::string_view s);

/// One cell of the experiment matrix.
struct ConditionTag {
    double fps = 1.0;
    bool with_transcript = false;
    Attention attention = Attention::sdpa;
    std::string gpu;
    std::string model_name;

    /// "SDPA (0.1 FPS)", with " with Audio Transcription" appended when the
    /// transcript is part of the prompt.
    std::string label() const;

    friend bool operator==(const ConditionTag&, const ConditionTag&) = default;
};

nlohmann::json to_json(const ConditionTag& c);
ConditionTag condition_from_json(const nlohmann::json& j);

struct ModelRequest {
    std::string provider_id;
    Modality modality = Modality::vlm;
    std::string prompt;
    std::vector<std::filesystem::path> frame_refs;
    std::optional<std::filesystem::path> audio_ref;
    ConditionTag condition;
};

struct ModelResponse {
    std::string raw_text;
    std::int64_t latency_ms = 0;
    ResponseStatus status = ResponseStatus::invalid;
    /// Provider error payload or transport message, empty on success.
    std::string detail;

    friend bool operator==(const ModelResponse&, const ModelResponse&) = default;
};

/// Enforces status=ok <=> raw_text non-empty: an ok response with empty
/// text becomes invalid, a failed one drops any text.
ModelResponse normalized(ModelResponse response);

nlohmann::json to_json(const ModelResponse& r);
ModelResponse response_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Cassette store
// ---------------------------------------------------------------------------

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Key over (provider_id, modality, prompt, ordered frame-content hashes,
/// audio-content hash, condition). File paths do not enter the key.
std::string cassette_key(const ModelRequest& request);

struct CassetteEntry {
    std::string key;
    nlohmann::json request;
    ModelResponse response;
};

/// Append-only directory of JSON records, one `<key>.json` per request.
/// Reads may run concurrently; appends are serialized and the first record
/// for a key wins.
class CassetteStore {
public:
    explicit CassetteStore(std::filesystem::path directory);

    std::optional<CassetteEntry> find(const std::string& key) const;

    /// Persists the entry unless the key is already present. Returns true
    /// if a new record was written.
    bool append(const CassetteEntry& entry);

    std::size_t size() const;
    const std::filesystem::path& directory() const { return directory_; }

private:
    std::filesystem::path path_for(const std::string& key) const;

    std::filesystem::path directory_;
    mutable std::shared_mutex mutex_;
};

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

/// Field mapping and transport settings for one HTTP JSON provider.
struct ProviderConfig {
    std::string id;
    Modality modality = Modality::vlm;
    std::string model;
    std::string endpoint;                // "http://host:port/path"
    std::string auth_header;             // e.g. "Authorization"
    std::string auth_value;              // may hold ${env:NAME} references
    std::string prompt_field = "prompt";
    std::string frames_field = "images";  // base64 strings
    std::string audio_field = "audio";    // base64 string
    std::string model_field = "model";
    nlohmann::json extra_fields = nlohmann::json::object();
    std::string text_pointer = "/text";   // JSON pointer into the reply; "" = whole body
    std::string error_pointer = "/error";
    std::vector<std::string> oom_patterns{"out of memory", "OutOfMemoryError", "CUDA OOM"};
    int timeout_s = 300;
    int retries = 1;
    std::string default_template;         // prompt template shipped for this provider
};

ProviderConfig provider_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProviderConfig& c);

/// Replaces `${env:NAME}` references with the environment value. Throws
/// ConfigError when a referenced variable is unset.
std::string resolve_env_refs(std::string_view text);

class Backend {
public:
    virtual ~Backend() = default;
    /// Returns an in-band response for model-side outcomes (ok, oom,
    /// timeout, invalid). Throws ProviderUnavailable on transport failure.
    virtual ModelResponse invoke(const ModelRequest& request) = 0;
};

/// Maps provider error text onto oom using the configured patterns
/// (case-insensitive substring match).
bool matches_oom(std::string_view payload, const std::vector<std::string>& patterns);

/// cpp-httplib based JSON POST adapter.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(ProviderConfig config);
    ModelResponse invoke(const ModelRequest& request) override;

    /// Request body this backend would send (exposed for inspection).
    nlohmann::json build_body(const ModelRequest& request) const;

    /// Turns an HTTP status + body into a response per the field mapping.
    ModelResponse interpret(int http_status, const std::string& body) const;

private:
    ProviderConfig config_;
};

// ---------------------------------------------------------------------------
// Client hub
// ---------------------------------------------------------------------------

enum class Mode { replay, live };

/// Shared entry point for every model call. Replay mode answers only from
/// the cassette store; live mode calls the backend and persists the
/// response before returning it.
class ProviderHub {
public:
    ProviderHub(Mode mode, std::filesystem::path cassette_dir, std::size_t max_in_flight = 4);

    void add_provider(ProviderConfig config);
    /// Installs a backend explicitly (tests, custom transports).
    void set_backend(const std::string& provider_id, std::shared_ptr<Backend> backend);

    const ProviderConfig& provider(const std::string& id) const;
    bool has_provider(const std::string& id) const;
    Mode mode() const { return mode_; }
    CassetteStore& store() { return store_; }

    ModelResponse call(const ModelRequest& request);

    /// ASR stage. The audio reference is the asset file itself unless an
    /// extracted audio path is supplied.
    Transcript transcribe(const media::MediaAsset& asset, const std::string& provider_id,
                          const std::optional<std::filesystem::path>& audio_path = std::nullopt);

    ModelResponse describe_video(const std::vector<std::filesystem::path>& frames,
                                 const std::string& prompt, const std::string& provider_id,
                                 const ConditionTag& condition);

    ModelResponse refine_summary(const std::string& vlm_text, const Transcript& transcript,
                                 const std::string& prompt_template,
                                 const std::string& provider_id);

private:
    std::shared_ptr<Backend> backend_for(const std::string& provider_id);

    Mode mode_;
    CassetteStore store_;
    std::counting_semaphore<1024> in_flight_;
    mutable std::mutex registry_mutex_;
    std::map<std::string, ProviderConfig> configs_;
    std::map<std::string, std::shared_ptr<Backend>> backends_;
};

/// Renders a refinement prompt. `{summary}` receives the VLM text and
/// `{transcript}` a transcript block, which is empty when the transcript
/// is empty. Throws TemplateError without `{summary}`.
std::string render_refine_prompt(const std::string& prompt_template, const std::string& vlm_text,
                                 const Transcript& transcript);

// Prompt templates shipped as defaults.
extern const std::string kSummaryPromptGpt4;
extern const std::string kSummaryPromptQwen;
extern const std::string kSummaryPromptGemini;
extern const std::string kRefinePrompt;

}  // namespace vidharness::providers
