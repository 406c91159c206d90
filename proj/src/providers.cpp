#include "vidharness/providers.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vidharness/errors.hpp"

namespace vidharness::providers {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_fps(double fps) {
    std::ostringstream ss;
    ss << fps;
    return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

Transcript parse_transcript(std::string_view raw) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedProviderOutput(std::string("transcript is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw MalformedProviderOutput("transcript payload is not an object");

    Transcript t;
    if (j.contains("language") && j.at("language").is_string()) {
        t.language = j.at("language").get<std::string>();
    }
    if (!j.contains("segments")) {
        if (j.contains("text") && j.at("text").is_string() &&
            !normalize_whitespace(j.at("text").get<std::string>()).empty()) {
            throw MalformedProviderOutput("transcript has text but no segments");
        }
        return t;
    }
    if (!j.at("segments").is_array()) throw MalformedProviderOutput("'segments' is not an array");

    std::string concatenated;
    for (const auto& s : j.at("segments")) {
        try {
            TranscriptSegment seg;
            seg.id = s.at("id").get<std::int64_t>();
            seg.start_s = s.at("start").get<double>();
            seg.end_s = s.at("end").get<double>();
            seg.text = s.at("text").get<std::string>();
            if (seg.id < 0) throw MalformedProviderOutput("negative segment id");
            if (seg.start_s > seg.end_s) {
                throw MalformedProviderOutput("segment " + std::to_string(seg.id) +
                                              " ends before it starts");
            }
            if (!t.segments.empty()) {
                const auto& prev = t.segments.back();
                if (seg.id <= prev.id || seg.start_s < prev.start_s) {
                    throw MalformedProviderOutput("segments are not ordered by id and start time");
                }
            }
            concatenated += seg.text;
            t.segments.push_back(std::move(seg));
        } catch (const nlohmann::json::exception& e) {
            throw MalformedProviderOutput(std::string("bad segment: ") + e.what());
        }
    }
    t.full_text = normalize_whitespace(concatenated);
    return t;
}

nlohmann::json to_json(const Transcript& transcript) {
    nlohmann::json segments = nlohmann::json::array();
    for (const auto& s : transcript.segments) {
        segments.push_back({{"id", s.id}, {"start", s.start_s}, {"end", s.end_s}, {"text", s.text}});
    }
    nlohmann::json j{{"segments", segments}, {"full_text", transcript.full_text}};
    if (transcript.language) j["language"] = *transcript.language;
    return j;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::asr: return "asr";
        case Modality::vlm: return "vlm";
        case Modality::llm: return "llm";
    }
    return "vlm";
}

std::string_view to_string(Attention a) {
    switch (a) {
        case Attention::sdpa: return "sdpa";
        case Attention::flash_attention: return "flash_attention";
        case Attention::other: return "other";
    }
    return "other";
}

std::string_view to_string(ResponseStatus s) {
    switch (s) {
        case ResponseStatus::ok: return "ok";
        case ResponseStatus::oom: return "oom";
        case ResponseStatus::timeout: return "timeout";
        case ResponseStatus::invalid: return "invalid";
    }
    return "invalid";
}

Modality modality_from_string(std::string_view s) {
    if (s == "asr") return Modality::asr;
    if (s == "vlm") return Modality::vlm;
    if (s == "llm") return Modality::llm;
    throw ConfigError("unknown modality '" + std::string(s) + "'");
}

Attention attention_from_string(std::string_view s) {
    const auto l = lower(s);
    if (l == "sdpa") return Attention::sdpa;
    if (l == "flash_attention" || l == "flashattention" || l == "flash_attention_2") {
        return Attention::flash_attention;
    }
    if (l == "other") return Attention::other;
    throw ConfigError("unknown attention mechanism '" + std::string(s) + "'");
}

ResponseStatus status_from_string(std::string_view s) {
    if (s == "ok") return ResponseStatus::ok;
    if (s == "oom") return ResponseStatus::oom;
    if (s == "timeout") return ResponseStatus::timeout;
    if (s == "invalid") return ResponseStatus::invalid;
    throw MalformedProviderOutput("unknown response status '" + std::string(s) + "'");
}

std::string ConditionTag::label() const {
    std::string name;
    switch (attention) {
        case Attention::sdpa: name = "SDPA"; break;
        case Attention::flash_attention: name = "FlashAttention"; break;
        case Attention::other: name = "Attention"; break;
    }
    name += " (" + format_fps(fps) + " FPS)";
    if (with_transcript) name += " with Audio Transcription";
    return name;
}

nlohmann::json to_json(const ConditionTag& c) {
    return {{"fps", c.fps},
            {"with_transcript", c.with_transcript},
            {"attention", to_string(c.attention)},
            {"gpu", c.gpu},
            {"model_name", c.model_name}};
}

ConditionTag condition_from_json(const nlohmann::json& j) {
    ConditionTag c;
    c.fps = j.at("fps").get<double>();
    c.with_transcript = j.value("with_transcript", false);
    c.attention = attention_from_string(j.value("attention", "sdpa"));
    c.gpu = j.value("gpu", "");
    c.model_name = j.value("model_name", "");
    return c;
}

ModelResponse normalized(ModelResponse response) {
    if (response.status == ResponseStatus::ok && response.raw_text.empty()) {
        response.status = ResponseStatus::invalid;
        if (response.detail.empty()) response.detail = "empty response text";
    }
    if (response.status != ResponseStatus::ok) response.raw_text.clear();
    if (response.latency_ms < 0) response.latency_ms = 0;
    return response;
}

nlohmann::json to_json(const ModelResponse& r) {
    nlohmann::json j{{"raw_text", r.raw_text}, {"latency_ms", r.latency_ms}, {"status", to_string(r.status)}};
    if (!r.detail.empty()) j["detail"] = r.detail;
    return j;
}

ModelResponse response_from_json(const nlohmann::json& j) {
    ModelResponse r;
    r.raw_text = j.value("raw_text", "");
    r.latency_ms = j.value("latency_ms", std::int64_t{0});
    r.status = status_from_string(j.value("status", "invalid"));
    r.detail = j.value("detail", "");
    return normalized(std::move(r));
}

// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

namespace {

nlohmann::json key_material(const ModelRequest& request) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : request.frame_refs) frames.push_back(sha256_file(f));
    return {
        {"provider_id", request.provider_id},
        {"modality", to_string(request.modality)},
        {"prompt", request.prompt},
        {"frames", frames},
        {"audio", request.audio_ref ? sha256_file(*request.audio_ref) : std::string()},
        {"condition", to_json(request.condition)},
    };
}

}  // namespace

std::string cassette_key(const ModelRequest& request) {
    // nlohmann objects are key-sorted, so dump() is canonical.
    return sha256_hex(key_material(request).dump());
}

CassetteStore::CassetteStore(std::filesystem::path directory) : directory_(std::move(directory)) {}

std::filesystem::path CassetteStore::path_for(const std::string& key) const {
    return directory_ / (key + ".json");
}

std::optional<CassetteEntry> CassetteStore::find(const std::string& key) const {
    std::shared_lock lock(mutex_);
    const auto path = path_for(key);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw MalformedProviderOutput("corrupt cassette " + path.string() + ": " + e.what());
    }
    CassetteEntry entry;
    entry.key = j.value("key", key);
    entry.request = j.value("request", nlohmann::json::object());
    entry.response = response_from_json(j.at("response"));
    return entry;
}

bool CassetteStore::append(const CassetteEntry& entry) {
    std::unique_lock lock(mutex_);
    const auto path = path_for(entry.key);
    if (std::filesystem::exists(path)) return false;
    std::filesystem::create_directories(directory_);
    const nlohmann::json j{{"key", entry.key}, {"request", entry.request}, {"response", to_json(entry.response)}};
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
    return true;
}

std::size_t CassetteStore::size() const {
    std::shared_lock lock(mutex_);
    std::error_code ec;
    if (!std::filesystem::is_directory(directory_, ec)) return 0;
    std::size_t n = 0;
    for (const auto& e : std::filesystem::directory_iterator(directory_)) {
        if (e.path().extension() == ".json") ++n;
    }
    return n;
}

// ---------------------------------------------------------------------------

std::string resolve_env_refs(std::string_view text) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto start = text.find("${env:", pos);
        if (start == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        const auto end = text.find('}', start);
        if (end == std::string_view::npos) throw ConfigError("unterminated ${env:...} reference");
        out.append(text.substr(pos, start - pos));
        const std::string name(text.substr(start + 6, end - start - 6));
        const char* value = std::getenv(name.c_str());
        if (value == nullptr) throw ConfigError("environment variable " + name + " is not set");
        out.append(value);
        pos = end + 1;
    }
    return out;
}

ProviderConfig provider_config_from_json(const nlohmann::json& j) {
    ProviderConfig c;
    try {
        c.id = j.at("id").get<std::string>();
        c.modality = modality_from_string(j.at("modality").get<std::string>());
        c.model = j.value("model", c.id);
        c.endpoint = j.value("endpoint", "");
        if (j.contains("auth")) {
            c.auth_header = j.at("auth").value("header", "Authorization");
            c.auth_value = j.at("auth").value("value", "");
        }
        if (j.contains("request")) {
            const auto& r = j.at("request");
            c.prompt_field = r.value("prompt_field", c.prompt_field);
            c.frames_field = r.value("frames_field", c.frames_field);
            c.audio_field = r.value("audio_field", c.audio_field);
            c.model_field = r.value("model_field", c.model_field);
            c.extra_fields = r.value("extra", nlohmann::json::object());
        }
        if (j.contains("response")) {
            const auto& r = j.at("response");
            c.text_pointer = r.value("text_pointer", c.text_pointer);
            c.error_pointer = r.value("error_pointer", c.error_pointer);
        }
        if (j.contains("oom_patterns")) c.oom_patterns = j.at("oom_patterns").get<std::vector<std::string>>();
        c.timeout_s = j.value("timeout_s", c.timeout_s);
        c.retries = j.value("retries", c.retries);
        c.default_template = j.value("prompt_template", "");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("provider entry: ") + e.what());
    }
    if (c.timeout_s <= 0 || c.retries < 0) throw ConfigError("provider " + c.id + ": bad timeout/retries");
    return c;
}

nlohmann::json to_json(const ProviderConfig& c) {
    return {{"id", c.id},
            {"modality", to_string(c.modality)},
            {"model", c.model},
            {"endpoint", c.endpoint},
            {"auth", {{"header", c.auth_header}, {"value", c.auth_value}}},
            {"request",
             {{"prompt_field", c.prompt_field},
              {"frames_field", c.frames_field},
              {"audio_field", c.audio_field},
              {"model_field", c.model_field},
              {"extra", c.extra_fields}}},
            {"response", {{"text_pointer", c.text_pointer}, {"error_pointer", c.error_pointer}}},
            {"oom_patterns", c.oom_patterns},
            {"timeout_s", c.timeout_s},
            {"retries", c.retries},
            {"prompt_template", c.default_template}};
}

bool matches_oom(std::string_view payload, const std::vector<std::string>& patterns) {
    const auto haystack = lower(payload);
    return std::any_of(patterns.begin(), patterns.end(), [&](const std::string& p) {
        return !p.empty() && haystack.find(lower(p)) != std::string::npos;
    });
}

// ---------------------------------------------------------------------------

ProviderHub::ProviderHub(Mode mode, std::filesystem::path cassette_dir, std::size_t max_in_flight)
    : mode_(mode),
      store_(std::move(cassette_dir)),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_in_flight, 1, 1024))) {}

void ProviderHub::add_provider(ProviderConfig config) {
    std::lock_guard lock(registry_mutex_);
    const auto id = config.id;
    if (configs_.count(id) != 0) throw ConfigError("duplicate provider id '" + id + "'");
    configs_.emplace(id, std::move(config));
}

void ProviderHub::set_backend(const std::string& provider_id, std::shared_ptr<Backend> backend) {
    std::lock_guard lock(registry_mutex_);
    backends_[provider_id] = std::move(backend);
}

const ProviderConfig& ProviderHub::provider(const std::string& id) const {
    std::lock_guard lock(registry_mutex_);
    auto it = configs_.find(id);
    if (it == configs_.end()) throw ConfigError("unknown provider '" + id + "'");
    return it->second;
}

bool ProviderHub::has_provider(const std::string& id) const {
    std::lock_guard lock(registry_mutex_);
    return configs_.count(id) != 0;
}

std::shared_ptr<Backend> ProviderHub::backend_for(const std::string& provider_id) {
    std::lock_guard lock(registry_mutex_);
    if (auto it = backends_.find(provider_id); it != backends_.end()) return it->second;
    auto cfg = configs_.find(provider_id);
    if (cfg == configs_.end()) throw ProviderUnavailable("no provider '" + provider_id + "'");
    if (cfg->second.endpoint.empty()) {
        throw ProviderUnavailable("provider '" + provider_id + "' has no endpoint");
    }
    auto backend = std::make_shared<HttpBackend>(cfg->second);
    backends_.emplace(provider_id, backend);
    return backend;
}

ModelResponse ProviderHub::call(const ModelRequest& request) {
    const auto key = cassette_key(request);
    if (mode_ == Mode::replay) {
        auto entry = store_.find(key);
        if (!entry) {
            throw ReplayMiss("no cassette entry for " + request.provider_id + " " +
                             std::string(to_string(request.modality)) + " request " + key);
        }
        return entry->response;
    }

    auto backend = backend_for(request.provider_id);
    ModelResponse response;
    {
        in_flight_.acquire();
        struct Release {
            std::counting_semaphore<1024>& s;
            ~Release() { s.release(); }
        } release{in_flight_};
        response = normalized(backend->invoke(request));
    }

    CassetteEntry entry;
    entry.key = key;
    entry.request = key_material(request);
    entry.request["frame_count"] = request.frame_refs.size();
    entry.response = response;
    store_.append(entry);
    return response;
}

Transcript ProviderHub::transcribe(const media::MediaAsset& asset, const std::string& provider_id,
                                   const std::optional<std::filesystem::path>& audio_path) {
    if (asset.kind != media::MediaKind::audio && !asset.has_audio_stream) {
        throw std::invalid_argument(asset.path.string() + " has no audio stream");
    }
    ModelRequest request;
    request.provider_id = provider_id;
    request.modality = Modality::asr;
    request.audio_ref = audio_path.value_or(asset.path);
    // Transcripts do not depend on the VLM condition; a neutral tag lets all
    // conditions share one cassette entry.
    request.condition = ConditionTag{0.0, false, Attention::other, "", ""};
    const auto response = call(request);
    if (response.status != ResponseStatus::ok) {
        throw ProviderUnavailable("transcription of " + asset.path.string() + " returned " +
                                  std::string(to_string(response.status)) +
                                  (response.detail.empty() ? "" : ": " + response.detail));
    }
    return parse_transcript(response.raw_text);
}

ModelResponse ProviderHub::describe_video(const std::vector<std::filesystem::path>& frames,
                                          const std::string& prompt, const std::string& provider_id,
                                          const ConditionTag& condition) {
    if (frames.empty()) throw std::invalid_argument("describe_video needs at least one frame");
    if (prompt.empty()) throw std::invalid_argument("describe_video needs a prompt");
    ModelRequest request;
    request.provider_id = provider_id;
    request.modality = Modality::vlm;
    request.prompt = prompt;
    request.frame_refs = frames;
    request.condition = condition;
    return call(request);
}

std::string render_refine_prompt(const std::string& prompt_template, const std::string& vlm_text,
                                 const Transcript& transcript) {
    if (prompt_template.find("{summary}") == std::string::npos) {
        throw TemplateError("refinement template lacks {summary}");
    }
    const std::string block =
        transcript.empty() ? std::string() : "Audio transcript:\n" + transcript.full_text + "\n\n";
    std::string out = prompt_template;
    auto replace_all = [&out](const std::string& key, const std::string& value) {
        for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size())) {
            out.replace(pos, key.size(), value);
        }
    };
    replace_all("{transcript}", block);
    replace_all("{summary}", vlm_text);
    return out;
}

ModelResponse ProviderHub::refine_summary(const std::string& vlm_text, const Transcript& transcript,
                                          const std::string& prompt_template,
                                          const std::string& provider_id) {
    if (vlm_text.empty()) throw std::invalid_argument("refine_summary needs VLM text");
    ModelRequest request;
    request.provider_id = provider_id;
    request.modality = Modality::llm;
    request.prompt = render_refine_prompt(prompt_template, vlm_text, transcript);
    request.condition = ConditionTag{0.0, !transcript.empty(), Attention::other, "", ""};
    return call(request);
}

// ---------------------------------------------------------------------------

const std::string kSummaryPromptGpt4 =
    "Could you please provide a summary of this video based on sample frames focusing on the "
    "content and workflow rather than specific logos or the color of text? After summarizing, "
    "list the key frames with brief captions in the format (00:00, caption). Ensure the analysis "
    "is accurate and avoid including any assumptions or extrapolations. Use an expert domain "
    "perspective to enhance relevance and precision. Do not repeat sentences or focus on QR codes "
    "or logos.";

const std::string kSummaryPromptQwen =
    "Could you please provide a summary of this video, focusing on the content and workflow rather "
    "than specific logos or the color of text? After summarizing, list the key frames with brief "
    "captions in the format (00:00, caption). Ensure the analysis is accurate and avoid including "
    "any assumptions or extrapolations. Use an expert domain perspective to enhance relevance and "
    "precision. Do not repeat sentences or focus on QR codes or logos.";

const std::string kSummaryPromptGemini = kSummaryPromptQwen;

const std::string kRefinePrompt =
    "Improve the following video summary using the audio transcript where it adds facts. Keep the "
    "key frame list in the format (00:00, caption).\n\n{transcript}Summary:\n{summary}";

}  // namespace vidharness::providers
