#include "vidharness/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "vidharness/errors.hpp"

namespace vidharness::benchmark {

namespace {

using providers::ModelResponse;
using providers::ResponseStatus;
using providers::Transcript;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

// Ids may arrive as JSON integers; free text must be a string.
std::string string_field(const nlohmann::json& j, const char* key, bool required = true, bool integer_ok = false) {
    if (!j.contains(key) || j.at(key).is_null()) {
        if (required) throw SchemaError(std::string("missing field '") + key + "'");
        return {};
    }
    const auto& v = j.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (integer_ok && v.is_number_integer()) return std::to_string(v.get<long long>());
    throw SchemaError(std::string("field '") + key + "' is not a string");
}

void replace_all(std::string& s, const std::string& key, const std::string& value) {
    for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
        s.replace(pos, key.size(), value);
    }
}

std::string transcript_block(const Transcript* transcript, bool with_transcript) {
    if (!with_transcript || transcript == nullptr || transcript->empty()) return {};
    return "Audio transcript of the video:\n" + transcript->full_text + "\n\n";
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string_view to_string(DurationClass d) {
    switch (d) {
        case DurationClass::short_video: return "short";
        case DurationClass::medium_video: return "medium";
        case DurationClass::long_video: return "long";
    }
    return "short";
}

DurationClass duration_class_from_json(const nlohmann::json& value) {
    if (value.is_number()) {
        const double s = value.get<double>();
        if (s < 0) throw SchemaError("negative duration");
        if (s <= 120.0) return DurationClass::short_video;
        if (s <= 900.0) return DurationClass::medium_video;
        return DurationClass::long_video;
    }
    if (!value.is_string()) throw SchemaError("duration is neither a class name nor seconds");
    auto s = lower(trim(value.get<std::string>()));
    if (const auto dash = s.find("-term"); dash != std::string::npos) s.erase(dash);
    if (s == "short") return DurationClass::short_video;
    if (s == "medium") return DurationClass::medium_video;
    if (s == "long") return DurationClass::long_video;
    throw SchemaError("unknown duration class '" + value.get<std::string>() + "'");
}

BenchmarkItem item_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("record is not an object");
    BenchmarkItem item;
    item.video_id = string_field(j, "video_id", true, true);
    if (!j.contains("duration")) throw SchemaError("missing field 'duration'");
    item.duration_class = duration_class_from_json(j.at("duration"));
    item.domain = string_field(j, "domain");
    item.sub_category = string_field(j, "sub_category");
    item.url = string_field(j, "url", false);
    item.youtube_id = string_field(j, "videoID", false);
    item.question_id = string_field(j, "question_id", true, true);
    item.task_type = string_field(j, "task_type");
    item.question = string_field(j, "question");

    if (!j.contains("options")) throw SchemaError("missing field 'options' in " + item.question_id);
    const auto& options = j.at("options");
    std::array<bool, 4> seen{};
    auto put = [&](char letter, std::string text) {
        const auto l = parsing::letter_from_char(letter);
        if (!l) throw SchemaError("option letter '" + std::string(1, letter) + "' outside A-D in " + item.question_id);
        const auto idx = static_cast<std::size_t>(*l);
        if (seen[idx]) throw SchemaError("duplicate option " + std::string(1, letter) + " in " + item.question_id);
        seen[idx] = true;
        item.options[idx] = trim(text);
    };
    if (options.is_array()) {
        if (options.size() != 4) {
            throw SchemaError(item.question_id + " has " + std::to_string(options.size()) + " options, expected 4");
        }
        for (const auto& o : options) {
            if (!o.is_string()) throw SchemaError("option is not a string in " + item.question_id);
            const auto text = trim(o.get<std::string>());
            // "A. text", "A) text", "(A) text"
            std::size_t i = 0;
            if (!text.empty() && text[0] == '(') ++i;
            if (i + 1 >= text.size() || (text[i + 1] != '.' && text[i + 1] != ')')) {
                throw SchemaError("option '" + text + "' lacks a letter prefix in " + item.question_id);
            }
            put(text[i], text.substr(i + 2));
        }
    } else if (options.is_object()) {
        if (options.size() != 4) {
            throw SchemaError(item.question_id + " has " + std::to_string(options.size()) + " options, expected 4");
        }
        for (const auto& [k, v] : options.items()) {
            if (k.size() != 1 || !v.is_string()) throw SchemaError("bad option entry in " + item.question_id);
            put(k[0], v.get<std::string>());
        }
    } else {
        throw SchemaError("options must be a list or an object in " + item.question_id);
    }

    const auto answer = trim(string_field(j, "answer"));
    if (answer.size() != 1 || !parsing::letter_from_char(answer[0])) {
        throw SchemaError("answer '" + answer + "' is not one of the options in " + item.question_id);
    }
    item.answer = *parsing::letter_from_char(answer[0]);
    return item;
}

nlohmann::json to_json(const BenchmarkItem& item) {
    nlohmann::json options = nlohmann::json::array();
    for (std::size_t i = 0; i < 4; ++i) {
        options.push_back(std::string(1, static_cast<char>('A' + i)) + ". " + item.options[i]);
    }
    nlohmann::json j{{"video_id", item.video_id},
                     {"duration", to_string(item.duration_class)},
                     {"domain", item.domain},
                     {"sub_category", item.sub_category},
                     {"url", item.url},
                     {"question_id", item.question_id},
                     {"task_type", item.task_type},
                     {"question", item.question},
                     {"options", options},
                     {"answer", std::string(1, parsing::to_char(item.answer))}};
    if (!item.youtube_id.empty()) j["videoID"] = item.youtube_id;
    return j;
}

std::vector<BenchmarkItem> parse_dataset(std::string_view text) {
    std::vector<nlohmann::json> raw;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    try {
        if (text[first] == '[') {
            for (auto& r : nlohmann::json::parse(text)) raw.push_back(std::move(r));
        } else {
            std::size_t start = 0;
            std::size_t line_no = 0;
            while (start < text.size()) {
                auto end = text.find('\n', start);
                if (end == std::string_view::npos) end = text.size();
                ++line_no;
                const auto line = trim(text.substr(start, end - start));
                if (!line.empty()) raw.push_back(nlohmann::json::parse(line));
                start = end + 1;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("dataset is not valid JSON / JSON-lines: ") + e.what());
    }

    std::vector<BenchmarkItem> items;
    items.reserve(raw.size());
    std::set<std::string> ids;
    for (const auto& r : raw) {
        auto item = item_from_json(r);
        if (!ids.insert(item.question_id).second) throw SchemaError("duplicate question_id " + item.question_id);
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<BenchmarkItem> load_dataset(const std::filesystem::path& path) { return parse_dataset(read_text(path)); }

std::string with_transcript_block(const std::string& prompt_template, const Transcript* transcript,
                                  bool with_transcript) {
    const auto block = transcript_block(transcript, with_transcript);
    std::string out = prompt_template;
    if (out.find("{transcript}") != std::string::npos) {
        replace_all(out, "{transcript}", block);
    } else {
        out = block + out;
    }
    return out;
}

std::string build_question_prompt(const BenchmarkItem& item, const Transcript* transcript,
                                  const std::string& prompt_template, bool with_transcript) {
    if (prompt_template.find("{question}") == std::string::npos ||
        prompt_template.find("{options}") == std::string::npos) {
        throw TemplateError("question template needs {question} and {options}");
    }
    std::string options;
    for (std::size_t i = 0; i < 4; ++i) {
        if (i > 0) options += '\n';
        options += std::string(1, static_cast<char>('A' + i)) + ". " + item.options[i];
    }
    // Substitute the transcript first so its text never gets placeholder
    // treatment.
    std::string out = prompt_template;
    replace_all(out, "{question}", "\x01Q\x01");
    replace_all(out, "{options}", "\x01O\x01");
    out = with_transcript_block(out, transcript, with_transcript);
    replace_all(out, "\x01Q\x01", item.question);
    replace_all(out, "\x01O\x01", options);
    return out;
}

std::string_view to_string(RequestKind k) { return k == RequestKind::mcq ? "mcq" : "summary_keyframes"; }

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::answered_correct: return "answered_correct";
        case Outcome::answered_wrong: return "answered_wrong";
        case Outcome::unanswered: return "unanswered";
        case Outcome::invalid_output: return "invalid_output";
        case Outcome::oom: return "oom";
    }
    return "unanswered";
}

RequestKind request_kind_from_string(std::string_view s) {
    if (s == "mcq") return RequestKind::mcq;
    if (s == "summary_keyframes") return RequestKind::summary_keyframes;
    throw SchemaError("unknown request kind '" + std::string(s) + "'");
}

Outcome outcome_from_string(std::string_view s) {
    for (auto o : {Outcome::answered_correct, Outcome::answered_wrong, Outcome::unanswered, Outcome::invalid_output,
                   Outcome::oom}) {
        if (to_string(o) == s) return o;
    }
    throw SchemaError("unknown outcome '" + std::string(s) + "'");
}

Classified classify(RequestKind kind, const ModelResponse& response, std::optional<parsing::AnswerLetter> answer) {
    Classified c;
    if (response.status == ResponseStatus::oom) {
        c.outcome = Outcome::oom;
        return c;
    }
    if (response.status != ResponseStatus::ok) {
        c.outcome = Outcome::unanswered;
        return c;
    }
    if (kind == RequestKind::mcq) {
        const auto parsed = parsing::try_parse_mcq(response.raw_text);
        if (!parsed) {
            c.outcome = Outcome::unanswered;
            return c;
        }
        c.parsed = *parsed;
        c.outcome = answer && parsed->letter == *answer ? Outcome::answered_correct : Outcome::answered_wrong;
        return c;
    }
    auto parsed = parsing::parse_video_output(response.raw_text);
    // Summary correctness is judged later from annotations; a valid output
    // counts as answered here.
    c.outcome = parsed.valid ? Outcome::answered_correct : Outcome::invalid_output;
    c.parsed = std::move(parsed);
    return c;
}

nlohmann::json to_json(const RunRecord& r) {
    nlohmann::json parsed = nullptr;
    if (const auto* p = std::get_if<parsing::ParsedVideoOutput>(&r.parsed)) parsed = parsing::to_json(*p);
    if (const auto* a = std::get_if<parsing::McqAnswer>(&r.parsed)) parsed = parsing::to_json(*a);
    nlohmann::json j{{"type", "record"},
                     {"item_ref", r.item_ref},
                     {"video_id", r.video_id},
                     {"condition", providers::to_json(r.condition)},
                     {"request_kind", to_string(r.request_kind)},
                     {"response", providers::to_json(r.response)},
                     {"parsed", parsed},
                     {"outcome", to_string(r.outcome)}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
    RunRecord r;
    try {
        r.item_ref = j.at("item_ref").get<std::string>();
        r.video_id = j.value("video_id", "");
        r.condition = providers::condition_from_json(j.at("condition"));
        r.request_kind = request_kind_from_string(j.at("request_kind").get<std::string>());
        r.response = providers::response_from_json(j.at("response"));
        r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
        r.error = j.value("error", "");
        const auto& p = j.at("parsed");
        if (!p.is_null()) {
            if (r.request_kind == RequestKind::mcq) {
                r.parsed = parsing::mcq_answer_from_json(p);
            } else {
                r.parsed = parsing::parsed_output_from_json(p);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad manifest record: ") + e.what());
    }
    return r;
}

std::string serialize_manifest(const RunManifest& m) {
    nlohmann::json conditions = nlohmann::json::array();
    for (const auto& c : m.conditions) conditions.push_back(providers::to_json(c));
    nlohmann::json tasks = nlohmann::json::array();
    for (auto t : m.tasks) tasks.push_back(to_string(t));
    const nlohmann::json header{{"type", "manifest"},
                                {"dataset_path", m.dataset_path},
                                {"conditions", conditions},
                                {"providers", m.providers},
                                {"tasks", tasks}};
    std::string out = header.dump() + '\n';
    for (const auto& r : m.records) out += to_json(r).dump() + '\n';
    return out;
}

RunManifest parse_manifest(std::string_view text) {
    RunManifest m;
    bool have_header = false;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim(text.substr(start, end - start));
        start = end + 1;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(std::string("manifest line is not JSON: ") + e.what());
        }
        if (j.value("type", "") == "manifest") {
            have_header = true;
            m.dataset_path = j.value("dataset_path", "");
            for (const auto& c : j.at("conditions")) m.conditions.push_back(providers::condition_from_json(c));
            m.providers = j.value("providers", std::vector<std::string>{});
            m.tasks.clear();
            for (const auto& t : j.value("tasks", nlohmann::json::array({"mcq"}))) {
                m.tasks.push_back(request_kind_from_string(t.get<std::string>()));
            }
        } else {
            m.records.push_back(record_from_json(j));
        }
    }
    if (!have_header) throw SchemaError("manifest has no header line");
    return m;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << serialize_manifest(m);
}

RunManifest read_manifest(const std::filesystem::path& path) { return parse_manifest(read_text(path)); }

std::optional<std::size_t> condition_index(const RunManifest& m, const providers::ConditionTag& c) {
    for (std::size_t i = 0; i < m.conditions.size(); ++i) {
        if (m.conditions[i] == c) return i;
    }
    return std::nullopt;
}

std::size_t expected_record_count(const RunManifest& m, const std::vector<BenchmarkItem>& items) {
    std::set<std::string> videos;
    for (const auto& i : items) videos.insert(i.video_id);
    std::size_t per_condition = 0;
    for (auto t : m.tasks) per_condition += t == RequestKind::mcq ? items.size() : videos.size();
    return per_condition * m.conditions.size();
}

// ---------------------------------------------------------------------------

namespace {

struct VideoPrep {
    std::optional<media::MediaAsset> asset;
    std::vector<std::filesystem::path> frames;
    std::string error;
};

template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    }
}

std::string frame_file_name(double t) { return "t" + media::format_seconds(t) + ".jpg"; }

// Transcripts are shared by all conditions; failures are remembered too.
class TranscriptCache {
public:
    struct Entry {
        std::optional<Transcript> transcript;
        std::string error;
    };

    Entry get(const std::string& video_id, const std::function<Transcript()>& make) {
        std::shared_ptr<Slot> slot;
        {
            std::lock_guard lock(mutex_);
            auto& s = slots_[video_id];
            if (!s) s = std::make_shared<Slot>();
            slot = s;
        }
        std::call_once(slot->once, [&] {
            try {
                slot->entry.transcript = make();
            } catch (const std::exception& e) {
                slot->entry.error = e.what();
            }
        });
        return slot->entry;
    }

private:
    struct Slot {
        std::once_flag once;
        Entry entry;
    };
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
};

}  // namespace

RunManifest run_benchmark(RunManifest manifest, const RunContext& ctx) {
    if (ctx.hub == nullptr || ctx.tool == nullptr) throw ConfigError("run context lacks a provider hub or media tool");
    if (manifest.conditions.empty()) throw ConfigError("no conditions to run");

    using Key = std::tuple<std::size_t, RequestKind, std::string>;
    std::set<Key> done;
    for (const auto& r : manifest.records) {
        const auto ci = condition_index(manifest, r.condition);
        if (!ci) throw SchemaError("manifest record under an unknown condition");
        if (!done.emplace(*ci, r.request_kind, r.item_ref).second) {
            throw SchemaError("duplicate manifest record for " + r.item_ref);
        }
    }

    // Distinct videos in dataset order, with their first item.
    std::vector<const BenchmarkItem*> videos;
    {
        std::set<std::string> seen;
        for (const auto& item : ctx.items) {
            if (seen.insert(item.video_id).second) videos.push_back(&item);
        }
    }

    std::mutex asset_mutex;
    std::map<std::string, std::pair<std::optional<media::MediaAsset>, std::string>> assets;
    auto asset_for = [&](const BenchmarkItem& item) -> std::pair<std::optional<media::MediaAsset>, std::string> {
        {
            std::lock_guard lock(asset_mutex);
            if (auto it = assets.find(item.video_id); it != assets.end()) return it->second;
        }
        std::pair<std::optional<media::MediaAsset>, std::string> result;
        try {
            const auto path = ctx.resolve_media ? ctx.resolve_media(item) : std::nullopt;
            if (!path) throw IoError("no media file for video " + item.video_id);
            result.first = ctx.tool->probe(*path);
        } catch (const std::exception& e) {
            result.second = e.what();
        }
        std::lock_guard lock(asset_mutex);
        return assets.emplace(item.video_id, result).first->second;
    };

    TranscriptCache transcripts;
    auto transcript_for = [&](const media::MediaAsset& asset, const std::string& video_id) {
        return transcripts.get(video_id, [&] {
            std::optional<std::filesystem::path> audio;
            if (!ctx.audio_cache_dir.empty() && asset.kind == media::MediaKind::video) {
                audio = ctx.tool->extract_audio(asset.path, ctx.audio_cache_dir / (video_id + ".wav"));
            }
            return ctx.hub->transcribe(asset, ctx.asr_provider, audio);
        });
    };

    for (std::size_t ci = 0; ci < manifest.conditions.size(); ++ci) {
        const auto condition = manifest.conditions[ci];
        std::string vlm = ctx.vlm_provider;
        if (auto it = ctx.vlm_provider_by_model.find(condition.model_name); it != ctx.vlm_provider_by_model.end()) {
            vlm = it->second;
        }

        // Phase 1: probe, plan and materialize frames per video.
        std::vector<VideoPrep> preps(videos.size());
        parallel_for(videos.size(), ctx.workers, [&](std::size_t v) {
            auto& prep = preps[v];
            const auto& item = *videos[v];
            auto [asset, error] = asset_for(item);
            if (!asset) {
                prep.error = error;
                return;
            }
            prep.asset = asset;
            try {
                if (asset->kind != media::MediaKind::video) throw NotAVideo(asset->path.string());
                const auto plan = media::plan_frames(*asset, condition.fps);
                for (double t : plan.timestamps_s) {
                    prep.frames.push_back(ctx.tool->extract_frame(
                        asset->path, t, ctx.frame_cache_dir / item.video_id / frame_file_name(t)));
                }
            } catch (const std::exception& e) {
                prep.error = e.what();
            }
        });
        std::map<std::string, const VideoPrep*> prep_by_video;
        for (std::size_t v = 0; v < videos.size(); ++v) prep_by_video[videos[v]->video_id] = &preps[v];

        for (const auto kind : manifest.tasks) {
            // Work units: items for mcq, first item per video for summaries.
            std::vector<const BenchmarkItem*> units;
            if (kind == RequestKind::mcq) {
                for (const auto& item : ctx.items) units.push_back(&item);
            } else {
                units = videos;
            }
            std::vector<std::optional<RunRecord>> slots(units.size());
            parallel_for(units.size(), ctx.workers, [&](std::size_t u) {
                const auto& item = *units[u];
                const std::string ref = kind == RequestKind::mcq ? item.question_id : item.video_id;
                if (done.count(Key{ci, kind, ref}) != 0) return;

                const auto started = std::chrono::steady_clock::now();
                RunRecord record;
                record.item_ref = ref;
                record.video_id = item.video_id;
                record.condition = condition;
                record.request_kind = kind;
                record.response.status = ResponseStatus::invalid;
                try {
                    const auto& prep = *prep_by_video.at(item.video_id);
                    if (!prep.error.empty()) throw ToolFailure(prep.error);

                    const Transcript* transcript = nullptr;
                    TranscriptCache::Entry entry;
                    if (condition.with_transcript) {
                        entry = transcript_for(*prep.asset, item.video_id);
                        if (!entry.transcript) throw ProviderUnavailable("transcription failed: " + entry.error);
                        transcript = &*entry.transcript;
                    }

                    if (kind == RequestKind::mcq) {
                        const auto prompt = build_question_prompt(item, transcript, ctx.mcq_template,
                                                                  condition.with_transcript);
                        record.response = ctx.hub->describe_video(prep.frames, prompt, vlm, condition);
                    } else {
                        const auto prompt =
                            with_transcript_block(ctx.summary_template, transcript, condition.with_transcript);
                        record.response = ctx.hub->describe_video(prep.frames, prompt, vlm, condition);
                        if (record.response.status == ResponseStatus::ok && !ctx.llm_provider.empty() &&
                            transcript != nullptr && !transcript->empty()) {
                            auto refined = ctx.hub->refine_summary(record.response.raw_text, *transcript,
                                                                   ctx.refine_template, ctx.llm_provider);
                            refined.latency_ms += record.response.latency_ms;
                            record.response = std::move(refined);
                        }
                    }
                    auto classified = classify(kind, record.response,
                                               kind == RequestKind::mcq ? std::optional(item.answer) : std::nullopt);
                    record.parsed = std::move(classified.parsed);
                    record.outcome = classified.outcome;
                } catch (const Error& e) {
                    record.error = e.what();
                    record.response = providers::normalized({"", 0, ResponseStatus::invalid, e.kind()});
                    record.outcome = Outcome::unanswered;
                } catch (const std::exception& e) {
                    record.error = e.what();
                    record.response = providers::normalized({"", 0, ResponseStatus::invalid, "error"});
                    record.outcome = Outcome::unanswered;
                }
                record.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - started)
                                     .count();
                slots[u] = std::move(record);
            });
            for (auto& s : slots) {
                if (s) manifest.records.push_back(std::move(*s));
            }
        }
    }

    std::stable_sort(manifest.records.begin(), manifest.records.end(), [&](const RunRecord& a, const RunRecord& b) {
        const auto ka = std::tuple(*condition_index(manifest, a.condition), a.request_kind, a.item_ref);
        const auto kb = std::tuple(*condition_index(manifest, b.condition), b.request_kind, b.item_ref);
        return ka < kb;
    });
    return manifest;
}

}  // namespace vidharness::benchmark
