// Regenerates demo/: dataset, media stubs, config, Snow White outputs,
// annotations, and the cassette store recorded from a scripted backend.
// Usage: vidharness_make_demo <demo-dir> <fixtures-dir>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "vidharness/benchmark.hpp"
#include "vidharness/config.hpp"
#include "vidharness/providers.hpp"
#include "vidharness/report.hpp"

namespace fs = std::filesystem;
using namespace vidharness;
using nlohmann::json;

namespace {

struct Video {
    std::string id;
    std::string duration;
    std::string domain;
    std::string sub_category;
    double seconds;
};

const Video kVideos[] = {
    {"001", "short", "Knowledge", "Humanity & History", 60.0},
    {"002", "short", "Sports Competition", "Basketball", 45.0},
    {"003", "medium", "Film & Television", "Documentary", 80.0},
    {"P69idA8JO98", "long", "Artistic Performance", "Stage Play", 120.0},
};

struct Question {
    std::string video_id;
    std::string question_id;
    std::string task_type;
    std::string question;
    std::array<std::string, 4> options;
    char answer;
    std::string without_reply;
    std::string with_reply;  // "OOM" marks an out-of-memory failure
};

const Question kQuestions[] = {
    {"001", "001-1", "Action Reasoning", "Why does the presenter hold up the wreath?",
     {"To show how early wreaths were made.", "To sell it.", "To start a game.", "To hide a label."}, 'A',
     "B", "The answer is (A)."},
    {"001", "001-2", "Information Synopsis", "What is the genre of this video?",
     {"It is a news report that introduces the history behind Christmas decorations.",
      "It is a documentary on the evolution of Christmas holiday recipes.",
      "It is a travel vlog exploring Christmas markets around the world.",
      "It is a tutorial on DIY Christmas ornament crafting."},
     'A', "A", "Answer: A"},
    {"001", "001-3", "Counting Problem", "How many candles are lit on the table?",
     {"Two.", "Three.", "Four.", "Five."}, 'C', "C", "B"},
    {"002", "002-1", "OCR Problems", "What is the final score shown on the board?",
     {"98-95", "101-99", "88-90", "110-104"}, 'B', "I cannot read the scoreboard in these frames.",
     "The best answer is B."},
    {"002", "002-2", "Temporal Reasoning", "What happens right after the timeout?",
     {"A free throw.", "A substitution.", "A three-pointer.", "The game ends."}, 'C', "C",
     "A substitution happens, so the answer would be (B)."},
    {"003", "003-1", "Object Recognition", "Which animal appears first?",
     {"A fox.", "A heron.", "A deer.", "An owl."}, 'D', "D", "D"},
    {"003", "003-2", "Action Recognition", "What is the narrator doing at the start?",
     {"Walking.", "Rowing.", "Cooking.", "Painting."}, 'B', "A", "Option B"},
    {"003", "003-3", "Temporal Perception", "When does the storm begin?",
     {"In the opening scene.", "Midway through.", "Near the end.", "It never does."}, 'B',
     "It is hard to tell.", "B"},
    {"P69idA8JO98", "P69-1", "Information Synopsis", "What kind of performance is shown?",
     {"A ballet recital.", "A stage play of Snow White.", "A puppet show.", "An opera gala."}, 'B', "B", "B"},
    {"P69idA8JO98", "P69-2", "Spatial Perception", "Where does the queen stand when she speaks to the mirror?",
     {"On a balcony.", "Beside a well.", "In a forest.", "On a throne."}, 'A', "A", "OOM"},
};

std::string media_json(const Video& v) {
    json probe = {{"format", {{"format_name", "mov,mp4,m4a,3gp,3g2,mj2"}, {"duration", report::format_fixed(v.seconds, 3)}}},
                  {"streams",
                   {{{"index", 0}, {"codec_type", "video"}, {"width", 640}, {"height", 360}},
                    {{"index", 1}, {"codec_type", "audio"}}}},
                  {"demo_video", v.id}};
    return probe.dump(2) + "\n";
}

std::string transcript_json(const std::string& video_id) {
    static const std::map<std::string, std::vector<std::string>> lines = {
        {"001", {"Welcome back to the evening report.", "Tonight we look at where our Christmas decorations came from.",
                 "The first wreaths were woven from evergreen branches."}},
        {"002", {"Timeout on the floor with two minutes left.", "He pulls up from deep, three points!",
                 "Final score one hundred one to ninety nine."}},
        {"003", {"I set off rowing before dawn.", "Halfway across the lake the storm rolled in.",
                 "An owl watched from the reeds."}},
        {"P69idA8JO98", {"Mirror, mirror on the wall.", "Snow White, go and scrub the castle floors.",
                         "The prince has come, she is awake!"}},
    };
    json segments = json::array();
    const auto& ls = lines.at(video_id);
    for (std::size_t i = 0; i < ls.size(); ++i) {
        segments.push_back({{"id", i}, {"start", 10.0 * i}, {"end", 10.0 * i + 8.5}, {"text", " " + ls[i]}});
    }
    return json{{"language", "en"}, {"segments", segments}}.dump();
}

std::string summary_reply(const std::string& video_id, bool with_transcript) {
    static const std::map<std::string, std::pair<std::string, std::string>> replies = {
        {"001",
         {"A presenter talks in front of a decorated tree.\n\nKey Frames:\n(00:00, Presenter beside a tree)\n"
          "(00:20, Close-up of a wreath)\n(00:40, Table with candles)",
          "A news report on the history of Christmas decorations.\n\nKey Frames:\n(00:00, Presenter opens the "
          "evening report)\n(00:20, Evergreen wreath held up)\n(00:40, Four lit candles on a table)\n(00:50, Closing "
          "shot of ornaments)"}},
        {"002",
         {"A basketball game in a packed arena.\n\nKey Frames:\n00:00 - Tip-off\n00:30 - Players huddle",
          "Late-game basketball action ending 101-99.\n\nKey Frames:\n00:00 - Tip-off\n00:20 - Timeout huddle\n"
          "00:30 - Deep three-pointer\n00:40 - Final scoreboard"}},
        {"003",
         {"A nature documentary on a lake.\n\nKey Frames:\n(00:10, Boat on the water)\n(00:50, Dark clouds)",
          "A narrator rows across a lake as a storm arrives.\n\nKey Frames:\n(00:00, Narrator rowing at dawn)\n"
          "(00:40, Storm clouds gather)\n(01:10, Owl in the reeds)"}},
        {"P69idA8JO98",
         {"", "A stage performance of Snow White.\n\nKey Frames:\n(00:10, Queen before the mirror)\n(01:00, Snow "
              "White scrubbing floors)\n(01:50, The prince wakes Snow White)"}},
    };
    const auto& r = replies.at(video_id);
    return with_transcript ? r.second : r.first;
}

class ScriptedBackend final : public providers::Backend {
public:
    providers::ModelResponse invoke(const providers::ModelRequest& request) override {
        using providers::Modality;
        using providers::ResponseStatus;
        if (request.modality == Modality::asr) {
            const auto id = request.audio_ref->stem().string();
            return {transcript_json(id), 4200 + 300 * static_cast<std::int64_t>(id.size()), ResponseStatus::ok, ""};
        }
        const bool with = request.condition.with_transcript;
        const std::int64_t frames = static_cast<std::int64_t>(request.frame_refs.size());
        for (const auto& q : kQuestions) {
            if (request.prompt.find(q.question) == std::string::npos) continue;
            const auto& reply = with ? q.with_reply : q.without_reply;
            if (reply == "OOM") {
                return {"", 0, ResponseStatus::oom, "CUDA out of memory. Tried to allocate 2.00 GiB"};
            }
            return {reply, 61000 + 2500 * frames + (with ? 9000 : 0), ResponseStatus::ok, ""};
        }
        const auto video = request.frame_refs.front().parent_path().filename().string();
        const auto text = summary_reply(video, with);
        if (text.empty()) return {"", 300000, ResponseStatus::timeout, "request timed out"};
        return {text, 95000 + 3000 * frames, ResponseStatus::ok, ""};
    }
};

void write(const fs::path& p, const std::string& text) { report::write_text(p, text); }

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: vidharness_make_demo <demo-dir> <fixtures-dir>\n";
        return 2;
    }
    const fs::path dir = argv[1];
    const fs::path fixtures = argv[2];
    fs::remove_all(dir / "cassettes");
    fs::remove_all(dir / "out");

    json dataset = json::array();
    for (const auto& q : kQuestions) {
        const Video* v = nullptr;
        for (const auto& cand : kVideos) {
            if (cand.id == q.video_id) v = &cand;
        }
        json options = json::array();
        for (int i = 0; i < 4; ++i) options.push_back(std::string(1, char('A' + i)) + ". " + q.options[i]);
        json item = {{"video_id", q.video_id},   {"duration", v->duration}, {"domain", v->domain},
                     {"sub_category", v->sub_category},
                     {"url", "https://www.youtube.com/watch?v=" + (q.video_id == "001" ? std::string("fFjy93ACGo8") : q.video_id)},
                     {"videoID", q.video_id == "001" ? std::string("fFjy93ACGo8") : q.video_id},
                     {"question_id", q.question_id}, {"task_type", q.task_type}, {"question", q.question},
                     {"options", options},           {"answer", std::string(1, q.answer)}};
        dataset.push_back(item);
    }
    write(dir / "dataset.json", dataset.dump(2) + "\n");
    for (const auto& v : kVideos) write(dir / "media" / (v.id + ".mp4"), media_json(v));

    json provider_list = json::array({
        {{"id", "qwen-vl"}, {"modality", "vlm"}, {"model", "Qwen/Qwen2.5-VL-7B-Instruct"},
         {"endpoint", "http://127.0.0.1:8000/v1/generate"},
         {"auth", {{"header", "Authorization"}, {"value", "Bearer ${env:VLM_API_KEY}"}}},
         {"response", {{"text_pointer", "/text"}, {"error_pointer", "/error"}}},
         {"oom_patterns", {"out of memory", "OutOfMemoryError"}}, {"timeout_s", 300}, {"retries", 1}},
        {{"id", "whisper"}, {"modality", "asr"}, {"model", "whisper-large-v3-turbo"},
         {"endpoint", "http://127.0.0.1:8001/v1/audio/transcriptions"},
         {"request", {{"audio_field", "file"}, {"extra", {{"response_format", "verbose_json"}}}}},
         {"response", {{"text_pointer", ""}}}, {"timeout_s", 600}},
    });
    write(dir / "providers.json", provider_list.dump(2) + "\n");

    json cfg = {
        {"dataset", "dataset.json"},
        {"media_dir", "media"},
        {"cassette_dir", "cassettes"},
        {"frame_cache_dir", "out/frames"},
        {"output_dir", "out"},
        {"annotations", "annotations.json"},
        {"providers", "providers.json"},
        {"tools", {{"probe", "cat {input}"}, {"extract_frame", "cp {input} {output}"}}},
        {"roles", {{"vlm", "qwen-vl"}, {"asr", "whisper"}}},
        {"conditions",
         {{{"id", "sdpa-0.1"}, {"fps", 0.1}, {"with_transcript", false}, {"attention", "sdpa"}, {"gpu", "A10G"},
           {"model_name", "Qwen2.5-VL-7B"}},
          {{"id", "sdpa-0.1-asr"}, {"fps", 0.1}, {"with_transcript", true}, {"attention", "sdpa"}, {"gpu", "A10G"},
           {"model_name", "Qwen2.5-VL-7B"}}}},
        {"tasks", {"mcq", "summary_keyframes"}},
        {"tolerance_s", 2},
        {"layout", {{"C", 1.0}, {"area_A", 1.0}, {"seed", 42}}},
        {"workers", 4},
    };
    write(dir / "config.json", cfg.dump(2) + "\n");

    json annotations = {{"videos",
                         {{"001",
                           {{"keyframes", {{{"time", "00:00"}, {"caption", "Presenter"}}, {{"time", "00:21"}, {"caption", "Wreath"}}}},
                            {"summary_verdicts", {{"Qwen2.5-VL-7B [SDPA (0.1 FPS)]", false},
                                                  {"Qwen2.5-VL-7B [SDPA (0.1 FPS) with Audio Transcription]", true}}}}},
                          {"003",
                           {{"keyframes", {{{"time", "00:00"}, {"caption", "Rowing"}}, {{"time", "00:45"}, {"caption", "Storm"}}}},
                            {"summary_verdicts", {{"Qwen2.5-VL-7B [SDPA (0.1 FPS)]", true},
                                                  {"Qwen2.5-VL-7B [SDPA (0.1 FPS) with Audio Transcription]", true}}}}}}}};
    write(dir / "annotations.json", annotations.dump(2) + "\n");

    json outputs = {{"videos",
                     {{"P69idA8JO98",
                       {{{"model", "Gemini-2-Flash"}, {"raw_text", slurp(fixtures / "snow_white_gemini.txt")}},
                        {{"model", "Qwen-7B"}, {"raw_text", slurp(fixtures / "snow_white_qwen.txt")}}}}}}};
    write(dir / "outputs" / "snow_white.json", outputs.dump(2) + "\n");

    // Record cassettes by running the pipeline live against the script.
    auto config = config::load_config(dir / "config.json");
    providers::ProviderHub hub(providers::Mode::live, config.cassette_dir, 4);
    const auto backend = std::make_shared<ScriptedBackend>();
    for (const auto& p : config.providers) {
        hub.add_provider(p);
        hub.set_backend(p.id, backend);
    }
    const media::MediaTool tool(config.tools);
    benchmark::RunContext ctx;
    ctx.items = benchmark::load_dataset(config.dataset);
    ctx.hub = &hub;
    ctx.tool = &tool;
    ctx.resolve_media = [&config](const benchmark::BenchmarkItem& item) {
        return config::find_media(config.media_dir, item.video_id);
    };
    ctx.frame_cache_dir = config.frame_cache_dir;
    ctx.vlm_provider = config.vlm_provider;
    ctx.asr_provider = config.asr_provider;
    ctx.mcq_template = config.mcq_template;
    ctx.summary_template = config.summary_template;
    benchmark::RunManifest manifest;
    manifest.conditions = config::condition_tags(config);
    manifest.tasks = config.tasks;
    manifest = benchmark::run_benchmark(std::move(manifest), ctx);
    for (const auto& r : manifest.records) {
        if (!r.error.empty()) std::cerr << "record " << r.item_ref << ": " << r.error << '\n';
    }
    fs::remove_all(dir / "out");
    std::cout << manifest.records.size() << " records, " << hub.store().size() << " cassettes\n";
    return 0;
}
