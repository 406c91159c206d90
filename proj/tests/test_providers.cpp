#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "test_util.hpp"
#include "vidharness/errors.hpp"
#include "vidharness/providers.hpp"

using namespace vidharness;
using namespace vidharness::providers;

namespace {

// Local JSON endpoint with a handful of scripted routes.
class FakeServer {
public:
    FakeServer() {
        server_.Post("/gen", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            last_auth = req.get_header_value("Authorization");
            const auto body = nlohmann::json::parse(req.body);
            last_body = body;
            res.set_content(nlohmann::json{{"text", "echo: " + body.value("prompt", "")}}.dump(), "application/json");
        });
        server_.Post("/oom", [](const httplib::Request&, httplib::Response& res) {
            res.status = 500;
            res.set_content(R"({"error":"torch.cuda.OutOfMemoryError: CUDA out of memory"})", "application/json");
        });
        server_.Post("/busy", [this](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 503;
            res.set_content(R"({"error":"overloaded"})", "application/json");
        });
        server_.Post("/gateway", [](const httplib::Request&, httplib::Response& res) {
            res.status = 504;
            res.set_content("upstream timeout", "text/plain");
        });
        server_.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
            res.status = 400;
            res.set_content(R"({"error":"prompt too long"})", "application/json");
        });
        server_.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
            std::this_thread::sleep_for(std::chrono::milliseconds(2500));
            res.set_content(R"({"text":"late"})", "application/json");
        });
        server_.Post("/empty", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"text":""})", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }

    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

    std::atomic<int> hits{0};
    std::string last_auth;
    nlohmann::json last_body;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

ProviderConfig vlm_config(const std::string& endpoint) {
    ProviderConfig c;
    c.id = "vlm";
    c.modality = Modality::vlm;
    c.model = "test-model";
    c.endpoint = endpoint;
    c.timeout_s = 5;
    c.retries = 1;
    return c;
}

ModelRequest request_with(const std::filesystem::path& frame, const std::string& prompt) {
    ModelRequest r;
    r.provider_id = "vlm";
    r.modality = Modality::vlm;
    r.prompt = prompt;
    r.frame_refs = {frame};
    r.condition = {0.1, false, Attention::sdpa, "A10G", "m"};
    return r;
}

}  // namespace

TEST(Transcript, ParsesWhisperVerboseJson) {
    const auto t = parse_transcript(
        R"({"language":"en","segments":[{"id":0,"start":0.0,"end":2.5,"text":" Hello  there."},)"
        R"({"id":1,"start":2.5,"end":4.0,"text":"  General Kenobi. "}]})");
    ASSERT_EQ(t.segments.size(), 2u);
    EXPECT_EQ(t.full_text, "Hello there. General Kenobi.");
    EXPECT_EQ(t.language, "en");
    EXPECT_TRUE(parse_transcript(R"({"segments":[]})").empty());
}

TEST(Transcript, RejectsMalformed) {
    EXPECT_THROW(parse_transcript("not json"), MalformedProviderOutput);
    EXPECT_THROW(parse_transcript(R"({"text":"no segments"})"), MalformedProviderOutput);
    EXPECT_THROW(parse_transcript(R"({"segments":[{"id":0,"start":3,"end":1,"text":"x"}]})"), MalformedProviderOutput);
    EXPECT_THROW(parse_transcript(R"({"segments":[{"id":0,"start":0,"end":1}]})"), MalformedProviderOutput);
}

TEST(Response, NormalizedEnforcesOkIffText) {
    EXPECT_EQ(normalized({"", 5, ResponseStatus::ok, ""}).status, ResponseStatus::invalid);
    EXPECT_EQ(normalized({"text", 5, ResponseStatus::oom, "x"}).raw_text, "");
    const ModelResponse r{"B", 12, ResponseStatus::ok, ""};
    EXPECT_EQ(response_from_json(to_json(r)), r);
}

TEST(Condition, LabelsAndJson) {
    const ConditionTag c{0.1, true, Attention::sdpa, "A10G", "Qwen"};
    EXPECT_EQ(c.label(), "SDPA (0.1 FPS) with Audio Transcription");
    EXPECT_EQ((ConditionTag{0.01, false, Attention::flash_attention, "", ""}.label()), "FlashAttention (0.01 FPS)");
    EXPECT_EQ(condition_from_json(to_json(c)), c);
}

TEST(CassetteKey, DependsOnContentNotPaths) {
    testutil::TempDir dir;
    testutil::write_file(dir / "a.jpg", "frame-bytes");
    testutil::write_file(dir / "b.jpg", "frame-bytes");
    testutil::write_file(dir / "c.jpg", "other-bytes");
    const auto base = cassette_key(request_with(dir / "a.jpg", "p"));
    EXPECT_EQ(base.size(), 64u);
    EXPECT_EQ(base, cassette_key(request_with(dir / "b.jpg", "p")));
    EXPECT_NE(base, cassette_key(request_with(dir / "c.jpg", "p")));
    EXPECT_NE(base, cassette_key(request_with(dir / "a.jpg", "q")));
    auto other = request_with(dir / "a.jpg", "p");
    other.condition.with_transcript = true;
    EXPECT_NE(base, cassette_key(other));
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(CassetteStore, FirstRecordWinsUnderConcurrency) {
    testutil::TempDir dir;
    CassetteStore store(dir.path());
    std::vector<std::jthread> threads;
    std::atomic<int> written{0};
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            for (int k = 0; k < 20; ++k) {
                CassetteEntry e{sha256_hex("key" + std::to_string(k)), {{"k", k}},
                                {"reply " + std::to_string(t), 1, ResponseStatus::ok, ""}};
                if (store.append(e)) ++written;
            }
        });
    }
    threads.clear();
    EXPECT_EQ(written.load(), 20);
    EXPECT_EQ(store.size(), 20u);
    const auto e = store.find(sha256_hex("key3"));
    ASSERT_TRUE(e.has_value());
    EXPECT_EQ(e->response.status, ResponseStatus::ok);
    EXPECT_FALSE(store.find(sha256_hex("nope")).has_value());
}

TEST(Env, ResolvesReferences) {
    ::setenv("VIDHARNESS_TEST_KEY", "s3cret", 1);
    EXPECT_EQ(resolve_env_refs("Bearer ${env:VIDHARNESS_TEST_KEY}"), "Bearer s3cret");
    EXPECT_EQ(resolve_env_refs("plain"), "plain");
    ::unsetenv("VIDHARNESS_TEST_MISSING");
    EXPECT_THROW(resolve_env_refs("${env:VIDHARNESS_TEST_MISSING}"), ConfigError);
}

TEST(ProviderConfigJson, RoundTripAndValidation) {
    const auto c = provider_config_from_json(nlohmann::json::parse(
        R"({"id":"w","modality":"asr","endpoint":"http://x/y","request":{"audio_field":"file","extra":{"response_format":"verbose_json"}},
            "response":{"text_pointer":""},"oom_patterns":["OOM"],"timeout_s":60,"retries":2})"));
    EXPECT_EQ(c.modality, Modality::asr);
    EXPECT_EQ(c.audio_field, "file");
    EXPECT_EQ(c.text_pointer, "");
    EXPECT_EQ(provider_config_from_json(to_json(c)).retries, 2);
    EXPECT_THROW(provider_config_from_json(nlohmann::json::parse(R"({"id":"x"})")), ConfigError);
    EXPECT_TRUE(matches_oom("RuntimeError: CUDA OUT OF MEMORY", {"out of memory"}));
    EXPECT_FALSE(matches_oom("bad request", {"out of memory"}));
}

TEST(RefinePrompt, TranscriptBlockOnlyWhenPresent) {
    Transcript t;
    t.full_text = "hello";
    const auto with = render_refine_prompt("{transcript}Improve: {summary}", "S", t);
    EXPECT_NE(with.find("hello"), std::string::npos);
    EXPECT_NE(with.find("Improve: S"), std::string::npos);
    EXPECT_EQ(render_refine_prompt("{transcript}Improve: {summary}", "S", Transcript{}), "Improve: S");
    EXPECT_THROW(render_refine_prompt("no placeholder", "S", t), TemplateError);
}

TEST(Http, LiveRecordsThenReplayAnswers) {
    FakeServer server;
    testutil::TempDir dir;
    testutil::write_file(dir / "f.jpg", "JPEGDATA");
    ::setenv("VIDHARNESS_TEST_TOKEN", "tok", 1);
    auto cfg = vlm_config(server.url("/gen"));
    cfg.auth_header = "Authorization";
    cfg.auth_value = "Bearer ${env:VIDHARNESS_TEST_TOKEN}";

    ProviderHub live(Mode::live, dir / "cassettes");
    live.add_provider(cfg);
    const auto r = live.describe_video({dir / "f.jpg"}, "describe", "vlm", request_with(dir / "f.jpg", "").condition);
    EXPECT_EQ(r.status, ResponseStatus::ok);
    EXPECT_EQ(r.raw_text, "echo: describe");
    EXPECT_EQ(server.last_auth, "Bearer tok");
    EXPECT_EQ(server.last_body["model"], "test-model");
    EXPECT_EQ(server.last_body["images"][0], "SlBFR0RBVEE=");
    EXPECT_EQ(live.store().size(), 1u);

    ProviderHub replay(Mode::replay, dir / "cassettes");
    replay.add_provider(cfg);
    const int hits = server.hits;
    const auto again = replay.describe_video({dir / "f.jpg"}, "describe", "vlm", request_with(dir / "f.jpg", "").condition);
    EXPECT_EQ(again, r);
    EXPECT_EQ(server.hits, hits);
    EXPECT_THROW(replay.describe_video({dir / "f.jpg"}, "other", "vlm", request_with(dir / "f.jpg", "").condition),
                 ReplayMiss);
}

TEST(Http, StatusMapping) {
    FakeServer server;
    testutil::TempDir dir;
    testutil::write_file(dir / "f.jpg", "x");
    auto call = [&](const std::string& path, int retries = 0, int timeout_s = 5) {
        auto cfg = vlm_config(server.url(path));
        cfg.retries = retries;
        cfg.timeout_s = timeout_s;
        HttpBackend backend(cfg);
        return backend.invoke(request_with(dir / "f.jpg", "p"));
    };
    EXPECT_EQ(call("/oom").status, ResponseStatus::oom);
    EXPECT_EQ(call("/gateway").status, ResponseStatus::timeout);
    EXPECT_EQ(call("/bad").status, ResponseStatus::invalid);
    EXPECT_EQ(call("/empty").status, ResponseStatus::invalid);
    EXPECT_EQ(call("/slow", 0, 1).status, ResponseStatus::timeout);

    const int before = server.hits;
    EXPECT_THROW(call("/busy", 2), ProviderUnavailable);
    EXPECT_EQ(server.hits - before, 3);
}

TEST(Http, ConnectionRefusedIsProviderUnavailable) {
    testutil::TempDir dir;
    testutil::write_file(dir / "f.jpg", "x");
    auto cfg = vlm_config("http://127.0.0.1:1/gen");
    cfg.retries = 0;
    HttpBackend backend(cfg);
    EXPECT_THROW(backend.invoke(request_with(dir / "f.jpg", "p")), ProviderUnavailable);
}

TEST(Hub, OomIsRecordedAndReplayed) {
    FakeServer server;
    testutil::TempDir dir;
    testutil::write_file(dir / "f.jpg", "x");
    ProviderHub live(Mode::live, dir / "c");
    live.add_provider(vlm_config(server.url("/oom")));
    const auto cond = request_with(dir / "f.jpg", "").condition;
    EXPECT_EQ(live.describe_video({dir / "f.jpg"}, "p", "vlm", cond).status, ResponseStatus::oom);
    ProviderHub replay(Mode::replay, dir / "c");
    replay.add_provider(vlm_config(server.url("/oom")));
    EXPECT_EQ(replay.describe_video({dir / "f.jpg"}, "p", "vlm", cond).status, ResponseStatus::oom);
    EXPECT_THROW(replay.describe_video({}, "p", "vlm", cond), std::invalid_argument);
}
