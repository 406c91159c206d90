#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "vidharness/errors.hpp"
#include "vidharness/media.hpp"
#include "vidharness/subprocess.hpp"

using namespace vidharness;
using namespace vidharness::media;

namespace {

MediaAsset video(double duration) {
    MediaAsset a;
    a.path = "clip.mp4";
    a.duration_s = duration;
    a.width_px = 640;
    a.height_px = 360;
    return a;
}

std::string probe_json(const std::string& format_name, double duration, bool with_video, bool with_audio) {
    nlohmann::json streams = nlohmann::json::array();
    if (with_video) streams.push_back({{"codec_type", "video"}, {"width", 1280}, {"height", 720}});
    if (with_audio) streams.push_back({{"codec_type", "audio"}});
    return nlohmann::json{{"format", {{"format_name", format_name}, {"duration", std::to_string(duration)}}},
                          {"streams", streams}}
        .dump();
}

}  // namespace

TEST(Containers, ClassificationIsTotalOverTheTwelve) {
    const std::pair<const char*, Container> cases[] = {
        {"a.mp4", Container::mp4},      {"a.M4V", Container::m4v},       {"a.mov", Container::quicktime},
        {"a.wmv", Container::wmv},      {"a.webm", Container::webm},     {"a.avi", Container::msvideo},
        {"a.mpg", Container::mpg},      {"a.mpeg", Container::mpg},      {"a.3gp", Container::threegpp},
        {"a.mp3", Container::mp3},      {"a.wav", Container::wav},       {"a.m4a", Container::m4a},
        {"a.flac", Container::flac},
    };
    for (const auto& [name, c] : cases) {
        ASSERT_TRUE(container_from_extension(name).has_value()) << name;
        EXPECT_EQ(*container_from_extension(name), c) << name;
    }
    for (const char* bad : {"doc.pdf", "a.mkv", "a.txt", "noext", "a.mp4.bak"}) {
        EXPECT_FALSE(container_from_extension(bad).has_value()) << bad;
    }
    EXPECT_EQ(kind_of(Container::flac), MediaKind::audio);
    EXPECT_EQ(kind_of(Container::threegpp), MediaKind::video);
}

TEST(Probe, M4vLecture) {
    const auto a = asset_from_probe("lecture.m4v", nlohmann::json::parse(probe_json("mov,mp4,m4a,3gp,3g2,mj2", 120, true, true)));
    EXPECT_EQ(a.kind, MediaKind::video);
    EXPECT_EQ(a.container, Container::m4v);
    EXPECT_DOUBLE_EQ(a.duration_s, 120.0);
    EXPECT_TRUE(a.has_audio_stream);
    EXPECT_EQ(a.width_px, 1280);
}

TEST(Probe, FlacTalkHasNoFrameSize) {
    const auto a = asset_from_probe("talk.flac", nlohmann::json::parse(probe_json("flac", 30, false, true)));
    EXPECT_EQ(a.kind, MediaKind::audio);
    EXPECT_EQ(a.container, Container::flac);
    EXPECT_FALSE(a.width_px.has_value());
    EXPECT_EQ(asset_from_json(to_json(a)), a);
}

TEST(Probe, Rejections) {
    EXPECT_THROW(asset_from_probe("doc.pdf", nlohmann::json::parse(probe_json("pdf", 1, false, false))), UnsupportedFormat);
    EXPECT_THROW(asset_from_probe("a.mp4", nlohmann::json::object()), ProbeFailure);
    EXPECT_THROW(asset_from_probe("a.mp4", nlohmann::json::parse(probe_json("mov,mp4,m4a,3gp,3g2,mj2", 5, false, true))),
                 ProbeFailure);
}

TEST(MediaToolProbe, RunsTheCommandTemplate) {
    testutil::TempDir dir;
    testutil::write_file(dir / "clip.mp4", probe_json("mov,mp4,m4a,3gp,3g2,mj2", 60, true, true));
    testutil::write_file(dir / "doc.pdf", "%PDF");
    testutil::write_file(dir / "junk.mp4", "not json");
    const MediaTool tool({"cat {input}", "cp {input} {output}", "cp {input} {output}"});
    EXPECT_DOUBLE_EQ(tool.probe(dir / "clip.mp4").duration_s, 60.0);
    EXPECT_THROW(tool.probe(dir / "doc.pdf"), UnsupportedFormat);
    EXPECT_THROW(tool.probe(dir / "junk.mp4"), ProbeFailure);
    EXPECT_THROW(tool.probe(dir / "missing.mp4"), ProbeFailure);

    const auto frame = tool.extract_frame(dir / "clip.mp4", 10.0, dir / "frames/t10.jpg");
    EXPECT_TRUE(std::filesystem::exists(frame));
    // Existing output is reused without running the tool.
    const MediaTool broken({"cat {input}", "false", "false"});
    EXPECT_EQ(broken.extract_frame(dir / "clip.mp4", 10.0, dir / "frames/t10.jpg"), frame);
    EXPECT_THROW(broken.extract_frame(dir / "clip.mp4", 20.0, dir / "frames/t20.jpg"), ToolFailure);
}

TEST(Subprocess, ExpandAndRun) {
    const auto argv = expand_command("echo {a}  x{b}y", {{"a", "hello"}, {"b", "-"}});
    EXPECT_EQ(argv, (std::vector<std::string>{"echo", "hello", "x-y"}));
    const auto r = run_command(argv);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.out, "hello x-y\n");
    EXPECT_NE(run_command({"false"}).exit_code, 0);
}

TEST(FramePlan, GridExamples) {
    EXPECT_EQ(plan_frames(video(60), 0.1).timestamps_s, (std::vector<double>{0, 10, 20, 30, 40, 50}));
    EXPECT_EQ(plan_frames(video(60), 0.01).timestamps_s, (std::vector<double>{30}));
    const auto p = plan_frames(video(11), 1.0);
    ASSERT_EQ(p.timestamps_s.size(), 11u);
    for (int i = 0; i <= 10; ++i) EXPECT_DOUBLE_EQ(p.timestamps_s[i], i);
}

TEST(FramePlan, MatchesBruteForceGrid) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dur(0.5, 4000.0);
    const double rates[] = {1.0, 0.5, 0.1, 0.01, 2.0};
    for (int i = 0; i < 500; ++i) {
        const double d = dur(rng);
        const double fps = rates[i % 5];
        const auto plan = plan_frames(video(d), fps);
        std::vector<double> oracle;
        if (fps * d < 1) {
            oracle.push_back(d / 2);
        } else {
            for (int k = 0; k / fps < d; ++k) oracle.push_back(k / fps);
        }
        ASSERT_EQ(plan.timestamps_s.size(), oracle.size()) << d << " @ " << fps;
        for (std::size_t k = 0; k < oracle.size(); ++k) EXPECT_NEAR(plan.timestamps_s[k], oracle[k], 1e-6);
        for (std::size_t k = 1; k < plan.timestamps_s.size(); ++k) {
            EXPECT_LT(plan.timestamps_s[k - 1], plan.timestamps_s[k]);
        }
        EXPECT_LT(plan.timestamps_s.back(), d);
    }
}

TEST(FramePlan, Errors) {
    auto audio = video(10);
    audio.kind = MediaKind::audio;
    EXPECT_THROW(plan_frames(audio, 1.0), NotAVideo);
    EXPECT_THROW(plan_frames(video(10), 0.0), std::invalid_argument);
    EXPECT_THROW(plan_frames(video(10), -1.0), std::invalid_argument);
}

TEST(SplitPlan, Examples) {
    EXPECT_EQ(plan_split(video(3600), 600, 0).segments.size(), 6u);
    EXPECT_EQ(plan_split(video(100), 600, 0).segments, (std::vector<Segment>{{0, 100}}));
    EXPECT_EQ(plan_split(video(1000), 600, 60).segments, (std::vector<Segment>{{0, 600}, {540, 1000}}));
    EXPECT_THROW(plan_split(video(100), 60, 60), InvalidOverlap);
    EXPECT_THROW(plan_split(video(100), 60, -1), InvalidOverlap);
}

TEST(SplitPlan, CoverageAndOverlapProperty) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dur(1, 7200);
    std::uniform_real_distribution<double> len(10, 900);
    std::uniform_real_distribution<double> frac(0, 0.9);
    for (int i = 0; i < 500; ++i) {
        const double d = dur(rng);
        const double l = len(rng);
        const double o = i % 3 == 0 ? 0.0 : frac(rng) * l;
        const auto segs = plan_split(video(d), l, o).segments;
        ASSERT_FALSE(segs.empty());
        EXPECT_DOUBLE_EQ(segs.front().start_s, 0.0);
        EXPECT_DOUBLE_EQ(segs.back().end_s, d);
        if (d > l) {
            EXPECT_EQ(segs.size(), static_cast<std::size_t>(std::ceil((d - o) / (l - o) - 1e-9)));
        }
        for (std::size_t k = 0; k < segs.size(); ++k) {
            EXPECT_LE(segs[k].end_s - segs[k].start_s, l + 1e-9);
            if (k + 1 < segs.size()) {
                // No gaps; the exact overlap holds for every pair but the last.
                EXPECT_LE(segs[k + 1].start_s, segs[k].end_s + 1e-9);
                if (k + 2 < segs.size()) EXPECT_NEAR(segs[k].end_s - segs[k + 1].start_s, o, 1e-6);
            }
        }
    }
}
