#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace vidharness::media {

enum class MediaKind { video, audio };

enum class Container {
    mp4, m4v, quicktime, wmv, webm, msvideo, mpg, threegpp,  // video
    mp3, wav, m4a, flac                                      // audio
};

std::string_view to_string(MediaKind kind);
std::string_view to_string(Container container);
std::optional<Container> container_from_string(std::string_view tag);
MediaKind kind_of(Container container);

/// Classifies a file by its extension (case-insensitive). Returns nullopt
/// for anything outside the twelve supported containers.
std::optional<Container> container_from_extension(const std::filesystem::path& path);

struct MediaAsset {
    std::filesystem::path path;
    MediaKind kind = MediaKind::video;
    Container container = Container::mp4;
    double duration_s = 0.0;
    bool has_audio_stream = false;
    std::optional<int> width_px;
    std::optional<int> height_px;

    friend bool operator==(const MediaAsset&, const MediaAsset&) = default;
};

nlohmann::json to_json(const MediaAsset& asset);
MediaAsset asset_from_json(const nlohmann::json& j);

/// Builds an asset from ffprobe-style JSON (`-show_format -show_streams`).
/// The container comes from the probe's format_name when it is
/// unambiguous and from the extension otherwise.
MediaAsset asset_from_probe(const std::filesystem::path& path, const nlohmann::json& probe);

struct FramePlan {
    double fps = 1.0;
    std::vector<double> timestamps_s;
};

struct Segment {
    double start_s = 0.0;
    double end_s = 0.0;

    friend bool operator==(const Segment&, const Segment&) = default;
};

struct SplitPlan {
    double segment_length_s = 0.0;
    double overlap_s = 0.0;
    std::vector<Segment> segments;
};

/// Sampling instants k/fps inside [0, duration). When fps * duration < 1
/// a single frame at the midpoint is planned instead.
FramePlan plan_frames(const MediaAsset& asset, double fps);

/// Contiguous covering segments of at most `segment_length_s`, consecutive
/// segments sharing `overlap_s` seconds.
SplitPlan plan_split(const MediaAsset& asset, double segment_length_s, double overlap_s);

/// Command templates for the external media tool. Placeholders:
/// {input}, {timestamp} (seconds), {output}.
struct ToolCommands {
    std::string probe = "ffprobe -v quiet -print_format json -show_format -show_streams {input}";
    std::string extract_frame = "ffmpeg -v error -ss {timestamp} -i {input} -frames:v 1 -y {output}";
    std::string extract_audio = "ffmpeg -v error -i {input} -vn -ac 1 -ar 16000 -y {output}";
};

/// Invokes the external media tool. Calls touching the same file are
/// serialized; distinct files may be probed concurrently.
class MediaTool {
public:
    explicit MediaTool(ToolCommands commands = {});

    /// Throws UnsupportedFormat before running anything when the extension
    /// is outside the supported lists, ProbeFailure on tool errors.
    MediaAsset probe(const std::filesystem::path& path) const;

    /// Writes the frame at `timestamp_s` to `output` unless it already
    /// exists. Returns the output path.
    std::filesystem::path extract_frame(const std::filesystem::path& input, double timestamp_s,
                                        const std::filesystem::path& output) const;

    std::filesystem::path extract_audio(const std::filesystem::path& input,
                                        const std::filesystem::path& output) const;

    const ToolCommands& commands() const { return commands_; }

private:
    std::shared_ptr<std::mutex> lock_for(const std::filesystem::path& path) const;

    ToolCommands commands_;
    mutable std::mutex locks_mutex_;
    mutable std::map<std::string, std::shared_ptr<std::mutex>> locks_;
};

/// Formats seconds for a frame file name / tool argument with millisecond
/// resolution ("12.5" -> "12.500").
std::string format_seconds(double seconds);

}  // namespace vidharness::media
