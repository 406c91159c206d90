#include "vidharness/media.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "vidharness/errors.hpp"
#include "vidharness/subprocess.hpp"

namespace vidharness::media {

namespace {

constexpr std::array<std::pair<Container, std::string_view>, 12> kContainerNames{{
    {Container::mp4, "mp4"},
    {Container::m4v, "m4v"},
    {Container::quicktime, "quicktime"},
    {Container::wmv, "wmv"},
    {Container::webm, "webm"},
    {Container::msvideo, "msvideo"},
    {Container::mpg, "mpg"},
    {Container::threegpp, "3gpp"},
    {Container::mp3, "mp3"},
    {Container::wav, "wav"},
    {Container::m4a, "m4a"},
    {Container::flac, "flac"},
}};

constexpr std::array<std::pair<std::string_view, Container>, 17> kExtensions{{
    {".mp4", Container::mp4},
    {".m4v", Container::m4v},
    {".mov", Container::quicktime},
    {".qt", Container::quicktime},
    {".wmv", Container::wmv},
    {".webm", Container::webm},
    {".avi", Container::msvideo},
    {".mpg", Container::mpg},
    {".mpeg", Container::mpg},
    {".3gp", Container::threegpp},
    {".3gpp", Container::threegpp},
    {".mp3", Container::mp3},
    {".wav", Container::wav},
    {".m4a", Container::m4a},
    {".flac", Container::flac},
    {".mpe", Container::mpg},
    {".3g2", Container::threegpp},
}};

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// ffprobe format_name values that name exactly one supported container.
std::optional<Container> container_from_format_name(const std::string& format_name) {
    if (format_name == "asf") return Container::wmv;
    if (format_name == "avi") return Container::msvideo;
    if (format_name == "mpeg" || format_name == "mpegvideo") return Container::mpg;
    if (format_name == "mp3") return Container::mp3;
    if (format_name == "wav") return Container::wav;
    if (format_name == "flac") return Container::flac;
    // "matroska,webm" and "mov,mp4,m4a,3gp,3g2,mj2" are families; the
    // extension picks the member.
    return std::nullopt;
}

bool family_contains(const std::string& format_name, Container c) {
    if (format_name == "matroska,webm") return c == Container::webm;
    if (format_name.rfind("mov,mp4", 0) == 0) {
        return c == Container::mp4 || c == Container::m4v || c == Container::quicktime ||
               c == Container::threegpp || c == Container::m4a;
    }
    return false;
}

double number_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) return std::nan("");
    const auto& v = j.at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        try {
            return std::stod(v.get<std::string>());
        } catch (const std::exception&) {
            return std::nan("");
        }
    }
    return std::nan("");
}

}  // namespace

std::string_view to_string(MediaKind kind) {
    return kind == MediaKind::video ? "video" : "audio";
}

std::string_view to_string(Container container) {
    for (const auto& [c, name] : kContainerNames) {
        if (c == container) return name;
    }
    return "unknown";
}

std::optional<Container> container_from_string(std::string_view tag) {
    for (const auto& [c, name] : kContainerNames) {
        if (name == tag) return c;
    }
    return std::nullopt;
}

MediaKind kind_of(Container container) {
    switch (container) {
        case Container::mp3:
        case Container::wav:
        case Container::m4a:
        case Container::flac:
            return MediaKind::audio;
        default:
            return MediaKind::video;
    }
}

std::optional<Container> container_from_extension(const std::filesystem::path& path) {
    const std::string ext = lower(path.extension().string());
    for (const auto& [e, c] : kExtensions) {
        if (e == ext) return c;
    }
    return std::nullopt;
}

nlohmann::json to_json(const MediaAsset& asset) {
    nlohmann::json j{
        {"path", asset.path.generic_string()},
        {"kind", to_string(asset.kind)},
        {"container", to_string(asset.container)},
        {"duration_s", asset.duration_s},
        {"has_audio_stream", asset.has_audio_stream},
    };
    if (asset.width_px) j["width_px"] = *asset.width_px;
    if (asset.height_px) j["height_px"] = *asset.height_px;
    return j;
}

MediaAsset asset_from_json(const nlohmann::json& j) {
    MediaAsset asset;
    asset.path = j.at("path").get<std::string>();
    const auto container = container_from_string(j.at("container").get<std::string>());
    if (!container) throw UnsupportedFormat(j.at("container").get<std::string>());
    asset.container = *container;
    asset.kind = kind_of(*container);
    asset.duration_s = j.at("duration_s").get<double>();
    asset.has_audio_stream = j.value("has_audio_stream", false);
    if (j.contains("width_px")) asset.width_px = j.at("width_px").get<int>();
    if (j.contains("height_px")) asset.height_px = j.at("height_px").get<int>();
    return asset;
}

MediaAsset asset_from_probe(const std::filesystem::path& path, const nlohmann::json& probe) {
    const auto by_extension = container_from_extension(path);
    if (!by_extension) throw UnsupportedFormat(path.string());
    if (!probe.is_object() || !probe.contains("format")) {
        throw ProbeFailure(path.string() + ": probe output has no 'format' section");
    }
    const auto& format = probe.at("format");
    const std::string format_name = lower(format.value("format_name", ""));

    Container container = *by_extension;
    if (auto exact = container_from_format_name(format_name)) {
        container = *exact;
    } else if (!format_name.empty() && !family_contains(format_name, *by_extension)) {
        throw UnsupportedFormat(path.string() + ": probed container '" + format_name +
                                "' is not a supported format");
    }

    MediaAsset asset;
    asset.path = path;
    asset.container = container;
    asset.kind = kind_of(container);

    double duration = number_field(format, "duration");
    bool has_video = false;
    if (probe.contains("streams")) {
        for (const auto& stream : probe.at("streams")) {
            const std::string type = stream.value("codec_type", "");
            if (type == "audio") asset.has_audio_stream = true;
            if (type == "video") {
                const bool cover_art = stream.contains("disposition") &&
                                       stream.at("disposition").value("attached_pic", 0) == 1;
                if (cover_art || has_video) continue;
                has_video = true;
                if (stream.contains("width")) asset.width_px = stream.at("width").get<int>();
                if (stream.contains("height")) asset.height_px = stream.at("height").get<int>();
            }
            if (std::isnan(duration)) duration = number_field(stream, "duration");
        }
    }
    if (std::isnan(duration) || duration < 0) {
        throw ProbeFailure(path.string() + ": probe reported no usable duration");
    }
    asset.duration_s = duration;

    if (asset.kind == MediaKind::video) {
        if (!has_video || !asset.width_px || !asset.height_px || *asset.width_px <= 0 ||
            *asset.height_px <= 0) {
            throw ProbeFailure(path.string() + ": video container without a sized video stream");
        }
    } else {
        asset.width_px.reset();
        asset.height_px.reset();
        asset.has_audio_stream = true;
    }
    return asset;
}

FramePlan plan_frames(const MediaAsset& asset, double fps) {
    if (asset.kind != MediaKind::video) throw NotAVideo(asset.path.string());
    if (!(fps > 0.0) || !std::isfinite(fps)) {
        throw std::invalid_argument("fps must be a positive finite number");
    }
    FramePlan plan;
    plan.fps = fps;
    if (asset.duration_s <= 0.0) return plan;
    if (fps * asset.duration_s < 1.0) {
        plan.timestamps_s.push_back(asset.duration_s / 2.0);
        return plan;
    }
    for (long long k = 0;; ++k) {
        // k / fps rather than k * (1 / fps): keeps 0.1 FPS on an exact 10 s grid.
        const double t = std::round(static_cast<double>(k) / fps * 1e6) / 1e6;
        if (t >= asset.duration_s) break;
        plan.timestamps_s.push_back(t);
    }
    return plan;
}

SplitPlan plan_split(const MediaAsset& asset, double segment_length_s, double overlap_s) {
    if (!(segment_length_s > 0.0)) throw std::invalid_argument("segment length must be positive");
    if (!(overlap_s >= 0.0) || overlap_s >= segment_length_s) {
        throw InvalidOverlap("overlap " + std::to_string(overlap_s) +
                             " must lie in [0, segment length " +
                             std::to_string(segment_length_s) + ")");
    }
    SplitPlan plan;
    plan.segment_length_s = segment_length_s;
    plan.overlap_s = overlap_s;
    const double duration = asset.duration_s;
    if (duration <= segment_length_s) {
        plan.segments.push_back({0.0, duration});
        return plan;
    }
    const double step = segment_length_s - overlap_s;
    const auto count =
        static_cast<std::size_t>(std::ceil((duration - overlap_s) / step - 1e-9));
    for (std::size_t i = 0; i < count; ++i) {
        const double start = static_cast<double>(i) * step;
        plan.segments.push_back({start, std::min(start + segment_length_s, duration)});
    }
    plan.segments.back().end_s = duration;
    return plan;
}

std::string format_seconds(double seconds) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", seconds);
    return buf;
}

MediaTool::MediaTool(ToolCommands commands) : commands_(std::move(commands)) {}

std::shared_ptr<std::mutex> MediaTool::lock_for(const std::filesystem::path& path) const {
    std::lock_guard guard(locks_mutex_);
    auto& slot = locks_[std::filesystem::absolute(path).lexically_normal().string()];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
}

MediaAsset MediaTool::probe(const std::filesystem::path& path) const {
    if (!container_from_extension(path)) throw UnsupportedFormat(path.string());
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw ProbeFailure(path.string() + ": not a readable file");
    }
    auto lock = lock_for(path);
    std::lock_guard guard(*lock);
    CommandResult result;
    try {
        result = run_command(expand_command(commands_.probe, {{"input", path.string()}}));
    } catch (const ToolFailure& e) {
        throw ProbeFailure(e.what());
    }
    if (result.exit_code != 0) {
        throw ProbeFailure(path.string() + ": probe exited with " +
                           std::to_string(result.exit_code) + " " + result.err);
    }
    nlohmann::json probe;
    try {
        probe = nlohmann::json::parse(result.out);
    } catch (const nlohmann::json::exception& e) {
        throw ProbeFailure(path.string() + ": probe output is not JSON (" + e.what() + ")");
    }
    return asset_from_probe(path, probe);
}

std::filesystem::path MediaTool::extract_frame(const std::filesystem::path& input,
                                               double timestamp_s,
                                               const std::filesystem::path& output) const {
    auto lock = lock_for(input);
    std::lock_guard guard(*lock);
    if (std::filesystem::exists(output)) return output;
    if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
    const auto result = run_command(expand_command(
        commands_.extract_frame,
        {{"input", input.string()}, {"timestamp", format_seconds(timestamp_s)}, {"output", output.string()}}));
    if (result.exit_code != 0 || !std::filesystem::exists(output)) {
        throw ToolFailure("frame extraction failed for " + input.string() + " at " +
                          format_seconds(timestamp_s) + "s: " + result.err);
    }
    return output;
}

std::filesystem::path MediaTool::extract_audio(const std::filesystem::path& input,
                                               const std::filesystem::path& output) const {
    auto lock = lock_for(input);
    std::lock_guard guard(*lock);
    if (std::filesystem::exists(output)) return output;
    if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
    const auto result = run_command(
        expand_command(commands_.extract_audio, {{"input", input.string()}, {"output", output.string()}}));
    if (result.exit_code != 0 || !std::filesystem::exists(output)) {
        throw ToolFailure("audio extraction failed for " + input.string() + ": " + result.err);
    }
    return output;
}

}  // namespace vidharness::media
