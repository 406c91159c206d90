#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace vidharness::parsing {

/// Exclusive upper bound on keyframe timestamps (99:59:59).
inline constexpr std::int64_t kMaxTimestampS = 359999;

struct KeyframeEntry {
    std::int64_t timestamp_s = 0;
    std::string caption;

    friend bool operator==(const KeyframeEntry&, const KeyframeEntry&) = default;
};

struct ParsedVideoOutput {
    std::string summary;
    std::vector<KeyframeEntry> keyframes;
    bool valid = false;

    friend bool operator==(const ParsedVideoOutput&, const ParsedVideoOutput&) = default;
};

enum class AnswerLetter { A, B, C, D };
enum class ConfidenceSource { explicit_pattern, extracted, none };

struct McqAnswer {
    AnswerLetter letter = AnswerLetter::A;
    ConfidenceSource confidence_source = ConfidenceSource::none;

    friend bool operator==(const McqAnswer&, const McqAnswer&) = default;
};

char to_char(AnswerLetter letter);
std::optional<AnswerLetter> letter_from_char(char c);
std::string_view to_string(ConfidenceSource source);

struct ParseOptions {
    std::size_t max_caption_chars = 500;
};

/// "MM:SS" or "HH:MM:SS" with a one- or two-digit leading field.
/// Throws BadTimestamp.
std::int64_t parse_timestamp(std::string_view text);

/// "MM:SS" below one hour, "HH:MM:SS" from one hour on.
std::string format_timestamp(std::int64_t seconds);

/// Renders "(MM:SS, caption)".
std::string format_keyframe(const KeyframeEntry& entry);
/// Renders "MM:SS - caption".
std::string format_keyframe_dashed(const KeyframeEntry& entry);

/// Lenient extraction of keyframe entries. Accepts "(MM:SS, caption)",
/// "(MM:SS) caption", "MM:SS - caption" and "MM:SS caption", several
/// parenthesized or dashed entries per line, bullets and markdown table
/// pipes. Order is preserved; identical (timestamp, caption) pairs are
/// dropped after their first occurrence.
std::vector<KeyframeEntry> parse_keyframes(std::string_view raw_text, const ParseOptions& options = {});

/// Splits summary text from the keyframe block. The block starts at the
/// first keyframe line or at a "Key Frames" header.
ParsedVideoOutput parse_video_output(std::string_view raw_text, const ParseOptions& options = {});

/// First answer letter in the text. Explicit "Answer: X" / "answer is X"
/// forms win over bare letters. Throws NoAnswerFound.
McqAnswer parse_mcq(std::string_view raw_text);
std::optional<McqAnswer> try_parse_mcq(std::string_view raw_text);

nlohmann::json to_json(const KeyframeEntry& k);
nlohmann::json to_json(const ParsedVideoOutput& p);
nlohmann::json to_json(const McqAnswer& a);
ParsedVideoOutput parsed_output_from_json(const nlohmann::json& j);
McqAnswer mcq_answer_from_json(const nlohmann::json& j);

}  // namespace vidharness::parsing
