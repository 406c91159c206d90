#include "vidharness/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <utility>

#include "vidharness/errors.hpp"

namespace vidharness::parsing {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

// A timestamp token at `pos`: returns its length and value, or nullopt.
// Refuses tokens glued to surrounding digits.
struct TimestampToken {
    std::size_t length = 0;
    std::int64_t seconds = 0;
};

std::optional<TimestampToken> timestamp_at(std::string_view s, std::size_t pos) {
    if (pos > 0 && (is_digit(s[pos - 1]) || s[pos - 1] == ':')) return std::nullopt;
    std::size_t i = pos;
    std::size_t lead = 0;
    while (i < s.size() && is_digit(s[i]) && lead < 3) {
        ++i;
        ++lead;
    }
    if (lead == 0 || lead > 2) return std::nullopt;
    int groups = 0;
    while (i + 2 < s.size() + 0 && s[i] == ':' && is_digit(s[i + 1]) && is_digit(s[i + 2]) && groups < 2) {
        i += 3;
        ++groups;
    }
    if (groups == 0) return std::nullopt;
    if (i < s.size() && (is_digit(s[i]) || (s[i] == ':' && i + 1 < s.size() && is_digit(s[i + 1])))) {
        return std::nullopt;
    }
    try {
        return TimestampToken{i - pos, parse_timestamp(s.substr(pos, i - pos))};
    } catch (const BadTimestamp&) {
        return std::nullopt;
    }
}

enum class MarkerStyle { paren_comma, paren_close, bare };

struct Marker {
    std::size_t begin = 0;          // first char of the marker
    std::size_t caption_begin = 0;  // first char after the marker
    std::int64_t seconds = 0;
    MarkerStyle style = MarkerStyle::bare;
};

std::size_t skip_spaces(std::string_view s, std::size_t i) {
    while (i < s.size() && is_space(s[i])) ++i;
    return i;
}

// Dash-like separators, including UTF-8 en and em dashes.
std::size_t separator_length(std::string_view s, std::size_t i) {
    if (i >= s.size()) return 0;
    if (s[i] == '-' || s[i] == ':' || s[i] == '|') return 1;
    if (s.substr(i, 3) == "\xE2\x80\x93" || s.substr(i, 3) == "\xE2\x80\x94") return 3;
    return 0;
}

std::optional<Marker> paren_marker_at(std::string_view s, std::size_t pos) {
    if (pos >= s.size() || s[pos] != '(') return std::nullopt;
    const auto ts = timestamp_at(s, skip_spaces(s, pos + 1));
    if (!ts) return std::nullopt;
    std::size_t i = skip_spaces(s, pos + 1) + ts->length;
    i = skip_spaces(s, i);
    if (i >= s.size()) return std::nullopt;
    if (s[i] == ',') return Marker{pos, skip_spaces(s, i + 1), ts->seconds, MarkerStyle::paren_comma};
    if (s[i] == ')') {
        std::size_t j = skip_spaces(s, i + 1);
        if (const auto sep = separator_length(s, j); sep > 0) j = skip_spaces(s, j + sep);
        return Marker{pos, j, ts->seconds, MarkerStyle::paren_close};
    }
    return std::nullopt;
}

// "MM:SS" + optional separator. `require_dash` demands an explicit
// separator (used for markers after the start of a line).
std::optional<Marker> bare_marker_at(std::string_view s, std::size_t pos, bool require_dash) {
    const auto ts = timestamp_at(s, pos);
    if (!ts) return std::nullopt;
    std::size_t i = pos + ts->length;
    const std::size_t after_ts = i;
    i = skip_spaces(s, i);
    const auto sep = separator_length(s, i);
    if (sep > 0) {
        if (require_dash && (s[i] == ':' || i == after_ts)) return std::nullopt;
        i = skip_spaces(s, i + sep);
    } else {
        if (require_dash) return std::nullopt;
        if (i == after_ts && i < s.size()) return std::nullopt;  // "01:27am"
    }
    return Marker{pos, i, ts->seconds, MarkerStyle::bare};
}

// Removes bullets, enumerations, markdown emphasis and table pipes.
std::string_view strip_decorations(std::string_view line) {
    line = trim(line);
    bool changed = true;
    while (changed && !line.empty()) {
        changed = false;
        if (line.substr(0, 2) == "**" || line.substr(0, 2) == "__") {
            line = trim(line.substr(2));
            changed = true;
        } else if (line.front() == '-' || line.front() == '*' || line.front() == '+' || line.front() == '|' ||
                   line.front() == '>') {
            // "- 00:08 ..." but not "-00:08"
            if (line.front() == '-' && line.size() > 1 && !is_space(line[1])) break;
            line = trim(line.substr(1));
            changed = true;
        } else if (line.substr(0, 3) == "\xE2\x80\xA2") {  // bullet
            line = trim(line.substr(3));
            changed = true;
        } else if (is_digit(line.front())) {
            std::size_t i = 0;
            while (i < line.size() && is_digit(line[i])) ++i;
            if (i <= 3 && i < line.size() && (line[i] == '.' || line[i] == ')') && i + 1 < line.size() &&
                is_space(line[i + 1])) {
                line = trim(line.substr(i + 1));
                changed = true;
            }
        }
    }
    return line;
}

// Recognizes a "Key Frames" header. Returns the text following it (possibly
// empty) or nullopt when the line is not a header.
std::optional<std::string_view> header_remainder(std::string_view line) {
    std::size_t i = 0;
    if (starts_with_ci(line, "key frames")) {
        i = 10;
    } else if (starts_with_ci(line, "keyframes")) {
        i = 9;
    } else if (starts_with_ci(line, "key frame")) {
        i = 9;
    } else if (starts_with_ci(line, "keyframe")) {
        i = 8;
    } else {
        return std::nullopt;
    }
    if (i < line.size() && is_alnum(line[i])) return std::nullopt;
    const auto rest = line.substr(i);
    const auto colon = rest.find(':');
    if (colon != std::string_view::npos && colon <= 40 && rest.substr(0, colon).find('.') == std::string_view::npos) {
        auto after = trim(rest.substr(colon + 1));
        while (after.substr(0, 2) == "**") after = trim(after.substr(2));
        return after;
    }
    // Header without colon: only emphasis or a parenthetical may follow.
    auto tail = trim(rest);
    while (tail.substr(0, 2) == "**") tail = trim(tail.substr(2));
    if (!tail.empty() && tail.front() == '(' && tail.back() == ')') tail = {};
    while (!tail.empty() && (tail.back() == '*' || tail.back() == '#')) tail.remove_suffix(1);
    if (trim(tail).empty()) return std::string_view{};
    return std::nullopt;
}

std::optional<Marker> leading_marker(std::string_view body) {
    if (auto m = paren_marker_at(body, 0)) return m;
    return bare_marker_at(body, 0, false);
}

std::optional<Marker> next_inline_marker(std::string_view body, std::size_t from, MarkerStyle first_style) {
    for (std::size_t i = from; i < body.size(); ++i) {
        if (body[i] == '(' && first_style != MarkerStyle::bare) {
            if (auto m = paren_marker_at(body, i)) return m;
        }
        if (first_style == MarkerStyle::bare && is_digit(body[i]) && i > 0 && is_space(body[i - 1])) {
            if (auto m = bare_marker_at(body, i, true)) return m;
        }
    }
    return std::nullopt;
}

std::string clean_caption(std::string_view raw, MarkerStyle style, bool followed_by_marker,
                          const ParseOptions& options) {
    auto c = trim(raw);
    if (followed_by_marker) {
        while (!c.empty() && (c.back() == ',' || c.back() == ';')) c = trim(c.substr(0, c.size() - 1));
    }
    if (style == MarkerStyle::paren_comma && !c.empty() && c.back() == ')') c.remove_suffix(1);
    c = trim(c);
    while (!c.empty() && c.back() == '|') c = trim(c.substr(0, c.size() - 1));
    while (c.size() >= 2 && c.substr(0, 2) == "**") c = trim(c.substr(2));
    std::string caption(c);
    if (caption.size() > options.max_caption_chars) {
        std::size_t cut = options.max_caption_chars;
        while (cut > 0 && (static_cast<unsigned char>(caption[cut]) & 0xC0) == 0x80) --cut;
        caption.resize(cut);
        caption = std::string(trim(caption));
    }
    return caption;
}

// Extracts entries from one (already decorated-stripped) line body that
// starts with a marker.
void entries_from_body(std::string_view body, const ParseOptions& options, std::vector<KeyframeEntry>& out) {
    auto marker = leading_marker(body);
    if (!marker) return;
    const MarkerStyle style = marker->style;
    while (marker) {
        auto next = next_inline_marker(body, marker->caption_begin, style);
        const std::size_t end = next ? next->begin : body.size();
        auto caption = clean_caption(body.substr(marker->caption_begin, end - marker->caption_begin),
                                     marker->style, next.has_value(), options);
        if (!caption.empty() && marker->seconds < kMaxTimestampS) {
            out.push_back({marker->seconds, std::move(caption)});
        }
        marker = next;
    }
}

struct LineKind {
    bool keyframe = false;
    bool header = false;
    std::string_view body;  // text to mine for entries
};

LineKind classify_line(std::string_view line) {
    LineKind kind;
    auto body = strip_decorations(line);
    if (auto rest = header_remainder(body)) {
        kind.header = true;
        kind.body = strip_decorations(*rest);
        return kind;
    }
    if (leading_marker(body)) {
        kind.keyframe = true;
        kind.body = body;
    }
    return kind;
}

std::string_view strip_summary_label(std::string_view text) {
    auto t = trim(text);
    while (t.substr(0, 2) == "**") t = trim(t.substr(2));
    if (starts_with_ci(t, "summary")) {
        auto rest = t.substr(7);
        while (rest.substr(0, 2) == "**") rest = rest.substr(2);
        rest = trim(rest);
        if (!rest.empty() && rest.front() == ':') {
            rest = trim(rest.substr(1));
            while (rest.substr(0, 2) == "**") rest = trim(rest.substr(2));
            return rest;
        }
    }
    return t;
}

}  // namespace

char to_char(AnswerLetter letter) { return static_cast<char>('A' + static_cast<int>(letter)); }

std::optional<AnswerLetter> letter_from_char(char c) {
    if (c >= 'A' && c <= 'D') return static_cast<AnswerLetter>(c - 'A');
    return std::nullopt;
}

std::string_view to_string(ConfidenceSource source) {
    switch (source) {
        case ConfidenceSource::explicit_pattern: return "explicit";
        case ConfidenceSource::extracted: return "extracted";
        case ConfidenceSource::none: return "none";
    }
    return "none";
}

std::int64_t parse_timestamp(std::string_view text) {
    const auto t = trim(text);
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto colon = t.find(':', start);
        fields.push_back(t.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start));
        if (colon == std::string_view::npos) break;
        start = colon + 1;
    }
    if (fields.size() < 2 || fields.size() > 3) throw BadTimestamp("'" + std::string(text) + "'");
    std::vector<std::int64_t> values;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto f = fields[i];
        const bool leading = i == 0;
        if (f.empty() || (leading ? f.size() > 2 : f.size() != 2) ||
            !std::all_of(f.begin(), f.end(), is_digit)) {
            throw BadTimestamp("'" + std::string(text) + "'");
        }
        std::int64_t v = 0;
        for (char c : f) v = v * 10 + (c - '0');
        values.push_back(v);
    }
    // Every field after the leading one is minutes or seconds; in MM:SS the
    // leading field is minutes as well.
    for (std::size_t i = 0; i < values.size(); ++i) {
        const bool is_hours = values.size() == 3 && i == 0;
        if (!is_hours && values[i] >= 60) throw BadTimestamp("'" + std::string(text) + "' field out of range");
    }
    if (values.size() == 2) return values[0] * 60 + values[1];
    return values[0] * 3600 + values[1] * 60 + values[2];
}

std::string format_timestamp(std::int64_t seconds) {
    if (seconds < 0) throw BadTimestamp("negative timestamp");
    char buf[32];
    if (seconds < 3600) {
        std::snprintf(buf, sizeof buf, "%02lld:%02lld", static_cast<long long>(seconds / 60),
                      static_cast<long long>(seconds % 60));
    } else {
        std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(seconds / 3600),
                      static_cast<long long>((seconds / 60) % 60), static_cast<long long>(seconds % 60));
    }
    return buf;
}

std::string format_keyframe(const KeyframeEntry& entry) {
    return "(" + format_timestamp(entry.timestamp_s) + ", " + entry.caption + ")";
}

std::string format_keyframe_dashed(const KeyframeEntry& entry) {
    return format_timestamp(entry.timestamp_s) + " - " + entry.caption;
}

std::vector<KeyframeEntry> parse_keyframes(std::string_view raw_text, const ParseOptions& options) {
    std::vector<KeyframeEntry> entries;
    for (const auto line : split_lines(raw_text)) {
        const auto kind = classify_line(line);
        if (kind.keyframe || kind.header) entries_from_body(kind.body, options, entries);
    }
    std::set<std::pair<std::int64_t, std::string>> seen;
    std::vector<KeyframeEntry> unique;
    unique.reserve(entries.size());
    for (auto& e : entries) {
        if (seen.emplace(e.timestamp_s, e.caption).second) unique.push_back(std::move(e));
    }
    return unique;
}

ParsedVideoOutput parse_video_output(std::string_view raw_text, const ParseOptions& options) {
    ParsedVideoOutput out;
    const auto lines = split_lines(raw_text);
    std::size_t block_start = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto kind = classify_line(lines[i]);
        if (kind.keyframe || kind.header) {
            block_start = i;
            break;
        }
    }
    std::string summary;
    for (std::size_t i = 0; i < block_start; ++i) {
        if (!summary.empty()) summary.push_back('\n');
        summary.append(lines[i]);
    }
    out.summary = std::string(strip_summary_label(summary));
    if (block_start < lines.size()) {
        // Offsets of the block inside raw_text: string_views share storage.
        const auto offset = static_cast<std::size_t>(lines[block_start].data() - raw_text.data());
        out.keyframes = parse_keyframes(raw_text.substr(offset), options);
    }
    out.valid = !out.summary.empty();
    return out;
}

std::optional<McqAnswer> try_parse_mcq(std::string_view raw_text) {
    const std::string text(raw_text);
    const std::string low = lower(text);

    auto standalone = [&](std::size_t i) {
        const bool left_ok = i == 0 || !is_alnum(text[i - 1]);
        const bool right_ok = i + 1 >= text.size() || (!is_alnum(text[i + 1]) && text[i + 1] != '\'' && text[i + 1] != '-');
        return left_ok && right_ok;
    };

    // Explicit: "answer" [is|:|would be|...] [option] ["("] LETTER
    for (auto pos = low.find("answer"); pos != std::string::npos; pos = low.find("answer", pos + 1)) {
        std::size_t i = pos + 6;
        if (i < low.size() && low[i] == 's') ++i;
        auto skip = [&](std::string_view word) {
            std::size_t j = i;
            while (j < low.size() && (is_space(low[j]) || low[j] == ':' || low[j] == '*')) ++j;
            if (low.compare(j, word.size(), word) == 0 && (j + word.size() >= low.size() || !is_alnum(low[j + word.size()]))) {
                i = j + word.size();
                return true;
            }
            return false;
        };
        skip("is") || skip("would be") || skip("should be");
        skip("option");
        while (i < low.size() && (is_space(low[i]) || low[i] == ':' || low[i] == '*' || low[i] == '(' || low[i] == '"')) ++i;
        if (i < text.size()) {
            const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(text[i])));
            const bool case_ok = std::isupper(static_cast<unsigned char>(text[i])) || (i > 0 && text[i - 1] == '(');
            if (case_ok && letter_from_char(c) && standalone(i)) {
                return McqAnswer{*letter_from_char(c), ConfidenceSource::explicit_pattern};
            }
        }
    }

    // Bare letter.
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto letter = letter_from_char(text[i]);
        if (!letter || !standalone(i)) continue;
        if (text[i] == 'A' && i + 2 < text.size() && text[i + 1] == ' ' &&
            std::islower(static_cast<unsigned char>(text[i + 2]))) {
            continue;  // the article "A"
        }
        return McqAnswer{*letter, ConfidenceSource::extracted};
    }
    return std::nullopt;
}

McqAnswer parse_mcq(std::string_view raw_text) {
    if (auto a = try_parse_mcq(raw_text)) return *a;
    throw NoAnswerFound("no option letter in response");
}

nlohmann::json to_json(const KeyframeEntry& k) {
    return {{"time", format_timestamp(k.timestamp_s)}, {"timestamp_s", k.timestamp_s}, {"caption", k.caption}};
}

nlohmann::json to_json(const ParsedVideoOutput& p) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& k : p.keyframes) frames.push_back(to_json(k));
    return {{"summary", p.summary}, {"keyframes", frames}, {"valid", p.valid}};
}

nlohmann::json to_json(const McqAnswer& a) {
    return {{"letter", std::string(1, to_char(a.letter))}, {"confidence_source", to_string(a.confidence_source)}};
}

ParsedVideoOutput parsed_output_from_json(const nlohmann::json& j) {
    ParsedVideoOutput p;
    p.summary = j.value("summary", "");
    if (j.contains("keyframes")) {
        for (const auto& k : j.at("keyframes")) {
            KeyframeEntry e;
            if (k.contains("timestamp_s")) {
                e.timestamp_s = k.at("timestamp_s").get<std::int64_t>();
            } else {
                e.timestamp_s = parse_timestamp(k.at("time").get<std::string>());
            }
            e.caption = k.at("caption").get<std::string>();
            p.keyframes.push_back(std::move(e));
        }
    }
    p.valid = j.value("valid", !p.summary.empty());
    return p;
}

McqAnswer mcq_answer_from_json(const nlohmann::json& j) {
    McqAnswer a;
    const auto letter = j.at("letter").get<std::string>();
    if (letter.size() != 1 || !letter_from_char(letter[0])) throw SchemaError("bad answer letter '" + letter + "'");
    a.letter = *letter_from_char(letter[0]);
    const auto src = j.value("confidence_source", "none");
    a.confidence_source = src == "explicit" ? ConfidenceSource::explicit_pattern
                          : src == "extracted" ? ConfidenceSource::extracted
                                               : ConfidenceSource::none;
    return a;
}

}  // namespace vidharness::parsing
