#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <openssl/evp.h>

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "vidharness/errors.hpp"
#include "vidharness/providers.hpp"

namespace vidharness::providers {

namespace {

std::string base64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint '" + url + "' lacks a scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string text_at(const nlohmann::json& body, const std::string& pointer) {
    if (pointer.empty()) return body.dump();
    const nlohmann::json::json_pointer ptr(pointer);
    if (!body.contains(ptr)) return {};
    const auto& v = body.at(ptr);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return {};
    return v.dump();
}

}  // namespace

HttpBackend::HttpBackend(ProviderConfig config) : config_(std::move(config)) {}

nlohmann::json HttpBackend::build_body(const ModelRequest& request) const {
    nlohmann::json body = config_.extra_fields.is_object() ? config_.extra_fields : nlohmann::json::object();
    if (!config_.model_field.empty()) body[config_.model_field] = config_.model;
    if (!request.prompt.empty() || config_.modality != Modality::asr) {
        body[config_.prompt_field] = request.prompt;
    }
    if (!request.frame_refs.empty()) {
        nlohmann::json frames = nlohmann::json::array();
        for (const auto& f : request.frame_refs) frames.push_back(base64_file(f));
        body[config_.frames_field] = std::move(frames);
    }
    if (request.audio_ref) body[config_.audio_field] = base64_file(*request.audio_ref);
    return body;
}

ModelResponse HttpBackend::interpret(int http_status, const std::string& body) const {
    ModelResponse response;
    nlohmann::json parsed;
    const bool is_json = [&] {
        try {
            parsed = nlohmann::json::parse(body);
            return true;
        } catch (const nlohmann::json::exception&) {
            return false;
        }
    }();

    std::string error_text;
    if (is_json && !config_.error_pointer.empty()) error_text = text_at(parsed, config_.error_pointer);
    if (http_status >= 400 && error_text.empty()) error_text = body;

    if (!error_text.empty() && matches_oom(error_text, config_.oom_patterns)) {
        response.status = ResponseStatus::oom;
        response.detail = error_text;
        return response;
    }
    if (http_status == 408 || http_status == 504) {
        response.status = ResponseStatus::timeout;
        response.detail = error_text;
        return response;
    }
    if (http_status >= 400 || !error_text.empty()) {
        response.status = ResponseStatus::invalid;
        response.detail = "HTTP " + std::to_string(http_status) + ": " + error_text;
        return response;
    }
    if (!is_json) {
        response.status = ResponseStatus::invalid;
        response.detail = "reply is not JSON";
        return response;
    }
    response.raw_text = text_at(parsed, config_.text_pointer);
    response.status = response.raw_text.empty() ? ResponseStatus::invalid : ResponseStatus::ok;
    return response;
}

ModelResponse HttpBackend::invoke(const ModelRequest& request) {
    const auto endpoint = split_endpoint(config_.endpoint);
    const std::string payload = build_body(request).dump();

    httplib::Headers headers;
    if (!config_.auth_header.empty() && !config_.auth_value.empty()) {
        headers.emplace(config_.auth_header, resolve_env_refs(config_.auth_value));
    }

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        httplib::Client client(endpoint.origin);
        client.set_connection_timeout(std::chrono::seconds(std::min(config_.timeout_s, 30)));
        client.set_read_timeout(std::chrono::seconds(config_.timeout_s));
        client.set_write_timeout(std::chrono::seconds(config_.timeout_s));

        const auto started = std::chrono::steady_clock::now();
        auto result = client.Post(endpoint.path, headers, payload, "application/json");
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();
        if (result) {
            auto response = interpret(result->status, result->body);
            response.latency_ms = elapsed;
            const bool retryable = result->status >= 500 && response.status == ResponseStatus::invalid;
            if (!retryable) return response;
            last_error = response.detail;
            continue;
        }
        const auto err = result.error();
        if (err == httplib::Error::ConnectionTimeout ||
            (err == httplib::Error::Read && elapsed >= config_.timeout_s * 1000LL)) {
            ModelResponse response;
            response.status = ResponseStatus::timeout;
            response.latency_ms = elapsed;
            response.detail = "timed out after " + std::to_string(elapsed) + " ms";
            if (attempt == config_.retries) return response;
            last_error = response.detail;
            continue;
        }
        last_error = httplib::to_string(err);
    }
    throw ProviderUnavailable(config_.id + " at " + config_.endpoint + ": " + last_error);
}

}  // namespace vidharness::providers
