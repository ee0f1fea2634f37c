#include "poolforge/backend.hpp"
#include "poolforge/embedding.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>

namespace poolforge {

using nlohmann::json;

namespace {

std::string bearer_from_env(const std::string& env_name) {
    if (env_name.empty()) return "";
    const char* v = std::getenv(env_name.c_str());
    return v == nullptr ? "" : v;
}

httplib::Headers auth_headers(const std::string& api_key_env) {
    httplib::Headers headers;
    const std::string key = bearer_from_env(api_key_env);
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    return headers;
}

json post_json(const std::string& base_url, const std::string& path, const json& body,
               const httplib::Headers& headers, int timeout_seconds, const char* what) {
    httplib::Client client(base_url);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_write_timeout(timeout_seconds, 0);

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        throw BackendError(std::string(what) + ": connection to " + base_url + " failed");
    }
    if (res->status == 429 || res->status >= 500) {
        throw BackendError(std::string(what) + ": retryable HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw Error(std::string(what) + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    json parsed = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) {
        throw BackendError(std::string(what) + ": response is not valid JSON");
    }
    return parsed;
}

} // namespace

// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw Error("http backend: base_url is required");
    if (config_.model.empty()) throw Error("http backend: model is required");
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::id() const {
    return "http-" + config_.model;
}

GenerationResult HttpBackend::generate(const PromptPayload& payload, const CallContext&) {
    json body{{"model", config_.model},
              {"messages",
               json::array({{{"role", "system"}, {"content", payload.system_text}},
                            {{"role", "user"}, {"content", payload.user_text}}})},
              {"temperature", payload.temperature},
              {"max_tokens", payload.max_output_tokens}};

    json res = post_json(config_.base_url, config_.path, body,
                         auth_headers(config_.api_key_env), config_.timeout_seconds,
                         "http backend");

    GenerationResult out;
    try {
        out.text = res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError(std::string("http backend: malformed response: ") + e.what());
    }
    if (res.contains("usage") && res["usage"].contains("prompt_tokens") &&
        res["usage"].contains("completion_tokens")) {
        out.usage.prompt_tokens = res["usage"]["prompt_tokens"].get<std::int64_t>();
        out.usage.completion_tokens = res["usage"]["completion_tokens"].get<std::int64_t>();
        out.usage.source = UsageSource::backend_reported;
    } else {
        out.usage = proxy_usage(payload, out.text);
    }
    return out;
}

// ---------------------------------------------------------------------------

HttpEmbedder::HttpEmbedder(HttpEmbedderConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw Error("http embedder: base_url is required");
    if (config_.model.empty()) throw Error("http embedder: model is required");
}

HttpEmbedder::~HttpEmbedder() = default;

std::string HttpEmbedder::id() const {
    return config_.model;
}

Eigen::MatrixXd HttpEmbedder::embed(const std::vector<std::string>& texts) {
    Eigen::MatrixXd out;
    Eigen::Index next_row = 0;

    for (size_t start = 0; start < texts.size(); start += static_cast<size_t>(config_.batch_size)) {
        const size_t end = std::min(texts.size(), start + static_cast<size_t>(config_.batch_size));
        json input = json::array();
        for (size_t i = start; i < end; ++i) input.push_back(texts[i]);

        json res = post_json(config_.base_url, config_.path,
                             json{{"model", config_.model}, {"input", std::move(input)}},
                             auth_headers(config_.api_key_env), config_.timeout_seconds,
                             "http embedder");

        const auto& data = res.at("data");
        if (data.size() != end - start) {
            throw BackendError("http embedder: response row count mismatch");
        }
        for (size_t i = 0; i < data.size(); ++i) {
            const auto& vec = data[i].at("embedding");
            if (out.size() == 0) {
                dim_ = static_cast<int>(vec.size());
                out.resize(static_cast<Eigen::Index>(texts.size()), dim_);
            }
            if (static_cast<int>(vec.size()) != dim_) {
                throw Error("http embedder: dimension changed mid-run");
            }
            for (int d = 0; d < dim_; ++d) {
                out(next_row, d) = vec[static_cast<size_t>(d)].get<double>();
            }
            ++next_row;
        }
    }
    return out;
}

} // namespace poolforge
