#pragma once

#include "poolforge/core.hpp"
#include "poolforge/prompts.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace poolforge {

// Identifies a call within a run so deterministic backends can key their
// output. kind distinguishes ordinary generation from the planning call.
struct CallContext {
    CellCoord cell;
    Stage stage = Stage::evaluated;
    int slot = 0;
    bool planning = false;
};

struct GenerationResult {
    std::string text;
    TokenUsage usage;
};

// Raised by backends for failures worth retrying (network, 5xx, rate limit).
class BackendError : public Error {
public:
    using Error::Error;
};

// A text-generation endpoint. Implementations must be safe for concurrent
// invocation.
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual std::string id() const = 0;
    virtual GenerationResult generate(const PromptPayload& payload, const CallContext& ctx) = 0;
};

// Whitespace-token proxy when a backend reports no usage. The 1.3 factor is
// a coarse words-to-tokens constant; proxy counts are flagged in reports.
constexpr double kProxyTokensPerWord = 1.3;
std::int64_t proxy_token_count(const std::string& text);
TokenUsage proxy_usage(const PromptPayload& payload, const std::string& completion);

// Offline deterministic backend. Generated text is derived from a keyed hash
// of (seed, cell, slot, stage, prompt bytes) and padded to a family-plausible
// length, so pools are bit-reproducible and slots are distinct. Planning
// payloads receive a valid five-strata JSON plan.
class MockBackend : public GenerationBackend {
public:
    explicit MockBackend(std::uint64_t seed);
    std::string id() const override;
    GenerationResult generate(const PromptPayload& payload, const CallContext& ctx) override;

private:
    std::string mock_text(const PromptPayload& payload, const CallContext& ctx) const;
    std::string mock_plan_json(const PromptPayload& payload, const CallContext& ctx) const;
    std::uint64_t seed_;
};

struct HttpBackendConfig {
    std::string base_url;               // e.g. https://api.example.com
    std::string path = "/v1/chat/completions";
    std::string model;                  // provider model identifier
    std::string api_key_env;            // env var holding the bearer token
    int timeout_seconds = 300;
};

// Minimal chat-completions client: system/user messages, temperature,
// max_tokens; usage comes from the response when reported, proxy otherwise.
class HttpBackend : public GenerationBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;
    std::string id() const override;
    GenerationResult generate(const PromptPayload& payload, const CallContext& ctx) override;

private:
    HttpBackendConfig config_;
};

// Retry wrapper: up to `attempts` tries with exponential backoff on
// BackendError, then the error propagates and the cell fails.
class RetryingBackend : public GenerationBackend {
public:
    RetryingBackend(std::shared_ptr<GenerationBackend> inner, int attempts = 3,
                    int backoff_ms = 100);
    std::string id() const override;
    GenerationResult generate(const PromptPayload& payload, const CallContext& ctx) override;

private:
    std::shared_ptr<GenerationBackend> inner_;
    int attempts_;
    int backoff_ms_;
};

} // namespace poolforge
