#include "poolforge/backend.hpp"

#include "poolforge/hashing.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

namespace poolforge {

using nlohmann::json;

std::int64_t proxy_token_count(const std::string& text) {
    std::int64_t words = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!ws && !in_word) {
            ++words;
            in_word = true;
        } else if (ws) {
            in_word = false;
        }
    }
    return static_cast<std::int64_t>(std::llround(std::ceil(words * kProxyTokensPerWord)));
}

TokenUsage proxy_usage(const PromptPayload& payload, const std::string& completion) {
    TokenUsage u;
    u.prompt_tokens = proxy_token_count(payload.system_text) + proxy_token_count(payload.user_text);
    u.completion_tokens = proxy_token_count(completion);
    u.source = UsageSource::proxy_estimated;
    return u;
}

// ---------------------------------------------------------------------------

MockBackend::MockBackend(std::uint64_t seed) : seed_(seed) {}

std::string MockBackend::id() const {
    return "mock-s" + std::to_string(seed_);
}

namespace {

std::uint64_t call_key(std::uint64_t seed, const PromptPayload& payload, const CallContext& ctx) {
    std::uint64_t h = mix64(seed, fnv1a64(ctx.cell.key()));
    h = mix64(h, static_cast<std::uint64_t>(ctx.slot));
    h = mix64(h, static_cast<std::uint64_t>(ctx.stage == Stage::seed ? 1 : 2));
    h = mix64(h, ctx.planning ? 99 : 0);
    h = mix64(h, fnv1a64(payload.system_text, fnv1a64(payload.user_text)));
    return h;
}

// Words per mock response, loosely matching the family's output shape.
int mock_word_count(Family f) {
    switch (f) {
        case Family::stories: return 96;
        case Family::aut: return 14;
        case Family::slogans: return 5;
    }
    return 12;
}

} // namespace

std::string MockBackend::mock_text(const PromptPayload& payload, const CallContext& ctx) const {
    const std::uint64_t key = call_key(seed_, payload, ctx);
    const int words = mock_word_count(ctx.cell.family);

    // Hex digest prefix first so texts are visibly keyed, then filler words
    // derived from the same stream.
    std::ostringstream os;
    os << "idea-" << to_hex(key).substr(0, 12);
    std::uint64_t stream = key;
    for (int w = 1; w < words; ++w) {
        stream = mix64(stream, static_cast<std::uint64_t>(w));
        os << " w" << to_hex(stream).substr(0, 4);
        if (w % 12 == 0 && ctx.cell.family == Family::stories) os << ".";
    }
    return os.str();
}

std::string MockBackend::mock_plan_json(const PromptPayload& payload,
                                        const CallContext& ctx) const {
    const std::uint64_t key = call_key(seed_, payload, ctx);
    json strata = json::array();
    for (int i = 1; i <= 5; ++i) {
        const std::string tag = to_hex(mix64(key, static_cast<std::uint64_t>(i))).substr(0, 6);
        strata.push_back({{"stratum_id", i},
                          {"name", "direction " + std::to_string(i) + " " + tag},
                          {"description", "semantic direction " + tag + " for this task"},
                          {"generation_instruction", "explore direction " + tag},
                          {"why_broad", "direction " + tag + " admits many responses"},
                          {"why_distinct", "direction " + tag + " differs from the others"}});
    }
    json plan{{"task_id", ctx.cell.prompt_id.empty() ? "task" : ctx.cell.prompt_id},
              {"strata", std::move(strata)}};
    return plan.dump(2);
}

GenerationResult MockBackend::generate(const PromptPayload& payload, const CallContext& ctx) {
    GenerationResult res;
    res.text = ctx.planning ? mock_plan_json(payload, ctx) : mock_text(payload, ctx);
    res.usage = proxy_usage(payload, res.text);
    return res;
}

// ---------------------------------------------------------------------------

RetryingBackend::RetryingBackend(std::shared_ptr<GenerationBackend> inner, int attempts,
                                 int backoff_ms)
    : inner_(std::move(inner)), attempts_(attempts), backoff_ms_(backoff_ms) {
    if (attempts_ < 1) throw Error("retry backend: attempts must be >= 1");
}

std::string RetryingBackend::id() const {
    return inner_->id();
}

GenerationResult RetryingBackend::generate(const PromptPayload& payload, const CallContext& ctx) {
    int delay = backoff_ms_;
    for (int attempt = 1;; ++attempt) {
        try {
            return inner_->generate(payload, ctx);
        } catch (const BackendError&) {
            if (attempt >= attempts_) throw;
            if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            delay *= 2;
        }
    }
}

} // namespace poolforge
