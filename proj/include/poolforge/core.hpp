#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace poolforge {

// Base error type for the whole library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Family { stories, aut, slogans };
enum class Method { indep, strat, repr, self, peer1, peer2 };
enum class Strategy { neutral, diverge };
enum class Stage { seed, evaluated };
enum class UsageSource { backend_reported, proxy_estimated };

const char* to_string(Family f);
const char* to_string(Method m);
const char* to_string(Strategy s);
const char* to_string(Stage s);
const char* to_string(UsageSource s);

std::optional<Family> parse_family(const std::string& s);
std::optional<Method> parse_method(const std::string& s);
std::optional<Strategy> parse_strategy(const std::string& s);
std::optional<Stage> parse_stage(const std::string& s);
std::optional<UsageSource> parse_usage_source(const std::string& s);

// indep and strat produce the evaluated pool directly; the rest regenerate
// from a seed pool.
bool is_two_stage(Method m);

// Number of anchor slots an evaluated record carries (self slot included
// for self/peer methods).
int anchor_arity(Method m);

// One experiment coordinate: (model, prompt condition, method, strategy).
struct CellCoord {
    std::string model_id;
    std::string prompt_id;
    Family family = Family::stories;
    Method method = Method::indep;
    Strategy strategy = Strategy::neutral;

    bool operator==(const CellCoord&) const = default;

    // "model|prompt|method|strategy" - used for seed derivation and tables.
    std::string key() const;
    // Filesystem-safe variant with "__" separators.
    std::string dir_name() const;
};

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    UsageSource source = UsageSource::backend_reported;

    std::int64_t total() const { return prompt_tokens + completion_tokens; }

    // Additive; a proxy-estimated term taints the sum so reports can flag it.
    TokenUsage& operator+=(const TokenUsage& other);

    bool operator==(const TokenUsage&) const = default;
};

struct OutputRecord {
    CellCoord cell;
    Stage stage = Stage::evaluated;
    int slot = 0;
    std::string text;
    std::optional<int> stratum_id;                   // strat only, 1..5
    std::optional<std::vector<int>> anchor_slots;    // two-stage evaluated only
    TokenUsage usage;

    bool operator==(const OutputRecord&) const = default;
};

struct Pool {
    CellCoord cell;
    Stage stage = Stage::evaluated;
    std::vector<OutputRecord> records;

    int n() const { return static_cast<int>(records.size()); }

    bool operator==(const Pool&) const = default;
};

// Key identifying one output across score files and region labels.
std::string output_key(const CellCoord& cell, int slot);

// Checks every Pool/OutputRecord invariant. Violations are data, not faults:
// an empty list means the pool is well formed.
std::vector<std::string> validate_pool(const Pool& pool);

} // namespace poolforge
