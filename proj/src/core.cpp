#include "poolforge/core.hpp"

#include <algorithm>
#include <sstream>

namespace poolforge {

const char* to_string(Family f) {
    switch (f) {
        case Family::stories: return "stories";
        case Family::aut: return "aut";
        case Family::slogans: return "slogans";
    }
    return "?";
}

const char* to_string(Method m) {
    switch (m) {
        case Method::indep: return "indep";
        case Method::strat: return "strat";
        case Method::repr: return "repr";
        case Method::self: return "self";
        case Method::peer1: return "peer1";
        case Method::peer2: return "peer2";
    }
    return "?";
}

const char* to_string(Strategy s) {
    return s == Strategy::neutral ? "neutral" : "diverge";
}

const char* to_string(Stage s) {
    return s == Stage::seed ? "seed" : "evaluated";
}

const char* to_string(UsageSource s) {
    return s == UsageSource::backend_reported ? "backend_reported" : "proxy_estimated";
}

std::optional<Family> parse_family(const std::string& s) {
    if (s == "stories") return Family::stories;
    if (s == "aut") return Family::aut;
    if (s == "slogans") return Family::slogans;
    return std::nullopt;
}

std::optional<Method> parse_method(const std::string& s) {
    if (s == "indep") return Method::indep;
    if (s == "strat") return Method::strat;
    if (s == "repr") return Method::repr;
    if (s == "self") return Method::self;
    if (s == "peer1") return Method::peer1;
    if (s == "peer2") return Method::peer2;
    return std::nullopt;
}

std::optional<Strategy> parse_strategy(const std::string& s) {
    if (s == "neutral") return Strategy::neutral;
    if (s == "diverge") return Strategy::diverge;
    return std::nullopt;
}

std::optional<Stage> parse_stage(const std::string& s) {
    if (s == "seed") return Stage::seed;
    if (s == "evaluated") return Stage::evaluated;
    return std::nullopt;
}

std::optional<UsageSource> parse_usage_source(const std::string& s) {
    if (s == "backend_reported") return UsageSource::backend_reported;
    if (s == "proxy_estimated") return UsageSource::proxy_estimated;
    return std::nullopt;
}

bool is_two_stage(Method m) {
    return m == Method::repr || m == Method::self || m == Method::peer1 || m == Method::peer2;
}

int anchor_arity(Method m) {
    switch (m) {
        case Method::repr: return 3;
        case Method::self: return 1;
        case Method::peer1: return 2;
        case Method::peer2: return 3;
        default: return 0;
    }
}

std::string CellCoord::key() const {
    std::ostringstream os;
    os << model_id << '|' << prompt_id << '|' << to_string(method) << '|' << to_string(strategy);
    return os.str();
}

std::string CellCoord::dir_name() const {
    std::ostringstream os;
    os << model_id << "__" << prompt_id << "__" << to_string(method) << "__" << to_string(strategy);
    std::string s = os.str();
    for (char& c : s) {
        if (c == '/' || c == '\\' || c == ' ' || c == ':') c = '-';
    }
    return s;
}

TokenUsage& TokenUsage::operator+=(const TokenUsage& other) {
    prompt_tokens += other.prompt_tokens;
    completion_tokens += other.completion_tokens;
    if (other.source == UsageSource::proxy_estimated) source = UsageSource::proxy_estimated;
    return *this;
}

std::string output_key(const CellCoord& cell, int slot) {
    return cell.key() + "|" + std::to_string(slot);
}

std::vector<std::string> validate_pool(const Pool& pool) {
    std::vector<std::string> violations;
    auto add = [&](const std::string& msg) { violations.push_back(msg); };

    const int n = pool.n();
    if (n < 1) add("pool is empty");

    if (pool.stage == Stage::seed && !is_two_stage(pool.cell.method)) {
        add(std::string("stage=seed is invalid for method ") + to_string(pool.cell.method));
    }

    std::vector<bool> seen(static_cast<size_t>(std::max(n, 0)), false);
    for (const auto& rec : pool.records) {
        const std::string at = "slot " + std::to_string(rec.slot) + ": ";

        if (!(rec.cell == pool.cell)) add(at + "record cell differs from pool cell");
        if (rec.stage != pool.stage) add(at + "record stage differs from pool stage");

        if (rec.slot < 0 || rec.slot >= n) {
            add(at + "slot out of range 0.." + std::to_string(n - 1));
        } else if (seen[static_cast<size_t>(rec.slot)]) {
            add(at + "duplicate slot");
        } else {
            seen[static_cast<size_t>(rec.slot)] = true;
        }

        const bool strat = pool.cell.method == Method::strat;
        if (strat && !rec.stratum_id) add(at + "missing stratum_id for strat record");
        if (!strat && rec.stratum_id) add(at + "stratum_id present for non-strat record");
        if (rec.stratum_id && (*rec.stratum_id < 1 || *rec.stratum_id > 5)) {
            add(at + "stratum_id outside 1..5");
        }

        const bool wants_anchors = is_two_stage(pool.cell.method) && pool.stage == Stage::evaluated;
        if (wants_anchors) {
            const int arity = anchor_arity(pool.cell.method);
            if (!rec.anchor_slots) {
                add(at + "missing anchor_slots for evaluated " +
                    std::string(to_string(pool.cell.method)) + " record");
            } else if (static_cast<int>(rec.anchor_slots->size()) != arity) {
                add(at + "anchor_slots has " + std::to_string(rec.anchor_slots->size()) +
                    " entries, expected " + std::to_string(arity));
            }
        } else if (rec.anchor_slots) {
            add(at + "anchor_slots present where none are expected");
        }

        if (rec.usage.prompt_tokens < 0 || rec.usage.completion_tokens < 0) {
            add(at + "negative token counts");
        }
    }

    for (int i = 0; i < n; ++i) {
        if (!seen[static_cast<size_t>(i)]) add("slot " + std::to_string(i) + ": missing");
    }
    return violations;
}

} // namespace poolforge
