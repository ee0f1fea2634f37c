#include "poolforge/analysis.hpp"

#include "poolforge/hashing.hpp"
#include "poolforge/rng.hpp"

#include <algorithm>
#include <cmath>

namespace poolforge {

bool CellUsage::proxy_estimated() const {
    if (evaluated.source == UsageSource::proxy_estimated) return true;
    if (seed && seed->source == UsageSource::proxy_estimated) return true;
    if (planning && planning->source == UsageSource::proxy_estimated) return true;
    return false;
}

std::int64_t pipeline_tokens(const CellUsage& usage) {
    const Method m = usage.cell.method;
    if (m == Method::strat && !usage.planning) {
        throw Error("pipeline_tokens: strat cell is missing planning usage");
    }
    if (is_two_stage(m) && !usage.seed) {
        throw Error("pipeline_tokens: two-stage cell is missing seed usage");
    }

    std::int64_t total = usage.evaluated.total();
    if (m == Method::strat) total += usage.planning->total();
    if (is_two_stage(m)) total += usage.seed->total();
    return total;
}

double r_tok(const CellUsage& cell, const CellUsage& baseline) {
    if (baseline.cell.method != Method::indep || baseline.cell.strategy != Strategy::neutral) {
        throw Error("r_tok: baseline must be the indep-neutral cell");
    }
    if (baseline.cell.model_id != cell.cell.model_id ||
        baseline.cell.prompt_id != cell.cell.prompt_id) {
        throw Error("r_tok: baseline must share model and prompt condition");
    }
    const std::int64_t denom = pipeline_tokens(baseline);
    if (denom <= 0) throw Error("r_tok: baseline pipeline has no tokens");
    return static_cast<double>(pipeline_tokens(cell)) / static_cast<double>(denom);
}

const char* to_string(ContrastKind k) {
    return k == ContrastKind::base ? "base" : "diverge";
}

namespace {

double lookup(const std::map<std::string, double>& y, const CellCoord& cell, const char* what) {
    auto it = y.find(cell.key());
    if (it == y.end()) {
        throw Error(std::string(what) + ": missing cell " + cell.key());
    }
    return it->second;
}

} // namespace

double delta_base(const std::map<std::string, double>& y, const CellCoord& cell) {
    CellCoord baseline = cell;
    baseline.method = Method::indep;
    baseline.strategy = Strategy::neutral;
    return lookup(y, cell, "delta_base") - lookup(y, baseline, "delta_base (baseline)");
}

double delta_div(const std::map<std::string, double>& y, const CellCoord& cell_diverge) {
    CellCoord diverge = cell_diverge;
    diverge.strategy = Strategy::diverge;
    CellCoord neutral = cell_diverge;
    neutral.strategy = Strategy::neutral;
    return lookup(y, diverge, "delta_div") - lookup(y, neutral, "delta_div (neutral)");
}

double design_average(const std::map<std::string, double>& by_prompt,
                      const std::vector<std::string>& family_prompts) {
    if (family_prompts.empty()) throw Error("design_average: empty prompt list");
    double sum = 0;
    for (const auto& prompt : family_prompts) {
        auto it = by_prompt.find(prompt);
        if (it == by_prompt.end()) {
            throw Error("design_average: missing value for prompt " + prompt);
        }
        sum += it->second;
    }
    return sum / static_cast<double>(family_prompts.size());
}

// ---------------------------------------------------------------------------

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw Error("percentile: empty sample");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(rank));
    const auto hi = static_cast<size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> bootstrap_replicates(
    int n, int replicates, std::uint64_t seed,
    const std::function<double(std::span<const int>)>& statistic) {
    if (n < 1) throw Error("bootstrap: empty pool");
    if (replicates < 1) throw Error("bootstrap: replicates must be >= 1");

    std::vector<double> out(static_cast<size_t>(replicates));
    std::vector<int> idx(static_cast<size_t>(n));
    for (int r = 0; r < replicates; ++r) {
        // Per-replicate stream: independent of evaluation order and
        // parallel scheduling.
        Rng rng(mix64(seed, static_cast<std::uint64_t>(r)));
        for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = rng.below(n);
        out[static_cast<size_t>(r)] = statistic(idx);
    }
    return out;
}

BootstrapInterval bootstrap_ci(int n, int replicates, std::uint64_t seed,
                               const std::function<double(std::span<const int>)>& statistic) {
    std::vector<int> identity(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) identity[static_cast<size_t>(i)] = i;

    BootstrapInterval interval;
    interval.value = statistic(identity);
    interval.replicates = replicates;

    std::vector<double> reps = bootstrap_replicates(n, replicates, seed, statistic);
    interval.ci_low = percentile(reps, 2.5);
    interval.ci_high = percentile(std::move(reps), 97.5);
    return interval;
}

ContrastEstimate contrast_from_replicates(double value, std::span<const double> replicate_values,
                                          ContrastKind kind) {
    ContrastEstimate est;
    est.value = value;
    est.kind = kind;
    est.replicates = static_cast<int>(replicate_values.size());
    std::vector<double> reps(replicate_values.begin(), replicate_values.end());
    est.ci_low = percentile(reps, 2.5);
    est.ci_high = percentile(std::move(reps), 97.5);
    return est;
}

double efficiency(double delta, std::int64_t tokens) {
    if (tokens <= 0) throw Error("efficiency: pipeline tokens must be positive");
    return delta / (static_cast<double>(tokens) / 100000.0);
}

} // namespace poolforge
