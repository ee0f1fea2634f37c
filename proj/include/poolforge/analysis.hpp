#pragma once

#include "poolforge/core.hpp"
#include "poolforge/diversity.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace poolforge {

// Everything analysis needs about one executed cell's inference path.
struct CellUsage {
    CellCoord cell;
    TokenUsage evaluated;                 // sum over evaluated-pool calls
    std::optional<TokenUsage> seed;       // two-stage methods
    std::optional<TokenUsage> planning;   // strat

    bool proxy_estimated() const;
};

// Full-pipeline token total per the method's rule: indep = generation only,
// strat = planning + generation, two-stage = seed + evaluated.
std::int64_t pipeline_tokens(const CellUsage& usage);

// Multiplier relative to the indep-neutral baseline of the same model and
// prompt condition.
double r_tok(const CellUsage& cell, const CellUsage& baseline);

struct CellSummary {
    CellCoord cell;
    int n = 0;
    DiversityReport diversity;
    double quality = 0;
    std::int64_t pipeline_tokens = 0;
    double r_tok = 0;
    bool usage_proxy_estimated = false;
    // Rarefaction summaries.
    double d_pair_auc = 0;
    double d_ent_auc = 0;
    FirstHitSummary first_hit_d_pair;
    FirstHitSummary first_hit_d_ent;
};

enum class ContrastKind { base, diverge };

const char* to_string(ContrastKind k);

struct ContrastEstimate {
    double value = 0;
    double ci_low = 0;
    double ci_high = 0;
    ContrastKind kind = ContrastKind::base;
    int replicates = 0;
};

// Point contrasts over per-cell outcome values keyed by cell key.
// delta_base: Y(cell) - Y(model, prompt, indep, neutral).
double delta_base(const std::map<std::string, double>& y, const CellCoord& cell);
// delta_div: Y(.., diverge) - Y(.., neutral) within (model, prompt, method).
double delta_div(const std::map<std::string, double>& y, const CellCoord& cell_diverge);

// Unweighted mean over the prompts of a family; every prompt must be present.
double design_average(const std::map<std::string, double>& by_prompt,
                      const std::vector<std::string>& family_prompts);

// ---------------------------------------------------------------------------
// Output-level bootstrap.

struct BootstrapInterval {
    double value = 0;   // statistic on the original pool
    double ci_low = 0;
    double ci_high = 0;
    int replicates = 0;
};

// Replicate r resamples n slots with replacement using an RNG stream derived
// from (seed, r), recomputes the statistic on the index multiset, and the
// interval is the 2.5/97.5 percentile of the replicate values.
BootstrapInterval bootstrap_ci(int n, int replicates, std::uint64_t seed,
                               const std::function<double(std::span<const int>)>& statistic);

// The replicate values themselves, for propagating resampling uncertainty
// through contrasts and design averages.
std::vector<double> bootstrap_replicates(int n, int replicates, std::uint64_t seed,
                                         const std::function<double(std::span<const int>)>& statistic);

// Linear-interpolation percentile over a copy of the values.
double percentile(std::vector<double> values, double p);

// Percentile interval around a point value from replicate deltas.
ContrastEstimate contrast_from_replicates(double value, std::span<const double> replicate_values,
                                          ContrastKind kind);

// Gain per 100k pipeline tokens.
double efficiency(double delta, std::int64_t tokens);

} // namespace poolforge
