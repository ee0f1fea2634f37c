#pragma once

#include "poolforge/backend.hpp"
#include "poolforge/core.hpp"
#include "poolforge/embedding.hpp"
#include "poolforge/geometry.hpp"
#include "poolforge/prompts.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace poolforge {

enum class PartitionPolicy {
    consecutive, // [(0,1),(2,3),...] - reproducible without an RNG
    shuffled,    // seeded permutation first, then consecutive chunks
};

const char* to_string(PartitionPolicy p);

// Disjoint slot groups covering 0..n-1, each of size `arity`.
struct Partition {
    int arity = 2;
    std::vector<std::vector<int>> groups;
};

// n must be divisible by arity (75 dyads / 50 triads at n=150). Group
// members are kept in ascending slot order.
Partition make_partition(int n, int arity, std::uint64_t rng_seed,
                         PartitionPolicy policy = PartitionPolicy::consecutive);

struct RunOptions {
    int concurrency = 8;
    PartitionPolicy partition_policy = PartitionPolicy::consecutive;
    std::uint64_t partition_seed = 0;
    StrataParseMode strata_parse = StrataParseMode::strict;
    int planning_retries = 2; // extra planning attempts after the first failure
    AnchorObjective anchor_objective = AnchorObjective::max_min;
};

struct PlanningOutcome {
    StrataPlan plan;
    std::string raw_text; // last raw planning response
    TokenUsage usage;     // summed over all attempts
    int attempts = 1;
};

struct IndepResult {
    Pool evaluated;
    std::vector<std::string> warnings;
};

struct StratResult {
    Pool evaluated;
    PlanningOutcome planning;
    std::vector<std::string> warnings;
};

struct TwoStageResult {
    Pool seed;
    Pool evaluated;
    std::vector<int> repr_anchor_slots;        // repr only, selection order
    Partition partition;                       // peer1/peer2 only
    std::vector<std::string> warnings;
};

// Single-stage independent generation: n context-free calls.
IndepResult run_indep(const PromptKit& kit, const CellCoord& cell, int n,
                      GenerationBackend& backend, const RunOptions& opts = {});

// Planning call, strata validation (with bounded retries), cyclic slot
// assignment, then n stratum-guided calls.
StratResult run_strat(const PromptKit& kit, const CellCoord& cell, int n,
                      GenerationBackend& backend, const RunOptions& opts = {});

// Seed pool generated in the indep form, then one regeneration per slot with
// the method's anchor context. repr needs the embedder for anchor selection.
TwoStageResult run_two_stage(const PromptKit& kit, const CellCoord& cell, int n,
                             GenerationBackend& backend, const RunOptions& opts = {},
                             Embedder* embedder = nullptr, EmbeddingCache* cache = nullptr);

} // namespace poolforge
