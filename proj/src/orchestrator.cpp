#include "poolforge/orchestrator.hpp"

#include "poolforge/hashing.hpp"
#include "poolforge/rng.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

namespace poolforge {

const char* to_string(PartitionPolicy p) {
    return p == PartitionPolicy::consecutive ? "consecutive" : "shuffled";
}

Partition make_partition(int n, int arity, std::uint64_t rng_seed, PartitionPolicy policy) {
    if (arity != 2 && arity != 3) throw Error("make_partition: arity must be 2 or 3");
    if (n < arity) throw Error("make_partition: pool smaller than group size");
    if (n % arity != 0) {
        throw Error("make_partition: pool size " + std::to_string(n) +
                    " is not divisible by " + std::to_string(arity) +
                    "; adjust n to a multiple of " + std::to_string(arity));
    }

    std::vector<int> slots(static_cast<size_t>(n));
    std::iota(slots.begin(), slots.end(), 0);
    if (policy == PartitionPolicy::shuffled) {
        Rng rng(rng_seed);
        rng.shuffle(slots);
    }

    Partition part;
    part.arity = arity;
    part.groups.reserve(static_cast<size_t>(n / arity));
    for (int g = 0; g < n / arity; ++g) {
        std::vector<int> group(slots.begin() + static_cast<std::ptrdiff_t>(g) * arity,
                               slots.begin() + static_cast<std::ptrdiff_t>(g + 1) * arity);
        std::sort(group.begin(), group.end());
        part.groups.push_back(std::move(group));
    }
    return part;
}

namespace {

// Fan the slots out over a bounded worker pool. Results land by slot, so the
// assembled pool is independent of scheduling; the lowest-slot exception wins
// for determinism.
void parallel_slots(int n, int concurrency, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    const int workers = std::max(1, std::min(concurrency, n));

    std::atomic<int> next{0};
    std::mutex mu;
    std::map<int, std::exception_ptr> errors;

    auto worker = [&] {
        for (;;) {
            const int slot = next.fetch_add(1);
            if (slot >= n) return;
            try {
                fn(slot);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                errors.emplace(slot, std::current_exception());
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (!errors.empty()) std::rethrow_exception(errors.begin()->second);
}

Pool run_single_stage(const PromptKit& kit, const CellCoord& cell, Stage stage, int n,
                      GenerationBackend& backend, const RunOptions& opts) {
    if (n < 1) throw Error("orchestrator: pool size must be >= 1");

    const PromptPayload payload = kit.build_prompt(cell, stage, {});
    Pool pool;
    pool.cell = cell;
    pool.stage = stage;
    pool.records.resize(static_cast<size_t>(n));

    parallel_slots(n, opts.concurrency, [&](int slot) {
        CallContext ctx{cell, stage, slot, /*planning=*/false};
        GenerationResult res = backend.generate(payload, ctx);
        OutputRecord rec;
        rec.cell = cell;
        rec.stage = stage;
        rec.slot = slot;
        rec.text = std::move(res.text);
        rec.usage = res.usage;
        pool.records[static_cast<size_t>(slot)] = std::move(rec);
    });
    return pool;
}

void warn_if_tiny(int n, std::vector<std::string>& warnings) {
    if (n == 1) warnings.push_back("pool has a single output: insufficient for pairwise metrics");
}

} // namespace

IndepResult run_indep(const PromptKit& kit, const CellCoord& cell, int n,
                      GenerationBackend& backend, const RunOptions& opts) {
    if (cell.method != Method::indep) throw Error("run_indep: cell method is not indep");
    IndepResult result;
    result.evaluated = run_single_stage(kit, cell, Stage::evaluated, n, backend, opts);
    warn_if_tiny(n, result.warnings);
    return result;
}

StratResult run_strat(const PromptKit& kit, const CellCoord& cell, int n,
                      GenerationBackend& backend, const RunOptions& opts) {
    if (cell.method != Method::strat) throw Error("run_strat: cell method is not strat");
    if (n < 1) throw Error("orchestrator: pool size must be >= 1");

    StratResult result;

    const PromptPayload planning_payload = kit.build_planning_prompt(cell.prompt_id, n);
    PlanningOutcome planning;
    planning.attempts = 0;
    std::string last_errors;
    for (int attempt = 0; attempt <= opts.planning_retries; ++attempt) {
        CallContext ctx{cell, Stage::evaluated, /*slot=*/-1, /*planning=*/true};
        GenerationResult res = backend.generate(planning_payload, ctx);
        planning.attempts++;
        planning.usage += res.usage;
        planning.raw_text = res.text;

        StrataParseResult parsed = PromptKit::parse_strata(res.text, opts.strata_parse);
        if (parsed.ok()) {
            planning.plan = std::move(*parsed.plan);
            last_errors.clear();
            break;
        }
        last_errors.clear();
        for (const auto& e : parsed.errors) {
            if (!last_errors.empty()) last_errors += "; ";
            last_errors += e;
        }
    }
    if (!last_errors.empty()) {
        throw Error("run_strat: planning response invalid after " +
                    std::to_string(planning.attempts) + " attempt(s): " + last_errors);
    }

    const std::vector<int> assignment = PromptKit::assign_strata(n, 5);

    Pool pool;
    pool.cell = cell;
    pool.stage = Stage::evaluated;
    pool.records.resize(static_cast<size_t>(n));

    parallel_slots(n, opts.concurrency, [&](int slot) {
        const int stratum_id = assignment[static_cast<size_t>(slot)];
        MethodContext ctx;
        ctx.stratum = planning.plan.strata[static_cast<size_t>(stratum_id - 1)];
        const PromptPayload payload = kit.build_prompt(cell, Stage::evaluated, ctx);

        CallContext call{cell, Stage::evaluated, slot, /*planning=*/false};
        GenerationResult res = backend.generate(payload, call);

        OutputRecord rec;
        rec.cell = cell;
        rec.stage = Stage::evaluated;
        rec.slot = slot;
        rec.text = std::move(res.text);
        rec.stratum_id = stratum_id;
        rec.usage = res.usage;
        pool.records[static_cast<size_t>(slot)] = std::move(rec);
    });

    result.evaluated = std::move(pool);
    result.planning = std::move(planning);
    warn_if_tiny(n, result.warnings);
    return result;
}

TwoStageResult run_two_stage(const PromptKit& kit, const CellCoord& cell, int n,
                             GenerationBackend& backend, const RunOptions& opts,
                             Embedder* embedder, EmbeddingCache* cache) {
    if (!is_two_stage(cell.method)) throw Error("run_two_stage: method is single-stage");

    TwoStageResult result;
    result.seed = run_single_stage(kit, cell, Stage::seed, n, backend, opts);
    warn_if_tiny(n, result.warnings);

    // Anchor slots per evaluated slot, self first where the method shows it.
    std::vector<std::vector<int>> anchors(static_cast<size_t>(n));
    switch (cell.method) {
        case Method::self: {
            for (int i = 0; i < n; ++i) anchors[static_cast<size_t>(i)] = {i};
            break;
        }
        case Method::peer1:
        case Method::peer2: {
            const int arity = cell.method == Method::peer1 ? 2 : 3;
            result.partition = make_partition(
                n, arity, mix64(opts.partition_seed, fnv1a64(cell.key())), opts.partition_policy);
            for (const auto& group : result.partition.groups) {
                for (int member : group) {
                    std::vector<int> a{member};
                    for (int other : group) {
                        if (other != member) a.push_back(other);
                    }
                    anchors[static_cast<size_t>(member)] = std::move(a);
                }
            }
            break;
        }
        case Method::repr: {
            if (embedder == nullptr) {
                throw Error("run_two_stage: repr needs an embedder for anchor selection");
            }
            if (n < 3) throw Error("run_two_stage: repr needs at least 3 seed outputs");
            EmbeddingSet seed_embeddings = embed_pool(result.seed, *embedder, cache);
            const Eigen::MatrixXd dist = distance_matrix(seed_embeddings.vectors);
            const std::vector<Eigen::Index> picked = select_anchors(dist, 3, opts.anchor_objective);
            for (Eigen::Index s : picked) result.repr_anchor_slots.push_back(static_cast<int>(s));
            for (int i = 0; i < n; ++i) anchors[static_cast<size_t>(i)] = result.repr_anchor_slots;
            break;
        }
        default:
            break;
    }

    Pool evaluated;
    evaluated.cell = cell;
    evaluated.stage = Stage::evaluated;
    evaluated.records.resize(static_cast<size_t>(n));

    parallel_slots(n, opts.concurrency, [&](int slot) {
        const auto& anchor_slots = anchors[static_cast<size_t>(slot)];
        MethodContext ctx;
        ctx.anchor_texts.reserve(anchor_slots.size());
        for (int a : anchor_slots) {
            ctx.anchor_texts.push_back(result.seed.records[static_cast<size_t>(a)].text);
        }
        const PromptPayload payload = kit.build_prompt(cell, Stage::evaluated, ctx);

        CallContext call{cell, Stage::evaluated, slot, /*planning=*/false};
        GenerationResult res = backend.generate(payload, call);

        OutputRecord rec;
        rec.cell = cell;
        rec.stage = Stage::evaluated;
        rec.slot = slot;
        rec.text = std::move(res.text);
        rec.anchor_slots = anchor_slots;
        rec.usage = res.usage;
        evaluated.records[static_cast<size_t>(slot)] = std::move(rec);
    });

    result.evaluated = std::move(evaluated);
    return result;
}

} // namespace poolforge
