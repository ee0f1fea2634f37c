#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "poolforge/backend.hpp"
#include "poolforge/manifest.hpp"
#include "poolforge/orchestrator.hpp"
#include "poolforge/prompts.hpp"

#include <atomic>
#include <map>
#include <set>

using namespace poolforge;

namespace {

const std::string kAssets = POOLFORGE_SOURCE_ASSETS;

PromptKit make_kit() {
    return PromptKit(TaskManifest::load(kAssets + "/manifest.json"), kAssets + "/templates");
}

CellCoord make_cell(Method m, Strategy s = Strategy::neutral,
                    const std::string& prompt = "aut_shoe", Family family = Family::aut) {
    CellCoord cell;
    cell.model_id = "mock-model";
    cell.prompt_id = prompt;
    cell.family = family;
    cell.method = m;
    cell.strategy = s;
    return cell;
}

// Script a backend per call kind for failure-path tests.
class ScriptedBackend : public GenerationBackend {
public:
    std::string id() const override { return "scripted"; }
    GenerationResult generate(const PromptPayload& payload, const CallContext& ctx) override {
        calls++;
        if (ctx.planning) {
            planning_calls++;
            const std::string text =
                planning_scripts.empty()
                    ? fallback.generate(payload, ctx).text
                    : planning_scripts[std::min(planning_scripts.size() - 1,
                                                static_cast<size_t>(planning_calls - 1))];
            GenerationResult res;
            res.text = text;
            res.usage = proxy_usage(payload, res.text);
            return res;
        }
        if (fail_remaining > 0) {
            fail_remaining--;
            throw BackendError("scripted failure");
        }
        return fallback.generate(payload, ctx);
    }

    MockBackend fallback{7};
    std::vector<std::string> planning_scripts;
    int planning_calls = 0;
    int calls = 0;
    std::atomic<int> fail_remaining{0};
};

} // namespace

// ---------------------------------------------------------------------------
// partitions

TEST_CASE("consecutive partition pairs neighbors") {
    Partition p = make_partition(150, 2, 0);
    REQUIRE(p.groups.size() == 75);
    CHECK(p.groups[0] == std::vector<int>{0, 1});
    CHECK(p.groups[74] == std::vector<int>{148, 149});
}

TEST_CASE("shuffled partition covers every slot exactly once") {
    for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
        Partition p = make_partition(150, 3, seed, PartitionPolicy::shuffled);
        REQUIRE(p.groups.size() == 50);
        std::set<int> seen;
        for (const auto& g : p.groups) {
            CHECK(g.size() == 3);
            for (int s : g) {
                CHECK(s >= 0);
                CHECK(s < 150);
                CHECK(seen.insert(s).second); // disjoint
            }
        }
        CHECK(seen.size() == 150);
        // deterministic for the seed
        Partition q = make_partition(150, 3, seed, PartitionPolicy::shuffled);
        CHECK(p.groups == q.groups);
    }
}

TEST_CASE("indivisible pools are rejected with an adjustment hint") {
    CHECK_THROWS_WITH_AS(make_partition(7, 2, 0), doctest::Contains("adjust n"), Error);
    CHECK_THROWS_AS(make_partition(10, 4, 0), Error);
}

// ---------------------------------------------------------------------------
// run_indep

TEST_CASE("run_indep produces a valid pool with no anchors") {
    PromptKit kit = make_kit();
    MockBackend backend(3);
    IndepResult res = run_indep(kit, make_cell(Method::indep), 12, backend);
    CHECK(validate_pool(res.evaluated).empty());
    CHECK(res.evaluated.n() == 12);
    for (const auto& rec : res.evaluated.records) {
        CHECK(!rec.anchor_slots.has_value());
        CHECK(!rec.stratum_id.has_value());
        CHECK(rec.usage.total() > 0);
        CHECK(rec.usage.source == UsageSource::proxy_estimated);
    }
    CHECK(res.warnings.empty());
}

TEST_CASE("same seed gives identical pools; texts differ across slots") {
    PromptKit kit = make_kit();
    MockBackend a(11), b(11), c(12);
    Pool pa = run_indep(kit, make_cell(Method::indep), 8, a).evaluated;
    Pool pb = run_indep(kit, make_cell(Method::indep), 8, b).evaluated;
    Pool pc = run_indep(kit, make_cell(Method::indep), 8, c).evaluated;
    CHECK(pa == pb);
    CHECK(pa != pc);
    std::set<std::string> texts;
    for (const auto& rec : pa.records) texts.insert(rec.text);
    CHECK(texts.size() == 8);
}

TEST_CASE("n=1 pools are flagged as insufficient for pairwise metrics") {
    PromptKit kit = make_kit();
    MockBackend backend(3);
    IndepResult res = run_indep(kit, make_cell(Method::indep), 1, backend);
    REQUIRE(res.warnings.size() == 1);
    CHECK(res.warnings[0].find("insufficient for pairwise metrics") != std::string::npos);
}

TEST_CASE("fan-out order does not affect stored content") {
    PromptKit kit = make_kit();
    MockBackend backend(21);
    RunOptions serial;
    serial.concurrency = 1;
    RunOptions wide;
    wide.concurrency = 64;
    Pool a = run_indep(kit, make_cell(Method::indep), 40, backend, serial).evaluated;
    Pool b = run_indep(kit, make_cell(Method::indep), 40, backend, wide).evaluated;
    CHECK(a == b);
}

// ---------------------------------------------------------------------------
// run_strat

TEST_CASE("run_strat assigns strata cyclically and records planning usage") {
    PromptKit kit = make_kit();
    MockBackend backend(5);
    StratResult res = run_strat(kit, make_cell(Method::strat, Strategy::diverge), 10, backend);
    CHECK(validate_pool(res.evaluated).empty());

    std::map<int, int> counts;
    for (const auto& rec : res.evaluated.records) {
        REQUIRE(rec.stratum_id.has_value());
        counts[*rec.stratum_id]++;
        CHECK(*rec.stratum_id == (rec.slot % 5) + 1);
    }
    for (int k = 1; k <= 5; ++k) CHECK(counts[k] == 2);

    CHECK(res.planning.attempts == 1);
    CHECK(res.planning.usage.total() > 0);

    // Pipeline total = planning + sum of generation usage.
    TokenUsage gen;
    for (const auto& rec : res.evaluated.records) gen += rec.usage;
    CHECK(gen.total() > 0);
}

TEST_CASE("planning retries then fails when the plan stays invalid") {
    PromptKit kit = make_kit();
    auto backend = std::make_shared<ScriptedBackend>();
    backend->planning_scripts = {"not json at all", "{\"task_id\": \"x\", \"strata\": []}",
                                 "still not json"};
    RunOptions opts;
    opts.planning_retries = 2;
    CHECK_THROWS_WITH_AS(run_strat(kit, make_cell(Method::strat), 5, *backend, opts),
                         doctest::Contains("3 attempt(s)"), Error);
    CHECK(backend->planning_calls == 3);
}

TEST_CASE("planning recovers when a retry returns a valid plan") {
    PromptKit kit = make_kit();
    auto backend = std::make_shared<ScriptedBackend>();
    MockBackend reference(7);
    CallContext planning_ctx{make_cell(Method::strat), Stage::evaluated, -1, true};
    const std::string good =
        reference.generate(PromptPayload{"s", "u", 0.0, 16}, planning_ctx).text;
    backend->planning_scripts = {"garbage first", good};

    RunOptions opts;
    opts.planning_retries = 2;
    StratResult res = run_strat(kit, make_cell(Method::strat), 5, *backend, opts);
    CHECK(res.planning.attempts == 2);
    CHECK(validate_pool(res.evaluated).empty());
    // Usage accumulates over both planning attempts.
    CHECK(res.planning.usage.total() > 0);
}

// ---------------------------------------------------------------------------
// run_two_stage

TEST_CASE("self regenerates against each record's own seed") {
    PromptKit kit = make_kit();
    MockBackend backend(9);
    TwoStageResult res = run_two_stage(kit, make_cell(Method::self), 6, backend);
    CHECK(validate_pool(res.seed).empty());
    CHECK(validate_pool(res.evaluated).empty());
    CHECK(res.seed.stage == Stage::seed);
    for (const auto& rec : res.evaluated.records) {
        REQUIRE(rec.anchor_slots.has_value());
        CHECK(*rec.anchor_slots == std::vector<int>{rec.slot});
    }
}

TEST_CASE("peer1 uses 75 dyads at n=150 shape (scaled down) and anchors self+partner") {
    PromptKit kit = make_kit();
    MockBackend backend(9);
    TwoStageResult res = run_two_stage(kit, make_cell(Method::peer1), 10, backend);
    REQUIRE(res.partition.groups.size() == 5);
    for (const auto& rec : res.evaluated.records) {
        REQUIRE(rec.anchor_slots.has_value());
        REQUIRE(rec.anchor_slots->size() == 2);
        CHECK((*rec.anchor_slots)[0] == rec.slot);
        // partner and self share a dyad
        const int partner = (*rec.anchor_slots)[1];
        bool found = false;
        for (const auto& g : res.partition.groups) {
            if (std::find(g.begin(), g.end(), rec.slot) != g.end()) {
                found = std::find(g.begin(), g.end(), partner) != g.end();
            }
        }
        CHECK(found);
    }
}

TEST_CASE("peer2 anchors are self plus the two triad partners") {
    PromptKit kit = make_kit();
    MockBackend backend(9);
    TwoStageResult res = run_two_stage(kit, make_cell(Method::peer2), 9, backend);
    REQUIRE(res.partition.groups.size() == 3);
    for (const auto& rec : res.evaluated.records) {
        REQUIRE(rec.anchor_slots.has_value());
        REQUIRE(rec.anchor_slots->size() == 3);
        CHECK((*rec.anchor_slots)[0] == rec.slot);
    }
}

TEST_CASE("repr shows the same three anchors to every evaluated call") {
    PromptKit kit = make_kit();
    MockBackend backend(9);
    MockEmbedder embedder(32, 1);
    TwoStageResult res =
        run_two_stage(kit, make_cell(Method::repr), 12, backend, {}, &embedder);
    REQUIRE(res.repr_anchor_slots.size() == 3);
    for (const auto& rec : res.evaluated.records) {
        REQUIRE(rec.anchor_slots.has_value());
        CHECK(*rec.anchor_slots == res.repr_anchor_slots);
    }
    CHECK_THROWS_AS(run_two_stage(kit, make_cell(Method::repr), 12, backend, {}, nullptr), Error);
}

TEST_CASE("two-stage usage splits into seed and evaluated totals") {
    PromptKit kit = make_kit();
    MockBackend backend(9);
    TwoStageResult res = run_two_stage(kit, make_cell(Method::peer2, Strategy::diverge), 6, backend);
    TokenUsage seed, evaluated;
    for (const auto& rec : res.seed.records) seed += rec.usage;
    for (const auto& rec : res.evaluated.records) evaluated += rec.usage;
    CHECK(seed.total() > 0);
    CHECK(evaluated.total() > 0);
    // Evaluated prompts carry the anchor context, so they are strictly longer.
    CHECK(evaluated.prompt_tokens > seed.prompt_tokens);
}

TEST_CASE("seed pools satisfy the same invariants as indep pools") {
    PromptKit kit = make_kit();
    MockBackend backend(13);
    for (Method m : {Method::repr, Method::self, Method::peer1, Method::peer2}) {
        MockEmbedder embedder(16, 2);
        TwoStageResult res = run_two_stage(kit, make_cell(m, Strategy::neutral, "aut_key"),
                                           6, backend, {}, &embedder);
        CHECK(validate_pool(res.seed).empty());
        for (const auto& rec : res.seed.records) {
            CHECK(!rec.anchor_slots.has_value());
            CHECK(!rec.stratum_id.has_value());
        }
    }
}

TEST_CASE("two-stage runs are reproducible and concurrency-independent") {
    PromptKit kit = make_kit();
    MockBackend backend(33);
    RunOptions serial;
    serial.concurrency = 1;
    RunOptions wide;
    wide.concurrency = 32;
    TwoStageResult a = run_two_stage(kit, make_cell(Method::peer1), 12, backend, serial);
    TwoStageResult b = run_two_stage(kit, make_cell(Method::peer1), 12, backend, wide);
    CHECK(a.seed == b.seed);
    CHECK(a.evaluated == b.evaluated);
}

// ---------------------------------------------------------------------------
// retries

TEST_CASE("retry wrapper recovers from transient failures") {
    auto scripted = std::make_shared<ScriptedBackend>();
    scripted->fail_remaining = 2;
    RetryingBackend retrying(scripted, 3, 0);

    PromptKit kit = make_kit();
    IndepResult res = run_indep(kit, make_cell(Method::indep), 3, retrying,
                                RunOptions{.concurrency = 1});
    CHECK(res.evaluated.n() == 3);
}

TEST_CASE("a call that keeps failing aborts the cell") {
    auto scripted = std::make_shared<ScriptedBackend>();
    scripted->fail_remaining = 100;
    RetryingBackend retrying(scripted, 3, 0);

    PromptKit kit = make_kit();
    CHECK_THROWS_AS(run_indep(kit, make_cell(Method::indep), 3, retrying,
                              RunOptions{.concurrency = 1}),
                    BackendError);
}
