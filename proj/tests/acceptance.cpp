// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is self-contained and uses fixed seeds.

#include "poolforge/analysis.hpp"
#include "poolforge/backend.hpp"
#include "poolforge/config.hpp"
#include "poolforge/diversity.hpp"
#include "poolforge/embedding.hpp"
#include "poolforge/geometry.hpp"
#include "poolforge/hashing.hpp"
#include "poolforge/orchestrator.hpp"
#include "poolforge/pipeline.hpp"
#include "poolforge/prompts.hpp"
#include "poolforge/quality.hpp"
#include "poolforge/rng.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace poolforge;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void criterion(const std::string& name, const std::function<void()>& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
        body();
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[PASS] %s (%.1fs)\n", name.c_str(), secs);
    } catch (const std::exception& e) {
        std::printf("[FAIL] %s: %s\n", name.c_str(), e.what());
        g_failures++;
    }
    std::fflush(stdout);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::runtime_error(what);
}

void require_close(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
        std::ostringstream os;
        os << what << ": got " << got << ", want " << want << " (tol " << tol << ")";
        throw std::runtime_error(os.str());
    }
}

Eigen::MatrixXd mock_pool_embeddings(int n, std::uint64_t seed, int dim = 24) {
    MockEmbedder embedder(dim, seed);
    std::vector<std::string> texts;
    texts.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        texts.push_back("pool text " + std::to_string(seed) + " " + std::to_string(i));
    }
    Eigen::MatrixXd v = embedder.embed(texts);
    l2_normalize_rows(v);
    return v;
}

double elapsed_since(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// --- brute-force oracles (independent of the library implementations) -------

double oracle_pair(const Eigen::MatrixXd& d) {
    double sum = 0;
    int pairs = 0;
    for (int i = 0; i < d.rows(); ++i) {
        for (int j = i + 1; j < d.cols(); ++j) {
            sum += d(i, j);
            pairs++;
        }
    }
    return sum / pairs;
}

double oracle_nn(const Eigen::MatrixXd& d) {
    double sum = 0;
    for (int i = 0; i < d.rows(); ++i) {
        double best = 1e300;
        for (int j = 0; j < d.cols(); ++j) {
            if (i != j) best = std::min(best, d(i, j));
        }
        sum += best;
    }
    return sum / static_cast<double>(d.rows());
}

double oracle_med(const Eigen::MatrixXd& d) {
    int r = 0;
    double best = 1e300;
    for (int i = 0; i < d.rows(); ++i) {
        if (d.row(i).sum() < best) {
            best = d.row(i).sum();
            r = i;
        }
    }
    return d.col(r).sum() / static_cast<double>(d.rows());
}

// Prim rebuilt independently with a different traversal shape.
double oracle_mst_mean(const Eigen::MatrixXd& d) {
    const int n = static_cast<int>(d.rows());
    std::vector<bool> used(static_cast<size_t>(n), false);
    used[0] = true;
    double total = 0;
    for (int added = 1; added < n; ++added) {
        double best = 1e300;
        int pick = -1;
        for (int i = 0; i < n; ++i) {
            if (!used[static_cast<size_t>(i)]) continue;
            for (int j = 0; j < n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                if (d(i, j) < best) {
                    best = d(i, j);
                    pick = j;
                }
            }
        }
        used[static_cast<size_t>(pick)] = true;
        total += best;
    }
    return total / (n - 1);
}

double pruefer_tree_weight(const Eigen::MatrixXd& d, const std::vector<int>& code) {
    const int n = static_cast<int>(d.rows());
    std::vector<int> degree(static_cast<size_t>(n), 1);
    for (int v : code) degree[static_cast<size_t>(v)]++;
    std::vector<bool> used(static_cast<size_t>(n), false);
    double weight = 0;
    for (int v : code) {
        for (int leaf = 0; leaf < n; ++leaf) {
            if (!used[static_cast<size_t>(leaf)] && degree[static_cast<size_t>(leaf)] == 1) {
                weight += d(leaf, v);
                used[static_cast<size_t>(leaf)] = true;
                degree[static_cast<size_t>(v)]--;
                break;
            }
        }
    }
    int first = -1;
    for (int v = 0; v < n; ++v) {
        if (!used[static_cast<size_t>(v)] && degree[static_cast<size_t>(v)] == 1) {
            if (first < 0) first = v;
            else weight += d(first, v);
        }
    }
    return weight;
}

double exhaustive_min_tree_mean(const Eigen::MatrixXd& d) {
    const int n = static_cast<int>(d.rows());
    if (n == 2) return d(0, 1);
    std::vector<int> code(static_cast<size_t>(n - 2), 0);
    double best = 1e300;
    for (;;) {
        best = std::min(best, pruefer_tree_weight(d, code));
        int pos = n - 3;
        while (pos >= 0) {
            if (++code[static_cast<size_t>(pos)] < n) break;
            code[static_cast<size_t>(pos)] = 0;
            pos--;
        }
        if (pos < 0) break;
    }
    return best / (n - 1);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunConfig e2e_config(const std::string& out_dir) {
    std::ostringstream cfg;
    cfg << R"({
      "models": ["provider-a", "provider-b", "provider-c"],
      "n": 30,
      "output_dir": ")" << out_dir << R"(",
      "backend": {"type": "mock", "concurrency": 16},
      "embedder": {"type": "mock", "mock_dim": 24},
      "rarefaction_repeats": 50,
      "bootstrap_replicates": 300,
      "seeds": {"run": 101, "partition": 102, "rarefaction": 103, "bootstrap": 104}
    })";
    return RunConfig::from_json_text(cfg.str());
}

} // namespace

int main() {
    const std::string assets = default_assets_dir();

    criterion("metric oracle equivalence (d_pair/d_nn/d_med/d_mst, 50 pools, 1e-9; "
              "MST exhaustive for n<=7)",
              [&] {
                  const auto start = std::chrono::steady_clock::now();
                  Rng rng(20260523);
                  for (int trial = 0; trial < 50; ++trial) {
                      const int n = 3 + rng.below(8); // 3..10
                      Eigen::MatrixXd v = mock_pool_embeddings(n, 1000 + trial);
                      Eigen::MatrixXd d = distance_matrix(v);
                      require_close(d_pair(d), oracle_pair(d), 1e-9, "d_pair");
                      require_close(d_nn(d), oracle_nn(d), 1e-9, "d_nn");
                      require_close(d_med(d), oracle_med(d), 1e-9, "d_med");
                      require_close(d_mst(d), oracle_mst_mean(d), 1e-9, "d_mst");
                      if (n <= 7) {
                          require_close(d_mst(d), exhaustive_min_tree_mean(d), 1e-9,
                                        "d_mst vs exhaustive enumeration");
                      }
                  }
                  require(elapsed_since(start) < 10.0, "metric oracle runtime exceeded 10s");
              });

    criterion("entropy bounds and exact cases (0, 1, log3/log12, 1e-9)", [&] {
        std::vector<int> single(150, 4);
        require_close(d_ent(single, 12), 0.0, 1e-9, "single-region entropy");

        std::vector<int> uniform;
        for (int k = 0; k < 12; ++k) {
            for (int i = 0; i < 5; ++i) uniform.push_back(k);
        }
        require_close(d_ent(uniform, 12), 1.0, 1e-9, "uniform entropy");

        std::vector<int> thirds;
        for (int k = 0; k < 3; ++k) {
            for (int i = 0; i < 50; ++i) thirds.push_back(k);
        }
        require_close(d_ent(thirds, 12), std::log(3.0) / std::log(12.0), 1e-9,
                      "three-equal-regions entropy");
        require_close(std::log(3.0) / std::log(12.0), 0.4421, 5e-5, "reference value 0.4421");
    });

    criterion("anchor-selection oracle (exhaustive max-min, 200 trials, n<=8, m<=3)", [&] {
        Rng rng(77);
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 2 + rng.below(7); // 2..8
            const int m = 1 + rng.below(std::min(3, n)); // 1..min(3,n)
            Eigen::MatrixXd d = distance_matrix(mock_pool_embeddings(n, 5000 + trial));

            // Exhaustive per-step max-min with lowest-index ties.
            std::vector<Eigen::Index> expected;
            {
                Eigen::Index med = 0;
                double best = d.row(0).sum();
                for (Eigen::Index i = 1; i < n; ++i) {
                    if (d.row(i).sum() < best) {
                        best = d.row(i).sum();
                        med = i;
                    }
                }
                expected.push_back(med);
                while (static_cast<int>(expected.size()) < m) {
                    Eigen::Index arg = -1;
                    double arg_score = -1;
                    for (Eigen::Index cand = 0; cand < n; ++cand) {
                        bool taken = false;
                        for (Eigen::Index e : expected) taken = taken || e == cand;
                        if (taken) continue;
                        double score = 1e300;
                        for (Eigen::Index e : expected) score = std::min(score, d(cand, e));
                        if (score > arg_score) {
                            arg_score = score;
                            arg = cand;
                        }
                    }
                    expected.push_back(arg);
                }
            }
            require(select_anchors(d, m) == expected, "anchor sequence mismatch");
        }
    });

    criterion("prompt golden equality (12 conditions x 6 methods x 2 strategies + planning "
              "+ judge)",
              [&] {
                  const fs::path golden = fs::path(POOLFORGE_TEST_DATA) / "golden" / "prompts";
                  require(fs::exists(golden), "tests/golden/prompts missing");

                  RunConfig cfg;
                  cfg.models = {"export"};
                  cfg.methods = {Method::indep};
                  cfg.strategies = {Strategy::neutral};
                  cfg.output_dir = (fs::temp_directory_path() / "poolforge_acc_export").string();
                  cfg.manifest_path = assets + "/manifest.json";
                  cfg.templates_dir = assets + "/templates";
                  Pipeline pipeline(cfg);

                  const fs::path out = fs::temp_directory_path() / "poolforge_acc_goldens";
                  fs::remove_all(out);
                  pipeline.export_prompts(out.string());

                  size_t golden_count = 0;
                  for (const auto& entry : fs::directory_iterator(golden)) {
                      const fs::path rendered = out / entry.path().filename();
                      require(fs::exists(rendered),
                              "missing rendered prompt " + entry.path().filename().string());
                      require(slurp(rendered) == slurp(entry.path()),
                              "byte mismatch in " + entry.path().filename().string());
                      golden_count++;
                  }
                  require(golden_count == 176, "expected 176 golden files, found " +
                                                   std::to_string(golden_count));
                  size_t rendered_count = 0;
                  for (const auto& entry : fs::directory_iterator(out)) {
                      (void)entry;
                      rendered_count++;
                  }
                  require(rendered_count == golden_count, "extra rendered files not under golden");
                  fs::remove_all(out);
              });

    criterion("structural counts at n=150 (30/stratum, 75 dyads, 50 triads, shared repr "
              "anchors)",
              [&] {
                  PromptKit kit(TaskManifest::load(assets + "/manifest.json"),
                                assets + "/templates");
                  MockBackend backend(55);
                  RunOptions opts;
                  opts.concurrency = 16;

                  CellCoord cell;
                  cell.model_id = "acc";
                  cell.prompt_id = "aut_shoe";
                  cell.family = Family::aut;

                  cell.method = Method::strat;
                  StratResult strat = run_strat(kit, cell, 150, backend, opts);
                  std::map<int, int> counts;
                  for (const auto& rec : strat.evaluated.records) counts[*rec.stratum_id]++;
                  for (int k = 1; k <= 5; ++k) {
                      require(counts[k] == 30, "stratum " + std::to_string(k) + " has " +
                                                   std::to_string(counts[k]) + " slots");
                  }

                  cell.method = Method::peer1;
                  TwoStageResult p1 = run_two_stage(kit, cell, 150, backend, opts);
                  require(p1.partition.groups.size() == 75, "peer1 dyad count");
                  require(validate_pool(p1.evaluated).empty(), "peer1 pool invariants");

                  cell.method = Method::peer2;
                  TwoStageResult p2 = run_two_stage(kit, cell, 150, backend, opts);
                  require(p2.partition.groups.size() == 50, "peer2 triad count");

                  cell.method = Method::repr;
                  MockEmbedder embedder(24, 5);
                  TwoStageResult rp = run_two_stage(kit, cell, 150, backend, opts, &embedder);
                  require(rp.repr_anchor_slots.size() == 3, "repr anchor count");
                  for (const auto& rec : rp.evaluated.records) {
                      require(rec.anchor_slots.has_value() &&
                                  *rec.anchor_slots == rp.repr_anchor_slots,
                              "repr stage-2 call does not share the 3 anchors");
                  }
              });

    criterion("token accounting identities (exact on mock runs)", [&] {
        PromptKit kit(TaskManifest::load(assets + "/manifest.json"), assets + "/templates");
        MockBackend backend(66);
        CellCoord base_cell;
        base_cell.model_id = "acc";
        base_cell.prompt_id = "slogan_soda";
        base_cell.family = Family::slogans;
        base_cell.method = Method::indep;
        base_cell.strategy = Strategy::neutral;

        IndepResult indep = run_indep(kit, base_cell, 24, backend);
        CellUsage base_usage;
        base_usage.cell = base_cell;
        for (const auto& rec : indep.evaluated.records) base_usage.evaluated += rec.usage;
        require(r_tok(base_usage, base_usage) == 1.0, "r_tok baseline identity");

        std::int64_t indep_sum = 0;
        for (const auto& rec : indep.evaluated.records) indep_sum += rec.usage.total();
        require(pipeline_tokens(base_usage) == indep_sum, "indep pipeline = generation sum");

        CellCoord strat_cell = base_cell;
        strat_cell.method = Method::strat;
        StratResult strat = run_strat(kit, strat_cell, 25, backend);
        CellUsage strat_usage;
        strat_usage.cell = strat_cell;
        strat_usage.planning = strat.planning.usage;
        std::int64_t gen_sum = 0;
        for (const auto& rec : strat.evaluated.records) {
            strat_usage.evaluated += rec.usage;
            gen_sum += rec.usage.total();
        }
        require(pipeline_tokens(strat_usage) == strat.planning.usage.total() + gen_sum,
                "strat pipeline = planning + generation");

        CellCoord peer_cell = base_cell;
        peer_cell.method = Method::peer2;
        TwoStageResult peer = run_two_stage(kit, peer_cell, 24, backend);
        CellUsage peer_usage;
        peer_usage.cell = peer_cell;
        peer_usage.seed = TokenUsage{};
        std::int64_t seed_sum = 0, eval_sum = 0;
        for (const auto& rec : peer.seed.records) {
            *peer_usage.seed += rec.usage;
            seed_sum += rec.usage.total();
        }
        for (const auto& rec : peer.evaluated.records) {
            peer_usage.evaluated += rec.usage;
            eval_sum += rec.usage.total();
        }
        require(pipeline_tokens(peer_usage) == seed_sum + eval_sum,
                "two-stage pipeline = seed + evaluated");
        require(pipeline_tokens(peer_usage) > seed_sum, "two-stage strictly exceeds seed");
        require(pipeline_tokens(peer_usage) > eval_sum, "two-stage strictly exceeds evaluated");
    });

    criterion("rarefaction correctness (q=n exact, q=1 entropy 0, exhaustive q=3 mean "
              "within 0.01)",
              [&] {
                  Eigen::MatrixXd d = distance_matrix(mock_pool_embeddings(6, 777));
                  RarefactionCurve pair = rarefy_pair(d, 5000, 4242);
                  const double full = d_pair(d);
                  for (double v : pair.values.back()) {
                      require(v == full, "q=n replicate differs from the full-pool metric");
                  }
                  for (double v : pair.values.front()) require(v == 0.0, "q=1 d_pair convention");

                  std::vector<int> labels{0, 1, 2, 0, 1, 2};
                  RarefactionCurve ent = rarefy_ent(labels, 4, 400, 11);
                  for (double v : ent.values.front()) require(v == 0.0, "q=1 entropy");
                  const double full_ent = d_ent(labels, 4);
                  for (double v : ent.values.back()) {
                      require(std::abs(v - full_ent) < 1e-12, "q=n entropy replicate");
                  }

                  // Exhaustive 20-subset expectation at q=3.
                  double exact = 0;
                  int count = 0;
                  for (int a = 0; a < 6; ++a) {
                      for (int b = a + 1; b < 6; ++b) {
                          for (int c = b + 1; c < 6; ++c) {
                              std::vector<int> idx{a, b, c};
                              exact += d_pair(d, idx);
                              count++;
                          }
                      }
                  }
                  exact /= count;
                  require(count == 20, "subset enumeration count");
                  require_close(pair.means[2], exact, 0.01, "q=3 rarefaction mean vs exhaustive");
              });

    criterion("slogan score oracle (manual leave-one-out arithmetic, z-scores to 1e-9)", [&] {
        // Hand-built 12-slogan fixture with known repeated phrases.
        const std::vector<std::string> texts{
            "join the club today",    // B2: (join the)=2, (the club)=2, (club today)=0 -> 4/3
                                      // B3: (join the club)=2, (the club today)=0 -> 1
            "join the club",          // B2: 2,2 -> 2; B3: 2 -> 2
            "join the club",          // duplicate of the line above
            "fresh fizzy fun",        // the rest share no bigrams at all
            "bubbles beyond belief",
            "drink sunshine daily",
            "sparkle without limits",
            "crack open happiness",
            "taste tomorrow now",
            "pure pop perfection",
            "bold bright bubbly",
            "refresh your orbit",
        };
        // Manual arithmetic for the first three:
        // x0 bigrams join-the (3 occurrences, own 1 -> 2), the-club (3,1 -> 2),
        //    club-today (1,1 -> 0): mean 4/3.
        // x0 trigrams join-the-club (3,1 -> 2), the-club-today (1,1 -> 0): mean 1.
        // x1 = x2: bigrams 2,2 (LOO each 2); trigram LOO 2.
        const double b0 = 0.45 * (4.0 / 3.0) + 0.55 * 1.0;
        const double b1 = 0.45 * 2.0 + 0.55 * 2.0;

        std::vector<std::vector<std::string>> tokens;
        for (const auto& t : texts) tokens.push_back(normalize_slogan(t));
        NgramIndex index = NgramIndex::build(tokens);
        require_close(boilerplate_score(tokens[0], index), b0, 1e-12, "B(x0) manual arithmetic");
        require_close(boilerplate_score(tokens[1], index), b1, 1e-12, "B(x1) manual arithmetic");
        require_close(boilerplate_score(tokens[2], index), b1, 1e-12, "B(x2) manual arithmetic");
        for (size_t i = 3; i < tokens.size(); ++i) {
            // Shared single words only; every bigram/trigram is unique.
            require_close(boilerplate_score(tokens[i], index), 0.0, 1e-12,
                          "unique-phrase slogan must score 0");
        }

        std::vector<std::string> keys;
        for (size_t i = 0; i < texts.size(); ++i) keys.push_back("k" + std::to_string(i));
        auto qz = slogan_quality(keys, texts);
        double mean = 0, var = 0;
        for (const auto& [k, v] : qz) mean += v;
        mean /= static_cast<double>(qz.size());
        for (const auto& [k, v] : qz) var += (v - mean) * (v - mean);
        var /= static_cast<double>(qz.size());
        require_close(mean, 0.0, 1e-9, "standardized mean");
        require_close(std::sqrt(var), 1.0, 1e-9, "standardized sigma");
        require(qz.at("k1") < qz.at("k3"), "boilerplate-heavy slogan must rank below unique one");
    });

    criterion("bootstrap sanity (bit-reproducible, zero-width degenerate, >=90/100 coverage, "
              "<2min)",
              [&] {
                  const auto start = std::chrono::steady_clock::now();

                  Eigen::MatrixXd d = distance_matrix(mock_pool_embeddings(25, 31337));
                  auto stat = [&](std::span<const int> idx) { return d_pair(d, idx); };
                  BootstrapInterval a = bootstrap_ci(25, 2000, 9001, stat);
                  BootstrapInterval b = bootstrap_ci(25, 2000, 9001, stat);
                  require(a.value == b.value && a.ci_low == b.ci_low && a.ci_high == b.ci_high,
                          "same seed must give bit-identical intervals");

                  Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(12, 12);
                  auto flat_stat = [&](std::span<const int> idx) { return d_pair(flat, idx); };
                  BootstrapInterval degenerate = bootstrap_ci(12, 500, 3, flat_stat);
                  require(degenerate.ci_low == 0.0 && degenerate.ci_high == 0.0,
                          "degenerate pool must give a zero-width interval");

                  // Coverage: i.i.d. standard normal pools, statistic = mean,
                  // true value 0.
                  int covered = 0;
                  const int trials = 100;
                  for (int t = 0; t < trials; ++t) {
                      Rng rng(mix64(808, static_cast<std::uint64_t>(t)));
                      std::vector<double> values(60);
                      for (auto& v : values) v = rng.gaussian();
                      auto mean_stat = [&](std::span<const int> idx) {
                          double s = 0;
                          for (int i : idx) s += values[static_cast<size_t>(i)];
                          return s / static_cast<double>(idx.size());
                      };
                      BootstrapInterval ci =
                          bootstrap_ci(60, 500, mix64(909, static_cast<std::uint64_t>(t)),
                                       mean_stat);
                      if (ci.ci_low <= 0.0 && 0.0 <= ci.ci_high) covered++;
                  }
                  require(covered >= 90, "coverage " + std::to_string(covered) + "/100 below 90");
                  require(elapsed_since(start) < 120.0, "bootstrap criterion exceeded 2 minutes");
              });

    criterion("end-to-end mock reproduction (432 cells at n=30, identical report CSVs, "
              "<15min)",
              [&] {
                  const auto start = std::chrono::steady_clock::now();

                  auto run = [&](const std::string& dir) {
                      fs::remove_all(dir);
                      Pipeline pipeline(e2e_config(dir));
                      StageOutcome gen = pipeline.generate();
                      require(gen.ok() && gen.succeeded == 432,
                              "generate: " + std::to_string(gen.succeeded) + " ok, " +
                                  std::to_string(gen.failed) + " failed");
                      require(pipeline.embed().ok(), "embed stage failed");
                      require(pipeline.score().ok(), "score stage failed");
                      StageOutcome an = pipeline.analyze();
                      require(an.ok() && an.succeeded == 432,
                              "analyze: " + std::to_string(an.succeeded) + " ok, " +
                                  std::to_string(an.failed) + " failed");
                      require(pipeline.report().ok(), "report stage failed");
                  };

                  const std::string run1 =
                      (fs::temp_directory_path() / "poolforge_acc_e2e_run1").string();
                  const std::string run2 =
                      (fs::temp_directory_path() / "poolforge_acc_e2e_run2").string();
                  run(run1);
                  run(run2);

                  // One summary row per cell.
                  const std::string summaries = slurp(run1 + "/report/cell_summaries.csv");
                  const auto rows = std::count(summaries.begin(), summaries.end(), '\n');
                  require(rows == 433, "expected 432 summary rows, got " +
                                           std::to_string(rows - 1));

                  for (const char* rel :
                       {"report/cell_summaries.csv", "report/contrasts_prompt.csv",
                        "report/contrasts_design.csv", "report/efficiency.csv",
                        "report/rarefaction_long.csv", "report/rarefaction_mean.csv"}) {
                      require(slurp(fs::path(run1) / rel) == slurp(fs::path(run2) / rel),
                              std::string("reports differ between identical runs: ") + rel);
                  }

                  fs::remove_all(run1);
                  fs::remove_all(run2);
                  require(elapsed_since(start) < 900.0, "end-to-end exceeded 15 minutes");
              });

    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criterion(s) failed\n", g_failures);
    return 1;
}
