#pragma once

#include "poolforge/core.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace poolforge {

// The five pool-level diversity summaries.
struct DiversityReport {
    double d_pair = 0;
    double d_nn = 0;
    double d_med = 0;
    double d_mst = 0;
    double d_ent = 0;
};

// Full-pool metrics over a distance matrix.
double d_pair(const Eigen::Ref<const Eigen::MatrixXd>& dist);
double d_nn(const Eigen::Ref<const Eigen::MatrixXd>& dist);
double d_med(const Eigen::Ref<const Eigen::MatrixXd>& dist);
double d_mst(const Eigen::Ref<const Eigen::MatrixXd>& dist);

// Index-multiset variants shared by rarefaction subsets and bootstrap
// resamples: position a carries the point idx[a], so duplicated indices
// contribute zero distances.
double d_pair(const Eigen::Ref<const Eigen::MatrixXd>& dist, std::span<const int> idx);
double d_nn(const Eigen::Ref<const Eigen::MatrixXd>& dist, std::span<const int> idx);
double d_med(const Eigen::Ref<const Eigen::MatrixXd>& dist, std::span<const int> idx);
double d_mst(const Eigen::Ref<const Eigen::MatrixXd>& dist, std::span<const int> idx);

// Normalized region entropy of one pool's labels over k fixed regions.
// Empty regions contribute zero; 0*log 0 := 0; k >= 2 required.
double d_ent(std::span<const int> labels, int k);
double d_ent(std::span<const int> labels, std::span<const int> idx, int k);

// ---------------------------------------------------------------------------
// Prompt-level semantic regions (K-means over the pooled corpus).

// Fixed region counts per task family.
int region_count_for(Family f); // stories 12, aut 15, slogans 12

constexpr std::uint64_t kRegionSeed = 20260523;
constexpr int kRegionInits = 20;

struct KMeansResult {
    Eigen::MatrixXd centroids; // k x d
    std::vector<int> labels;   // one per point, 0..k-1
    double inertia = 0;
};

// Lloyd iterations with random-point initialization, n_init restarts, best
// inertia wins. Deterministic for a fixed seed. Empty clusters are reseeded
// from the point farthest from its centroid.
KMeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& points, int k, int n_init,
                    std::uint64_t seed, int max_iter = 300, double tol = 1e-6);

struct RegionModel {
    std::string prompt_id;
    int k = 0;
    Eigen::MatrixXd centroids;
    std::unordered_map<std::string, int> labels; // output_key -> region
    std::uint64_t seed = kRegionSeed;
    int n_init = kRegionInits;
    double inertia = 0;
};

// Fits the prompt-level K-means over the pooled corpus (keys parallel to
// embedding rows, rows L2-normalized) and labels every output.
RegionModel fit_regions(const std::string& prompt_id, Family family,
                        const std::vector<std::string>& keys,
                        const Eigen::Ref<const Eigen::MatrixXd>& embeddings);

void save_region_model(const std::string& path, const RegionModel& model);
RegionModel load_region_model(const std::string& path);

// ---------------------------------------------------------------------------
// Rarefaction.

enum class RarefyMetric { d_pair, d_ent };

const char* to_string(RarefyMetric m);

// Replicate values for every subpool size q = 1..n. d_pair at q = 1 is 0 by
// convention and excluded from its AUC range; d_ent at q = 1 is 0 analytically.
struct RarefactionCurve {
    RarefyMetric metric = RarefyMetric::d_pair;
    int n = 0;
    int repeats = 0;
    std::vector<std::vector<double>> values; // values[q-1][r]
    std::vector<double> means;               // means[q-1]

    int q_min() const { return metric == RarefyMetric::d_pair ? 2 : 1; }
};

// Subpools are drawn without replacement with an RNG stream derived from
// (seed, q, replicate), so results are independent of evaluation order.
RarefactionCurve rarefy_pair(const Eigen::Ref<const Eigen::MatrixXd>& dist, int repeats,
                             std::uint64_t seed);
RarefactionCurve rarefy_ent(std::span<const int> labels, int k, int repeats, std::uint64_t seed);

// Mean of the per-size means over q = q_min..n.
double rarefaction_auc(const RarefactionCurve& curve);

// Smallest q whose replicate value reaches the target; nullopt if never.
std::optional<int> first_hit(const RarefactionCurve& curve, int replicate, double target);

struct FirstHitSummary {
    double mean_q = 0;   // over replicates that reached the target
    int reached = 0;
    int not_reached = 0;
};

FirstHitSummary first_hit_summary(const RarefactionCurve& curve, double target);

} // namespace poolforge
