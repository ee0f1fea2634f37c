#include "poolforge/diversity.hpp"

#include "poolforge/hashing.hpp"
#include "poolforge/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace poolforge {

using nlohmann::json;

namespace {

void require_n(Eigen::Index n, Eigen::Index minimum, const char* metric) {
    if (n < minimum) {
        throw Error(std::string(metric) + ": undefined for pools with fewer than " +
                    std::to_string(minimum) + " outputs");
    }
}

std::vector<int> identity_indices(Eigen::Index n) {
    std::vector<int> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

} // namespace

double d_pair(const Eigen::Ref<const Eigen::MatrixXd>& dist, std::span<const int> idx) {
    const auto q = static_cast<Eigen::Index>(idx.size());
    require_n(q, 2, "d_pair");
    double sum = 0;
    for (Eigen::Index a = 0; a < q; ++a) {
        for (Eigen::Index b = a + 1; b < q; ++b) {
            sum += dist(idx[static_cast<size_t>(a)], idx[static_cast<size_t>(b)]);
        }
    }
    return 2.0 * sum / (static_cast<double>(q) * static_cast<double>(q - 1));
}

double d_nn(const Eigen::Ref<const Eigen::MatrixXd>& dist, std::span<const int> idx) {
    const auto q = static_cast<Eigen::Index>(idx.size());
    require_n(q, 2, "d_nn");
    double sum = 0;
    for (Eigen::Index a = 0; a < q; ++a) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index b = 0; b < q; ++b) {
            if (a == b) continue;
            best = std::min(best, dist(idx[static_cast<size_t>(a)], idx[static_cast<size_t>(b)]));
        }
        sum += best;
    }
    return sum / static_cast<double>(q);
}

double d_med(const Eigen::Ref<const Eigen::MatrixXd>& dist, std::span<const int> idx) {
    const auto q = static_cast<Eigen::Index>(idx.size());
    require_n(q, 1, "d_med");
    // Medoid of the sub-multiset: position minimizing its row sum within it.
    // That row sum is also the numerator of the mean (the medoid's own zero
    // term included), so divide by q.
    double best_sum = std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < q; ++a) {
        double s = 0;
        for (Eigen::Index b = 0; b < q; ++b) {
            s += dist(idx[static_cast<size_t>(a)], idx[static_cast<size_t>(b)]);
        }
        if (s < best_sum) best_sum = s;
    }
    return best_sum / static_cast<double>(q);
}

double d_mst(const Eigen::Ref<const Eigen::MatrixXd>& dist, std::span<const int> idx) {
    const auto q = static_cast<Eigen::Index>(idx.size());
    require_n(q, 2, "d_mst");
    // Prim over positions; ties resolved by (lower tree position, lower new
    // position) via strict comparisons on the scan order.
    std::vector<bool> in_tree(static_cast<size_t>(q), false);
    std::vector<double> best(static_cast<size_t>(q), std::numeric_limits<double>::infinity());
    std::vector<Eigen::Index> best_from(static_cast<size_t>(q), -1);

    in_tree[0] = true;
    for (Eigen::Index b = 1; b < q; ++b) {
        best[static_cast<size_t>(b)] = dist(idx[0], idx[static_cast<size_t>(b)]);
        best_from[static_cast<size_t>(b)] = 0;
    }

    double total = 0;
    for (Eigen::Index step = 1; step < q; ++step) {
        Eigen::Index pick = -1;
        for (Eigen::Index b = 0; b < q; ++b) {
            if (in_tree[static_cast<size_t>(b)]) continue;
            if (pick < 0 || best[static_cast<size_t>(b)] < best[static_cast<size_t>(pick)] ||
                (best[static_cast<size_t>(b)] == best[static_cast<size_t>(pick)] &&
                 (best_from[static_cast<size_t>(b)] < best_from[static_cast<size_t>(pick)] ||
                  (best_from[static_cast<size_t>(b)] == best_from[static_cast<size_t>(pick)] &&
                   b < pick)))) {
                pick = b;
            }
        }
        total += best[static_cast<size_t>(pick)];
        in_tree[static_cast<size_t>(pick)] = true;
        for (Eigen::Index b = 0; b < q; ++b) {
            if (in_tree[static_cast<size_t>(b)]) continue;
            const double w = dist(idx[static_cast<size_t>(pick)], idx[static_cast<size_t>(b)]);
            if (w < best[static_cast<size_t>(b)] ||
                (w == best[static_cast<size_t>(b)] &&
                 pick < best_from[static_cast<size_t>(b)])) {
                best[static_cast<size_t>(b)] = w;
                best_from[static_cast<size_t>(b)] = pick;
            }
        }
    }
    return total / static_cast<double>(q - 1);
}

double d_pair(const Eigen::Ref<const Eigen::MatrixXd>& dist) {
    return d_pair(dist, identity_indices(dist.rows()));
}
double d_nn(const Eigen::Ref<const Eigen::MatrixXd>& dist) {
    return d_nn(dist, identity_indices(dist.rows()));
}
double d_med(const Eigen::Ref<const Eigen::MatrixXd>& dist) {
    return d_med(dist, identity_indices(dist.rows()));
}
double d_mst(const Eigen::Ref<const Eigen::MatrixXd>& dist) {
    return d_mst(dist, identity_indices(dist.rows()));
}

double d_ent(std::span<const int> labels, std::span<const int> idx, int k) {
    if (k < 2) throw Error("d_ent: needs at least 2 regions");
    if (idx.empty()) throw Error("d_ent: empty pool");
    std::vector<double> counts(static_cast<size_t>(k), 0.0);
    for (int a : idx) {
        const int label = labels[static_cast<size_t>(a)];
        if (label < 0 || label >= k) throw Error("d_ent: label outside 0..k-1");
        counts[static_cast<size_t>(label)] += 1.0;
    }
    const double n = static_cast<double>(idx.size());
    double h = 0;
    for (double c : counts) {
        if (c <= 0) continue; // empty regions contribute zero
        const double p = c / n;
        h -= p * std::log(p);
    }
    return h / std::log(static_cast<double>(k));
}

double d_ent(std::span<const int> labels, int k) {
    std::vector<int> idx(labels.size());
    std::iota(idx.begin(), idx.end(), 0);
    return d_ent(labels, idx, k);
}

// ---------------------------------------------------------------------------

int region_count_for(Family f) {
    switch (f) {
        case Family::stories: return 12;
        case Family::aut: return 15;
        case Family::slogans: return 12;
    }
    return 0;
}

namespace {

double assign_labels(const Eigen::Ref<const Eigen::MatrixXd>& points,
                     const Eigen::MatrixXd& centroids, std::vector<int>& labels) {
    const Eigen::Index n = points.rows();
    const Eigen::Index k = centroids.rows();
    double inertia = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
        for (Eigen::Index c = 1; c < k; ++c) {
            const double d = (points.row(i) - centroids.row(c)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        labels[static_cast<size_t>(i)] = best;
        inertia += best_d;
    }
    return inertia;
}

} // namespace

KMeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& points, int k, int n_init,
                    std::uint64_t seed, int max_iter, double tol) {
    const Eigen::Index n = points.rows();
    if (k < 1) throw Error("kmeans: k must be >= 1");
    if (n < k) {
        throw Error("kmeans: corpus of " + std::to_string(n) + " points is smaller than k=" +
                    std::to_string(k));
    }

    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();

    Rng rng(seed);
    for (int init = 0; init < n_init; ++init) {
        // Random-point initialization: k distinct rows.
        std::vector<Eigen::Index> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(k); ++i) {
            const Eigen::Index pick = i + rng.below(static_cast<int>(n - i));
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(pick)]);
        }
        Eigen::MatrixXd centroids(k, points.cols());
        for (int c = 0; c < k; ++c) centroids.row(c) = points.row(order[static_cast<size_t>(c)]);

        std::vector<int> labels(static_cast<size_t>(n), 0);
        double inertia = 0;
        for (int iter = 0; iter < max_iter; ++iter) {
            inertia = assign_labels(points, centroids, labels);

            Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
            std::vector<Eigen::Index> counts(static_cast<size_t>(k), 0);
            for (Eigen::Index i = 0; i < n; ++i) {
                sums.row(labels[static_cast<size_t>(i)]) += points.row(i);
                counts[static_cast<size_t>(labels[static_cast<size_t>(i)])]++;
            }
            double shift = 0;
            for (int c = 0; c < k; ++c) {
                Eigen::RowVectorXd updated;
                if (counts[static_cast<size_t>(c)] == 0) {
                    // Reseed an empty cluster from the point farthest from
                    // its assigned centroid.
                    Eigen::Index worst = 0;
                    double worst_d = -1;
                    for (Eigen::Index i = 0; i < n; ++i) {
                        const double d =
                            (points.row(i) - centroids.row(labels[static_cast<size_t>(i)]))
                                .squaredNorm();
                        if (d > worst_d) {
                            worst_d = d;
                            worst = i;
                        }
                    }
                    updated = points.row(worst);
                    labels[static_cast<size_t>(worst)] = c;
                } else {
                    updated = sums.row(c) / static_cast<double>(counts[static_cast<size_t>(c)]);
                }
                shift = std::max(shift, (updated - centroids.row(c)).norm());
                centroids.row(c) = updated;
            }
            if (shift <= tol) break;
        }
        inertia = assign_labels(points, centroids, labels);

        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.centroids = std::move(centroids);
            best.labels = std::move(labels);
        }
    }
    return best;
}

RegionModel fit_regions(const std::string& prompt_id, Family family,
                        const std::vector<std::string>& keys,
                        const Eigen::Ref<const Eigen::MatrixXd>& embeddings) {
    if (static_cast<Eigen::Index>(keys.size()) != embeddings.rows()) {
        throw Error("fit_regions: keys and embedding rows disagree");
    }
    RegionModel model;
    model.prompt_id = prompt_id;
    model.k = region_count_for(family);

    KMeansResult fit = kmeans(embeddings, model.k, model.n_init, model.seed);
    model.centroids = std::move(fit.centroids);
    model.inertia = fit.inertia;
    for (size_t i = 0; i < keys.size(); ++i) {
        model.labels[keys[i]] = fit.labels[i];
    }
    return model;
}

void save_region_model(const std::string& path, const RegionModel& model) {
    json j;
    j["prompt_id"] = model.prompt_id;
    j["k"] = model.k;
    j["seed"] = model.seed;
    j["n_init"] = model.n_init;
    j["inertia"] = model.inertia;
    j["dim"] = model.centroids.cols();
    j["centroids"] = json::array();
    for (Eigen::Index c = 0; c < model.centroids.rows(); ++c) {
        json row = json::array();
        for (Eigen::Index d = 0; d < model.centroids.cols(); ++d) row.push_back(model.centroids(c, d));
        j["centroids"].push_back(std::move(row));
    }
    j["labels"] = json::object();
    for (const auto& [key, label] : model.labels) j["labels"][key] = label;

    std::ofstream out(path);
    out << j.dump() << "\n";
    if (!out) throw Error("save_region_model: write failed for " + path);
}

RegionModel load_region_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_region_model: cannot open " + path);
    json j = json::parse(in);
    RegionModel model;
    model.prompt_id = j.at("prompt_id").get<std::string>();
    model.k = j.at("k").get<int>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.n_init = j.at("n_init").get<int>();
    model.inertia = j.at("inertia").get<double>();
    const auto dim = j.at("dim").get<Eigen::Index>();
    const auto& cents = j.at("centroids");
    model.centroids.resize(static_cast<Eigen::Index>(cents.size()), dim);
    for (Eigen::Index c = 0; c < model.centroids.rows(); ++c) {
        for (Eigen::Index d = 0; d < dim; ++d) {
            model.centroids(c, d) = cents[static_cast<size_t>(c)][static_cast<size_t>(d)].get<double>();
        }
    }
    for (auto it = j.at("labels").begin(); it != j.at("labels").end(); ++it) {
        model.labels[it.key()] = it.value().get<int>();
    }
    return model;
}

// ---------------------------------------------------------------------------

const char* to_string(RarefyMetric m) {
    return m == RarefyMetric::d_pair ? "d_pair" : "d_ent";
}

namespace {

// Partial Fisher-Yates draw of q indices from 0..n-1 without replacement,
// seeded per (seed, q, replicate) so evaluation order never matters.
std::vector<int> draw_subpool(int n, int q, std::uint64_t seed, int replicate) {
    Rng rng(mix64(mix64(seed, static_cast<std::uint64_t>(q)),
                  static_cast<std::uint64_t>(replicate)));
    std::vector<int> pool(static_cast<size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < q; ++i) {
        const int pick = i + rng.below(n - i);
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(pick)]);
    }
    pool.resize(static_cast<size_t>(q));
    return pool;
}

template <typename MetricFn>
RarefactionCurve rarefy_impl(RarefyMetric metric, int n, int repeats, std::uint64_t seed,
                             MetricFn&& metric_fn) {
    if (repeats < 1) throw Error("rarefy: repeats must be >= 1");
    if (n < 1) throw Error("rarefy: empty pool");

    RarefactionCurve curve;
    curve.metric = metric;
    curve.n = n;
    curve.repeats = repeats;
    curve.values.resize(static_cast<size_t>(n));
    curve.means.resize(static_cast<size_t>(n), 0.0);

    for (int q = 1; q <= n; ++q) {
        auto& vals = curve.values[static_cast<size_t>(q - 1)];
        vals.resize(static_cast<size_t>(repeats));
        double sum = 0;
        for (int r = 0; r < repeats; ++r) {
            std::vector<int> idx = draw_subpool(n, q, seed, r);
            const double v = metric_fn(idx, q);
            vals[static_cast<size_t>(r)] = v;
            sum += v;
        }
        curve.means[static_cast<size_t>(q - 1)] = sum / repeats;
    }
    return curve;
}

} // namespace

RarefactionCurve rarefy_pair(const Eigen::Ref<const Eigen::MatrixXd>& dist, int repeats,
                             std::uint64_t seed) {
    const int n = static_cast<int>(dist.rows());
    return rarefy_impl(RarefyMetric::d_pair, n, repeats, seed,
                       [&](const std::vector<int>& idx, int q) {
                           return q < 2 ? 0.0 : d_pair(dist, idx);
                       });
}

RarefactionCurve rarefy_ent(std::span<const int> labels, int k, int repeats, std::uint64_t seed) {
    const int n = static_cast<int>(labels.size());
    return rarefy_impl(RarefyMetric::d_ent, n, repeats, seed,
                       [&](const std::vector<int>& idx, int) { return d_ent(labels, idx, k); });
}

double rarefaction_auc(const RarefactionCurve& curve) {
    const int q_min = curve.q_min();
    if (curve.n < q_min) throw Error("rarefaction_auc: curve too short");
    double sum = 0;
    for (int q = q_min; q <= curve.n; ++q) sum += curve.means[static_cast<size_t>(q - 1)];
    return sum / static_cast<double>(curve.n - q_min + 1);
}

std::optional<int> first_hit(const RarefactionCurve& curve, int replicate, double target) {
    for (int q = curve.q_min(); q <= curve.n; ++q) {
        if (curve.values[static_cast<size_t>(q - 1)][static_cast<size_t>(replicate)] >= target) {
            return q;
        }
    }
    return std::nullopt;
}

FirstHitSummary first_hit_summary(const RarefactionCurve& curve, double target) {
    FirstHitSummary s;
    double sum = 0;
    for (int r = 0; r < curve.repeats; ++r) {
        if (auto q = first_hit(curve, r, target)) {
            sum += *q;
            s.reached++;
        } else {
            s.not_reached++;
        }
    }
    s.mean_q = s.reached > 0 ? sum / s.reached : std::numeric_limits<double>::quiet_NaN();
    return s;
}

} // namespace poolforge
