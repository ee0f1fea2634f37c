#include "poolforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace poolforge {

std::vector<std::string> validate_embeddings(const EmbeddingSet& e, double tol) {
    std::vector<std::string> violations;
    if (e.vectors.rows() == 0) violations.push_back("embedding set is empty");
    for (Eigen::Index i = 0; i < e.vectors.rows(); ++i) {
        const double norm = e.vectors.row(i).norm();
        if (std::abs(norm - 1.0) > tol) {
            violations.push_back("row " + std::to_string(i) + " has norm " + std::to_string(norm));
        }
    }
    if (e.source_id.empty()) violations.push_back("missing embedder source_id");
    return violations;
}

Eigen::MatrixXd distance_matrix(const Eigen::Ref<const Eigen::MatrixXd>& unit_rows) {
    const Eigen::Index n = unit_rows.rows();
    if (n < 1) throw Error("geometry: distance_matrix of empty embedding set");
    Eigen::MatrixXd d(n, n);
    d.diagonal().setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dist = std::clamp(1.0 - unit_rows.row(i).dot(unit_rows.row(j)), 0.0, 2.0);
            d(i, j) = dist;
            d(j, i) = dist;
        }
    }
    return d;
}

std::vector<Eigen::Index> select_anchors(const Eigen::Ref<const Eigen::MatrixXd>& dist, int m,
                                         AnchorObjective objective) {
    const Eigen::Index n = dist.rows();
    if (m < 1) throw Error("geometry: anchor count must be >= 1");
    if (static_cast<Eigen::Index>(m) > n) {
        throw Error("geometry: anchor count " + std::to_string(m) + " exceeds pool size " +
                    std::to_string(n));
    }

    std::vector<Eigen::Index> selected;
    selected.reserve(static_cast<size_t>(m));
    std::vector<bool> taken(static_cast<size_t>(n), false);

    const Eigen::Index first = medoid(dist);
    selected.push_back(first);
    taken[static_cast<size_t>(first)] = true;

    // score[j]: min (or sum) distance from j to the selected set.
    Eigen::VectorXd score = dist.col(first);

    while (static_cast<int>(selected.size()) < m) {
        Eigen::Index best = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (taken[static_cast<size_t>(j)]) continue;
            if (score(j) > best_score) {
                best_score = score(j);
                best = j;
            }
        }
        selected.push_back(best);
        taken[static_cast<size_t>(best)] = true;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (objective == AnchorObjective::max_min) {
                score(j) = std::min(score(j), dist(j, best));
            } else {
                score(j) += dist(j, best);
            }
        }
    }
    return selected;
}

} // namespace poolforge
