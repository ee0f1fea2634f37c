#pragma once

#include "poolforge/core.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace poolforge {

// Row-major pool embeddings, one unit-norm row per slot.
struct EmbeddingSet {
    Eigen::MatrixXd vectors; // n x d, unit L2 rows
    std::string source_id;

    Eigen::Index n() const { return vectors.rows(); }
    Eigen::Index dim() const { return vectors.cols(); }
};

// Normalizes each row to unit L2 norm. Zero rows are an error.
template <typename Derived>
void l2_normalize_rows(Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double norm = m.row(i).norm();
        if (norm <= 0.0) throw Error("geometry: cannot normalize zero embedding row");
        m.row(i) /= norm;
    }
}

// Returns violations of the EmbeddingSet contract (unit rows within tol).
std::vector<std::string> validate_embeddings(const EmbeddingSet& e, double tol = 1e-6);

// Cosine distance matrix d_ij = 1 - <v_i, v_j> over unit rows. The upper
// triangle is computed once and mirrored, the diagonal is exactly zero, and
// entries are clamped to [0, 2] against rounding.
Eigen::MatrixXd distance_matrix(const Eigen::Ref<const Eigen::MatrixXd>& unit_rows);

// Index minimizing the row sum of a distance matrix; ties go to the lowest
// index (the scan keeps the first strict minimum).
template <typename Derived>
Eigen::Index medoid(const Eigen::MatrixBase<Derived>& dist) {
    if (dist.rows() < 1) throw Error("geometry: medoid of empty matrix");
    Eigen::Index best = 0;
    typename Derived::Scalar best_sum = dist.row(0).sum();
    for (Eigen::Index i = 1; i < dist.rows(); ++i) {
        const typename Derived::Scalar s = dist.row(i).sum();
        if (s < best_sum) {
            best_sum = s;
            best = i;
        }
    }
    return best;
}

enum class AnchorObjective {
    max_min, // farthest-first / k-center (default reading of the rule)
    max_sum, // documented alternative: maximize summed distance to selected
};

// Medoid-start farthest-first selection of m distinct indices. After the
// medoid, each pick maximizes the objective over distances to the already
// selected set; ties go to the lowest index.
std::vector<Eigen::Index> select_anchors(const Eigen::Ref<const Eigen::MatrixXd>& dist, int m,
                                         AnchorObjective objective = AnchorObjective::max_min);

} // namespace poolforge
