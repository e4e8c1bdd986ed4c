#pragma once

#include <cstddef>
#include <vector>

#include "nisp/engine.hpp"
#include "nisp/model.hpp"
#include "nisp/tensor.hpp"

namespace nisp {

/// Non-negative importance score per neuron of one layer's (flattened) response.
struct ImportanceVector {
    std::size_t layer_id = 0;
    Vec scores;
};

/// Feature graph for infinite feature selection.
/// Symmetric, non-negative, zero diagonal; damping·ρ(affinity) < 1.
struct AffinityGraph {
    Matrix affinity;
    double damping = 0.0;
    double alpha = 0.5;
    std::size_t layer_id = 0;
};

inline constexpr double kDefaultAlpha = 0.5;
// r = kDampingFactor / ρ(A)
inline constexpr double kDampingFactor = 0.9;

/// Largest eigenvalue of a symmetric non-negative matrix by shifted power iteration.
double spectral_radius(const Matrix& a);

/// Pairwise affinity from response statistics:
///   A(i,j) = alpha·max(ŝ_i, ŝ_j) + (1−alpha)·(1−|ρ_ij|),  i ≠ j
/// where ŝ is each feature's standard deviation divided by the largest one and ρ is
/// the Pearson correlation (0 when either feature is constant).
AffinityGraph build_affinity(const ResponseMatrix& resp, double alpha = kDefaultAlpha);

/// S = (I − rA)^{-1} − I, the damped sum over all path lengths ≥ 1.
Matrix inffs_path_matrix(const AffinityGraph& graph);

/// score_i = Σ_j S(i,j).
ImportanceVector inffs_scores(const AffinityGraph& graph);

/// score_i = Σ_j |w(i,j)| of the layer producing `layer_id`'s response. For Conv2D
/// every neuron of output channel c gets the channel's Σ|kernel|.
ImportanceVector magnitude_scores(const Network& net, std::size_t layer_id);

/// Independent Inf-FS ranking of every prunable layer, no cross-layer propagation.
std::vector<ImportanceVector> per_layer_scores(const Network& net, const Samples& data,
                                               double alpha = kDefaultAlpha);

}  // namespace nisp
