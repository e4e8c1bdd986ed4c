#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nisp/model.hpp"
#include "nisp/ranking.hpp"
#include "nisp/tensor.hpp"

namespace nisp {

// ---------------------------------------------------------------------------
// Per-kind importance rules. All map non-negative importance of a layer's
// output to non-negative importance of its input and are linear in s_out.
// ---------------------------------------------------------------------------

/// s_in(j) = Σ_i |w(i,j)|·s_out(i)
Vec propagate_dense(const Matrix& w, std::span<const double> s_out);

/// Adjoint convolution with |kernel|: every input position collects |k|·importance from
/// each output position whose receptive field covers it, summed over output channels.
/// Importance that lands on padding is discarded.
Vec propagate_conv(const Geometry& g, std::span<const double> kernel, std::span<const double> s_out);

/// Max- and average-pooling alike: each window hands s/(k·k) to every position it covers.
Vec propagate_pool(const Geometry& g, std::span<const double> s_out);

/// Cross-channel LRN: channel c receives s_out(c')/l from every c' with |c − c'| ≤ (l−1)/2,
/// independently at each spatial position.
Vec propagate_lrn(std::size_t local_size, std::size_t channels, std::size_t spatial,
                  std::span<const double> s_out);

/// Batch-norm and elementwise activations: one-to-one connections.
Vec propagate_identity(std::span<const double> s_out);

/// Dispatches to the rule matching the layer kind.
Vec propagate_layer(const Layer& layer, std::span<const double> s_out);

/// Sum of each channel's spatial scores for a response of the given shape.
Vec channel_scores(std::span<const double> scores, const Shape& shape);

// ---------------------------------------------------------------------------
// Explicit propagation matrices, shape (out_size × in_size), applied as
// s_in = s_outᵀ · BP. Used by the closed-form oracle and for auditing.
// ---------------------------------------------------------------------------

using PropagationMatrix = Matrix;

/// Block matrix of Y×X building blocks b_ky holding row ky of |k_fn| at stride offsets.
PropagationMatrix bp_conv_matrix(const Geometry& g, std::span<const double> kernel);
PropagationMatrix bp_pool_matrix(const Geometry& g);
PropagationMatrix bp_lrn_matrix(std::size_t local_size, std::size_t channels, std::size_t spatial);
PropagationMatrix propagation_matrix(const Layer& layer);

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

/// Binary keep-mask over a layer's channels (neurons, for Dense layers).
struct PruneIndicator {
    std::size_t layer_id = 0;
    std::vector<std::uint8_t> mask;  // 1 = keep

    std::size_t kept() const;
};

/// Per-layer keep fractions in (0, 1]. Unlisted layers keep everything.
struct PruneConfig {
    std::map<std::size_t, double> keep_fraction;

    static PruneConfig keep_all() { return {}; }
    /// The same fraction for every prunable layer of `net`.
    static PruneConfig uniform(const Network& net, double fraction);

    double fraction(std::size_t layer_id) const;
    /// N_l = max(1, round(fraction × width)).
    std::size_t kept_count(std::size_t layer_id, std::size_t width) const;
    /// Throws DomainError when a fraction lies outside (0, 1].
    void check() const;
};

/// Exactly `keep` ones at the largest scores; equal scores favour the lower index.
PruneIndicator prune_indicator(std::span<const double> scores, std::size_t keep, std::size_t layer_id = 0);

/// Channel-level structure shared by propagation and surgery.
///
/// Every layer belongs to the group of the nearest weighted layer at or before it
/// (its head): Activation, BatchNorm, Pool2D and LRN layers keep their head's
/// channels. Skip edges tie the groups of their two endpoints so both sides of an
/// add share one mask. A tie set containing the input group or a layer past the
/// final response layer is locked and never pruned.
struct LayerGroups {
    std::vector<long> head;          // per layer; -1 when the layer follows the network input
    std::vector<std::size_t> tie;    // per head layer: representative of its tie set
    std::vector<bool> locked;        // per head layer: tie set may not be pruned

    bool prunable_head(std::size_t layer, std::size_t frl_index) const;
};

LayerGroups layer_groups(const Network& net);

struct LayerPlan {
    std::size_t layer_id = 0;
    Vec scores;                      // per-neuron importance as propagated further (pruned entries zero)
    std::vector<std::uint8_t> mask;  // per channel (per neuron for Dense), 1 = keep
    Vec channel_scores;              // Conv2D only: channel sums used for selection
    std::size_t spatial = 1;         // neurons per channel

    bool channel_level() const { return spatial > 1 || !channel_scores.empty(); }
    /// Mask expanded to one entry per neuron.
    Vec neuron_mask() const;
    std::size_t kept() const;
};

struct ImportancePlan {
    std::vector<LayerPlan> layers;   // one entry per prunable layer, ascending layer id
    std::vector<Vec> importance;     // importance of every layer output 0..frl before zeroing
    Vec input_importance;

    const LayerPlan* find(std::size_t layer_id) const;
};

/// Single backward pass from the final response layer to the input.
///
/// At each prunable layer the indicator is chosen from the unzeroed scores (channel
/// sums for Conv2D), then pruned entries are zeroed before propagating further. A
/// layer feeding several consumers receives the sum of what each sends back.
ImportancePlan nisp_backward(const Network& net, const ImportanceVector& s_n, const PruneConfig& cfg);

/// sₖ = BP_{k+1}ᵀ ··· BP_{frl}ᵀ s_n built as an explicit matrix product (no recursion,
/// no pruning). Requires no skip edge merging inside (k, frl].
ImportanceVector importance_closed_form(const Network& net, const ImportanceVector& s_n, std::size_t k);

std::string plan_to_json(const ImportancePlan& plan);
ImportancePlan plan_from_json(std::string_view text);

}  // namespace nisp
