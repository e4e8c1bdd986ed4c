#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nisp/engine.hpp"
#include "nisp/model.hpp"
#include "nisp/propagation.hpp"
#include "nisp/ranking.hpp"

namespace nisp {

inline constexpr double kWareEpsilon = 1e-12;
inline constexpr double kBoundSlack = 1e-9;

/// Weighted average reconstruction error of the retained final responses:
///   (1/(M·N)) Σ_m Σ_{i kept} s_i·|ŷ_im − y_im| / max(|y_im|, ε)
/// `kept` is the channel mask at the final response layer of `orig`. `approx` may be
/// the masked original (same width) or the pruned net (width = kept neurons).
double ware(const Network& orig, const Network& approx, const Samples& data, const ImportanceVector& s_n,
            const PruneIndicator& kept);

struct BoundReport {
    double lhs = 0.0;              // Σ_m <s_n, |G(x) − G(s*⊙x)|>
    double rhs = 0.0;              // C_Σ·C_x·Σ_i r_i(1 − s*_i)
    double c_sigma_product = 1.0;  // Π C_σ over layers l+1..frl
    double c_x = 0.0;              // max_i Σ_m |x_mi|
    Vec r_vector;                  // (W^(l+1,n))ᵀ s_n
    bool holds = true;
};

/// Evaluates both sides of the pruning error bound for layer `layer`'s output.
/// `keep` has one 0/1 entry per neuron of that output. Layers l+1..frl must be Dense,
/// Conv2D, average Pool2D or Activation with no skip edge merging among them.
BoundReport verify_bound(const Network& net, std::size_t layer, const Samples& data, const ImportanceVector& s_n,
                         std::span<const double> keep);

std::string bound_report_json(const BoundReport& report);

struct LayerCost {
    std::size_t layer_id = 0;
    std::string kind;
    std::size_t flops = 0;   // multiply-accumulate = 2 ops
    std::size_t params = 0;
};

struct CostReport {
    std::vector<LayerCost> layers;
    std::size_t total_flops = 0;
    std::size_t total_params = 0;
};

/// Dense 2·in·out, Conv2D 2·k²·C_in·C_out·Y², other kinds one op per output element.
CostReport count_cost(const Network& net);

struct CostReduction {
    double flops_percent = 0.0;   // 100·(1 − after/before)
    double params_percent = 0.0;
};

CostReduction cost_reduction(const CostReport& reference, const CostReport& pruned);

std::string cost_report_csv(const CostReport& report);
std::string cost_report_json(const CostReport& report, const CostReduction* reduction = nullptr);

struct PcaEnergy {
    std::size_t components = 0;
    bool degenerate = false;   // every feature has zero variance
    Vec eigenvalues;           // covariance spectrum, descending
};

/// Smallest k whose leading covariance eigenvalues hold at least `threshold` of the total.
PcaEnergy pca_energy(const ResponseMatrix& resp, double threshold);

}  // namespace nisp
