#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nisp/engine.hpp"
#include "nisp/model.hpp"
#include "nisp/propagation.hpp"

namespace nisp {

struct SurgeryRow {
    std::size_t layer_id = 0;
    std::size_t kept = 0;     // output channels (neurons for Dense) after surgery
    std::size_t removed = 0;
    std::size_t params_before = 0;
    std::size_t params_after = 0;
};

struct SurgeryReport {
    std::vector<SurgeryRow> rows;  // every layer that carries parameters
    std::size_t params_before = 0;
    std::size_t params_after = 0;
};

/// CSV `layer_id,kept,removed,params_before,params_after`.
std::string surgery_report_csv(const SurgeryReport& report);

/// Removes every channel whose mask bit is 0, together with the matching input slices
/// of the consumers. Biases of removed units go with them.
///
/// The plan needs an entry for each prunable head (see layer_groups); skip-tied heads
/// must agree. Entries for locked layers must keep everything.
std::pair<Network, SurgeryReport> apply_plan(const Network& net, const ImportancePlan& plan);

/// Per-layer output masks that zero exactly what apply_plan removes, for forward_masked.
std::vector<Vec> masked_outputs(const Network& net, const ImportancePlan& plan);

/// The full method: Inf-FS on the final responses, then one backward pass.
ImportancePlan nisp_plan(const Network& net, const Samples& data, const PruneConfig& cfg,
                         double alpha = kDefaultAlpha);

/// Keep-sets drawn uniformly at random (mt19937_64 seeded with `seed`). Scores hold the mask.
ImportancePlan random_plan(const Network& net, const PruneConfig& cfg, std::uint64_t seed);

/// Final-response scores from Σ|w| of the producing layer, then the NISP backward pass.
ImportancePlan magnitude_plan(const Network& net, const PruneConfig& cfg);

/// Every prunable layer ranked on its own by Inf-FS; no propagation between layers.
ImportancePlan lbl_plan(const Network& net, const Samples& data, const PruneConfig& cfg,
                        double alpha = kDefaultAlpha);

}  // namespace nisp
