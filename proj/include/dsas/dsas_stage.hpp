#pragma once

#include <span>

#include "dsas/core_types.hpp"

namespace dsas {

struct LayerIntervention {
  GateWeights gates;
  Partition partition;
};

// Full two-stage rewrite of one selected layer. Gate weights come from the
// head-summed question/target rows; every head's scores are then gated
// (when cgw_enabled) and cross-set paragraph cells suppressed (when
// ras_enabled). Scores are rewritten in place.
LayerIntervention apply_dsas(std::span<AttentionMatrix> head_scores, const PromptLayout& layout,
                             const DsasConfig& config);

}  // namespace dsas
