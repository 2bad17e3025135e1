#include "dsas/dsas_stage.hpp"

#include "dsas/cgw.hpp"
#include "dsas/ras.hpp"

namespace dsas {

LayerIntervention apply_dsas(std::span<AttentionMatrix> head_scores, const PromptLayout& layout,
                             const DsasConfig& config) {
  LayerIntervention out;
  const std::span<const AttentionMatrix> view(head_scores.data(), head_scores.size());
  out.gates = compute_gate_weights(anchor_rows(view, layout), layout, config);
  const auto w = out.gates.final_weights();
  out.partition = partition(w);
  for (auto& h : head_scores) {
    if (config.cgw_enabled) h = apply_cgw(std::move(h), layout, out.gates);
    if (config.ras_enabled) h = apply_ras(std::move(h), layout, w, out.partition);
  }
  return out;
}

}  // namespace dsas
