#pragma once

#include <span>
#include <string>

#include "dsas/core_types.hpp"
#include "dsas/flow_metrics.hpp"
#include "dsas/toy_transformer.hpp"

namespace dsas {

// CSV renderers. Numbers use %.17g so reports round-trip exactly.

// layer,paragraph,flow_q,flow_t
std::string flows_csv(const FlowReport& report);
// layer,group,flow_q,flow_t with group in {supporting, negative}; a final
// "all" layer row holds the unweighted mean across layers.
std::string flow_groups_csv(const FlowReport& report);
// Header row of component labels, then one labelled row per component.
std::string confusion_csv(const ConfusionMatrix& cm);
// paragraph,I_comb,v,gamma,rank,g,w_raw,w
std::string gate_weights_csv(const GateWeights& gates);
// layer,paragraph,w,set
std::string partition_csv(std::span<const SelectedLayerTrace> layers);

std::string format_double(double v);

}  // namespace dsas
