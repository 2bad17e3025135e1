#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dsas/attention_dump.hpp"
#include "dsas/core_types.hpp"

namespace dsas {

// Mean of the k largest values (all values when k exceeds the count).
double topk_mean(std::span<const double> values, int k);
// Sum of the k largest values (all values when k exceeds the count).
double topk_sum(std::span<const double> values, int k);

// (1/Q) * sum of the top-k column sums over the question rows restricted to
// paragraph m's columns. Masked entries contribute zero.
double flow_to_question(const AttentionMatrix& attn, const PromptLayout& layout, std::size_t m,
                        int k);

// Sum of the top-k target-row entries over paragraph m's columns.
double flow_to_target(const AttentionMatrix& attn, const PromptLayout& layout, std::size_t m,
                      int k);

// Means over the supporting (p^s) and negative (p^n) paragraphs; a field is
// empty when no paragraph carries that label.
struct FlowGroupMeans {
  std::optional<double> supporting_q;
  std::optional<double> supporting_t;
  std::optional<double> negative_q;
  std::optional<double> negative_t;
};

struct FlowReport {
  std::vector<int> layers;
  std::vector<std::vector<double>> flow_q;  // [layer][paragraph]
  std::vector<std::vector<double>> flow_t;  // [layer][paragraph]
  std::vector<std::optional<bool>> supporting;
  std::vector<FlowGroupMeans> groups;  // per layer

  std::size_t num_layers() const { return layers.size(); }
  std::size_t num_paragraphs() const { return supporting.size(); }
  // Unweighted mean across layers of each per-layer group mean.
  FlowGroupMeans aggregate() const;
};

// One head-summed matrix per entry of `layer_ids`.
FlowReport layerwise_flows(std::span<const AttentionMatrix> layers, std::span<const int> layer_ids,
                           const PromptLayout& layout, int k);
FlowReport layerwise_flows(const AttentionDump& dump, const PromptLayout& layout, int k);

enum class ReasoningClass { Good, Bad, Neither };

std::string_view to_string(ReasoningClass c);
ReasoningClass classify_reasoning(double f1, double precision);

struct GroupStats {
  double supporting_q = 0.0;
  double supporting_t = 0.0;
  double negative_q = 0.0;
  double negative_t = 0.0;
  std::size_t count = 0;
};

struct GroupComparison {
  GroupStats good;
  GroupStats bad;
};

// Mean of each report's layer-aggregated group flows, per reasoning class.
// Neither-class reports are ignored. Throws EmptyGroup when Good or Bad has no
// report.
GroupComparison compare_groups(std::span<const std::pair<FlowReport, ReasoningClass>> reports);

// Pairwise component interaction grid over {p^1..p^C, q, t}; cell (a, b) is
// the column-wise top-k mean of the sub-matrix with rows in component a and
// columns in component b.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<double> raw;         // row-major, labels.size()^2
  std::vector<double> normalized;  // min-max scaled to [0, 1]

  std::size_t size() const { return labels.size(); }
  double at(std::size_t a, std::size_t b) const { return normalized[a * labels.size() + b]; }
};

// Min-max scaling to [0, 1]. When every value is equal the grid maps to all
// ones, except that an all-zero grid stays zero.
std::vector<double> normalize_unit_range(std::vector<double> values);

ConfusionMatrix confusion_matrix(std::span<const AttentionMatrix> layers,
                                 const PromptLayout& layout, int k);
ConfusionMatrix confusion_matrix(const AttentionDump& dump, const PromptLayout& layout, int k);

}  // namespace dsas
