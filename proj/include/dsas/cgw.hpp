#pragma once

#include <span>
#include <vector>

#include "dsas/core_types.hpp"

namespace dsas {

// Head-summed score rows at the question tokens and at the target, the only
// rows contextual gate weighting reads. Masked cells are stored as zero.
struct AnchorRows {
  std::size_t total_len = 0;
  TokenRange question;
  std::size_t target = 0;
  std::vector<double> question_rows;  // question_len x total_len
  std::vector<double> target_row;     // total_len

  double question_at(std::size_t r, std::size_t j) const {
    return question_rows[r * total_len + j];
  }
};

AnchorRows anchor_rows(const AttentionMatrix& head_summed_scores, const PromptLayout& layout);
// Sums the anchor rows over heads without materializing the summed matrix.
AnchorRows anchor_rows(std::span<const AttentionMatrix> head_scores, const PromptLayout& layout);

// Mean of the top-k column sums of the 2Q x |p^m| block formed by the
// question rows stacked over Q copies of the target row.
double combined_flow(const AnchorRows& rows, const ParagraphSpan& span, int k);
double combined_flow(const AttentionMatrix& head_summed_scores, const PromptLayout& layout,
                     std::size_t m, int k);

struct ContentValues {
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;  // population
};

// 0.5 * sigmoid(z) + 0.5 of the z-scored flows; 0.75 everywhere when all
// flows are equal.
ContentValues content_values(std::span<const double> flows);

// Average standard-normal density over the span's z-range, where token
// indices are standardized by the mean and population std of 0..L-1.
double positional_value(const ParagraphSpan& span, std::size_t total_len);

struct PositionWeights {
  std::vector<int> ranks;  // 1-based, by descending content value
  std::vector<double> weights;
};

// Top half by content value gets ((C/2 + 1) / rank)^gamma, the rest 1.
// Ties rank the earlier paragraph first.
PositionWeights position_weights(std::span<const double> content, std::span<const double> gamma);

struct GateValues {
  std::vector<double> raw;
  std::vector<double> final;
};

// raw = v * g^alpha, then min-max rescaled into [beta, 1]; all ones when the
// raw weights are constant.
GateValues gate_weights(std::span<const double> content, std::span<const double> position,
                        const DsasConfig& config);

GateWeights compute_gate_weights(const AnchorRows& rows, const PromptLayout& layout,
                                 const DsasConfig& config);
GateWeights compute_gate_weights(const AttentionMatrix& head_summed_scores,
                                 const PromptLayout& layout, const DsasConfig& config);

// Scales question- and target-row scores over each paragraph's columns by that
// paragraph's final weight. Masked cells and all other cells are untouched.
AttentionMatrix apply_cgw(AttentionMatrix scores, const PromptLayout& layout,
                          const GateWeights& weights);

// Same scaling for a single query row at position `row_index` (decode steps).
void apply_cgw_row(std::span<double> scores, std::size_t row_index, const PromptLayout& layout,
                   std::span<const double> final_weights);

}  // namespace dsas
