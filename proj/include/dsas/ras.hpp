#pragma once

#include <span>

#include "dsas/core_types.hpp"

namespace dsas {

// Paragraphs at or above the mean gate weight are key, the rest irrelevant.
Partition partition(std::span<const double> weights);

// For every causal cell (i, j), j < i, whose row lies in one paragraph and
// column in another, and exactly one of the two paragraphs is key, multiplies
// the score by the smaller of the two gate weights. Question and target rows
// and all other cells are untouched.
AttentionMatrix apply_ras(AttentionMatrix scores, const PromptLayout& layout,
                          std::span<const double> weights, const Partition& partition);

}  // namespace dsas
