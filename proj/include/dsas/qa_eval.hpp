#pragma once

#include <span>
#include <string>
#include <string_view>

namespace dsas {

// Lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse
// whitespace.
std::string normalize_answer(std::string_view text);

struct F1Score {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Bag-of-tokens overlap between normalized prediction and reference.
F1Score token_f1(std::string_view prediction, std::string_view reference);

// Score against the reference with the highest F1 (first one on ties).
// Throws EmptyReferences.
F1Score best_f1(std::string_view prediction, std::span<const std::string> references);

}  // namespace dsas
