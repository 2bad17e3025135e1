#include "dsas/ras.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "dsas/errors.hpp"

namespace dsas {

Partition partition(std::span<const double> weights) {
  Partition out;
  if (weights.empty()) return out;
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  if (*lo == *hi) {
    // A computed mean of equal values can round above them.
    out.threshold = *lo;
  } else {
    out.threshold = std::accumulate(weights.begin(), weights.end(), 0.0) /
                    static_cast<double>(weights.size());
    out.threshold = std::clamp(out.threshold, *lo, *hi);
  }
  for (std::size_t m = 0; m < weights.size(); ++m) {
    (weights[m] >= out.threshold ? out.key : out.irrelevant).push_back(m);
  }
  return out;
}

AttentionMatrix apply_ras(AttentionMatrix scores, const PromptLayout& layout,
                          std::span<const double> weights, const Partition& partition) {
  if (scores.size() != layout.total_len) {
    throw Error(Errc::LayoutMismatch, "score matrix is " + std::to_string(scores.size()) +
                                          " wide, layout spans " +
                                          std::to_string(layout.total_len));
  }
  const std::size_t C = layout.num_paragraphs();
  if (weights.size() != C || partition.key.size() + partition.irrelevant.size() != C) {
    throw Error(Errc::LayoutMismatch, "weights or partition do not match the layout");
  }
  if (partition.irrelevant.empty() || partition.key.empty()) return scores;

  for (std::size_t key : partition.key) {
    for (std::size_t irr : partition.irrelevant) {
      const double factor = std::min(weights[key], weights[irr]);
      // Both directions; causality keeps only the block below the diagonal.
      for (auto [m1, m2] : {std::pair{key, irr}, std::pair{irr, key}}) {
        const auto& rows = layout.paragraphs[m1];
        const auto& cols = layout.paragraphs[m2];
        for (std::size_t i = rows.start; i <= rows.end; ++i) {
          const std::size_t last = std::min(cols.end, i == 0 ? 0 : i - 1);
          if (i == 0 || cols.start > last) continue;
          for (std::size_t j = cols.start; j <= last; ++j) scores.scale(i, j, factor);
        }
      }
    }
  }
  return scores;
}

}  // namespace dsas
