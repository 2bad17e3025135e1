#include "dsas/cgw.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dsas/errors.hpp"
#include "dsas/flow_metrics.hpp"
#include "dsas/gaussian.hpp"

namespace dsas {

namespace {

void check_matrix(const AttentionMatrix& m, const PromptLayout& layout) {
  if (m.size() != layout.total_len) {
    throw Error(Errc::LayoutMismatch, "score matrix is " + std::to_string(m.size()) +
                                          " wide, layout spans " +
                                          std::to_string(layout.total_len));
  }
}

AnchorRows empty_rows(const PromptLayout& layout) {
  AnchorRows rows;
  rows.total_len = layout.total_len;
  rows.question = layout.question;
  rows.target = layout.target;
  rows.question_rows.assign(layout.question_len() * layout.total_len, 0.0);
  rows.target_row.assign(layout.total_len, 0.0);
  return rows;
}

void accumulate_rows(AnchorRows& rows, const AttentionMatrix& m) {
  const auto L = rows.total_len;
  for (std::size_t r = 0; r < rows.question.length(); ++r) {
    const std::size_t i = rows.question.start + r;
    for (std::size_t j = 0; j <= i; ++j) rows.question_rows[r * L + j] += m.at(i, j);
  }
  for (std::size_t j = 0; j <= rows.target; ++j) rows.target_row[j] += m.at(rows.target, j);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

AnchorRows anchor_rows(const AttentionMatrix& head_summed_scores, const PromptLayout& layout) {
  check_matrix(head_summed_scores, layout);
  auto rows = empty_rows(layout);
  accumulate_rows(rows, head_summed_scores);
  return rows;
}

AnchorRows anchor_rows(std::span<const AttentionMatrix> head_scores, const PromptLayout& layout) {
  auto rows = empty_rows(layout);
  for (const auto& h : head_scores) {
    check_matrix(h, layout);
    accumulate_rows(rows, h);
  }
  return rows;
}

double combined_flow(const AnchorRows& rows, const ParagraphSpan& span, int k) {
  const auto Q = static_cast<double>(rows.question.length());
  std::vector<double> column_sums(span.length(), 0.0);
  for (std::size_t j = span.start; j <= span.end; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows.question.length(); ++r) s += rows.question_at(r, j);
    s += Q * rows.target_row[j];
    column_sums[j - span.start] = s;
  }
  return topk_mean(column_sums, k);
}

double combined_flow(const AttentionMatrix& head_summed_scores, const PromptLayout& layout,
                     std::size_t m, int k) {
  if (m >= layout.num_paragraphs()) {
    throw Error(Errc::BadParagraphIndex, "paragraph " + std::to_string(m) + " of " +
                                             std::to_string(layout.num_paragraphs()));
  }
  return combined_flow(anchor_rows(head_summed_scores, layout), layout.paragraphs[m], k);
}

ContentValues content_values(std::span<const double> flows) {
  ContentValues out;
  const auto n = flows.size();
  if (n == 0) return out;
  out.mean = std::accumulate(flows.begin(), flows.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double f : flows) var += (f - out.mean) * (f - out.mean);
  out.std = std::sqrt(var / static_cast<double>(n));

  const auto [lo, hi] = std::minmax_element(flows.begin(), flows.end());
  if (*lo == *hi || out.std == 0.0) {
    out.std = 0.0;
    out.values.assign(n, 0.75);
    return out;
  }
  out.values.reserve(n);
  for (double f : flows) out.values.push_back(0.5 * sigmoid((f - out.mean) / out.std) + 0.5);
  return out;
}

double positional_value(const ParagraphSpan& span, std::size_t total_len) {
  if (total_len < 2 || span.start > span.end || span.end >= total_len) {
    throw Error(Errc::SpanOutOfRange, "span [" + std::to_string(span.start) + ", " +
                                          std::to_string(span.end) + "] in length " +
                                          std::to_string(total_len));
  }
  const double L = static_cast<double>(total_len);
  const double mu = 0.5 * (L - 1.0);
  const double sigma = std::sqrt((L * L - 1.0) / 12.0);
  const double z1 = (static_cast<double>(span.start) - mu) / sigma;
  const double z2 = (static_cast<double>(span.end) - mu) / sigma;
  if (span.start == span.end) return normal_pdf(z1);
  return normal_interval_mass(z1, z2) / (z2 - z1);
}

PositionWeights position_weights(std::span<const double> content, std::span<const double> gamma) {
  if (content.size() != gamma.size()) {
    throw Error(Errc::InvalidConfig, "content and positional values differ in length");
  }
  const std::size_t C = content.size();
  std::vector<std::size_t> order(C);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return content[a] > content[b]; });

  PositionWeights out;
  out.ranks.assign(C, 0);
  out.weights.assign(C, 1.0);
  const double base = 0.5 * static_cast<double>(C) + 1.0;
  for (std::size_t r = 0; r < C; ++r) {
    const auto m = order[r];
    const int rank = static_cast<int>(r) + 1;
    out.ranks[m] = rank;
    // rank <= 0.5 C, kept in integers
    if (2 * static_cast<std::size_t>(rank) <= C) {
      out.weights[m] = std::pow(base / rank, gamma[m]);
    }
  }
  return out;
}

GateValues gate_weights(std::span<const double> content, std::span<const double> position,
                        const DsasConfig& config) {
  if (content.size() != position.size()) {
    throw Error(Errc::InvalidConfig, "content values and position weights differ in length");
  }
  const double alpha = config.effective_alpha();
  const double beta = config.beta;
  GateValues out;
  for (std::size_t m = 0; m < content.size(); ++m) {
    out.raw.push_back(content[m] * std::pow(position[m], alpha));
  }
  if (out.raw.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(out.raw.begin(), out.raw.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  out.final.assign(out.raw.size(), 1.0);
  if (hi == lo) return out;
  for (std::size_t m = 0; m < out.raw.size(); ++m) {
    const double r = out.raw[m];
    if (r == lo) {
      out.final[m] = beta;
    } else if (r == hi) {
      out.final[m] = 1.0;
    } else {
      out.final[m] = std::clamp((1.0 - beta) * (r - lo) / (hi - lo) + beta, beta, 1.0);
    }
  }
  return out;
}

GateWeights compute_gate_weights(const AnchorRows& rows, const PromptLayout& layout,
                                 const DsasConfig& config) {
  config.validate();
  const std::size_t C = layout.num_paragraphs();
  std::vector<double> flows(C), gamma(C);
  for (std::size_t m = 0; m < C; ++m) {
    flows[m] = combined_flow(rows, layout.paragraphs[m], config.top_k);
    gamma[m] = positional_value(layout.paragraphs[m], layout.total_len);
  }
  const auto content = content_values(flows);
  const auto position = position_weights(content.values, gamma);
  const auto gates = gate_weights(content.values, position.weights, config);

  GateWeights out;
  const double L = static_cast<double>(layout.total_len);
  out.flow_mean = content.mean;
  out.flow_std = content.std;
  out.position_mean = 0.5 * (L - 1.0);
  out.position_std = std::sqrt((L * L - 1.0) / 12.0);
  out.paragraphs.resize(C);
  for (std::size_t m = 0; m < C; ++m) {
    auto& p = out.paragraphs[m];
    p.combined_flow = flows[m];
    p.content_value = content.values[m];
    p.positional_value = gamma[m];
    p.rank = position.ranks[m];
    p.position_weight = position.weights[m];
    p.raw_weight = gates.raw[m];
    p.final_weight = gates.final[m];
  }
  return out;
}

GateWeights compute_gate_weights(const AttentionMatrix& head_summed_scores,
                                 const PromptLayout& layout, const DsasConfig& config) {
  return compute_gate_weights(anchor_rows(head_summed_scores, layout), layout, config);
}

AttentionMatrix apply_cgw(AttentionMatrix scores, const PromptLayout& layout,
                          const GateWeights& weights) {
  check_matrix(scores, layout);
  if (weights.size() != layout.num_paragraphs()) {
    throw Error(Errc::LayoutMismatch, "gate weights cover " + std::to_string(weights.size()) +
                                          " paragraphs, layout has " +
                                          std::to_string(layout.num_paragraphs()));
  }
  auto scale_row = [&](std::size_t i) {
    for (std::size_t m = 0; m < layout.num_paragraphs(); ++m) {
      const auto& p = layout.paragraphs[m];
      const double w = weights.paragraphs[m].final_weight;
      for (std::size_t j = p.start; j <= p.end && j <= i; ++j) scores.scale(i, j, w);
    }
  };
  for (std::size_t i = layout.question.start; i <= layout.question.end; ++i) scale_row(i);
  if (!layout.question.contains(layout.target)) scale_row(layout.target);
  return scores;
}

void apply_cgw_row(std::span<double> scores, std::size_t row_index, const PromptLayout& layout,
                   std::span<const double> final_weights) {
  for (std::size_t m = 0; m < layout.num_paragraphs(); ++m) {
    const auto& p = layout.paragraphs[m];
    for (std::size_t j = p.start; j <= p.end && j <= row_index && j < scores.size(); ++j) {
      scores[j] *= final_weights[m];
    }
  }
}

}  // namespace dsas
