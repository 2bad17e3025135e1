#include "dsas/flow_metrics.hpp"

#include <algorithm>
#include <functional>

#include "dsas/errors.hpp"

namespace dsas {

namespace {

std::vector<double> top_values(std::span<const double> values, int k) {
  if (values.empty()) throw Error(Errc::EmptyInput, "top-k over an empty set");
  if (k < 1) throw Error(Errc::InvalidConfig, "k must be positive");
  std::vector<double> v(values.begin(), values.end());
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), v.size());
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(take), v.end(),
                    std::greater<>());
  v.resize(take);
  return v;
}

double sum_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

const ParagraphSpan& paragraph_at(const PromptLayout& layout, std::size_t m) {
  if (m >= layout.paragraphs.size()) {
    throw Error(Errc::BadParagraphIndex, "paragraph " + std::to_string(m) + " of " +
                                             std::to_string(layout.paragraphs.size()));
  }
  return layout.paragraphs[m];
}

void check_size(const AttentionMatrix& attn, const PromptLayout& layout) {
  if (attn.size() != layout.total_len) {
    throw Error(Errc::LayoutMismatch, "matrix is " + std::to_string(attn.size()) +
                                          " wide but the layout spans " +
                                          std::to_string(layout.total_len) + " tokens");
  }
}

// Column sums of the block rows x cols, masked cells as zero.
std::vector<double> block_column_sums(const AttentionMatrix& attn, TokenRange rows,
                                      TokenRange cols) {
  std::vector<double> sums(cols.length(), 0.0);
  for (std::size_t i = rows.start; i <= rows.end; ++i) {
    for (std::size_t j = cols.start; j <= cols.end; ++j) sums[j - cols.start] += attn.mass(i, j);
  }
  return sums;
}

std::optional<double> mean_where(const std::vector<double>& values,
                                 const std::vector<std::optional<bool>>& labels, bool wanted) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t m = 0; m < values.size(); ++m) {
    if (labels[m] && *labels[m] == wanted) {
      s += values[m];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

}  // namespace

double topk_mean(std::span<const double> values, int k) {
  const auto top = top_values(values, k);
  return sum_of(top) / static_cast<double>(top.size());
}

double topk_sum(std::span<const double> values, int k) { return sum_of(top_values(values, k)); }

double flow_to_question(const AttentionMatrix& attn, const PromptLayout& layout, std::size_t m,
                        int k) {
  check_size(attn, layout);
  const auto& p = paragraph_at(layout, m);
  const auto sums = block_column_sums(attn, layout.question, p.range());
  return topk_sum(sums, k) / static_cast<double>(layout.question_len());
}

double flow_to_target(const AttentionMatrix& attn, const PromptLayout& layout, std::size_t m,
                      int k) {
  check_size(attn, layout);
  const auto& p = paragraph_at(layout, m);
  const auto row = block_column_sums(attn, {layout.target, layout.target}, p.range());
  return topk_sum(row, k);
}

FlowGroupMeans FlowReport::aggregate() const {
  auto layer_mean = [&](auto field) -> std::optional<double> {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& g : groups) {
      if (const auto v = std::invoke(field, g)) {
        s += *v;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return s / static_cast<double>(n);
  };
  return {layer_mean(&FlowGroupMeans::supporting_q), layer_mean(&FlowGroupMeans::supporting_t),
          layer_mean(&FlowGroupMeans::negative_q), layer_mean(&FlowGroupMeans::negative_t)};
}

FlowReport layerwise_flows(std::span<const AttentionMatrix> layers, std::span<const int> layer_ids,
                           const PromptLayout& layout, int k) {
  if (layers.empty()) throw Error(Errc::EmptyInput, "no layers to analyze");
  validate_layout(layout);
  FlowReport report;
  report.layers.assign(layer_ids.begin(), layer_ids.end());
  for (const auto& p : layout.paragraphs) report.supporting.push_back(p.supporting);

  for (const auto& attn : layers) {
    check_size(attn, layout);
    std::vector<double> fq, ft;
    for (std::size_t m = 0; m < layout.num_paragraphs(); ++m) {
      fq.push_back(flow_to_question(attn, layout, m, k));
      ft.push_back(flow_to_target(attn, layout, m, k));
    }
    report.groups.push_back({mean_where(fq, report.supporting, true),
                             mean_where(ft, report.supporting, true),
                             mean_where(fq, report.supporting, false),
                             mean_where(ft, report.supporting, false)});
    report.flow_q.push_back(std::move(fq));
    report.flow_t.push_back(std::move(ft));
  }
  return report;
}

FlowReport layerwise_flows(const AttentionDump& dump, const PromptLayout& layout, int k) {
  if (dump.manifest.seq_len != layout.total_len) {
    throw Error(Errc::LayoutMismatch, "dump sequence length " +
                                          std::to_string(dump.manifest.seq_len) +
                                          " differs from layout length " +
                                          std::to_string(layout.total_len));
  }
  const auto layers = dump.head_summed_layers();
  const auto ids = dump.layer_ids();
  return layerwise_flows(layers, ids, layout, k);
}

std::string_view to_string(ReasoningClass c) {
  switch (c) {
    case ReasoningClass::Good: return "good";
    case ReasoningClass::Bad: return "bad";
    case ReasoningClass::Neither: return "neither";
  }
  return "neither";
}

ReasoningClass classify_reasoning(double f1, double precision) {
  if (f1 == 1.0) return ReasoningClass::Good;
  if (precision == 0.0) return ReasoningClass::Bad;
  return ReasoningClass::Neither;
}

GroupComparison compare_groups(std::span<const std::pair<FlowReport, ReasoningClass>> reports) {
  GroupComparison out;
  for (const auto& [report, cls] : reports) {
    if (cls == ReasoningClass::Neither) continue;
    const auto agg = report.aggregate();
    if (!agg.supporting_q || !agg.negative_q) {
      throw Error(Errc::InvalidSample,
                  "report lacks supporting or negative paragraph labels");
    }
    auto& g = cls == ReasoningClass::Good ? out.good : out.bad;
    g.supporting_q += *agg.supporting_q;
    g.supporting_t += *agg.supporting_t;
    g.negative_q += *agg.negative_q;
    g.negative_t += *agg.negative_t;
    ++g.count;
  }
  if (out.good.count == 0) throw Error(Errc::EmptyGroup, "no good-reasoning reports");
  if (out.bad.count == 0) throw Error(Errc::EmptyGroup, "no bad-reasoning reports");
  for (auto* g : {&out.good, &out.bad}) {
    const auto n = static_cast<double>(g->count);
    g->supporting_q /= n;
    g->supporting_t /= n;
    g->negative_q /= n;
    g->negative_t /= n;
  }
  return out;
}

std::vector<double> normalize_unit_range(std::vector<double> values) {
  if (values.empty()) return values;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi == lo) {
    std::fill(values.begin(), values.end(), hi == 0.0 ? 0.0 : 1.0);
    return values;
  }
  for (auto& v : values) v = (v - lo) / (hi - lo);
  return values;
}

ConfusionMatrix confusion_matrix(std::span<const AttentionMatrix> layers,
                                 const PromptLayout& layout, int k) {
  if (layers.empty()) throw Error(Errc::EmptyInput, "no layers to average");
  validate_layout(layout);
  const std::size_t L = layout.total_len;
  for (const auto& a : layers) check_size(a, layout);

  AttentionMatrix global(L, MatrixKind::Weight, Reduction::HeadSummed);
  const double inv = 1.0 / static_cast<double>(layers.size());
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (const auto& a : layers) s += a.mass(i, j);
      global.set(i, j, s * inv);
    }
  }

  ConfusionMatrix cm;
  std::vector<TokenRange> ranges;
  for (const auto& p : layout.paragraphs) {
    cm.labels.push_back("p" + std::to_string(p.index + 1));
    ranges.push_back(p.range());
  }
  cm.labels.emplace_back("q");
  ranges.push_back(layout.question);
  cm.labels.emplace_back("t");
  ranges.push_back({layout.target, layout.target});

  const std::size_t n = ranges.size();
  cm.raw.resize(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      cm.raw[a * n + b] = topk_mean(block_column_sums(global, ranges[a], ranges[b]), k);
    }
  }
  cm.normalized = normalize_unit_range(cm.raw);
  return cm;
}

ConfusionMatrix confusion_matrix(const AttentionDump& dump, const PromptLayout& layout, int k) {
  if (dump.manifest.seq_len != layout.total_len) {
    throw Error(Errc::LayoutMismatch, "dump sequence length differs from layout length");
  }
  const auto layers = dump.head_summed_layers();
  return confusion_matrix(layers, layout, k);
}

}  // namespace dsas
