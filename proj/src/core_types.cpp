#include "dsas/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dsas/errors.hpp"

namespace dsas {

std::optional<std::size_t> PromptLayout::paragraph_of(std::size_t i) const {
  for (const auto& p : paragraphs) {
    if (i >= p.start && i <= p.end) return p.index;
  }
  return std::nullopt;
}

const PromptLayout& validate_layout(const PromptLayout& layout) {
  const auto L = layout.total_len;
  if (layout.paragraphs.empty()) throw Error(Errc::NoParagraphs, "layout has no paragraphs");
  if (L == 0 || layout.target != L - 1) {
    throw Error(Errc::TargetNotLast, "target " + std::to_string(layout.target) +
                                         " is not the final token of a length-" +
                                         std::to_string(L) + " input");
  }
  if (layout.question.start > layout.question.end) {
    throw Error(Errc::EmptyQuestion, "question range is empty");
  }
  if (layout.question.end >= L) throw Error(Errc::SpanOutOfRange, "question range exceeds input");

  std::vector<TokenRange> ranges;
  ranges.reserve(layout.paragraphs.size());
  for (std::size_t m = 0; m < layout.paragraphs.size(); ++m) {
    const auto& p = layout.paragraphs[m];
    if (p.index != m) {
      throw Error(Errc::BadParagraphIndex, "paragraph " + std::to_string(m) +
                                               " carries ordinal " + std::to_string(p.index));
    }
    if (p.start > p.end || p.end >= L) {
      throw Error(Errc::SpanOutOfRange, "paragraph " + std::to_string(m) + " span [" +
                                            std::to_string(p.start) + ", " +
                                            std::to_string(p.end) + "] is invalid");
    }
    if (p.range().overlaps(layout.question)) {
      throw Error(Errc::OverlappingSpans,
                  "paragraph " + std::to_string(m) + " overlaps the question");
    }
    if (p.range().contains(layout.target)) {
      throw Error(Errc::OverlappingSpans,
                  "paragraph " + std::to_string(m) + " contains the target");
    }
    ranges.push_back(p.range());
  }
  std::sort(ranges.begin(), ranges.end(),
            [](const TokenRange& a, const TokenRange& b) { return a.start < b.start; });
  for (std::size_t k = 1; k < ranges.size(); ++k) {
    if (ranges[k].start <= ranges[k - 1].end) {
      throw Error(Errc::OverlappingSpans,
                  "paragraph spans share token " + std::to_string(ranges[k].start));
    }
  }
  return layout;
}

nlohmann::json layout_to_json(const PromptLayout& layout) {
  nlohmann::json paragraphs = nlohmann::json::array();
  for (const auto& p : layout.paragraphs) {
    nlohmann::json jp = {{"index", p.index}, {"start", p.start}, {"end", p.end}};
    if (p.supporting) jp["supporting"] = *p.supporting;
    paragraphs.push_back(std::move(jp));
  }
  return {
      {"total_len", layout.total_len},
      {"paragraphs", std::move(paragraphs)},
      {"question", {{"start", layout.question.start}, {"end", layout.question.end}}},
      {"target", layout.target},
  };
}

PromptLayout layout_from_json(const nlohmann::json& j) {
  try {
    PromptLayout layout;
    layout.total_len = j.at("total_len").get<std::size_t>();
    for (const auto& jp : j.at("paragraphs")) {
      ParagraphSpan p;
      p.index = jp.at("index").get<std::size_t>();
      p.start = jp.at("start").get<std::size_t>();
      p.end = jp.at("end").get<std::size_t>();
      if (jp.contains("supporting") && !jp["supporting"].is_null()) {
        p.supporting = jp["supporting"].get<bool>();
      }
      layout.paragraphs.push_back(p);
    }
    layout.question.start = j.at("question").at("start").get<std::size_t>();
    layout.question.end = j.at("question").at("end").get<std::size_t>();
    layout.target = j.at("target").get<std::size_t>();
    return layout;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("malformed layout: ") + e.what());
  }
}

AttentionMatrix::AttentionMatrix(std::size_t size, MatrixKind kind, Reduction reduction)
    : size_(size), kind_(kind), reduction_(reduction), values_(size * size, 0.0) {
  if (kind_ == MatrixKind::Score) {
    for (std::size_t i = 0; i < size_; ++i) {
      for (std::size_t j = i + 1; j < size_; ++j) values_[i * size_ + j] = kMasked;
    }
  }
}

AttentionMatrix::AttentionMatrix(std::size_t size, MatrixKind kind, Reduction reduction,
                                 std::vector<double> values)
    : size_(size), kind_(kind), reduction_(reduction), values_(std::move(values)) {
  validate();
}

void AttentionMatrix::set(std::size_t i, std::size_t j, double v) {
  if (!is_masked(i, j)) values_[i * size_ + j] = v;
}

void AttentionMatrix::validate() const {
  if (values_.size() != size_ * size_) {
    throw Error(Errc::InvalidMatrix, "expected " + std::to_string(size_ * size_) +
                                         " entries, got " + std::to_string(values_.size()));
  }
  for (std::size_t i = 0; i < size_; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < size_; ++j) {
      const double v = values_[i * size_ + j];
      if (is_masked(i, j)) {
        const bool ok = kind_ == MatrixKind::Score ? !std::isfinite(v) : v == 0.0;
        if (!ok) {
          throw Error(Errc::InvalidMatrix, "masked entry (" + std::to_string(i) + ", " +
                                               std::to_string(j) + ") holds a value");
        }
        continue;
      }
      if (!std::isfinite(v)) {
        throw Error(Errc::InvalidMatrix, "unmasked entry (" + std::to_string(i) + ", " +
                                             std::to_string(j) + ") is not finite");
      }
      row_sum += v;
    }
    if (kind_ == MatrixKind::Weight && reduction_ == Reduction::PerHead &&
        std::abs(row_sum - 1.0) > 1e-5) {
      throw Error(Errc::InvalidMatrix,
                  "weight row " + std::to_string(i) + " sums to " + std::to_string(row_sum));
    }
  }
}

AttentionMatrix sum_heads(std::span<const AttentionMatrix> heads) {
  if (heads.empty()) throw Error(Errc::EmptyInput, "no heads to sum");
  const auto n = heads.front().size();
  AttentionMatrix out(n, heads.front().kind(), Reduction::HeadSummed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (const auto& h : heads) s += h.at(i, j);
      out.set(i, j, s);
    }
  }
  return out;
}

void DsasConfig::validate() const {
  if (top_k < 1) throw Error(Errc::InvalidConfig, "top_k must be positive");
  if (!(layer_fraction > 0.0 && layer_fraction <= 1.0)) {
    throw Error(Errc::InvalidConfig, "layer_fraction must lie in (0, 1]");
  }
  if (!(alpha >= 0.0)) throw Error(Errc::InvalidConfig, "alpha must be non-negative");
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(Errc::InvalidConfig, "beta must lie in [0, 1]");
}

std::vector<int> DsasConfig::selected_layers(int num_layers) const {
  validate();
  // The epsilon keeps exact products such as 0.75 * 8 from rounding up.
  int count = static_cast<int>(std::ceil(layer_fraction * num_layers - 1e-9));
  count = std::clamp(count, 0, num_layers);
  std::vector<int> layers;
  for (int l = num_layers - count; l < num_layers; ++l) layers.push_back(l);
  return layers;
}

std::vector<double> GateWeights::final_weights() const {
  std::vector<double> w;
  w.reserve(paragraphs.size());
  for (const auto& p : paragraphs) w.push_back(p.final_weight);
  return w;
}

bool Partition::is_key(std::size_t m) const {
  return std::find(key.begin(), key.end(), m) != key.end();
}

}  // namespace dsas
