#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace dsas {

// Inclusive token range [start, end].
struct TokenRange {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  bool contains(std::size_t i) const { return i >= start && i <= end; }
  bool overlaps(const TokenRange& o) const { return start <= o.end && o.start <= end; }
  bool operator==(const TokenRange&) const = default;
};

struct ParagraphSpan {
  std::size_t index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  // Supporting/negative annotation when the source sample carries one.
  std::optional<bool> supporting;

  TokenRange range() const { return {start, end}; }
  std::size_t length() const { return end - start + 1; }
  bool operator==(const ParagraphSpan&) const = default;
};

// Token geometry of one prompt. `question` is the anchor span whose rows
// measure information flow; `target` is the answer-generation position.
struct PromptLayout {
  std::size_t total_len = 0;
  std::vector<ParagraphSpan> paragraphs;
  TokenRange question;
  std::size_t target = 0;

  std::size_t num_paragraphs() const { return paragraphs.size(); }
  std::size_t question_len() const { return question.length(); }
  // Paragraph ordinal owning token `i`, if any.
  std::optional<std::size_t> paragraph_of(std::size_t i) const;
  bool operator==(const PromptLayout&) const = default;
};

// Throws dsas::Error (OverlappingSpans, TargetNotLast, EmptyQuestion,
// NoParagraphs, SpanOutOfRange) on the first violated invariant.
const PromptLayout& validate_layout(const PromptLayout& layout);

nlohmann::json layout_to_json(const PromptLayout& layout);
PromptLayout layout_from_json(const nlohmann::json& j);

enum class MatrixKind { Score, Weight };
enum class Reduction { PerHead, HeadSummed };

// Square causal attention matrix stored row-major. Entries with j > i are
// masked: for score matrices they hold the non-finite sentinel kMasked and
// are never treated as numbers; for weight matrices they are exactly zero.
class AttentionMatrix {
 public:
  static constexpr double kMasked = -std::numeric_limits<double>::infinity();

  AttentionMatrix() = default;
  // All unmasked entries zero.
  AttentionMatrix(std::size_t size, MatrixKind kind, Reduction reduction);
  // Validates masking and, for per-head weights, unit row sums (1e-5).
  AttentionMatrix(std::size_t size, MatrixKind kind, Reduction reduction,
                  std::vector<double> values);

  static bool is_masked(std::size_t i, std::size_t j) { return j > i; }

  std::size_t size() const { return size_; }
  MatrixKind kind() const { return kind_; }
  Reduction reduction() const { return reduction_; }

  double at(std::size_t i, std::size_t j) const { return values_[i * size_ + j]; }
  // Masked entries read as zero; used by every summation over attention mass.
  double mass(std::size_t i, std::size_t j) const {
    return is_masked(i, j) ? 0.0 : values_[i * size_ + j];
  }
  // Sets an unmasked entry; masked cells are left alone.
  void set(std::size_t i, std::size_t j, double v);
  // Multiplies an unmasked entry in place; masked cells are left alone.
  void scale(std::size_t i, std::size_t j, double factor) {
    if (!is_masked(i, j)) values_[i * size_ + j] *= factor;
  }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * size_, size_};
  }
  const std::vector<double>& values() const { return values_; }

  void validate() const;

  bool operator==(const AttentionMatrix&) const = default;

 private:
  std::size_t size_ = 0;
  MatrixKind kind_ = MatrixKind::Weight;
  Reduction reduction_ = Reduction::HeadSummed;
  std::vector<double> values_;
};

// Element-wise sum of per-head matrices of one layer.
AttentionMatrix sum_heads(std::span<const AttentionMatrix> heads);

struct DsasConfig {
  int top_k = 10;
  double layer_fraction = 0.5;
  double alpha = 1.0;
  double beta = 0.7;
  bool cgw_enabled = true;
  bool ras_enabled = true;
  // Off behaves as alpha = 0.
  bool position_weight_enabled = true;

  double effective_alpha() const { return position_weight_enabled ? alpha : 0.0; }
  void validate() const;
  // Indices of the final ceil(layer_fraction * num_layers) layers.
  std::vector<int> selected_layers(int num_layers) const;
};

struct ParagraphGate {
  double combined_flow = 0.0;
  double content_value = 0.0;
  double positional_value = 0.0;
  int rank = 0;
  double position_weight = 1.0;
  double raw_weight = 0.0;
  double final_weight = 1.0;
};

// Per-layer gate intermediates. `flow_mean`/`flow_std` summarize the combined
// flows, `position_mean`/`position_std` the token indices 0..L-1 (population).
struct GateWeights {
  std::vector<ParagraphGate> paragraphs;
  double flow_mean = 0.0;
  double flow_std = 0.0;
  double position_mean = 0.0;
  double position_std = 0.0;

  std::size_t size() const { return paragraphs.size(); }
  std::vector<double> final_weights() const;
};

struct Partition {
  std::vector<std::size_t> key;
  std::vector<std::size_t> irrelevant;
  double threshold = 0.0;

  bool is_key(std::size_t m) const;
};

}  // namespace dsas
