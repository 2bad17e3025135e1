#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dsas/core_types.hpp"
#include "dsas/dsas_stage.hpp"
#include "dsas/prompt_builder.hpp"

namespace dsas {

struct ModelConfig {
  int d_model = 64;
  int num_heads = 4;
  int num_layers = 8;
  int vocab_size = Tokenizer::kVocabSize;
  int max_seq_len = 1024;
  std::uint32_t seed = 42;

  int head_dim() const { return d_model / num_heads; }
  int ffn_dim() const { return 4 * d_model; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Row-major parameter block.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}
  float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct LayerParams {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, wk, wv, wo;  // d_model x d_model; head h owns columns [h*dk, (h+1)*dk)
  Tensor ln2_gain, ln2_bias;
  Tensor w_up, b_up;      // d_model x ffn, 1 x ffn
  Tensor w_down, b_down;  // ffn x d_model, 1 x d_model
};

struct ModelParams {
  Tensor token_embedding;     // vocab x d_model
  Tensor position_embedding;  // max_seq_len x d_model
  std::vector<LayerParams> layers;
  Tensor final_gain, final_bias;
  Tensor unembedding;  // d_model x vocab
};

class Model {
 public:
  // Normal(0, 1/sqrt(d_model)) weights from config.seed; unit gains, zero biases.
  explicit Model(const ModelConfig& config);

  // Binary format: "DSASTOY1", six little-endian int32 config fields, then
  // every parameter block as little-endian f32 in declaration order.
  static Model load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }

  // FNV-1a over the serialized parameter bytes.
  std::uint64_t checksum() const;

 private:
  Model(const ModelConfig& config, ModelParams params);

  ModelConfig config_;
  ModelParams params_;
};

// Per-head key/value rows for every processed position of one layer.
struct LayerCache {
  std::vector<std::vector<double>> keys;    // [head] positions x head_dim
  std::vector<std::vector<double>> values;  // [head] positions x head_dim
};

struct AttentionLayerResult {
  std::vector<double> hidden;                // L x d_model, residual stream after attention
  std::vector<AttentionMatrix> head_scores;  // final (post-intervention) scores
  std::vector<AttentionMatrix> head_weights;
  std::optional<AttentionMatrix> pre_scores;  // head-summed, before any intervention
  std::optional<LayerIntervention> intervention;
  LayerCache cache;
};

// Prefill attention sublayer of `layer_index` over the whole prompt. When
// `dsas` is set and the layer is selected, the two-stage rewrite is applied to
// each head's causal scores before the softmax.
AttentionLayerResult attention_layer(const Model& model, std::span<const double> hidden,
                                     int layer_index, const DsasConfig* dsas,
                                     const PromptLayout* layout, bool capture_pre_scores = false);

struct GenerateOptions {
  int max_new_tokens = 32;
  bool capture_matrices = true;       // head-summed scores/weights per layer
  bool capture_head_weights = false;  // per-head post-softmax weights per layer
  bool stop_at_eos = true;
};

struct SelectedLayerTrace {
  int layer = 0;
  std::optional<AttentionMatrix> pre_scores;    // head-summed, pre-intervention
  GateWeights gates;
  Partition partition;
  std::optional<AttentionMatrix> post_weights;  // head-summed, post-softmax
};

struct InferenceTrace {
  std::vector<SelectedLayerTrace> selected;
  std::vector<AttentionMatrix> layer_weights;               // head-summed prefill weights
  std::vector<std::vector<AttentionMatrix>> head_weights;   // [layer][head]
  std::vector<TokenId> generated;
};

struct Generation {
  std::vector<TokenId> tokens;
  InferenceTrace trace;
};

// Greedy decoding (ties go to the lowest id). Gate weights are computed once
// per selected layer at prefill and reused for every generated query row;
// paragraph-to-paragraph suppression happens at prefill only.
Generation generate(const Model& model, const BuiltPrompt& prompt,
                    const std::optional<DsasConfig>& dsas, const GenerateOptions& options = {});

}  // namespace dsas
