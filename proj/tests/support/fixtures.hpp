#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dsas/core_types.hpp"
#include "dsas/prompt_builder.hpp"
#include "dsas/toy_transformer.hpp"

namespace dsas::testing {

using Rng = std::mt19937_64;

// Random prompt geometry: BOS, C paragraphs separated by one-token gaps, a
// gap, a Q-token question, then filler up to the final target token.
// Requires total_len large enough for the requested spans.
PromptLayout random_layout(Rng& rng, std::size_t total_len, std::size_t num_paragraphs,
                           std::size_t question_len);

// Any layout with L tokens, C paragraphs, Q question tokens that fits.
PromptLayout random_small_layout(Rng& rng, std::size_t max_len);

// Causal score matrix with N(0, scale) entries.
AttentionMatrix random_scores(Rng& rng, std::size_t L, double scale = 1.0,
                              Reduction r = Reduction::HeadSummed);

// Row-softmax of random scores (per-head weight matrix).
AttentionMatrix random_weights(Rng& rng, std::size_t L, double temperature = 1.0);

// Head-summed weights of `heads` random per-head matrices.
AttentionMatrix random_head_summed_weights(Rng& rng, std::size_t L, int heads);

// Sample with `num_paragraphs` random lowercase-word paragraphs.
RawSample random_sample(Rng& rng, std::size_t num_paragraphs, std::size_t min_words,
                        std::size_t max_words);

// Small deterministic model shared by the model-level suites.
ModelConfig small_model_config(std::uint32_t seed = 7);

// Model whose question and target rows at layer 0 attend overwhelmingly to
// `marker` bytes; every other parameter comes from `config`'s seed.
Model marker_model(const ModelConfig& config, char marker);

// Fresh empty directory under the system temp path.
std::filesystem::path temp_dir(const std::string& tag);

}  // namespace dsas::testing
