#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <unistd.h>

namespace dsas::testing {

PromptLayout random_layout(Rng& rng, std::size_t total_len, std::size_t num_paragraphs,
                           std::size_t question_len) {
  // Tokens: BOS + C paragraphs (min 1 each) + C gaps + question + target.
  const std::size_t fixed = 1 + num_paragraphs + question_len + 1;
  const std::size_t budget = total_len - fixed - num_paragraphs;
  // Random extra lengths for each paragraph and the trailing filler.
  std::vector<std::size_t> extra(num_paragraphs + 1, 0);
  std::uniform_int_distribution<std::size_t> pick(0, num_paragraphs);
  for (std::size_t n = 0; n < budget; ++n) ++extra[pick(rng)];

  PromptLayout layout;
  layout.total_len = total_len;
  std::size_t pos = 1;
  std::bernoulli_distribution label(0.3);
  for (std::size_t m = 0; m < num_paragraphs; ++m) {
    const std::size_t len = 1 + extra[m];
    layout.paragraphs.push_back({m, pos, pos + len - 1, label(rng)});
    pos += len + 1;
  }
  layout.question = {pos, pos + question_len - 1};
  layout.target = total_len - 1;
  return layout;
}

PromptLayout random_small_layout(Rng& rng, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> cdist(1, 6);
  const std::size_t C = cdist(rng);
  std::uniform_int_distribution<std::size_t> qdist(1, 5);
  const std::size_t Q = qdist(rng);
  const std::size_t min_len = 2 + 2 * C + Q;
  std::uniform_int_distribution<std::size_t> ldist(min_len, std::max(min_len, max_len));
  return random_layout(rng, ldist(rng), C, Q);
}

AttentionMatrix random_scores(Rng& rng, std::size_t L, double scale, Reduction r) {
  AttentionMatrix m(L, MatrixKind::Score, r);
  std::normal_distribution<double> n(0.0, scale);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j <= i; ++j) m.set(i, j, n(rng));
  }
  return m;
}

AttentionMatrix random_weights(Rng& rng, std::size_t L, double temperature) {
  std::normal_distribution<double> n(0.0, temperature);
  std::vector<double> w(L * L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      w[i * L + j] = std::exp(n(rng));
      sum += w[i * L + j];
    }
    for (std::size_t j = 0; j <= i; ++j) w[i * L + j] /= sum;
  }
  return AttentionMatrix(L, MatrixKind::Weight, Reduction::PerHead, std::move(w));
}

AttentionMatrix random_head_summed_weights(Rng& rng, std::size_t L, int heads) {
  std::vector<AttentionMatrix> hs;
  for (int h = 0; h < heads; ++h) hs.push_back(random_weights(rng, L));
  return sum_heads(hs);
}

RawSample random_sample(Rng& rng, std::size_t num_paragraphs, std::size_t min_words,
                        std::size_t max_words) {
  std::uniform_int_distribution<std::size_t> words(min_words, max_words);
  std::uniform_int_distribution<int> wlen(2, 8);
  std::uniform_int_distribution<int> letter('a', 'z');
  auto word = [&] {
    std::string w;
    for (int n = wlen(rng); n > 0; --n) w.push_back(static_cast<char>(letter(rng)));
    return w;
  };
  RawSample s;
  for (std::size_t m = 0; m < num_paragraphs; ++m) {
    std::string text;
    for (std::size_t n = words(rng); n > 0; --n) {
      if (!text.empty()) text += ' ';
      text += word();
    }
    s.paragraphs.push_back({text, m == 0});
  }
  s.question = "what is " + word() + " " + word() + "?";
  s.answers = {word()};
  return s;
}

ModelConfig small_model_config(std::uint32_t seed) {
  ModelConfig c;
  c.d_model = 32;
  c.num_heads = 4;
  c.num_layers = 4;
  c.max_seq_len = 768;
  c.seed = seed;
  return c;
}

Model marker_model(const ModelConfig& config, char marker) {
  Model model(config);
  auto& p = model.params();
  const std::size_t d = static_cast<std::size_t>(config.d_model);
  const std::size_t dk = static_cast<std::size_t>(config.head_dim());
  const auto mk = static_cast<std::size_t>(static_cast<unsigned char>(marker));

  // Residual dim 0 flags marker tokens, dim 1 is a constant query carrier.
  for (std::size_t t = 0; t < p.token_embedding.rows; ++t) {
    p.token_embedding(t, 0) = t == mk ? 16.0f : 0.0f;
    p.token_embedding(t, 1) = 0.0f;
  }
  for (std::size_t i = 0; i < p.position_embedding.rows; ++i) {
    p.position_embedding(i, 0) = 0.0f;
    p.position_embedding(i, 1) = 0.0f;
  }
  for (auto& lp : p.layers) {
    lp.ln1_gain(0, 1) = 0.0f;
    lp.ln1_bias(0, 1) = 1.0f;
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < dk; ++c) {
        lp.wq(r, c) = 0.0f;
        lp.wk(r, c) = 0.0f;
      }
    }
    lp.wq(1, 0) = 4.0f;
    lp.wk(0, 0) = 4.0f;
    // Keep dims 0 and 1 of the residual stream equal to the embedding.
    for (std::size_t r = 0; r < lp.wo.rows; ++r) {
      lp.wo(r, 0) = 0.0f;
      lp.wo(r, 1) = 0.0f;
    }
    for (std::size_t r = 0; r < lp.w_down.rows; ++r) {
      lp.w_down(r, 0) = 0.0f;
      lp.w_down(r, 1) = 0.0f;
    }
    lp.b_down(0, 0) = 0.0f;
    lp.b_down(0, 1) = 0.0f;
  }
  return model;
}

std::filesystem::path temp_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("dsas_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dsas::testing
