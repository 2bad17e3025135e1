#include <cmath>
#include <fstream>

#include "doctest.h"
#include "dsas/errors.hpp"
#include "dsas/toy_transformer.hpp"
#include "fixtures.hpp"

using namespace dsas;
using dsas::testing::Rng;

namespace {

BuiltPrompt sample_prompt(std::uint64_t seed, std::size_t paragraphs = 4) {
  Rng rng(seed);
  return build_prompt(dsas::testing::random_sample(rng, paragraphs, 4, 10), Tokenizer{});
}

std::vector<double> embed(const Model& model, const BuiltPrompt& p) {
  const auto& par = model.params();
  const auto d = static_cast<std::size_t>(model.config().d_model);
  std::vector<double> h(p.token_ids.size() * d);
  for (std::size_t i = 0; i < p.token_ids.size(); ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      h[i * d + c] = par.token_embedding(static_cast<std::size_t>(p.token_ids[i]), c) +
                     par.position_embedding(i, c);
    }
  }
  return h;
}

}  // namespace

TEST_CASE("construction and determinism") {
  const ModelConfig def;
  CHECK(def.d_model == 64);
  CHECK(def.num_heads == 4);
  CHECK(def.num_layers == 8);
  CHECK(def.vocab_size == 259);
  CHECK_NOTHROW(Model{def});
  CHECK(Model(def).checksum() == Model(def).checksum());
  auto other = def;
  other.seed = 43;
  CHECK(Model(other).checksum() != Model(def).checksum());

  auto bad = def;
  bad.d_model = 65;
  CHECK_THROWS_WITH_AS(Model{bad}, doctest::Contains("InvalidConfig"), Error);
}

TEST_CASE("save and load") {
  const auto dir = dsas::testing::temp_dir("model");
  const Model m(dsas::testing::small_model_config());
  m.save(dir / "m.bin");
  const auto back = Model::load(dir / "m.bin");
  CHECK(back.config() == m.config());
  CHECK(back.checksum() == m.checksum());

  {
    std::ofstream out(dir / "bad.bin", std::ios::binary);
    out << "NOTAMODEL";
  }
  CHECK_THROWS_AS(Model::load(dir / "bad.bin"), Error);
  CHECK_THROWS_AS(Model::load(dir / "missing.bin"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("selected layers are rewritten, others are not") {
  const Model model(dsas::testing::small_model_config());
  const auto p = sample_prompt(1);
  const auto h = embed(model, p);
  DsasConfig c;  // layers 2 and 3 of 4
  const auto vanilla0 = attention_layer(model, h, 0, nullptr, &p.layout);
  const auto dsas0 = attention_layer(model, h, 0, &c, &p.layout);
  CHECK_FALSE(dsas0.intervention.has_value());
  for (std::size_t hd = 0; hd < vanilla0.head_scores.size(); ++hd) {
    CHECK(vanilla0.head_scores[hd] == dsas0.head_scores[hd]);
  }

  const auto vanilla2 = attention_layer(model, h, 2, nullptr, &p.layout);
  const auto dsas2 = attention_layer(model, h, 2, &c, &p.layout, true);
  REQUIRE(dsas2.intervention.has_value());
  REQUIRE(dsas2.pre_scores.has_value());
  CHECK(*dsas2.pre_scores == sum_heads(vanilla2.head_scores));
  const auto w = dsas2.intervention->gates.final_weights();
  REQUIRE(*std::min_element(w.begin(), w.end()) < 1.0);
  bool anchor_changed = false;
  const auto& q = p.layout.question;
  for (std::size_t i = q.start; i <= q.end; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      anchor_changed |= vanilla2.head_scores[0].at(i, j) != dsas2.head_scores[0].at(i, j);
    }
  }
  CHECK(anchor_changed);
}

TEST_CASE("identity configurations generate the vanilla tokens") {
  const Model model(dsas::testing::small_model_config(3));
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto p = sample_prompt(10 + s);
    GenerateOptions o;
    o.max_new_tokens = 8;
    o.capture_matrices = false;
    const auto vanilla = generate(model, p, std::nullopt, o);
    DsasConfig unit;
    unit.beta = 1.0;
    DsasConfig off;
    off.cgw_enabled = false;
    off.ras_enabled = false;
    CHECK(generate(model, p, unit, o).tokens == vanilla.tokens);
    CHECK(generate(model, p, off, o).tokens == vanilla.tokens);
    CHECK(generate(model, p, std::nullopt, o).tokens == vanilla.tokens);
  }
}

TEST_CASE("trace contents") {
  const Model model(dsas::testing::small_model_config());
  const auto p = sample_prompt(2);
  DsasConfig c;
  c.layer_fraction = 0.75;
  GenerateOptions o;
  o.max_new_tokens = 0;
  o.capture_head_weights = true;
  const auto g = generate(model, p, c, o);
  CHECK(g.tokens.empty());
  CHECK(g.trace.layer_weights.size() == 4);
  CHECK(g.trace.head_weights.size() == 4);
  REQUIRE(g.trace.selected.size() == 3);
  CHECK(g.trace.selected[0].layer == 1);
  CHECK(g.trace.selected[0].gates.size() == p.layout.num_paragraphs());
  CHECK(g.trace.selected[0].post_weights == g.trace.layer_weights[1]);
  for (const auto& lw : g.trace.layer_weights) {
    for (std::size_t i = 0; i < lw.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < lw.size(); ++j) s += lw.mass(i, j);
      CHECK(std::abs(s - 4.0) <= 1e-5 * 4.0);
    }
  }
}

TEST_CASE("generation errors") {
  auto cfg = dsas::testing::small_model_config();
  cfg.max_seq_len = 64;
  const Model model(cfg);
  const auto p = sample_prompt(3);
  CHECK_THROWS_WITH_AS(generate(model, p, std::nullopt), doctest::Contains("PromptTooLong"),
                       Error);

  const Model big(dsas::testing::small_model_config());
  auto broken = p;
  broken.layout.total_len += 1;
  CHECK_THROWS_AS(generate(big, broken, std::nullopt), Error);
  auto bad_token = p;
  bad_token.token_ids[3] = 900;
  CHECK_THROWS_AS(generate(big, bad_token, std::nullopt), Error);
}

TEST_CASE("greedy decoding is deterministic") {
  const Model model(dsas::testing::small_model_config(9));
  const auto p = sample_prompt(4);
  GenerateOptions o;
  o.max_new_tokens = 6;
  const auto a = generate(model, p, DsasConfig{}, o);
  const auto b = generate(model, p, DsasConfig{}, o);
  CHECK(a.tokens == b.tokens);
  CHECK(a.trace.generated == a.tokens);
}
