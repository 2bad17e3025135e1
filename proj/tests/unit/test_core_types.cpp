#include <cmath>

#include "doctest.h"
#include "dsas/core_types.hpp"
#include "dsas/errors.hpp"
#include "fixtures.hpp"

using namespace dsas;

namespace {

PromptLayout basic_layout() {
  PromptLayout l;
  l.total_len = 100;
  l.paragraphs = {{0, 1, 30, true}, {1, 32, 60, false}};
  l.question = {70, 80};
  l.target = 99;
  return l;
}

Errc code_of(const PromptLayout& l) {
  try {
    validate_layout(l);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("layout unexpectedly valid");
  return Errc::IoError;
}

}  // namespace

TEST_CASE("valid layout passes") {
  CHECK_NOTHROW(validate_layout(basic_layout()));
  const auto l = basic_layout();
  CHECK(l.paragraph_of(1) == 0u);
  CHECK(l.paragraph_of(45) == 1u);
  CHECK_FALSE(l.paragraph_of(31).has_value());
  CHECK_FALSE(l.paragraph_of(75).has_value());
}

TEST_CASE("layout violations") {
  auto l = basic_layout();
  SUBCASE("shared token") {
    l.paragraphs[1].start = 30;
    CHECK(code_of(l) == Errc::OverlappingSpans);
  }
  SUBCASE("paragraph overlapping the question") {
    l.paragraphs[1].end = 72;
    CHECK(code_of(l) == Errc::OverlappingSpans);
  }
  SUBCASE("target not last") {
    l.target = 98;
    CHECK(code_of(l) == Errc::TargetNotLast);
  }
  SUBCASE("no paragraphs") {
    l.paragraphs.clear();
    CHECK(code_of(l) == Errc::NoParagraphs);
  }
  SUBCASE("empty question") {
    l.question = {80, 79};
    CHECK(code_of(l) == Errc::EmptyQuestion);
  }
  SUBCASE("span past the end") {
    l.paragraphs[1].end = 100;
    CHECK(code_of(l) == Errc::SpanOutOfRange);
  }
  SUBCASE("reversed span") {
    l.paragraphs[0] = {0, 10, 5, std::nullopt};
    CHECK(code_of(l) == Errc::SpanOutOfRange);
  }
  SUBCASE("paragraph ordinal mismatch") {
    l.paragraphs[1].index = 5;
    CHECK(code_of(l) == Errc::BadParagraphIndex);
  }
}

TEST_CASE("target inside the question span is allowed") {
  auto l = basic_layout();
  l.question = {90, 99};
  CHECK_NOTHROW(validate_layout(l));
}

TEST_CASE("layout json round trip") {
  const auto l = basic_layout();
  const auto j = layout_to_json(l);
  CHECK(layout_from_json(j) == l);
  auto stripped = l;
  stripped.paragraphs[0].supporting.reset();
  CHECK(layout_from_json(layout_to_json(stripped)) == stripped);
  CHECK_FALSE(layout_to_json(stripped)["paragraphs"][0].contains("supporting"));
}

TEST_CASE("attention matrix masking") {
  AttentionMatrix s(4, MatrixKind::Score, Reduction::PerHead);
  CHECK(std::isinf(s.at(0, 1)));
  CHECK(s.at(0, 1) < 0);
  CHECK(s.mass(0, 1) == 0.0);
  CHECK(s.at(1, 0) == 0.0);
  s.set(2, 1, 3.0);
  s.set(1, 2, 5.0);  // masked, ignored
  CHECK(s.at(2, 1) == 3.0);
  CHECK(std::isinf(s.at(1, 2)));
  s.scale(2, 1, 0.5);
  CHECK(s.at(2, 1) == 1.5);

  AttentionMatrix w(3, MatrixKind::Weight, Reduction::HeadSummed);
  CHECK(w.at(0, 2) == 0.0);
}

TEST_CASE("weight matrix validation") {
  std::vector<double> good = {1, 0, 0, 0.5, 0.5, 0, 0.2, 0.3, 0.5};
  CHECK_NOTHROW(AttentionMatrix(3, MatrixKind::Weight, Reduction::PerHead, good));

  auto bad_sum = good;
  bad_sum[8] = 0.6;
  CHECK_THROWS_AS(AttentionMatrix(3, MatrixKind::Weight, Reduction::PerHead, bad_sum), Error);

  auto leak = good;
  leak[1] = 0.1;
  leak[0] = 0.9;
  CHECK_THROWS_AS(AttentionMatrix(3, MatrixKind::Weight, Reduction::PerHead, leak), Error);

  CHECK_THROWS_AS(AttentionMatrix(3, MatrixKind::Weight, Reduction::PerHead, {1.0, 0.0}), Error);

  auto nan = good;
  nan[4] = std::nan("");
  CHECK_THROWS_AS(AttentionMatrix(3, MatrixKind::Weight, Reduction::HeadSummed, nan), Error);
}

TEST_CASE("sum_heads adds unmasked entries") {
  dsas::testing::Rng rng(3);
  std::vector<AttentionMatrix> heads;
  for (int h = 0; h < 3; ++h) heads.push_back(dsas::testing::random_weights(rng, 6));
  const auto s = sum_heads(heads);
  CHECK(s.reduction() == Reduction::HeadSummed);
  for (std::size_t i = 0; i < 6; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(s.mass(i, j) == doctest::Approx(heads[0].mass(i, j) + heads[1].mass(i, j) +
                                            heads[2].mass(i, j)));
      row += s.mass(i, j);
    }
    CHECK(row == doctest::Approx(3.0));
  }
}

TEST_CASE("config defaults and layer selection") {
  DsasConfig c;
  CHECK(c.top_k == 10);
  CHECK(c.alpha == 1.0);
  CHECK(c.beta == 0.7);
  CHECK(c.layer_fraction == 0.5);
  CHECK(c.selected_layers(8) == std::vector<int>{4, 5, 6, 7});
  c.layer_fraction = 0.75;
  CHECK(c.selected_layers(8) == std::vector<int>{2, 3, 4, 5, 6, 7});
  CHECK(c.selected_layers(32).size() == 24u);
  c.layer_fraction = 0.3;
  CHECK(c.selected_layers(5) == std::vector<int>{3, 4});
  c.layer_fraction = 1.0;
  CHECK(c.selected_layers(3) == std::vector<int>{0, 1, 2});

  c.position_weight_enabled = false;
  CHECK(c.effective_alpha() == 0.0);
}

TEST_CASE("config validation") {
  DsasConfig c;
  CHECK_NOTHROW(c.validate());
  c.beta = 1.2;
  CHECK_THROWS_AS(c.validate(), Error);
  c = DsasConfig{};
  c.top_k = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = DsasConfig{};
  c.layer_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = DsasConfig{};
  c.alpha = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("partition membership helper") {
  Partition p;
  p.key = {0, 2};
  p.irrelevant = {1};
  CHECK(p.is_key(0));
  CHECK_FALSE(p.is_key(1));
  CHECK(p.is_key(2));
}
