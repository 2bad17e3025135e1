#include <array>
#include <set>

#include "doctest.h"
#include "dsas/errors.hpp"
#include "dsas/prompt_builder.hpp"
#include "fixtures.hpp"

using namespace dsas;

namespace {

RawSample two_paragraphs() {
  RawSample s;
  s.paragraphs = {{"Paris is the capital of France.", true}, {"Berlin is in Germany.", false}};
  s.question = "What is the capital of France?";
  s.answers = {"Paris"};
  return s;
}

std::string text_of(const BuiltPrompt& p, TokenRange r) {
  std::vector<TokenId> ids(p.token_ids.begin() + static_cast<std::ptrdiff_t>(r.start),
                           p.token_ids.begin() + static_cast<std::ptrdiff_t>(r.end + 1));
  return Tokenizer{}.decode(ids);
}

}  // namespace

TEST_CASE("byte tokenizer") {
  Tokenizer t;
  CHECK(t.encode("A") == std::vector<TokenId>{65});
  CHECK(t.encode("").empty());
  CHECK(t.decode({Tokenizer::kBos, 104, 105, Tokenizer::kEos}) == "hi");
  CHECK_THROWS_AS(t.decode({300}), Error);
  const std::string bytes = "\xff\x01z";
  CHECK(t.decode(t.encode(bytes)) == bytes);
}

TEST_CASE("two-paragraph prompt layout") {
  const auto s = two_paragraphs();
  const auto p = build_prompt(s, Tokenizer{});
  const auto& l = p.layout;
  CHECK(p.template_id == "multidoc_qa");
  CHECK(l.num_paragraphs() == 2);
  CHECK(l.total_len == p.token_ids.size());
  CHECK(l.target == l.total_len - 1);
  CHECK(p.token_ids.front() == Tokenizer::kBos);
  CHECK(text_of(p, l.paragraphs[0].range()) == s.paragraphs[0].text);
  CHECK(text_of(p, l.paragraphs[1].range()) == s.paragraphs[1].text);
  CHECK(text_of(p, l.question) == s.question);
  CHECK(l.paragraphs[0].supporting == true);
  CHECK(l.paragraphs[1].supporting == false);
  CHECK_FALSE(l.paragraphs[0].range().overlaps(l.paragraphs[1].range()));
  CHECK(Tokenizer{}.decode(p.token_ids) == render_prompt_text(s));
}

TEST_CASE("template text") {
  const auto text = render_prompt_text(two_paragraphs());
  const std::string instr =
      "Answer the question based on the given paragraphs. Only give me the answer and do not "
      "output any other words.";
  CHECK(text == instr + "\nThe following are given paragraphs.\n" +
                     "Paris is the capital of France.\nBerlin is in Germany.\n" + instr +
                     "\nQuestion: What is the capital of France?\nAnswer:");
}

TEST_CASE("ten-paragraph sample") {
  dsas::testing::Rng rng(1);
  auto s = dsas::testing::random_sample(rng, 10, 5, 30);
  s.paragraphs[3].supporting = true;
  const auto p = build_prompt(s, Tokenizer{});
  CHECK(p.layout.num_paragraphs() == 10);
  int supporting = 0;
  for (const auto& sp : p.layout.paragraphs) supporting += sp.supporting.value_or(false);
  CHECK(supporting == 2);
}

TEST_CASE("invalid samples") {
  auto s = two_paragraphs();
  s.question.clear();
  CHECK_THROWS_WITH_AS(build_prompt(s, Tokenizer{}), doctest::Contains("EmptyQuestion"), Error);
  s = two_paragraphs();
  s.paragraphs.clear();
  CHECK_THROWS_AS(build_prompt(s, Tokenizer{}), Error);
  s = two_paragraphs();
  CHECK_THROWS_AS(build_prompt(s, Tokenizer{}, "nope"), Error);
}

TEST_CASE("custom anchor") {
  const auto p = build_prompt(two_paragraphs(), Tokenizer{});
  const TokenRange anchor{p.layout.total_len - 8, p.layout.total_len - 1};
  const auto l = with_anchor(p.layout, anchor);
  CHECK(l.question == anchor);
  CHECK_THROWS_AS(with_anchor(p.layout, p.layout.paragraphs[0].range()), Error);
}

TEST_CASE("shuffle determinism and identity cases") {
  dsas::testing::Rng rng(5);
  const auto s = dsas::testing::random_sample(rng, 6, 3, 6);
  const auto a = shuffle_paragraphs(s, 7, false);
  const auto b = shuffle_paragraphs(s, 7, false);
  CHECK(sample_to_json(a) == sample_to_json(b));

  std::multiset<std::string> before, after;
  for (const auto& p : s.paragraphs) before.insert(p.text);
  for (const auto& p : a.paragraphs) after.insert(p.text);
  CHECK(before == after);

  RawSample one;
  one.paragraphs = {{"only", true}};
  one.question = "q";
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CHECK(sample_to_json(shuffle_paragraphs(one, seed, true)) == sample_to_json(one));
  }
}

TEST_CASE("uniform shuffle frequencies") {
  RawSample s;
  for (int m = 0; m < 6; ++m) s.paragraphs.push_back({std::string(1, char('a' + m)), false});
  s.question = "q";
  constexpr int kSeeds = 60000;
  std::array<int, 6> first{};
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto out = shuffle_paragraphs(s, static_cast<std::uint64_t>(seed), false);
    ++first[static_cast<std::size_t>(out.paragraphs[0].text[0] - 'a')];
  }
  for (int c : first) CHECK(std::abs(c / double(kSeeds) - 1.0 / 6.0) < 0.02);
}

TEST_CASE("edge bias raises edge frequency of supporting paragraphs") {
  dsas::testing::Rng rng(2);
  auto s = dsas::testing::random_sample(rng, 10, 2, 4);
  for (auto& p : s.paragraphs) p.supporting = false;
  s.paragraphs[2].supporting = true;
  s.paragraphs[6].supporting = true;

  constexpr int kSeeds = 10000;
  auto edge_rate = [&](bool bias) {
    int hits = 0, total = 0;
    for (int seed = 0; seed < kSeeds; ++seed) {
      const auto out = shuffle_paragraphs(s, static_cast<std::uint64_t>(seed), bias);
      for (std::size_t k = 0; k < out.paragraphs.size(); ++k) {
        if (!out.paragraphs[k].supporting.value_or(false)) continue;
        ++total;
        hits += (k == 0 || k == out.paragraphs.size() - 1);
      }
    }
    return double(hits) / double(total);
  };
  const double uniform = edge_rate(false);
  const double biased = edge_rate(true);
  CHECK(std::abs(uniform - 2.0 / 10.0) < 0.02);
  CHECK(biased > 2.0 / 10.0);
  CHECK(biased > uniform + 0.1);
}

TEST_CASE("fixed-length segmentation") {
  Tokenizer t;
  auto spans = segment_fixed_length(std::string(1000, 'x'), t, 500);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].length() == 500);
  CHECK(spans[1].start == 500);
  CHECK(spans[1].length() == 500);

  spans = segment_fixed_length(std::string(1001, 'x'), t, 500);
  REQUIRE(spans.size() == 3);
  CHECK(spans[2].length() == 1);
  CHECK(spans[2].index == 2);

  spans = segment_fixed_length(std::string(10, 'x'), t, 200);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].length() == 10);

  CHECK(segment_fixed_length("", t, 10).empty());
  CHECK_THROWS_AS(segment_fixed_length("abc", t, 0), Error);
}

TEST_CASE("json round trips") {
  const auto s = two_paragraphs();
  const auto back = sample_from_json(sample_to_json(s));
  CHECK(sample_to_json(back) == sample_to_json(s));

  const auto plain = sample_from_json(
      nlohmann::json::parse(R"({"paragraphs":["x","y"],"question":"q?"})"));
  CHECK(plain.paragraphs.size() == 2);
  CHECK_FALSE(plain.paragraphs[0].supporting.has_value());

  CHECK_THROWS_AS(sample_from_json(nlohmann::json::parse(R"({"paragraphs":["x"]})")), Error);

  const auto p = build_prompt(s, Tokenizer{});
  const auto pj = prompt_to_json(p);
  const auto p2 = prompt_from_json(pj);
  CHECK(p2.token_ids == p.token_ids);
  CHECK(p2.layout == p.layout);

  auto broken = pj;
  broken["token_ids"].erase(broken["token_ids"].size() - 1);
  CHECK_THROWS_WITH_AS(prompt_from_json(broken), doctest::Contains("LayoutMismatch"), Error);
}
