#include "dsas/prompt_builder.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "dsas/errors.hpp"

namespace dsas {

namespace {

constexpr std::string_view kInstruction =
    "Answer the question based on the given paragraphs. Only give me the answer and do not "
    "output any other words.";
constexpr std::string_view kContextIntro = "The following are given paragraphs.";
constexpr std::string_view kQuestionPrefix = "Question: ";
constexpr std::string_view kAnswerCue = "Answer:";

// Probability that a supporting paragraph is pulled to an edge slot.
constexpr double kEdgePullProbability = 0.5;

}  // namespace

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(static_cast<TokenId>(c));
  return ids;
}

std::string Tokenizer::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    if (id < 0 || id >= kVocabSize) {
      throw Error(Errc::InvalidSample, "token id " + std::to_string(id) + " outside vocabulary");
    }
    if (id < 256) out.push_back(static_cast<char>(id));
  }
  return out;
}

void RawSample::validate() const {
  if (paragraphs.empty()) throw Error(Errc::InvalidSample, "sample has no paragraphs");
  for (std::size_t m = 0; m < paragraphs.size(); ++m) {
    if (paragraphs[m].text.empty()) {
      throw Error(Errc::InvalidSample, "paragraph " + std::to_string(m) + " is empty");
    }
  }
  if (question.empty()) throw Error(Errc::EmptyQuestion, "sample question is empty");
}

std::string render_prompt_text(const RawSample& sample) {
  std::string text;
  text += kInstruction;
  text += '\n';
  text += kContextIntro;
  text += '\n';
  for (std::size_t m = 0; m < sample.paragraphs.size(); ++m) {
    if (m > 0) text += '\n';
    text += sample.paragraphs[m].text;
  }
  text += '\n';
  text += kInstruction;
  text += '\n';
  text += kQuestionPrefix;
  text += sample.question;
  text += '\n';
  text += kAnswerCue;
  return text;
}

BuiltPrompt build_prompt(const RawSample& sample, const Tokenizer& tokenizer,
                         std::string_view template_id) {
  sample.validate();
  if (template_id != kMultiDocQaTemplate) {
    throw Error(Errc::InvalidConfig, "unknown template '" + std::string(template_id) + "'");
  }

  BuiltPrompt out;
  out.template_id = std::string(template_id);
  auto& ids = out.token_ids;
  ids.push_back(Tokenizer::kBos);
  auto append = [&](std::string_view piece) {
    const auto encoded = tokenizer.encode(piece);
    const std::size_t first = ids.size();
    ids.insert(ids.end(), encoded.begin(), encoded.end());
    return TokenRange{first, ids.size() - 1};
  };

  append(kInstruction);
  append("\n");
  append(kContextIntro);
  append("\n");
  for (std::size_t m = 0; m < sample.paragraphs.size(); ++m) {
    if (m > 0) append("\n");
    const auto r = append(sample.paragraphs[m].text);
    out.layout.paragraphs.push_back({m, r.start, r.end, sample.paragraphs[m].supporting});
  }
  append("\n");
  append(kInstruction);
  append("\n");
  append(kQuestionPrefix);
  out.layout.question = append(sample.question);
  append("\n");
  append(kAnswerCue);

  out.layout.total_len = ids.size();
  out.layout.target = ids.size() - 1;
  validate_layout(out.layout);
  return out;
}

PromptLayout with_anchor(PromptLayout layout, TokenRange anchor) {
  layout.question = anchor;
  validate_layout(layout);
  return layout;
}

RawSample shuffle_paragraphs(const RawSample& sample, std::uint64_t seed, bool edge_bias) {
  const std::size_t n = sample.paragraphs.size();
  if (n < 2) return sample;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  if (edge_bias) {
    auto is_supporting = [&](std::size_t slot) {
      return sample.paragraphs[order[slot]].supporting.value_or(false);
    };
    std::bernoulli_distribution pull(kEdgePullProbability);
    const std::size_t edges[2] = {0, n - 1};
    for (std::size_t slot = 0; slot < n; ++slot) {
      if (!is_supporting(slot) || slot == 0 || slot == n - 1) continue;
      if (!pull(rng)) continue;
      for (std::size_t edge : edges) {
        if (!is_supporting(edge)) {
          std::swap(order[slot], order[edge]);
          break;
        }
      }
    }
  }

  RawSample out = sample;
  for (std::size_t k = 0; k < n; ++k) out.paragraphs[k] = sample.paragraphs[order[k]];
  return out;
}

std::vector<ParagraphSpan> segment_fixed_length(std::string_view text, const Tokenizer& tokenizer,
                                                std::size_t chunk_len) {
  if (chunk_len == 0) throw Error(Errc::InvalidConfig, "chunk_len must be positive");
  const std::size_t total = tokenizer.encode(text).size();
  std::vector<ParagraphSpan> spans;
  for (std::size_t start = 0; start < total; start += chunk_len) {
    const std::size_t end = std::min(start + chunk_len, total) - 1;
    spans.push_back({spans.size(), start, end, std::nullopt});
  }
  return spans;
}

RawSample sample_from_json(const nlohmann::json& j) {
  try {
    RawSample s;
    for (const auto& jp : j.at("paragraphs")) {
      RawParagraph p;
      if (jp.is_string()) {
        p.text = jp.get<std::string>();
      } else {
        p.text = jp.at("text").get<std::string>();
        if (jp.contains("supporting") && !jp["supporting"].is_null()) {
          p.supporting = jp["supporting"].get<bool>();
        }
      }
      s.paragraphs.push_back(std::move(p));
    }
    s.question = j.at("question").get<std::string>();
    if (j.contains("answers")) s.answers = j["answers"].get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("malformed sample: ") + e.what());
  }
}

nlohmann::json sample_to_json(const RawSample& sample) {
  nlohmann::json paragraphs = nlohmann::json::array();
  for (const auto& p : sample.paragraphs) {
    nlohmann::json jp = {{"text", p.text}};
    if (p.supporting) jp["supporting"] = *p.supporting;
    paragraphs.push_back(std::move(jp));
  }
  return {{"paragraphs", std::move(paragraphs)},
          {"question", sample.question},
          {"answers", sample.answers}};
}

nlohmann::json prompt_to_json(const BuiltPrompt& prompt) {
  return {{"template_id", prompt.template_id},
          {"token_ids", prompt.token_ids},
          {"layout", layout_to_json(prompt.layout)}};
}

BuiltPrompt prompt_from_json(const nlohmann::json& j) {
  try {
    BuiltPrompt p;
    p.template_id = j.at("template_id").get<std::string>();
    p.token_ids = j.at("token_ids").get<std::vector<TokenId>>();
    p.layout = layout_from_json(j.at("layout"));
    if (p.layout.total_len != p.token_ids.size()) {
      throw Error(Errc::LayoutMismatch, "layout length " + std::to_string(p.layout.total_len) +
                                            " differs from " +
                                            std::to_string(p.token_ids.size()) + " tokens");
    }
    validate_layout(p.layout);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("malformed prompt: ") + e.what());
  }
}

}  // namespace dsas
