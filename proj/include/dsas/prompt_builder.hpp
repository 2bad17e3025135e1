#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsas/core_types.hpp"
#include "json.hpp"

namespace dsas {

using TokenId = std::int32_t;

// Byte-level tokenizer: ids 0..255 are raw bytes, followed by three specials.
class Tokenizer {
 public:
  static constexpr TokenId kBos = 256;
  static constexpr TokenId kEos = 257;
  static constexpr TokenId kPad = 258;
  static constexpr int kVocabSize = 259;

  std::vector<TokenId> encode(std::string_view text) const;
  // Specials are dropped; ids outside the vocabulary throw InvalidSample.
  std::string decode(const std::vector<TokenId>& ids) const;
};

struct RawParagraph {
  std::string text;
  std::optional<bool> supporting;
};

struct RawSample {
  std::vector<RawParagraph> paragraphs;
  std::string question;
  std::vector<std::string> answers;

  void validate() const;
};

struct BuiltPrompt {
  std::vector<TokenId> token_ids;
  PromptLayout layout;
  std::string template_id;
};

// Template id of the multi-document QA prompt with the instruction repeated
// before and after the context.
inline constexpr std::string_view kMultiDocQaTemplate = "multidoc_qa";

// Renders the multi-document QA template, prefixed with BOS, and records the
// exact token span of every paragraph, of the question text and of the final
// token.
BuiltPrompt build_prompt(const RawSample& sample, const Tokenizer& tokenizer,
                         std::string_view template_id = kMultiDocQaTemplate);

// Rendered prompt text without the BOS token.
std::string render_prompt_text(const RawSample& sample);

// Replaces the question span by an explicit anchor range (e.g. the final
// instruction sentence for tasks without a question).
PromptLayout with_anchor(PromptLayout layout, TokenRange anchor);

// Deterministic paragraph permutation. With `edge_bias`, supporting
// paragraphs are moved to the first/last slots with elevated probability.
RawSample shuffle_paragraphs(const RawSample& sample, std::uint64_t seed, bool edge_bias);

// Consecutive chunk_len-token spans covering `text`; the last may be shorter.
std::vector<ParagraphSpan> segment_fixed_length(std::string_view text, const Tokenizer& tokenizer,
                                                std::size_t chunk_len);

RawSample sample_from_json(const nlohmann::json& j);
nlohmann::json sample_to_json(const RawSample& sample);

nlohmann::json prompt_to_json(const BuiltPrompt& prompt);
BuiltPrompt prompt_from_json(const nlohmann::json& j);

}  // namespace dsas
