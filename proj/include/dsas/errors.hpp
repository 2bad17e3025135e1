#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dsas {

enum class Errc {
  OverlappingSpans,
  TargetNotLast,
  EmptyQuestion,
  NoParagraphs,
  SpanOutOfRange,
  BadParagraphIndex,
  LayoutMismatch,
  EmptyInput,
  EmptyGroup,
  EmptyReferences,
  InvalidConfig,
  InvalidSample,
  InvalidMatrix,
  PromptTooLong,
  FormatError,
  KeyMismatch,
  IoError,
};

std::string_view to_string(Errc code);

// Every failure in the library surfaces as this exception; `code()` names the
// violated precondition or invariant.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dsas
