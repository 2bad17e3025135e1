#include "dsas/errors.hpp"

namespace dsas {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::OverlappingSpans: return "OverlappingSpans";
    case Errc::TargetNotLast: return "TargetNotLast";
    case Errc::EmptyQuestion: return "EmptyQuestion";
    case Errc::NoParagraphs: return "NoParagraphs";
    case Errc::SpanOutOfRange: return "SpanOutOfRange";
    case Errc::BadParagraphIndex: return "BadParagraphIndex";
    case Errc::LayoutMismatch: return "LayoutMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::EmptyReferences: return "EmptyReferences";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidSample: return "InvalidSample";
    case Errc::InvalidMatrix: return "InvalidMatrix";
    case Errc::PromptTooLong: return "PromptTooLong";
    case Errc::FormatError: return "FormatError";
    case Errc::KeyMismatch: return "KeyMismatch";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace dsas
