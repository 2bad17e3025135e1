#include "dsas/qa_eval.hpp"

#include <cctype>
#include <map>
#include <sstream>
#include <vector>

#include "dsas/errors.hpp"

namespace dsas {

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(c)));
  }
  std::string out;
  for (const auto& tok : split_ws(cleaned)) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

F1Score token_f1(std::string_view prediction, std::string_view reference) {
  const auto pred = split_ws(normalize_answer(prediction));
  const auto ref = split_ws(normalize_answer(reference));
  if (pred.empty() || ref.empty()) return {};

  std::map<std::string, int> ref_counts;
  for (const auto& t : ref) ++ref_counts[t];
  int overlap = 0;
  for (const auto& t : pred) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return {};
  F1Score s;
  s.precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  s.recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
  s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

F1Score best_f1(std::string_view prediction, std::span<const std::string> references) {
  if (references.empty()) throw Error(Errc::EmptyReferences, "no reference answers");
  F1Score best = token_f1(prediction, references.front());
  for (std::size_t r = 1; r < references.size(); ++r) {
    const auto s = token_f1(prediction, references[r]);
    if (s.f1 > best.f1) best = s;
  }
  return best;
}

}  // namespace dsas
