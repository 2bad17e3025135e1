#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dsas/core_types.hpp"

namespace dsas {

// On-disk attention dump: a directory holding manifest.json and one
// little-endian f32 row-major payload per layer. FORMAT.md is normative.
inline constexpr const char* kDumpFormatName = "dsas-attention-dump";
inline constexpr int kDumpFormatVersion = 1;

struct DumpManifest {
  std::string model_id;
  int num_layers = 0;
  int num_heads = 1;
  std::size_t seq_len = 0;
  Reduction reduction = Reduction::HeadSummed;
  MatrixKind matrix_kind = MatrixKind::Weight;
  std::vector<std::string> files;
  std::optional<PromptLayout> layout;
  // Layer ids in the source model, when the dump covers a subset.
  std::vector<int> layer_ids;
  std::vector<std::string> ambiguous_boundaries;
};

nlohmann::json manifest_to_json(const DumpManifest& m);
DumpManifest manifest_from_json(const nlohmann::json& j);

struct AttentionDump {
  DumpManifest manifest;
  // Per layer: num_heads matrices (per_head) or a single matrix (head_summed).
  std::vector<std::vector<AttentionMatrix>> layers;

  AttentionMatrix head_summed(std::size_t layer) const;
  std::vector<AttentionMatrix> head_summed_layers() const;
  std::vector<int> layer_ids() const;
};

// Writes into a sibling temporary directory and renames it into place.
void write_dump(const AttentionDump& dump, const std::filesystem::path& dir);

// Loads and validates a dump; throws FormatError or InvalidMatrix.
AttentionDump read_dump(const std::filesystem::path& dir);

struct DumpCheck {
  bool ok = true;
  std::vector<std::string> problems;
};

// Format, row-sum and causality validation without throwing.
DumpCheck check_dump(const std::filesystem::path& dir);

}  // namespace dsas
