#include "dsas/attention_dump.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "dsas/errors.hpp"
#include "dsas/io_util.hpp"

namespace dsas {

namespace fs = std::filesystem;

namespace {

std::string reduction_name(Reduction r) {
  return r == Reduction::PerHead ? "per_head" : "head_summed";
}

std::string kind_name(MatrixKind k) { return k == MatrixKind::Score ? "score" : "weight"; }

std::string layer_file_name(std::size_t l) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer_%03zu.bin", l);
  return buf;
}

std::vector<float> read_f32_file(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::FormatError, "cannot open payload " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(float)) {
    throw Error(Errc::FormatError, path.filename().string() + " holds " + std::to_string(bytes) +
                                       " bytes, expected " +
                                       std::to_string(expected * sizeof(float)));
  }
  in.seekg(0);
  std::vector<float> data(expected);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : data) v = byteswap_f32(v);
  }
  return data;
}

}  // namespace

nlohmann::json manifest_to_json(const DumpManifest& m) {
  nlohmann::json j = {
      {"format", kDumpFormatName},
      {"version", kDumpFormatVersion},
      {"model_id", m.model_id},
      {"num_layers", m.num_layers},
      {"num_heads", m.num_heads},
      {"seq_len", m.seq_len},
      {"kind", reduction_name(m.reduction)},
      {"matrix_kind", kind_name(m.matrix_kind)},
      {"dtype", "f32"},
      {"byte_order", "little"},
      {"layout", "row_major"},
      {"files", m.files},
  };
  if (!m.layer_ids.empty()) j["layer_ids"] = m.layer_ids;
  if (m.layout) j["spans"] = layout_to_json(*m.layout);
  if (!m.ambiguous_boundaries.empty()) j["ambiguous_boundaries"] = m.ambiguous_boundaries;
  return j;
}

DumpManifest manifest_from_json(const nlohmann::json& j) {
  auto require = [&](const char* key, const std::string& expected) {
    const auto got = j.at(key).get<std::string>();
    if (got != expected) {
      throw Error(Errc::FormatError, std::string(key) + " must be '" + expected + "', got '" +
                                         got + "'");
    }
  };
  try {
    require("format", kDumpFormatName);
    if (j.at("version").get<int>() != kDumpFormatVersion) {
      throw Error(Errc::FormatError, "unsupported dump version");
    }
    require("dtype", "f32");
    require("byte_order", "little");
    require("layout", "row_major");

    DumpManifest m;
    m.model_id = j.at("model_id").get<std::string>();
    m.num_layers = j.at("num_layers").get<int>();
    m.num_heads = j.at("num_heads").get<int>();
    m.seq_len = j.at("seq_len").get<std::size_t>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "per_head") {
      m.reduction = Reduction::PerHead;
    } else if (kind == "head_summed") {
      m.reduction = Reduction::HeadSummed;
    } else {
      throw Error(Errc::FormatError, "unknown kind '" + kind + "'");
    }
    const auto mk = j.at("matrix_kind").get<std::string>();
    if (mk == "score") {
      m.matrix_kind = MatrixKind::Score;
    } else if (mk == "weight") {
      m.matrix_kind = MatrixKind::Weight;
    } else {
      throw Error(Errc::FormatError, "unknown matrix_kind '" + mk + "'");
    }
    m.files = j.at("files").get<std::vector<std::string>>();
    if (j.contains("layer_ids")) m.layer_ids = j["layer_ids"].get<std::vector<int>>();
    if (j.contains("spans") && !j["spans"].is_null()) m.layout = layout_from_json(j["spans"]);
    if (j.contains("ambiguous_boundaries")) {
      m.ambiguous_boundaries = j["ambiguous_boundaries"].get<std::vector<std::string>>();
    }

    if (m.num_layers < 1 || m.num_heads < 1 || m.seq_len < 1) {
      throw Error(Errc::FormatError, "num_layers, num_heads and seq_len must be positive");
    }
    if (m.files.size() != static_cast<std::size_t>(m.num_layers)) {
      throw Error(Errc::FormatError, "files lists " + std::to_string(m.files.size()) +
                                         " payloads for " + std::to_string(m.num_layers) +
                                         " layers");
    }
    if (!m.layer_ids.empty() && m.layer_ids.size() != m.files.size()) {
      throw Error(Errc::FormatError, "layer_ids and files differ in length");
    }
    if (m.layout && m.layout->total_len != m.seq_len) {
      throw Error(Errc::LayoutMismatch, "spans.total_len differs from seq_len");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("malformed manifest: ") + e.what());
  }
}

AttentionMatrix AttentionDump::head_summed(std::size_t layer) const {
  const auto& heads = layers.at(layer);
  if (heads.size() == 1 && heads.front().reduction() == Reduction::HeadSummed) return heads.front();
  return sum_heads(heads);
}

std::vector<AttentionMatrix> AttentionDump::head_summed_layers() const {
  std::vector<AttentionMatrix> out;
  out.reserve(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) out.push_back(head_summed(l));
  return out;
}

std::vector<int> AttentionDump::layer_ids() const {
  if (!manifest.layer_ids.empty()) return manifest.layer_ids;
  std::vector<int> ids(layers.size());
  for (std::size_t l = 0; l < ids.size(); ++l) ids[l] = static_cast<int>(l);
  return ids;
}

void write_dump(const AttentionDump& dump, const fs::path& dir) {
  DumpManifest manifest = dump.manifest;
  manifest.num_layers = static_cast<int>(dump.layers.size());
  manifest.files.clear();
  for (std::size_t l = 0; l < dump.layers.size(); ++l) manifest.files.push_back(layer_file_name(l));

  if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
  const fs::path staging = staging_path(dir);
  fs::remove_all(staging);
  fs::create_directories(staging);
  for (std::size_t l = 0; l < dump.layers.size(); ++l) {
    std::vector<float> payload;
    for (const auto& m : dump.layers[l]) {
      for (double v : m.values()) payload.push_back(static_cast<float>(v));
    }
    write_f32_le(staging / manifest.files[l], payload);
  }
  write_text_file(staging / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
  commit_staged(staging, dir);
}

AttentionDump read_dump(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(Errc::FormatError, "no manifest.json in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("manifest is not valid JSON: ") + e.what());
  }

  AttentionDump dump;
  dump.manifest = manifest_from_json(j);
  const auto& m = dump.manifest;
  const std::size_t L = m.seq_len;
  const std::size_t per_layer = m.reduction == Reduction::PerHead ? m.num_heads : 1;
  for (std::size_t l = 0; l < m.files.size(); ++l) {
    const auto payload = read_f32_file(dir / m.files[l], per_layer * L * L);
    std::vector<AttentionMatrix> mats;
    for (std::size_t h = 0; h < per_layer; ++h) {
      std::vector<double> values(payload.begin() + static_cast<std::ptrdiff_t>(h * L * L),
                                 payload.begin() + static_cast<std::ptrdiff_t>((h + 1) * L * L));
      try {
        mats.emplace_back(L, m.matrix_kind, m.reduction, std::move(values));
      } catch (const Error& e) {
        throw Error(Errc::InvalidMatrix,
                    "layer " + std::to_string(l) + " head " + std::to_string(h) + ": " + e.what());
      }
    }
    if (m.matrix_kind == MatrixKind::Weight && m.reduction == Reduction::HeadSummed) {
      const auto& a = mats.front();
      const double heads = m.num_heads;
      for (std::size_t i = 0; i < L; ++i) {
        double s = 0.0;
        for (std::size_t jj = 0; jj <= i; ++jj) s += a.at(i, jj);
        if (std::abs(s - heads) > 1e-5 * heads) {
          throw Error(Errc::InvalidMatrix, "layer " + std::to_string(l) + " row " +
                                               std::to_string(i) + " sums to " +
                                               std::to_string(s) + ", expected num_heads");
        }
      }
    }
    dump.layers.push_back(std::move(mats));
  }
  return dump;
}

DumpCheck check_dump(const fs::path& dir) {
  DumpCheck check;
  try {
    read_dump(dir);
  } catch (const std::exception& e) {
    check.ok = false;
    check.problems.emplace_back(e.what());
  }
  return check;
}

}  // namespace dsas
