#include "dsas/io_util.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <vector>

#include "dsas/errors.hpp"

namespace dsas {

namespace fs = std::filesystem;

fs::path staging_path(const fs::path& target) {
  fs::path t = target;
  if (!t.has_filename()) t = t.parent_path();
  return t.parent_path() / ("." + t.filename().string() + ".partial");
}

void commit_staged(const fs::path& staged, const fs::path& target) {
  std::error_code ec;
  if (fs::is_directory(target)) fs::remove_all(target, ec);
  fs::rename(staged, target, ec);
  if (ec) throw Error(Errc::IoError, "cannot move " + staged.string() + " to " + target.string() +
                                         ": " + ec.message());
}

void write_text_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
}

void write_f32_le(const fs::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if constexpr (std::endian::native == std::endian::big) {
    std::vector<float> swapped(values.begin(), values.end());
    for (auto& v : swapped) v = byteswap_f32(v);
    out.write(reinterpret_cast<const char*>(swapped.data()),
              static_cast<std::streamsize>(swapped.size() * sizeof(float)));
  } else {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  }
  out.close();
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto staged = staging_path(path);
  write_text_file(staged, content);
  commit_staged(staged, path);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dsas
