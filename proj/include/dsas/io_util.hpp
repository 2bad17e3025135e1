#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace dsas {

inline float byteswap_f32(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  bits = __builtin_bswap32(bits);
  std::memcpy(&v, &bits, sizeof bits);
  return v;
}

// Hidden sibling used as the staging location for write-then-rename.
std::filesystem::path staging_path(const std::filesystem::path& target);

// Replaces `target` (file or directory) with the staged entry.
void commit_staged(const std::filesystem::path& staged, const std::filesystem::path& target);

// Direct writes; callers stage them.
void write_text_file(const std::filesystem::path& path, std::string_view content);
void write_f32_le(const std::filesystem::path& path, std::span<const float> values);

// Writes the file through a staging sibling so readers never see a truncated file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace dsas
