#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

namespace rdl::test {

// Minimal independent IDX writer used as a fixture (big-endian headers, u8
// payload), deliberately separate from the library's reader.
inline void write_be32(std::ofstream& os, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_idx_images(const std::filesystem::path& path,
                             const std::vector<unsigned char>& pixels, std::uint32_t n,
                             std::uint32_t rows, std::uint32_t cols,
                             std::uint32_t magic = 0x00000803) {
  std::ofstream os(path, std::ios::binary);
  write_be32(os, magic);
  write_be32(os, n);
  write_be32(os, rows);
  write_be32(os, cols);
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
}

inline void write_idx_labels(const std::filesystem::path& path,
                             const std::vector<unsigned char>& labels,
                             std::uint32_t magic = 0x00000801) {
  std::ofstream os(path, std::ios::binary);
  write_be32(os, magic);
  write_be32(os, static_cast<std::uint32_t>(labels.size()));
  os.write(reinterpret_cast<const char*>(labels.data()),
           static_cast<std::streamsize>(labels.size()));
}

}  // namespace rdl::test
