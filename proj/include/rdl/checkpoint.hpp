#pragma once

#include <filesystem>

#include "rdl/network.hpp"

namespace rdl {

// Single-file binary network snapshot, magic "RDLK". Little-endian
// throughout, raw IEEE-754 doubles for parameters; round-trips are
// bit-exact. Layout documented in docs/formats.md.
void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace rdl
