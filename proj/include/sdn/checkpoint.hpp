#pragma once

#include <cstdint>
#include <filesystem>

#include "sdn/blocks.hpp"

namespace sdn {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
    Architecture arch;
    std::uint64_t seed = 0;
};

// JSON layout: {"format_version", "prng": {"algorithm", "seed"}, "mode",
// "layers": [...]} with per-layer kind, widths, dependence, activation and
// flattened row-major weight arrays.
void save_checkpoint(const std::filesystem::path& path, const Architecture& arch,
                     std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sdn
