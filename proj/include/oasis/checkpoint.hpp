#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oasis/class_stats.hpp"
#include "oasis/nn.hpp"

namespace oasis {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Model model;
    std::optional<ClassStats> stats;
};

/// Versioned little-endian binary dump: layer shapes, parameters as IEEE-754
/// doubles, latent index, frozen boundary, optional class statistics and a
/// trailing FNV-1a checksum. Round-trips bit-exactly.
std::vector<std::uint8_t> encode_checkpoint(const Model& model, const ClassStats* stats);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Model& model, const ClassStats* stats);
Checkpoint load_checkpoint(const std::string& path);

} // namespace oasis
