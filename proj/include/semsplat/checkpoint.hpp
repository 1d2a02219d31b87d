#pragma once

#include <filesystem>
#include <optional>

#include "semsplat/cloud.hpp"
#include "semsplat/decoder.hpp"

namespace semsplat {

/// Little-endian binary layout:
///   "SSPL1" | u32 N | u32 feature_dim | u32 sh_degree
///   f32 positions[N*3] rotations[N*4] log_scales[N*3] opacity_logits[N]
///       sh_coeffs[N*3*(D+1)^2] features[N*feature_dim]
/// optionally followed by a decoder section:
///   "SDEC1" | u32 input_dim | u32 hidden_dim | u32 num_classes
///   f32 w1 b1 [w2 b2]   (weights row-major)
struct Checkpoint {
    GaussianCloud cloud;
    std::optional<SemanticDecoder> decoder;
};

/// Writes to a temporary sibling file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const GaussianCloud& cloud,
                     const SemanticDecoder* decoder);

/// Throws MissingFile when absent, CorruptCheckpoint on truncation or bad headers.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace semsplat
