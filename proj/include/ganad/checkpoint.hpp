#pragma once

#include <filesystem>
#include <string>

#include "ganad/model.hpp"

namespace ganad {

inline constexpr int kCheckpointFormatVersion = 1;

// Directory layout: manifest.json (format version, specs, phase, per-tensor
// SHA-256) plus one little-endian float32 file per named tensor.
void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& dir);

// Throws FormatError on version mismatch, truncated tensors or digest
// mismatch. A manifest without a discriminator section yields a
// scoring-only bundle.
ModelBundle load_checkpoint(const std::filesystem::path& dir);

// Drops θ_D; the result still supports scoring.
ModelBundle strip_discriminator(const ModelBundle& bundle);

std::string sha256_hex(const void* data, std::size_t size);
// Digest over names, shapes and values of a parameter set.
std::string params_digest(const ParamSet<float>& params);

}  // namespace ganad
