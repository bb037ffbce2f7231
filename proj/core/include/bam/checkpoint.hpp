#pragma once

#include <optional>
#include <string>

#include "bam/mlp.hpp"

namespace bam {

struct Checkpoint {
  ModelParams student;
  std::optional<ModelParams> teacher;
};

/// Binary format: magic "BAMCKPT1", u32 version, u8 teacher flag, both net
/// shapes (dims + norm flags), then every tensor in declaration order as
/// row-major little-endian f64. The teacher block, when present, repeats the
/// tensor section.
void save_checkpoint(const std::string& path, const ModelParams& student,
                     const ModelParams* teacher = nullptr);

/// Validates magic, version, shape consistency and finiteness; anything off
/// is an IoError (file-level) or DataError (content-level).
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bam
