#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "phishstream/model.hpp"

namespace phishstream {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  EngineConfig engine;
  double learning_rate = 0.0;
  std::uint32_t epochs = 0;
  double positive_weight = 0.0;
};

struct Checkpoint {
  ModelParams params;
  CheckpointMeta meta;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: magic, version, d, head count, metadata, then each
/// tensor as (name, rows, cols, row-major little-endian doubles).
void save_checkpoint(std::ostream& out, const ModelParams& params, const CheckpointMeta& meta);
void save_checkpoint_file(const std::string& path, const ModelParams& params,
                          const CheckpointMeta& meta);
/// Throws CheckpointError on bad magic, unknown version or shape mismatch.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint_file(const std::string& path);

}  // namespace phishstream
