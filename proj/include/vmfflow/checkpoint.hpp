#pragma once

// Model checkpoint: one JSON header line (shapes, path, warp record) followed
// by little-endian float64 parameter blobs in Model::blocks() order, then the
// EMA copy when present.

#include <filesystem>
#include <optional>

#include "vmfflow/posterior.hpp"
#include "vmfflow/schedule.hpp"

namespace vmfflow {

struct Checkpoint {
  Model model;
  std::optional<Model> ema;
  WarpSchedule warp = WarpSchedule::identity(2);  // flow-time warp
  int steps = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vmfflow
