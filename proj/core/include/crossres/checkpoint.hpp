#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "crossres/model.hpp"
#include "crossres/trainer.hpp"

namespace crossres {

/// On-disk training snapshot. A self-describing binary container: magic,
/// format-version integer, a JSON header with the layout, then a raw
/// little-endian double payload so parameters and metrics round-trip
/// bit-exactly.
struct Checkpoint {
  ModelSpec spec;
  std::vector<double> params;
  bool frozen = false;
  std::vector<double> momentum;
  long step = 0;
  long epoch = 0;
  double lr_current = 0.0;
  PlateauScheduler plateau;
  double best_val_lowres = -1.0;
  std::vector<ValRecord> val_history;
  std::array<std::uint64_t, 4> rng_state{};
  std::uint64_t teacher_hash = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint checkpoint_from_state(const TrainState& state);
/// Rebuilds a TrainState around an externally supplied teacher (may be
/// null); verifies the stored teacher hash when one was recorded.
TrainState state_from_checkpoint(const Checkpoint& ckpt, const Model* teacher);

/// Convenience wrappers for plain model snapshots (teacher exports).
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace crossres
