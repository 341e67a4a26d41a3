#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crossres/errors.hpp"
#include "crossres/image.hpp"
#include "crossres/loss.hpp"
#include "crossres/model.hpp"

namespace crossres {

enum class TrainMode { T_C, nT_nC };

struct TrainConfig {
  double lambda_distill = 0.1;
  int batch_size = 64;
  double lr_init = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  double lr_decay_factor = 5.0;
  int plateau_patience = 3;
  double plateau_min_rel_improvement = 1e-3;
  long total_steps = 1000;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::T_C;
  double fixed_degrade_frequency = 0.5;  // nT-nC only
  DistillReduction distill_reduction = DistillReduction::mean;

  void validate() const;
};

/// Plateau detector: decays when the epoch loss has not improved by
/// plateau_min_rel_improvement (relative) for plateau_patience
/// consecutive epochs. The best value only moves on a sufficient
/// improvement, so a drip of sub-threshold gains still counts as flat.
struct PlateauScheduler {
  double best = 0.0;
  bool has_best = false;
  int counter = 0;

  /// Returns true when a decay should fire (and resets the counter).
  bool observe(double loss, double min_rel_improvement, int patience);
};

/// Replays a loss history through PlateauScheduler and returns the
/// learning rate after the last epoch.
double update_lr_on_plateau(const std::vector<double>& epoch_losses, double lr,
                            const TrainConfig& cfg);

struct ValRecord {
  long epoch = 0;
  long step = 0;
  double lr = 0.0;
  double fullres_metric = 0.0;
  double lowres24_metric = 0.0;
  double train_loss = 0.0;
  double classification = 0.0;
  double distillation = 0.0;
};

struct TrainState {
  Model student;
  Model teacher;     // frozen; empty (no params) in teacher-less modes
  bool has_teacher = false;
  std::vector<double> momentum;
  double lr_current = 0.0;
  long step = 0;
  long epoch = 0;
  PlateauScheduler plateau;
  double best_val_lowres = -1.0;
  std::vector<ValRecord> val_history;
};

/// One SGD-with-momentum update of the student on a prepared batch.
/// The teacher is never touched; throws TrainingDivergedError on a
/// non-finite loss.
LossBreakdown train_step(TrainState& state, const TrainConfig& cfg,
                         const std::vector<TrainView>& views, const std::vector<int>& labels,
                         int jobs = 1);

/// Top-1 classification accuracy at full resolution and at a 24-pixel
/// degraded copy of the same validation images.
std::pair<double, double> validate(const Model& student, const std::vector<ImageRecord>& val_set,
                                   int jobs = 1);

struct FitOptions {
  int jobs = 1;
  std::optional<long> stop_after_epoch;  // early stop for resume testing
  std::optional<std::filesystem::path> resume_from;
  ModelSpec spec;  // used when no teacher is given (fresh student init)
  ResolutionSet rset;
};

/// The full training loop: seeded epoch shuffling, curriculum-gated (T-C)
/// or fixed-frequency (nT-nC) view preparation, epoch-end dual-resolution
/// validation, plateau lr decay, CSV logging, and checkpoints (best on
/// lowres24 improvement, last at every epoch end).
///
/// `teacher` must be frozen when present; it is required in T-C mode and
/// ignored in nT-nC mode. When absent, a fresh student is initialized
/// from opts.spec (this is how the teacher itself gets pretrained).
TrainState fit(const TrainConfig& cfg, const std::vector<ImageRecord>& train_set,
               const std::vector<ImageRecord>& val_set, const Model* teacher,
               const std::filesystem::path& out_dir, const FitOptions& opts = {});

}  // namespace crossres
