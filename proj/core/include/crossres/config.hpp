#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "crossres/dataset.hpp"
#include "crossres/trainer.hpp"

namespace crossres {

/// Flat `key = value` document ('#' comments). Readers must consume every
/// key; leftovers are an error (fail-fast on typos).
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::filesystem::path& path);
  static KeyValueConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  long get_long(const std::string& key, long fallback);
  int get_int(const std::string& key, int fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback);

  /// Throws std::invalid_argument when unconsumed keys remain.
  void finish() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> consumed_;
};

TrainMode train_mode_from_string(const std::string& s);
std::string train_mode_to_string(TrainMode m);

/// Populates a TrainConfig from keys mirroring its field names.
TrainConfig train_config_from(KeyValueConfig& kv, const TrainConfig& defaults = {});

SyntheticDatasetConfig synthetic_config_from(KeyValueConfig& kv,
                                             const SyntheticDatasetConfig& defaults = {});

struct ExperimentConfig {
  std::string data_root;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::vector<std::string> modes = {"teacher-only", "nT-nC", "T-C"};
  std::vector<int> resolutions = {8, 16, 24, 32, 64, 128, 0};  // 0 = full
  double far_target = 1e-3;
  long impostor_pairs = 8000;

  int embedding_dim = 128;
  std::vector<int> conv_channels = {8, 16, 32, 64};

  long teacher_total_steps = 800;
  double teacher_lr_init = 1e-2;

  TrainConfig student;  // mode field is overridden per requested mode
};

ExperimentConfig experiment_config_from(KeyValueConfig& kv,
                                        const ExperimentConfig& defaults = {});

/// "8,16,full" -> {8, 16, 0}
std::vector<int> parse_resolution_list(const std::vector<std::string>& items);

}  // namespace crossres
