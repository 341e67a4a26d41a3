#include "crossres/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crossres {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    if (cfg.values_.count(key))
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_[key] = true;
  return it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_[key] = true;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not a number");
  }
}

long KeyValueConfig::get_long(const std::string& key, long fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_[key] = true;
  try {
    return std::stol(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not an integer");
  }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) {
  return static_cast<int>(get_long(key, fallback));
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_[key] = true;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not an unsigned integer");
  }
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key,
                                                  const std::vector<std::string>& fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_[key] = true;
  std::vector<std::string> out;
  std::istringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void KeyValueConfig::finish() const {
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "T-C") return TrainMode::T_C;
  if (s == "nT-nC") return TrainMode::nT_nC;
  throw std::invalid_argument("unknown training mode '" + s + "' (expected T-C or nT-nC)");
}

std::string train_mode_to_string(TrainMode m) {
  return m == TrainMode::T_C ? "T-C" : "nT-nC";
}

TrainConfig train_config_from(KeyValueConfig& kv, const TrainConfig& defaults) {
  TrainConfig cfg = defaults;
  cfg.lambda_distill = kv.get_double("lambda_distill", cfg.lambda_distill);
  cfg.batch_size = kv.get_int("batch_size", cfg.batch_size);
  cfg.lr_init = kv.get_double("lr_init", cfg.lr_init);
  cfg.momentum = kv.get_double("momentum", cfg.momentum);
  cfg.weight_decay = kv.get_double("weight_decay", cfg.weight_decay);
  cfg.lr_decay_factor = kv.get_double("lr_decay_factor", cfg.lr_decay_factor);
  cfg.plateau_patience = kv.get_int("plateau_patience", cfg.plateau_patience);
  cfg.plateau_min_rel_improvement =
      kv.get_double("plateau_min_rel_improvement", cfg.plateau_min_rel_improvement);
  cfg.total_steps = kv.get_long("total_steps", cfg.total_steps);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.mode = train_mode_from_string(kv.get_string("mode", train_mode_to_string(cfg.mode)));
  cfg.fixed_degrade_frequency =
      kv.get_double("fixed_degrade_frequency", cfg.fixed_degrade_frequency);
  const std::string red = kv.get_string(
      "distill_reduction", cfg.distill_reduction == DistillReduction::mean ? "mean" : "sum");
  if (red == "mean")
    cfg.distill_reduction = DistillReduction::mean;
  else if (red == "sum")
    cfg.distill_reduction = DistillReduction::sum;
  else
    throw std::invalid_argument("distill_reduction must be 'mean' or 'sum'");
  return cfg;
}

SyntheticDatasetConfig synthetic_config_from(KeyValueConfig& kv,
                                             const SyntheticDatasetConfig& defaults) {
  SyntheticDatasetConfig cfg = defaults;
  cfg.num_identities = kv.get_int("num_identities", cfg.num_identities);
  cfg.images_per_identity = kv.get_int("images_per_identity", cfg.images_per_identity);
  cfg.image_h = kv.get_int("image_h", cfg.image_h);
  cfg.image_w = kv.get_int("image_w", cfg.image_w);
  cfg.jitter.pose_shift_px = kv.get_double("pose_shift_px", cfg.jitter.pose_shift_px);
  cfg.jitter.brightness_range = kv.get_double("brightness_range", cfg.jitter.brightness_range);
  cfg.jitter.noise_sigma = kv.get_double("noise_sigma", cfg.jitter.noise_sigma);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.media_group_size = kv.get_int("media_group_size", cfg.media_group_size);
  cfg.val_fraction = kv.get_double("val_fraction", cfg.val_fraction);
  cfg.eval_fraction = kv.get_double("eval_fraction", cfg.eval_fraction);
  cfg.open_set_fraction = kv.get_double("open_set_fraction", cfg.open_set_fraction);
  return cfg;
}

std::vector<int> parse_resolution_list(const std::vector<std::string>& items) {
  std::vector<int> out;
  for (const auto& s : items) {
    if (s == "full") {
      out.push_back(0);
    } else {
      const int r = std::stoi(s);
      if (r < 1) throw std::invalid_argument("resolution must be >= 1 or 'full'");
      out.push_back(r);
    }
  }
  return out;
}

ExperimentConfig experiment_config_from(KeyValueConfig& kv, const ExperimentConfig& defaults) {
  ExperimentConfig cfg = defaults;
  cfg.data_root = kv.get_string("data_root", cfg.data_root);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.jobs = kv.get_int("jobs", cfg.jobs);
  cfg.modes = kv.get_list("modes", cfg.modes);
  {
    std::vector<std::string> res_str;
    for (const int r : cfg.resolutions) res_str.push_back(r == 0 ? "full" : std::to_string(r));
    cfg.resolutions = parse_resolution_list(kv.get_list("resolutions", res_str));
  }
  cfg.far_target = kv.get_double("far_target", cfg.far_target);
  cfg.impostor_pairs = kv.get_long("impostor_pairs", cfg.impostor_pairs);
  cfg.embedding_dim = kv.get_int("embedding_dim", cfg.embedding_dim);
  {
    std::vector<std::string> ch_str;
    for (const int c : cfg.conv_channels) ch_str.push_back(std::to_string(c));
    const auto parsed = kv.get_list("conv_channels", ch_str);
    cfg.conv_channels.clear();
    for (const auto& s : parsed) cfg.conv_channels.push_back(std::stoi(s));
  }
  cfg.teacher_total_steps = kv.get_long("teacher_total_steps", cfg.teacher_total_steps);
  cfg.teacher_lr_init = kv.get_double("teacher_lr_init", cfg.teacher_lr_init);

  TrainConfig student_defaults = cfg.student;
  student_defaults.seed = cfg.seed;
  cfg.student = train_config_from(kv, student_defaults);
  return cfg;
}

}  // namespace crossres
