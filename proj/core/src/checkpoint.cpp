#include "crossres/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace crossres {

namespace {

constexpr char kMagic[8] = {'X', 'R', 'E', 'S', 'C', 'K', 'P', 'T'};

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::ifstream& in, std::size_t n) {
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated double payload");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["spec"] = {{"input_size", ckpt.spec.input_size},
                    {"in_channels", ckpt.spec.in_channels},
                    {"conv_channels", ckpt.spec.conv_channels},
                    {"embedding_dim", ckpt.spec.embedding_dim},
                    {"num_classes", ckpt.spec.num_classes},
                    {"architecture_id", ckpt.spec.architecture_id}};
  header["frozen"] = ckpt.frozen;
  header["num_params"] = ckpt.params.size();
  header["num_momentum"] = ckpt.momentum.size();
  header["num_val_records"] = ckpt.val_history.size();
  header["step"] = ckpt.step;
  header["epoch"] = ckpt.epoch;
  header["plateau_counter"] = ckpt.plateau.counter;
  header["plateau_has_best"] = ckpt.plateau.has_best;
  header["rng_state"] = ckpt.rng_state;
  header["teacher_hash"] = ckpt.teacher_hash;
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  write_doubles(out, ckpt.params);
  write_doubles(out, ckpt.momentum);
  std::vector<double> hist;
  hist.reserve(ckpt.val_history.size() * 8);
  for (const auto& r : ckpt.val_history) {
    hist.push_back(static_cast<double>(r.epoch));
    hist.push_back(static_cast<double>(r.step));
    hist.push_back(r.lr);
    hist.push_back(r.fullres_metric);
    hist.push_back(r.lowres24_metric);
    hist.push_back(r.train_loss);
    hist.push_back(r.classification);
    hist.push_back(r.distillation);
  }
  write_doubles(out, hist);
  write_doubles(out, {ckpt.lr_current, ckpt.plateau.best, ckpt.best_val_lowres});
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported format version");
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  const nlohmann::json header = nlohmann::json::parse(hs);

  Checkpoint ckpt;
  const auto& spec = header.at("spec");
  ckpt.spec.input_size = spec.at("input_size").get<int>();
  ckpt.spec.in_channels = spec.at("in_channels").get<int>();
  ckpt.spec.conv_channels = spec.at("conv_channels").get<std::vector<int>>();
  ckpt.spec.embedding_dim = spec.at("embedding_dim").get<int>();
  ckpt.spec.num_classes = spec.at("num_classes").get<int>();
  ckpt.spec.architecture_id = spec.at("architecture_id").get<std::string>();
  ckpt.frozen = header.at("frozen").get<bool>();
  ckpt.step = header.at("step").get<long>();
  ckpt.epoch = header.at("epoch").get<long>();
  ckpt.plateau.counter = header.at("plateau_counter").get<int>();
  ckpt.plateau.has_best = header.at("plateau_has_best").get<bool>();
  ckpt.rng_state = header.at("rng_state").get<std::array<std::uint64_t, 4>>();
  ckpt.teacher_hash = header.at("teacher_hash").get<std::uint64_t>();

  ckpt.params = read_doubles(in, header.at("num_params").get<std::size_t>());
  ckpt.momentum = read_doubles(in, header.at("num_momentum").get<std::size_t>());
  const std::size_t nrec = header.at("num_val_records").get<std::size_t>();
  const std::vector<double> hist = read_doubles(in, nrec * 8);
  for (std::size_t i = 0; i < nrec; ++i) {
    ValRecord r;
    r.epoch = static_cast<long>(hist[i * 8 + 0]);
    r.step = static_cast<long>(hist[i * 8 + 1]);
    r.lr = hist[i * 8 + 2];
    r.fullres_metric = hist[i * 8 + 3];
    r.lowres24_metric = hist[i * 8 + 4];
    r.train_loss = hist[i * 8 + 5];
    r.classification = hist[i * 8 + 6];
    r.distillation = hist[i * 8 + 7];
    ckpt.val_history.push_back(r);
  }
  const std::vector<double> tail = read_doubles(in, 3);
  ckpt.lr_current = tail[0];
  ckpt.plateau.best = tail[1];
  ckpt.best_val_lowres = tail[2];
  return ckpt;
}

Checkpoint checkpoint_from_state(const TrainState& state) {
  Checkpoint ckpt;
  ckpt.spec = state.student.spec();
  ckpt.params = state.student.params();
  ckpt.frozen = state.student.frozen();
  ckpt.momentum = state.momentum;
  ckpt.step = state.step;
  ckpt.epoch = state.epoch;
  ckpt.lr_current = state.lr_current;
  ckpt.plateau = state.plateau;
  ckpt.best_val_lowres = state.best_val_lowres;
  ckpt.val_history = state.val_history;
  ckpt.teacher_hash = state.has_teacher ? state.teacher.param_hash() : 0;
  return ckpt;
}

TrainState state_from_checkpoint(const Checkpoint& ckpt, const Model* teacher) {
  TrainState state;
  state.student = Model::from_parts(ckpt.spec, ckpt.params, ckpt.frozen);
  if (teacher != nullptr) {
    if (ckpt.teacher_hash != 0 && teacher->param_hash() != ckpt.teacher_hash)
      throw std::runtime_error("state_from_checkpoint: teacher hash mismatch");
    state.teacher = *teacher;
    state.has_teacher = true;
  }
  state.momentum = ckpt.momentum;
  state.lr_current = ckpt.lr_current;
  state.step = ckpt.step;
  state.epoch = ckpt.epoch;
  state.plateau = ckpt.plateau;
  state.best_val_lowres = ckpt.best_val_lowres;
  state.val_history = ckpt.val_history;
  return state;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  Checkpoint ckpt;
  ckpt.spec = model.spec();
  ckpt.params = model.params();
  ckpt.frozen = model.frozen();
  save_checkpoint(path, ckpt);
}

Model load_model(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  return Model::from_parts(ckpt.spec, ckpt.params, ckpt.frozen);
}

}  // namespace crossres
