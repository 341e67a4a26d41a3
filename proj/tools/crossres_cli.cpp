// Command line front end: dataset generation, training, evaluation,
// cross-resolution matrices, full experiments, and report rendering.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crossres/checkpoint.hpp"
#include "crossres/config.hpp"
#include "crossres/dataset.hpp"
#include "crossres/experiment.hpp"
#include "crossres/report.hpp"
#include "crossres/trainer.hpp"

namespace {

using namespace crossres;

KeyValueConfig load_kv(const std::string& config_path) {
  if (config_path.empty()) return KeyValueConfig::parse_string("");
  return KeyValueConfig::parse_file(config_path);
}

int cmd_gen_data(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out) {
  KeyValueConfig kv = load_kv(config_path);
  SyntheticDatasetConfig cfg = synthetic_config_from(kv);
  kv.finish();
  if (seed) cfg.seed = *seed;
  const DatasetManifest manifest = generate_synthetic(cfg, out);
  std::cout << "wrote " << manifest.records.size() << " images over " << manifest.num_identities
            << " identities to " << out << "\n";
  return 0;
}

int cmd_ingest(const std::string& root, double gallery_fraction, double train_fraction,
               double val_fraction) {
  IngestRules rules;
  rules.gallery_fraction = gallery_fraction;
  rules.train_fraction = train_fraction;
  rules.val_fraction = val_fraction;
  const DatasetManifest manifest = ingest(root, rules);
  save_manifest(std::filesystem::path(root) / "manifest.json", manifest);
  std::cout << "ingested " << manifest.records.size() << " images over "
            << manifest.num_identities << " identities\n";
  return 0;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& data_root, const std::string& out, int jobs,
              const std::string& mode, const std::string& teacher_path,
              const std::string& resume_path) {
  KeyValueConfig kv = load_kv(config_path);
  TrainConfig cfg = train_config_from(kv);

  ModelSpec spec;
  spec.embedding_dim = kv.get_int("embedding_dim", spec.embedding_dim);
  {
    std::vector<std::string> ch;
    for (const int c : spec.conv_channels) ch.push_back(std::to_string(c));
    spec.conv_channels.clear();
    for (const auto& s : kv.get_list("conv_channels", ch))
      spec.conv_channels.push_back(std::stoi(s));
  }
  kv.finish();

  if (seed) cfg.seed = *seed;
  if (!mode.empty()) cfg.mode = train_mode_from_string(mode);
  cfg.validate();

  const std::filesystem::path root(data_root);
  const DatasetManifest manifest = load_manifest(root / "manifest.json");
  const auto train_set = load_records(manifest, root, Split::train);
  const auto val_set = load_records(manifest, root, Split::val);
  if (train_set.empty()) throw std::runtime_error("empty train split in " + data_root);
  spec.in_channels = train_set.front().pixels.c;
  spec.num_classes = manifest.num_identities;

  std::optional<Model> teacher;
  if (!teacher_path.empty()) teacher = load_model(teacher_path).freeze();
  if (cfg.mode == TrainMode::T_C && !teacher)
    throw std::runtime_error("T-C mode needs --teacher <checkpoint>");

  FitOptions opts;
  opts.jobs = jobs;
  opts.spec = spec;
  if (!resume_path.empty()) opts.resume_from = resume_path;

  const TrainState state =
      fit(cfg, train_set, val_set, teacher ? &*teacher : nullptr, out, opts);
  std::cout << "finished at step " << state.step << ", best lowres24 val accuracy "
            << state.best_val_lowres << "\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_root,
                 const std::string& out, const std::string& resolutions, double far,
                 int jobs, std::uint64_t seed, long impostor_pairs, const std::string& name) {
  const Model model = load_model(model_path).freeze();
  const std::filesystem::path root(data_root);
  const DatasetManifest manifest = load_manifest(root / "manifest.json");
  const EvalData data = load_eval_data(manifest, root, seed, impostor_pairs);

  KeyValueConfig kv = KeyValueConfig::parse_string("r = " + resolutions);
  const std::vector<int> res = parse_resolution_list(kv.get_list("r", {}));
  write_eval_bundle(model, data, res, far, out, jobs, name);
  std::cout << "wrote evaluation bundle to " << out << "\n";
  return 0;
}

int cmd_crossres(const std::string& model_path, const std::string& data_root,
                 const std::string& out, const std::string& resolutions, double far,
                 int jobs, std::uint64_t seed, long impostor_pairs) {
  const Model model = load_model(model_path).freeze();
  const std::filesystem::path root(data_root);
  const DatasetManifest manifest = load_manifest(root / "manifest.json");
  const EvalData data = load_eval_data(manifest, root, seed, impostor_pairs);

  KeyValueConfig kv = KeyValueConfig::parse_string("r = " + resolutions);
  const std::vector<int> res = parse_resolution_list(kv.get_list("r", {}));
  const CrossResMatrix m = cross_resolution_matrix(model, data.images, data.pairs, res, far, jobs);

  std::cout << "TAR@FAR=" << far << " (rows/cols: resolution, 0 = full)\n";
  for (std::size_t a = 0; a < m.resolutions.size(); ++a) {
    for (std::size_t b = 0; b <= a; ++b)
      std::cout << m.resolutions[a] << " x " << m.resolutions[b] << " : " << m.tar_at_far[a][b]
                << (m.far_unreachable[a][b] ? " (far unreachable)" : "") << "\n";
  }
  if (!out.empty()) {
    std::ofstream f(out, std::ios::trunc);
    f << "res_a,res_b,tar,threshold,far_unreachable\n";
    for (std::size_t a = 0; a < m.resolutions.size(); ++a)
      for (std::size_t b = 0; b <= a; ++b)
        f << m.resolutions[a] << "," << m.resolutions[b] << "," << m.tar_at_far[a][b] << ","
          << m.threshold[a][b] << "," << int(m.far_unreachable[a][b]) << "\n";
  }
  return 0;
}

int cmd_experiment(const std::string& config_path, std::optional<std::uint64_t> seed,
                   const std::string& out, int jobs) {
  KeyValueConfig kv = load_kv(config_path);
  ExperimentConfig cfg = experiment_config_from(kv);
  kv.finish();
  if (seed) {
    cfg.seed = *seed;
    cfg.student.seed = *seed;
  }
  if (jobs > 0) cfg.jobs = jobs;
  run_experiment(cfg, out);
  std::cout << "experiment complete: " << out << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& out,
               const std::string& schema_dir) {
  if (!schema_dir.empty()) {
    const auto errors = validate_run(run_dir, schema_dir);
    for (const auto& e : errors) std::cerr << "schema: " << e << "\n";
    if (!errors.empty()) return 1;
  }
  const std::string md = render_report(run_dir);
  if (out.empty()) {
    std::cout << md;
  } else {
    std::ofstream f(out, std::ios::trunc);
    f << md;
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-resolution distillation toolkit"};
  app.require_subcommand(1);

  std::string config_path, data_root, out, mode, teacher_path, resume_path, model_path, name;
  std::string resolutions = "8,16,24,32,64,128,full";
  std::string run_dir, schema_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  double far = 1e-3;
  std::uint64_t eval_seed = 0;
  long impostor_pairs = 8000;
  double gallery_fraction = 0.5, train_fraction = 0.0, val_fraction = 0.0;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic identity dataset");
  gen->add_option("--config", config_path, "key = value config file");
  gen->add_option("--seed", seed, "override the config seed");
  gen->add_option("--out", out, "output directory")->required();

  auto* ing = app.add_subcommand("ingest", "index an on-disk identity/image tree");
  ing->add_option("--root", data_root, "dataset root")->required();
  ing->add_option("--gallery-fraction", gallery_fraction, "media groups per identity to enroll");
  ing->add_option("--train-fraction", train_fraction, "media groups reserved for training");
  ing->add_option("--val-fraction", val_fraction, "fraction of train images held out");

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--config", config_path, "key = value config file");
  tr->add_option("--seed", seed, "override the config seed");
  tr->add_option("--data", data_root, "dataset root with manifest.json")->required();
  tr->add_option("--out", out, "checkpoint/log directory")->required();
  tr->add_option("--jobs", jobs, "worker threads");
  tr->add_option("--mode", mode, "T-C or nT-nC");
  tr->add_option("--teacher", teacher_path, "frozen teacher checkpoint (T-C)");
  tr->add_option("--resume", resume_path, "checkpoint to resume from");

  auto* ev = app.add_subcommand("evaluate", "write a full evaluation bundle");
  ev->add_option("--model", model_path, "model checkpoint")->required();
  ev->add_option("--data", data_root, "dataset root with manifest.json")->required();
  ev->add_option("--out", out, "bundle directory")->required();
  ev->add_option("--resolutions", resolutions, "comma list, 'full' allowed");
  ev->add_option("--far", far, "FAR target");
  ev->add_option("--jobs", jobs, "worker threads");
  ev->add_option("--seed", eval_seed, "impostor pair sampling seed");
  ev->add_option("--impostor-pairs", impostor_pairs, "impostor pairs to sample");
  ev->add_option("--name", name, "model name recorded in the bundle")->required();

  auto* xr = app.add_subcommand("crossres", "print the cross-resolution TAR matrix");
  xr->add_option("--model", model_path, "model checkpoint")->required();
  xr->add_option("--data", data_root, "dataset root with manifest.json")->required();
  xr->add_option("--out", out, "optional CSV output path");
  xr->add_option("--resolutions", resolutions, "comma list, 'full' allowed");
  xr->add_option("--far", far, "FAR target");
  xr->add_option("--jobs", jobs, "worker threads");
  xr->add_option("--seed", eval_seed, "impostor pair sampling seed");
  xr->add_option("--impostor-pairs", impostor_pairs, "impostor pairs to sample");

  auto* ex = app.add_subcommand("experiment", "run the full teacher/student pipeline");
  ex->add_option("--config", config_path, "key = value config file")->required();
  ex->add_option("--seed", seed, "override the config seed");
  ex->add_option("--out", out, "run directory")->required();
  ex->add_option("--jobs", jobs, "worker threads");

  auto* rp = app.add_subcommand("report", "render a markdown report from a run directory");
  rp->add_option("--run", run_dir, "experiment run directory")->required();
  rp->add_option("--out", out, "markdown output path (stdout when omitted)");
  rp->add_option("--schemas", schema_dir, "validate bundles against this schema directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, seed, out);
    if (ing->parsed()) return cmd_ingest(data_root, gallery_fraction, train_fraction, val_fraction);
    if (tr->parsed())
      return cmd_train(config_path, seed, data_root, out, jobs, mode, teacher_path, resume_path);
    if (ev->parsed())
      return cmd_evaluate(model_path, data_root, out, resolutions, far, jobs, eval_seed,
                          impostor_pairs, name);
    if (xr->parsed())
      return cmd_crossres(model_path, data_root, out, resolutions, far, jobs, eval_seed,
                          impostor_pairs);
    if (ex->parsed()) return cmd_experiment(config_path, seed, out, jobs);
    if (rp->parsed()) return cmd_report(run_dir, out, schema_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
