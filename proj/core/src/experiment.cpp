#include "crossres/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "crossres/checkpoint.hpp"
#include "crossres/image_io.hpp"
#include "crossres/trainer.hpp"

namespace crossres {

namespace {

using nlohmann::json;

std::string res_label(int r) { return r == 0 ? "full" : std::to_string(r); }

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

struct ProbeTemplateSet {
  std::vector<std::pair<Template, int>> mated;
  std::vector<Template> unmated;
};

std::vector<Template> gallery_templates(const EvalData& data,
                                        const std::vector<std::vector<double>>& full_embs) {
  std::map<int, std::vector<Embedding>> by_id;
  for (const std::size_t idx : data.gallery_index)
    by_id[data.images[idx].identity].push_back(Embedding{full_embs[idx]});
  std::vector<Template> out;
  for (const auto& [id, embs] : by_id) out.push_back(build_template(embs, id));
  return out;
}

ProbeTemplateSet probe_templates(const EvalData& data,
                                 const std::vector<std::vector<double>>& embs,
                                 const std::set<int>& gallery_ids) {
  std::map<int, std::vector<Embedding>> by_media;
  std::map<int, int> media_identity;
  for (const std::size_t idx : data.probe_index) {
    by_media[data.images[idx].media_id].push_back(Embedding{embs[idx]});
    media_identity[data.images[idx].media_id] = data.images[idx].identity;
  }
  ProbeTemplateSet out;
  for (const auto& [media, list] : by_media) {
    const int id = media_identity[media];
    Template t = build_template(list, id);
    if (gallery_ids.count(id))
      out.mated.emplace_back(std::move(t), id);
    else
      out.unmated.push_back(std::move(t));
  }
  return out;
}

struct DetOp {
  double fnir = 1.0;
  double threshold = 0.0;
};

DetOp det_at_fpir(const DetCurve& curve, double fpir_target) {
  for (const auto& p : curve.points) {
    if (p.fpir <= fpir_target) return {p.fnir, p.threshold};
  }
  const auto& last = curve.points.back();
  return {last.fnir, last.threshold};
}

}  // namespace

EvalData load_eval_data(const DatasetManifest& manifest, const std::filesystem::path& root,
                        std::uint64_t seed, long impostor_pairs) {
  EvalData data;
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::gallery && rec.split != Split::probe) continue;
    ImageRecord img;
    img.pixels = load_image(root / rec.path);
    img.identity = rec.identity;
    img.media_id = rec.media_id;
    if (rec.split == Split::gallery)
      data.gallery_index.push_back(data.images.size());
    else
      data.probe_index.push_back(data.images.size());
    data.images.push_back(std::move(img));
  }
  if (data.images.empty()) throw std::invalid_argument("load_eval_data: no probe/gallery records");

  // Genuine: every unordered within-identity pair. Impostor: a seeded
  // sample of cross-identity pairs.
  const int n = static_cast<int>(data.images.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (data.images[i].identity == data.images[j].identity)
        data.pairs.push_back({i, j, true});

  Rng rng(seed, 777);
  long made = 0, guard = 0;
  while (made < impostor_pairs && guard < impostor_pairs * 100) {
    ++guard;
    const int i = rng.uniform_int(0, n - 1);
    const int j = rng.uniform_int(0, n - 1);
    if (data.images[i].identity == data.images[j].identity) continue;
    data.pairs.push_back({i, j, false});
    ++made;
  }
  if (made == 0) throw std::invalid_argument("load_eval_data: could not sample impostor pairs");
  return data;
}

void write_eval_bundle(const Model& model, const EvalData& data,
                       const std::vector<int>& resolutions, double far_target,
                       const std::filesystem::path& out_dir, int jobs,
                       const std::string& model_name) {
  std::filesystem::create_directories(out_dir);

  // Canonical ascending order with full resolution last.
  std::vector<int> res = resolutions;
  std::sort(res.begin(), res.end(), [](int a, int b) {
    if (a == 0) return false;
    if (b == 0) return true;
    return a < b;
  });
  res.erase(std::unique(res.begin(), res.end()), res.end());

  std::map<int, std::vector<std::vector<double>>> cache;
  for (const int r : res) cache[r] = embed_at_resolution(model, data.images, r, jobs);
  if (!cache.count(0)) cache[0] = embed_at_resolution(model, data.images, 0, jobs);

  const std::vector<Template> gallery = gallery_templates(data, cache[0]);
  std::set<int> gallery_ids;
  for (const auto& t : gallery) gallery_ids.insert(t.subject_id);

  json summary;
  summary["format_version"] = 1;
  summary["model"] = model_name;
  summary["far_target"] = far_target;
  json res_labels = json::array();
  for (const int r : res) res_labels.push_back(res_label(r));
  summary["resolutions"] = res_labels;
  summary["verification"] = json::object();
  summary["identification"] = json::object();

  for (const int r : res) {
    const auto& embs = cache[r];
    const std::string label = res_label(r);

    // 1:1 verification, both sides at the same resolution.
    std::vector<double> genuine, impostor;
    for (const auto& p : data.pairs) {
      double s = 0.0;
      for (std::size_t k = 0; k < embs[p.a].size(); ++k) s += embs[p.a][k] * embs[p.b][k];
      (p.genuine ? genuine : impostor).push_back(s);
    }
    const RocCurve curve = roc(genuine, impostor);
    const OperatingPoint op = tar_at_far(curve, far_target);
    const double accuracy = verification_accuracy(genuine, impostor);

    json ver;
    ver["format_version"] = 1;
    ver["protocol"] = "verification-1to1";
    ver["model"] = model_name;
    ver["resolution"] = label;
    ver["genuine_count"] = curve.genuine_count;
    ver["impostor_count"] = curve.impostor_count;
    ver["far_target"] = far_target;
    ver["tar"] = op.tar;
    ver["threshold"] = op.threshold;
    ver["achieved_far"] = op.achieved_far;
    ver["far_unreachable"] = op.far_unreachable;
    ver["accuracy"] = accuracy;
    json points = json::array();
    for (const auto& p : curve.points) {
      if (!std::isfinite(p.threshold)) continue;  // sentinels stay out of the dumps
      points.push_back({{"threshold", p.threshold}, {"far", p.far}, {"tar", p.tar}});
    }
    ver["points"] = points;
    write_json(out_dir / ("verification_" + label + ".json"), ver);

    std::string roc_csv = "threshold,far,tar\n";
    for (const auto& p : curve.points) {
      if (!std::isfinite(p.threshold)) continue;
      roc_csv += std::to_string(p.threshold) + "," + std::to_string(p.far) + "," +
                 std::to_string(p.tar) + "\n";
    }
    write_text(out_dir / ("roc_" + label + ".csv"), roc_csv);

    summary["verification"][label] = {{"tar", op.tar},
                                      {"threshold", op.threshold},
                                      {"achieved_far", op.achieved_far},
                                      {"far_unreachable", op.far_unreachable},
                                      {"accuracy", accuracy}};

    // 1:N probes at this resolution, gallery at full resolution.
    const ProbeTemplateSet probes = probe_templates(data, embs, gallery_ids);
    const CmcCurve cmc_curve = cmc(probes.mated, gallery);
    const DetCurve det_curve = open_set_identification(probes.mated, probes.unmated, gallery);
    const double auc = det_auc(det_curve);
    const DetOp det_op = det_at_fpir(det_curve, 1e-2);

    std::vector<std::vector<char>> rankings;
    for (const auto& [probe, id] : probes.mated) {
      std::vector<std::pair<double, int>> scored;
      for (const auto& g : gallery) scored.emplace_back(similarity(probe, g), g.subject_id);
      std::stable_sort(scored.begin(), scored.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      std::vector<char> flags;
      for (const auto& [s, gid] : scored) flags.push_back(gid == id ? 1 : 0);
      rankings.push_back(std::move(flags));
    }
    const double map_score = retrieval_map(rankings);

    json cm;
    cm["format_version"] = 1;
    cm["protocol"] = "identification-closed-set";
    cm["model"] = model_name;
    cm["resolution"] = label;
    cm["probe_count"] = cmc_curve.probe_count;
    cm["gallery_size"] = static_cast<long>(gallery.size());
    cm["hits_at_rank"] = cmc_curve.hits_at_rank;
    write_json(out_dir / ("cmc_" + label + ".json"), cm);
    std::string cmc_csv = "rank,hit_rate\n";
    for (std::size_t i = 0; i < cmc_curve.hits_at_rank.size(); ++i)
      cmc_csv += std::to_string(i + 1) + "," + std::to_string(cmc_curve.hits_at_rank[i]) + "\n";
    write_text(out_dir / ("cmc_" + label + ".csv"), cmc_csv);

    json det;
    det["format_version"] = 1;
    det["protocol"] = "identification-open-set";
    det["model"] = model_name;
    det["resolution"] = label;
    det["mated_count"] = det_curve.mated_count;
    det["unmated_count"] = det_curve.unmated_count;
    det["auc"] = auc;
    det["fnir_at_fpir_1e-2"] = det_op.fnir;
    json det_points = json::array();
    for (const auto& p : det_curve.points) {
      if (!std::isfinite(p.threshold)) continue;
      det_points.push_back({{"threshold", p.threshold}, {"fpir", p.fpir}, {"fnir", p.fnir}});
    }
    det["points"] = det_points;
    write_json(out_dir / ("det_" + label + ".json"), det);
    std::string det_csv = "threshold,fpir,fnir,tpir\n";
    for (const auto& p : det_curve.points) {
      if (!std::isfinite(p.threshold)) continue;
      det_csv += std::to_string(p.threshold) + "," + std::to_string(p.fpir) + "," +
                 std::to_string(p.fnir) + "," + std::to_string(1.0 - p.fnir) + "\n";
    }
    write_text(out_dir / ("det_" + label + ".csv"), det_csv);

    summary["identification"][label] = {
        {"rank1", cmc_curve.hits_at_rank.empty() ? 0.0 : cmc_curve.hits_at_rank.front()},
        {"auc", auc},
        {"fnir_at_fpir_1e-2", det_op.fnir},
        {"map", map_score},
        {"mated_count", det_curve.mated_count},
        {"unmated_count", det_curve.unmated_count}};
  }

  // Cross-resolution TAR matrix over the same pair list.
  const CrossResMatrix matrix =
      cross_resolution_matrix(model, data.images, data.pairs, res, far_target, jobs);
  json xr;
  xr["format_version"] = 1;
  xr["protocol"] = "verification-cross-resolution";
  xr["model"] = model_name;
  xr["far_target"] = far_target;
  xr["resolutions"] = res_labels;
  xr["tar"] = matrix.tar_at_far;
  xr["threshold"] = matrix.threshold;
  {
    json unreachable = json::array();
    for (const auto& row : matrix.far_unreachable) {
      json r_row = json::array();
      for (const char f : row) r_row.push_back(static_cast<bool>(f));
      unreachable.push_back(r_row);
    }
    xr["far_unreachable"] = unreachable;
  }
  write_json(out_dir / "crossres.json", xr);

  std::string xr_csv = "probe_resolution,gallery_resolution,tar\n";
  for (std::size_t a = 0; a < matrix.resolutions.size(); ++a)
    for (std::size_t b = 0; b <= a; ++b)
      xr_csv += res_label(matrix.resolutions[a]) + "," + res_label(matrix.resolutions[b]) + "," +
                std::to_string(matrix.tar_at_far[a][b]) + "\n";
  write_text(out_dir / "crossres.csv", xr_csv);

  summary["crossres"] = {{"resolutions", res_labels},
                         {"far_target", far_target},
                         {"tar", matrix.tar_at_far}};

  json retrieval;
  retrieval["format_version"] = 1;
  retrieval["protocol"] = "retrieval";
  retrieval["model"] = model_name;
  retrieval["map_by_resolution"] = json::object();
  for (const int r : res)
    retrieval["map_by_resolution"][res_label(r)] = summary["identification"][res_label(r)]["map"];
  write_json(out_dir / "retrieval.json", retrieval);

  write_json(out_dir / "summary.json", summary);
}

void run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path data_root = cfg.data_root;
  const DatasetManifest manifest = load_manifest(data_root / "manifest.json");
  const auto train_set = load_records(manifest, data_root, Split::train);
  const auto val_set = load_records(manifest, data_root, Split::val);
  const EvalData eval_data = load_eval_data(manifest, data_root, cfg.seed, cfg.impostor_pairs);
  if (train_set.empty()) throw std::invalid_argument("run_experiment: empty train split");

  for (const auto& mode : cfg.modes) {
    if (mode != "teacher-only" && mode != "nT-nC" && mode != "T-C")
      throw std::invalid_argument("run_experiment: unknown mode '" + mode + "'");
  }

  ModelSpec spec;
  spec.in_channels = train_set.front().pixels.c;
  spec.conv_channels = cfg.conv_channels;
  spec.embedding_dim = cfg.embedding_dim;
  spec.num_classes = manifest.num_identities;

  // Stage 1: full-resolution teacher pretraining (softmax only).
  TrainConfig teacher_cfg = cfg.student;
  teacher_cfg.mode = TrainMode::nT_nC;
  teacher_cfg.fixed_degrade_frequency = 0.0;
  teacher_cfg.lambda_distill = 0.0;
  teacher_cfg.total_steps = cfg.teacher_total_steps;
  teacher_cfg.lr_init = cfg.teacher_lr_init;
  teacher_cfg.seed = cfg.seed;

  FitOptions opts;
  opts.jobs = cfg.jobs;
  opts.spec = spec;

  const TrainState teacher_state =
      fit(teacher_cfg, train_set, val_set, nullptr, out_dir / "train" / "teacher", opts);
  const Model teacher = teacher_state.student.freeze();
  save_model(out_dir / "train" / "teacher" / "teacher.ckpt", teacher);

  for (const auto& mode : cfg.modes) {
    const std::filesystem::path bundle_dir = out_dir / mode;
    try {
      if (mode == "teacher-only") {
        write_eval_bundle(teacher, eval_data, cfg.resolutions, cfg.far_target, bundle_dir,
                          cfg.jobs, "teacher-only");
        continue;
      }
      TrainConfig scfg = cfg.student;
      scfg.mode = train_mode_from_string(mode);
      scfg.seed = cfg.seed;
      const std::filesystem::path train_dir = out_dir / "train" / mode;
      fit(scfg, train_set, val_set, &teacher, train_dir, opts);

      const std::filesystem::path best = train_dir / "best.ckpt";
      const Model student = load_model(
          std::filesystem::exists(best) ? best : train_dir / "last.ckpt");
      write_eval_bundle(student, eval_data, cfg.resolutions, cfg.far_target, bundle_dir,
                        cfg.jobs, mode);
    } catch (const std::exception& e) {
      std::filesystem::create_directories(bundle_dir);
      write_json(bundle_dir / "failure.json",
                 json{{"mode", mode}, {"error", e.what()}});
      std::cerr << "mode " << mode << " failed: " << e.what() << '\n';
    }
  }

  const auto now = std::chrono::system_clock::now().time_since_epoch();
  write_json(out_dir / "metadata.json",
             json{{"timestamp_unix_ms",
                   std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}});
}

}  // namespace crossres
