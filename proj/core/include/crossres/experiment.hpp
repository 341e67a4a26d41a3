#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crossres/config.hpp"
#include "crossres/dataset.hpp"
#include "crossres/metrics.hpp"
#include "crossres/model.hpp"

namespace crossres {

/// Probe/gallery material loaded from a manifest, plus the seeded
/// verification pair list shared by every protocol in a bundle.
struct EvalData {
  std::vector<ImageRecord> images;          // gallery then probe records
  std::vector<std::size_t> gallery_index;   // indices into `images`
  std::vector<std::size_t> probe_index;
  std::vector<PairRef> pairs;               // verification pairs over `images`
};

EvalData load_eval_data(const DatasetManifest& manifest, const std::filesystem::path& root,
                        std::uint64_t seed, long impostor_pairs);

/// Writes the complete per-model evaluation bundle under out_dir:
/// verification (ROC + TAR@FAR + accuracy) per resolution, close-set CMC
/// and open-set DET with full-resolution gallery and per-resolution
/// probes, retrieval mAP, the cross-resolution TAR matrix, summary.json,
/// and CSV curve dumps.
void write_eval_bundle(const Model& model, const EvalData& data,
                       const std::vector<int>& resolutions, double far_target,
                       const std::filesystem::path& out_dir, int jobs,
                       const std::string& model_name);

/// Full pipeline: pretrain the teacher at full resolution, freeze and
/// clone it, train each requested student mode, evaluate everything.
/// Bundles land under out_dir/<mode>/; checkpoints under
/// out_dir/train/<mode>/. Timestamps go to metadata.json only.
void run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace crossres
