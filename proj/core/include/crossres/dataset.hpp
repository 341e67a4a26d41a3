#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crossres/image.hpp"

namespace crossres {

enum class Split { train, val, probe, gallery };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct ManifestRecord {
  std::string path;  // relative to the manifest's directory
  int identity = 0;
  int media_id = 0;
  Split split = Split::train;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  int num_identities = 0;
  std::uint64_t checksum = 0;  // content hash over the record list

  std::uint64_t compute_checksum() const;
};

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Loads the pixel data for every record in `split` (pass std::nullopt
/// for all records). Paths resolve relative to `root`.
std::vector<ImageRecord> load_records(const DatasetManifest& manifest,
                                      const std::filesystem::path& root,
                                      std::optional<Split> split = std::nullopt);

struct JitterConfig {
  double pose_shift_px = 3.0;
  double brightness_range = 0.1;  // multiplicative, 1 +- range
  double noise_sigma = 0.02;
};

struct SyntheticDatasetConfig {
  int num_identities = 32;
  int images_per_identity = 40;
  int image_h = 137;
  int image_w = 180;
  JitterConfig jitter;
  std::uint64_t seed = 0;

  // Split layout (media groups of `media_group_size` images each).
  int media_group_size = 2;
  double val_fraction = 0.1;
  double eval_fraction = 0.2;       // split half gallery / half probe
  double open_set_fraction = 0.25;  // identities kept out of the gallery
};

/// Deterministic procedural-identity renderer: each identity is a fixed
/// latent parameter vector controlling layered ellipse/bar primitives at
/// both coarse and fine spatial scales, with per-image pose/brightness/
/// noise jitter. Writes PNGs plus manifest.json under out_dir and asserts
/// the generator self-check (mean intra-identity pixel distance < mean
/// inter-identity distance).
DatasetManifest generate_synthetic(const SyntheticDatasetConfig& cfg,
                                   const std::filesystem::path& out_dir);

/// Renders one image in memory (exposed for tests).
Image render_synthetic_image(const SyntheticDatasetConfig& cfg, int identity, int image_index);

struct IngestRules {
  double gallery_fraction = 0.5;  // of each identity's media groups
  double train_fraction = 0.0;    // media groups reserved for train+val
  double val_fraction = 0.0;      // of the train images, per identity
};

/// Scan root/<identity_name>/<image files>, label identities in
/// sorted-name order, group media by the filename stem up to its last
/// '_', and assign splits per the rules. Unreadable files are skipped
/// with a warning to stderr.
DatasetManifest ingest(const std::filesystem::path& root, const IngestRules& rules);

}  // namespace crossres
