#include "crossres/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "crossres/image_io.hpp"
#include "crossres/rng.hpp"

namespace crossres {

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::probe: return "probe";
    case Split::gallery: return "gallery";
  }
  throw std::logic_error("split_name: bad split");
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "probe") return Split::probe;
  if (name == "gallery") return Split::gallery;
  throw std::invalid_argument("split_from_name: unknown split '" + name + "'");
}

std::uint64_t DatasetManifest::compute_checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const std::string& s) {
    for (const unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& r : records) {
    mix(r.path);
    mix("|" + std::to_string(r.identity) + "|" + std::to_string(r.media_id) + "|" +
        split_name(r.split) + "\n");
  }
  return h;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["num_identities"] = manifest.num_identities;
  j["checksum"] = manifest.checksum;
  auto& records = j["records"] = nlohmann::json::array();
  for (const auto& r : manifest.records) {
    records.push_back({{"path", r.path},
                       {"identity", r.identity},
                       {"media_id", r.media_id},
                       {"split", split_name(r.split)}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  DatasetManifest m;
  m.num_identities = j.at("num_identities").get<int>();
  m.checksum = j.at("checksum").get<std::uint64_t>();
  for (const auto& rj : j.at("records")) {
    ManifestRecord r;
    r.path = rj.at("path").get<std::string>();
    r.identity = rj.at("identity").get<int>();
    r.media_id = rj.at("media_id").get<int>();
    r.split = split_from_name(rj.at("split").get<std::string>());
    m.records.push_back(r);
  }
  if (m.compute_checksum() != m.checksum)
    throw std::runtime_error("manifest checksum mismatch: " + path.string());
  return m;
}

std::vector<ImageRecord> load_records(const DatasetManifest& manifest,
                                      const std::filesystem::path& root,
                                      std::optional<Split> split) {
  std::vector<ImageRecord> out;
  for (const auto& r : manifest.records) {
    if (split && r.split != *split) continue;
    ImageRecord rec;
    rec.pixels = load_image(root / r.path);
    rec.identity = r.identity;
    rec.media_id = r.media_id;
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

struct FacePrimitives {
  double bg;
  double cx, cy;          // head center
  double ax, ay;          // head half-axes
  double skin;
  double hair_ay, hair_v;
  double eye_dx, eye_dy, eye_r, eye_v;
  double brow_v;
  double nose_len, nose_w, nose_v;
  double mouth_dy, mouth_hw, mouth_hh, mouth_v;
  struct Blob {
    double dx, dy, r, dv;
  };
  Blob blobs[3];   // coarse marks
  Blob dots[4];    // fine marks
  double stripe_amp, stripe_period, stripe_angle, stripe_phase;
};

FacePrimitives identity_latent(const SyntheticDatasetConfig& cfg, int identity) {
  Rng rng(cfg.seed, 1000003ULL + static_cast<std::uint64_t>(identity));
  const double W = cfg.image_w, H = cfg.image_h;
  FacePrimitives f;
  f.bg = 0.10 + 0.12 * rng.uniform();
  f.cx = W / 2.0 + (rng.uniform() - 0.5) * 18.0;
  f.cy = H / 2.0 + (rng.uniform() - 0.5) * 14.0;
  f.ax = 0.26 * W + 0.10 * W * rng.uniform();
  f.ay = 0.30 * H + 0.12 * H * rng.uniform();
  f.skin = 0.45 + 0.35 * rng.uniform();
  f.hair_ay = 0.25 + 0.25 * rng.uniform();
  f.hair_v = 0.05 + 0.25 * rng.uniform();
  f.eye_dx = (0.30 + 0.25 * rng.uniform()) * f.ax;
  f.eye_dy = -(0.15 + 0.20 * rng.uniform()) * f.ay;
  f.eye_r = 3.0 + 3.5 * rng.uniform();
  f.eye_v = 0.04 + 0.20 * rng.uniform();
  f.brow_v = 0.05 + 0.25 * rng.uniform();
  f.nose_len = 6.0 + 7.0 * rng.uniform();
  f.nose_w = 1.5 + 2.0 * rng.uniform();
  f.nose_v = f.skin * (0.55 + 0.25 * rng.uniform());
  f.mouth_dy = (0.35 + 0.22 * rng.uniform()) * f.ay;
  f.mouth_hw = 7.0 + 9.0 * rng.uniform();
  f.mouth_hh = 1.5 + 2.5 * rng.uniform();
  f.mouth_v = 0.08 + 0.30 * rng.uniform();
  for (auto& b : f.blobs) {
    b.dx = (rng.uniform() - 0.5) * 1.2 * f.ax;
    b.dy = (rng.uniform() - 0.5) * 1.2 * f.ay;
    b.r = 7.0 + 9.0 * rng.uniform();
    b.dv = (rng.uniform() - 0.5) * 0.30;
  }
  for (auto& d : f.dots) {
    d.dx = (rng.uniform() - 0.5) * 1.4 * f.ax;
    d.dy = (rng.uniform() - 0.5) * 1.4 * f.ay;
    d.r = 1.2 + 1.5 * rng.uniform();
    d.dv = (rng.uniform() - 0.5) * 0.5;
  }
  f.stripe_amp = 0.04 + 0.05 * rng.uniform();
  f.stripe_period = 2.5 + 3.5 * rng.uniform();
  f.stripe_angle = rng.uniform() * 3.14159265358979323846;
  f.stripe_phase = rng.uniform() * 6.28318530717958647692;
  return f;
}

// Soft-edged ellipse blend.
void draw_ellipse(Image& img, double cx, double cy, double ax, double ay, double value,
                  double alpha_scale = 1.0) {
  const double edge = 0.18;
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - ay - 2)));
  const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + ay + 2)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - ax - 2)));
  const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + ax + 2)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = (x - cx) / ax;
      const double dy = (y - cy) / ay;
      const double d = dx * dx + dy * dy;
      const double a = std::clamp((1.0 - d) / edge, 0.0, 1.0) * alpha_scale;
      if (a <= 0.0) continue;
      double& px = img.at(y, x, 0);
      px = px * (1.0 - a) + value * a;
    }
  }
}

void add_ellipse(Image& img, double cx, double cy, double ax, double ay, double delta) {
  const double edge = 0.25;
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - ay - 2)));
  const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + ay + 2)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - ax - 2)));
  const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + ax + 2)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = (x - cx) / ax;
      const double dy = (y - cy) / ay;
      const double a = std::clamp((1.0 - (dx * dx + dy * dy)) / edge, 0.0, 1.0);
      if (a > 0.0) img.at(y, x, 0) += delta * a;
    }
  }
}

}  // namespace

Image render_synthetic_image(const SyntheticDatasetConfig& cfg, int identity, int image_index) {
  const FacePrimitives f = identity_latent(cfg, identity);
  Rng jit(cfg.seed, 5000017ULL + static_cast<std::uint64_t>(identity) * 100003ULL +
                        static_cast<std::uint64_t>(image_index));
  const double sx = (jit.uniform() * 2.0 - 1.0) * cfg.jitter.pose_shift_px;
  const double sy = (jit.uniform() * 2.0 - 1.0) * cfg.jitter.pose_shift_px;
  const double bright = 1.0 + (jit.uniform() * 2.0 - 1.0) * cfg.jitter.brightness_range;

  Image img(cfg.image_h, cfg.image_w, 1);
  for (int y = 0; y < img.h; ++y) {
    const double grad = 0.04 * y / img.h;
    for (int x = 0; x < img.w; ++x) img.at(y, x, 0) = f.bg + grad;
  }

  const double cx = f.cx + sx, cy = f.cy + sy;
  draw_ellipse(img, cx, cy, f.ax, f.ay, f.skin);
  draw_ellipse(img, cx, cy - f.ay * (1.0 - f.hair_ay * 0.5), f.ax * 0.95, f.ay * f.hair_ay,
               f.hair_v);
  // Eyes and brows.
  for (const double side : {-1.0, 1.0}) {
    const double ex = cx + side * f.eye_dx;
    const double ey = cy + f.eye_dy;
    draw_ellipse(img, ex, ey, f.eye_r, f.eye_r * 0.75, f.eye_v);
    draw_ellipse(img, ex, ey - f.eye_r * 1.8, f.eye_r * 1.3, 1.6, f.brow_v);
  }
  draw_ellipse(img, cx, cy + f.nose_len * 0.3, f.nose_w, f.nose_len, f.nose_v);
  draw_ellipse(img, cx, cy + f.mouth_dy, f.mouth_hw, f.mouth_hh, f.mouth_v);
  for (const auto& b : f.blobs) add_ellipse(img, cx + b.dx, cy + b.dy, b.r, b.r, b.dv);
  for (const auto& d : f.dots) add_ellipse(img, cx + d.dx, cy + d.dy, d.r, d.r, d.dv);

  // Fine stripes inside the head region.
  const double ca = std::cos(f.stripe_angle), sa = std::sin(f.stripe_angle);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const double dx = (x - cx) / f.ax;
      const double dy = (y - cy) / f.ay;
      if (dx * dx + dy * dy > 1.0) continue;
      const double t = (ca * (x - cx) + sa * (y - cy)) * 6.28318530717958647692 / f.stripe_period;
      img.at(y, x, 0) += f.stripe_amp * std::sin(t + f.stripe_phase);
    }
  }

  for (double& v : img.data) {
    v = v * bright + jit.normal() * cfg.jitter.noise_sigma;
    v = std::clamp(v, 0.0, 1.0);
  }
  return img;
}

DatasetManifest generate_synthetic(const SyntheticDatasetConfig& cfg,
                                   const std::filesystem::path& out_dir) {
  if (cfg.num_identities < 2)
    throw std::invalid_argument("generate_synthetic: num_identities must be >= 2");
  if (cfg.images_per_identity < 2)
    throw std::invalid_argument("generate_synthetic: images_per_identity must be >= 2");
  if (cfg.media_group_size < 1)
    throw std::invalid_argument("generate_synthetic: media_group_size must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("generate_synthetic: cannot create " + out_dir.string());

  const int n = cfg.images_per_identity;
  const int groups = (n + cfg.media_group_size - 1) / cfg.media_group_size;
  int eval_groups = static_cast<int>(std::lround(cfg.eval_fraction * groups));
  eval_groups = std::clamp(eval_groups, 2, groups - 1);
  const int gallery_groups = eval_groups / 2;
  const int train_groups = groups - eval_groups;
  if (train_groups < 2)
    throw std::invalid_argument("generate_synthetic: need at least 2 non-eval media groups");
  // Validation is carved in whole media groups so no group straddles
  // splits.
  int val_groups = static_cast<int>(std::lround(cfg.val_fraction * train_groups));
  val_groups = std::clamp(val_groups, 1, train_groups - 1);
  const int open_set_ids =
      static_cast<int>(std::lround(cfg.open_set_fraction * cfg.num_identities));

  DatasetManifest manifest;
  manifest.num_identities = cfg.num_identities;

  std::vector<Image> sample_per_identity;  // first image of each id, for the self-check
  Rng check_rng(cfg.seed, 999983);

  for (int id = 0; id < cfg.num_identities; ++id) {
    char dirbuf[32];
    std::snprintf(dirbuf, sizeof(dirbuf), "id_%04d", id);
    std::filesystem::create_directories(out_dir / dirbuf, ec);
    if (ec) throw std::runtime_error("generate_synthetic: cannot create identity dir");
    const bool open_set_only = id >= cfg.num_identities - open_set_ids;

    for (int i = 0; i < n; ++i) {
      const int group = i / cfg.media_group_size;
      Split split;
      if (group >= groups - eval_groups) {
        const int eval_group = group - (groups - eval_groups);
        split = (!open_set_only && eval_group < gallery_groups) ? Split::gallery : Split::probe;
      } else {
        split = (group >= train_groups - val_groups) ? Split::val : Split::train;
      }

      const Image img = render_synthetic_image(cfg, id, i);
      if (i == 0) sample_per_identity.push_back(img);

      char namebuf[48];
      std::snprintf(namebuf, sizeof(namebuf), "m%03d_f%d.png", group, i % cfg.media_group_size);
      const std::string rel = std::string(dirbuf) + "/" + namebuf;
      save_image(out_dir / rel, img);

      ManifestRecord rec;
      rec.path = rel;
      rec.identity = id;
      rec.media_id = id * 10000 + group;
      rec.split = split;
      manifest.records.push_back(rec);
    }
  }

  // Self-check: identities must be farther apart than jitter spreads one
  // identity. Compares each identity's first image to a second rendering
  // of itself and to another identity's.
  double intra = 0.0, inter = 0.0;
  for (int id = 0; id < cfg.num_identities; ++id) {
    const Image again = render_synthetic_image(cfg, id, 1 % n);
    const Image& base = sample_per_identity[id];
    const int other = (id + 1 + check_rng.uniform_int(0, cfg.num_identities - 2)) %
                      cfg.num_identities;
    const Image& other_img = sample_per_identity[other];
    double d_intra = 0.0, d_inter = 0.0;
    for (std::size_t k = 0; k < base.data.size(); ++k) {
      const double a = base.data[k] - again.data[k];
      const double b = base.data[k] - other_img.data[k];
      d_intra += a * a;
      d_inter += b * b;
    }
    intra += std::sqrt(d_intra);
    inter += std::sqrt(d_inter);
  }
  if (!(intra < inter))
    throw std::runtime_error("generate_synthetic: self-check failed (intra >= inter distance)");

  manifest.checksum = manifest.compute_checksum();
  save_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

DatasetManifest ingest(const std::filesystem::path& root, const IngestRules& rules) {
  if (!std::filesystem::is_directory(root))
    throw std::invalid_argument("ingest: not a directory: " + root.string());

  std::vector<std::filesystem::path> identity_dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory()) identity_dirs.push_back(e.path());
  std::sort(identity_dirs.begin(), identity_dirs.end());
  if (identity_dirs.empty())
    throw std::invalid_argument("ingest: no identity directories under " + root.string());

  DatasetManifest manifest;
  manifest.num_identities = static_cast<int>(identity_dirs.size());
  int media_counter = 0;

  for (std::size_t id = 0; id < identity_dirs.size(); ++id) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(identity_dirs[id]))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());

    // Media groups: stem up to the last '_' (whole stem when absent).
    std::map<std::string, std::vector<std::filesystem::path>> media;
    int skipped = 0;
    for (const auto& f : files) {
      try {
        load_image(f);
      } catch (const std::exception& e) {
        std::cerr << "ingest: skipping unreadable file " << f << ": " << e.what() << '\n';
        ++skipped;
        continue;
      }
      const std::string stem = f.stem().string();
      const auto pos = stem.rfind('_');
      media[pos == std::string::npos ? stem : stem.substr(0, pos)].push_back(f);
    }
    if (skipped > 0)
      std::cerr << "ingest: " << skipped << " file(s) excluded for identity "
                << identity_dirs[id].filename() << '\n';

    const int groups = static_cast<int>(media.size());
    const int train_groups = static_cast<int>(std::lround(rules.train_fraction * groups));
    const int eval_total = groups - train_groups;
    const int gallery_groups = static_cast<int>(std::lround(rules.gallery_fraction * eval_total));

    int gi = 0;
    std::vector<ManifestRecord> train_part;
    for (const auto& [key, group_files] : media) {
      const int media_id = media_counter++;
      Split split;
      if (gi < train_groups)
        split = Split::train;  // val carved below
      else if (gi - train_groups < gallery_groups)
        split = Split::gallery;
      else
        split = Split::probe;
      for (const auto& f : group_files) {
        ManifestRecord rec;
        rec.path = std::filesystem::relative(f, root).string();
        rec.identity = static_cast<int>(id);
        rec.media_id = media_id;
        rec.split = split;
        if (split == Split::train)
          train_part.push_back(rec);
        else
          manifest.records.push_back(rec);
      }
      ++gi;
    }
    const int val_count =
        static_cast<int>(std::lround(rules.val_fraction * train_part.size()));
    for (std::size_t i = 0; i < train_part.size(); ++i) {
      if (static_cast<int>(train_part.size() - i) <= val_count)
        train_part[i].split = Split::val;
      manifest.records.push_back(train_part[i]);
    }
  }
  std::sort(manifest.records.begin(), manifest.records.end(),
            [](const ManifestRecord& a, const ManifestRecord& b) { return a.path < b.path; });
  manifest.checksum = manifest.compute_checksum();
  return manifest;
}

}  // namespace crossres
