#pragma once

#include <optional>
#include <set>
#include <vector>

#include "crossres/rng.hpp"

namespace crossres {

/// Row-major HxWxC raster of intensities in [0, 1].
struct Image {
  int h = 0;
  int w = 0;
  int c = 1;
  std::vector<double> data;  // size h*w*c, index (y*w + x)*c + ch

  Image() = default;
  Image(int h, int w, int c) : h(h), w(w), c(c), data(static_cast<std::size_t>(h) * w * c, 0.0) {}

  double& at(int y, int x, int ch) { return data[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
  double at(int y, int x, int ch) const { return data[(static_cast<std::size_t>(y) * w + x) * c + ch]; }

  bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }
};

/// One labeled image with its media grouping tag.
struct ImageRecord {
  Image pixels;
  int identity = 0;
  int media_id = 0;

  int native_h() const { return pixels.h; }
  int native_w() const { return pixels.w; }
};

/// The training-time downsampling grid: powers of two 2^lo .. 2^hi.
struct ResolutionSet {
  int exponent_lo = 3;
  int exponent_hi = 8;

  std::vector<int> values() const {
    std::vector<int> v;
    for (int e = exponent_lo; e <= exponent_hi; ++e) v.push_back(1 << e);
    return v;
  }
};

/// Training-progress fraction driving the degradation Bernoulli.
struct CurriculumState {
  long step = 0;
  long total_steps = 1;

  double degrade_probability() const;
};

/// Paired 224x224 teacher/student crops produced for one training image.
struct TrainView {
  Image teacher_input;
  Image student_input;
  bool degraded = false;
  std::optional<int> degraded_resolution;  // shortest side, when degraded
};

inline constexpr int kNetInputSide = 224;
inline constexpr int kResizeShortest = 256;

/// Linear curriculum: min(step/total_steps, 1).
double degrade_probability(long step, long total_steps);

/// Draw 2^e with e uniform in [rset.exponent_lo, rset.exponent_hi].
int sample_resolution(Rng& rng, const ResolutionSet& rset);

/// Plain bilinear resample to (out_h, out_w), half-pixel centers, no
/// antialiasing prefilter. This is the single interpolation kernel used
/// everywhere (both the down and the up direction of degrade).
Image bilinear_resize(const Image& img, int out_h, int out_w);

/// Round-half-to-even of the long side under an aspect-preserving scale,
/// clamped to >= 1.
int scaled_long_side(int long_side, int short_side, int new_short);

/// Downsample so the shortest side equals `target` (aspect preserved),
/// then resize back to the native dimensions. No-op when target is at or
/// above the native shortest side. Output clamped to [0, 1].
ImageRecord degrade(const ImageRecord& img, int target);

/// Resize so the shortest side equals `shortest` (up or down).
Image resize_shortest_side(const Image& img, int shortest);

Image crop(const Image& img, int oy, int ox, int side);

/// The random decisions of one training view, drawn separately from the
/// (deterministic) pixel work so batches can draw sequentially and build
/// crops in parallel.
struct ViewPlan {
  bool degraded = false;
  int resolution = 0;  // shortest side, when degraded
  int crop_y = 0;
  int crop_x = 0;
};

/// Draw order: degradation Bernoulli, resolution exponent (only when
/// degraded), crop y, crop x.
ViewPlan plan_train_view(int native_h, int native_w, double degrade_prob, Rng& rng,
                         const ResolutionSet& rset);

TrainView build_train_view(const ImageRecord& img, const ViewPlan& plan);

/// Curriculum-gated teacher/student pair: with probability
/// state.degrade_probability() the student source is degraded at a
/// sampled resolution; both branches then share one random 224x224 crop
/// window.
TrainView prepare_train_view(const ImageRecord& img, const CurriculumState& state,
                             Rng& rng, const ResolutionSet& rset);

/// Like prepare_train_view but single-branch and deterministic:
/// optional degrade, resize shortest side to 256, center crop 224.
Image prepare_eval_input(const ImageRecord& img, std::optional<int> target = std::nullopt);

}  // namespace crossres
