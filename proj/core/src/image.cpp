#include "crossres/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crossres {

double CurriculumState::degrade_probability() const {
  return crossres::degrade_probability(step, total_steps);
}

double degrade_probability(long step, long total_steps) {
  if (total_steps < 1) throw std::invalid_argument("degrade_probability: total_steps must be >= 1");
  if (step < 0) throw std::invalid_argument("degrade_probability: step must be >= 0");
  return std::min(static_cast<double>(step) / static_cast<double>(total_steps), 1.0);
}

int sample_resolution(Rng& rng, const ResolutionSet& rset) {
  if (rset.exponent_lo > rset.exponent_hi)
    throw std::invalid_argument("sample_resolution: empty exponent range");
  return 1 << rng.uniform_int(rset.exponent_lo, rset.exponent_hi);
}

Image bilinear_resize(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: output dims must be >= 1");
  if (out_h == img.h && out_w == img.w) return img;

  Image out(out_h, out_w, img.c);
  const double sy = static_cast<double>(img.h) / out_h;
  const double sx = static_cast<double>(img.w) / out_w;

  for (int y = 0; y < out_h; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(src_y));
    double fy = src_y - y0;
    int y1 = y0 + 1;
    y0 = std::clamp(y0, 0, img.h - 1);
    y1 = std::clamp(y1, 0, img.h - 1);
    for (int x = 0; x < out_w; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(src_x));
      double fx = src_x - x0;
      int x1 = x0 + 1;
      x0 = std::clamp(x0, 0, img.w - 1);
      x1 = std::clamp(x1, 0, img.w - 1);
      for (int ch = 0; ch < img.c; ++ch) {
        const double top = img.at(y0, x0, ch) * (1.0 - fx) + img.at(y0, x1, ch) * fx;
        const double bot = img.at(y1, x0, ch) * (1.0 - fx) + img.at(y1, x1, ch) * fx;
        out.at(y, x, ch) = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return out;
}

int scaled_long_side(int long_side, int short_side, int new_short) {
  const double x = static_cast<double>(long_side) * new_short / short_side;
  const double f = std::floor(x);
  const double frac = x - f;
  double r;
  if (frac > 0.5) {
    r = f + 1.0;
  } else if (frac < 0.5) {
    r = f;
  } else {
    r = (std::fmod(f, 2.0) == 0.0) ? f : f + 1.0;
  }
  return std::max(1, static_cast<int>(r));
}

ImageRecord degrade(const ImageRecord& img, int target) {
  if (target < 1) throw std::invalid_argument("degrade: target must be >= 1");
  const int h = img.pixels.h;
  const int w = img.pixels.w;
  const int shortest = std::min(h, w);
  if (target >= shortest) return img;  // no-op branch

  int small_h, small_w;
  if (h <= w) {
    small_h = target;
    small_w = scaled_long_side(w, h, target);
  } else {
    small_w = target;
    small_h = scaled_long_side(h, w, target);
  }

  ImageRecord out = img;
  out.pixels = bilinear_resize(bilinear_resize(img.pixels, small_h, small_w), h, w);
  for (double& v : out.pixels.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Image resize_shortest_side(const Image& img, int shortest) {
  if (img.h <= img.w)
    return bilinear_resize(img, shortest, scaled_long_side(img.w, img.h, shortest));
  return bilinear_resize(img, scaled_long_side(img.h, img.w, shortest), shortest);
}

Image crop(const Image& img, int oy, int ox, int side) {
  if (oy < 0 || ox < 0 || oy + side > img.h || ox + side > img.w)
    throw std::invalid_argument("crop: window out of bounds");
  Image out(side, side, img.c);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int ch = 0; ch < img.c; ++ch) out.at(y, x, ch) = img.at(oy + y, ox + x, ch);
  return out;
}

ViewPlan plan_train_view(int native_h, int native_w, double degrade_prob, Rng& rng,
                         const ResolutionSet& rset) {
  ViewPlan plan;
  plan.degraded = rng.uniform() < degrade_prob;
  if (plan.degraded) plan.resolution = sample_resolution(rng, rset);

  // Dims after resize-shortest-to-256 follow from the native dims alone
  // (degrade preserves them).
  int rh, rw;
  if (native_h <= native_w) {
    rh = kResizeShortest;
    rw = scaled_long_side(native_w, native_h, kResizeShortest);
  } else {
    rw = kResizeShortest;
    rh = scaled_long_side(native_h, native_w, kResizeShortest);
  }
  plan.crop_y = rng.uniform_int(0, rh - kNetInputSide);
  plan.crop_x = rng.uniform_int(0, rw - kNetInputSide);
  return plan;
}

TrainView build_train_view(const ImageRecord& img, const ViewPlan& plan) {
  TrainView view;
  view.degraded = plan.degraded;

  ImageRecord student_src = img;
  if (plan.degraded) {
    view.degraded_resolution = plan.resolution;
    student_src = degrade(img, plan.resolution);
  }

  const Image teacher_resized = resize_shortest_side(img.pixels, kResizeShortest);
  view.teacher_input = crop(teacher_resized, plan.crop_y, plan.crop_x, kNetInputSide);
  if (plan.degraded) {
    const Image student_resized = resize_shortest_side(student_src.pixels, kResizeShortest);
    view.student_input = crop(student_resized, plan.crop_y, plan.crop_x, kNetInputSide);
  } else {
    view.student_input = view.teacher_input;
  }
  return view;
}

TrainView prepare_train_view(const ImageRecord& img, const CurriculumState& state,
                             Rng& rng, const ResolutionSet& rset) {
  const ViewPlan plan =
      plan_train_view(img.pixels.h, img.pixels.w, state.degrade_probability(), rng, rset);
  return build_train_view(img, plan);
}

Image prepare_eval_input(const ImageRecord& img, std::optional<int> target) {
  ImageRecord src = img;
  if (target) src = degrade(img, *target);
  const Image resized = resize_shortest_side(src.pixels, kResizeShortest);
  const int oy = (resized.h - kNetInputSide) / 2;
  const int ox = (resized.w - kNetInputSide) / 2;
  return crop(resized, oy, ox, kNetInputSide);
}

}  // namespace crossres
