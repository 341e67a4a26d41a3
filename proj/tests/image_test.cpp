#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "crossres/image.hpp"

using namespace crossres;

namespace {

Image noise_image(int h, int w, int c, std::uint64_t seed) {
  Image img(h, w, c);
  Rng rng(seed, 31);
  for (auto& v : img.data) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("degrade probability is the clamped linear ramp") {
  CHECK(degrade_probability(0, 10000) == 0.0);
  CHECK(degrade_probability(2500, 10000) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(degrade_probability(10000, 10000) == 1.0);
  CHECK(degrade_probability(20000, 10000) == 1.0);
  for (long s = 0; s <= 1000; ++s)
    CHECK(degrade_probability(s, 1000) == static_cast<double>(s) / 1000.0);
}

TEST_CASE("resolution sampler covers exactly the power-of-two grid, uniformly") {
  Rng rng(21);
  ResolutionSet rset;
  const auto values = rset.values();
  CHECK(values == std::vector<int>{8, 16, 32, 64, 128, 256});

  std::map<int, long> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[sample_resolution(rng, rset)];
  CHECK(counts.size() == 6);
  for (const auto& [r, c] : counts)
    CHECK(std::find(values.begin(), values.end(), r) != values.end());

  // df = 5, p = 0.01 critical value.
  const double expected = draws / 6.0;
  double chi2 = 0.0;
  for (const auto& [r, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 15.086);
}

TEST_CASE("realized curriculum degradation count sits within 3 sigma") {
  // Sum of Bernoulli(i/10000) over i in [0, 10000): mean 4999.5,
  // sigma = sqrt(sum p(1-p)) ~ 40.8.
  Rng rng(77);
  ResolutionSet rset;
  long degraded = 0;
  const long total = 10000;
  for (long s = 0; s < total; ++s) {
    const ViewPlan plan = plan_train_view(137, 180, degrade_probability(s, total), rng, rset);
    if (plan.degraded) ++degraded;
  }
  CHECK(std::abs(degraded - 4999.5) < 3 * 40.83);
}

TEST_CASE("bilinear resize: constant images stay constant") {
  Image img(5, 7, 2);
  for (auto& v : img.data) v = 0.375;
  const Image out = bilinear_resize(img, 13, 3);
  for (const double v : out.data) CHECK(v == doctest::Approx(0.375).epsilon(1e-15));
}

TEST_CASE("bilinear resize matches hand-computed half-pixel samples") {
  Image img(1, 2, 1);
  img.at(0, 0, 0) = 0.0;
  img.at(0, 1, 0) = 1.0;
  const Image up = bilinear_resize(img, 1, 4);
  CHECK(up.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(up.at(0, 1, 0) == doctest::Approx(0.25));
  CHECK(up.at(0, 2, 0) == doctest::Approx(0.75));
  CHECK(up.at(0, 3, 0) == doctest::Approx(1.0));

  Image row(1, 4, 1);
  for (int x = 0; x < 4; ++x) row.at(0, x, 0) = x / 3.0;
  const Image down = bilinear_resize(row, 1, 2);
  CHECK(down.at(0, 0, 0) == doctest::Approx(0.5 / 3.0));
  CHECK(down.at(0, 1, 0) == doctest::Approx(2.5 / 3.0));
}

TEST_CASE("bilinear resize to the same shape is the identity") {
  const Image img = noise_image(9, 11, 1, 5);
  const Image out = bilinear_resize(img, 9, 11);
  CHECK(out.data == img.data);
}

TEST_CASE("scaled long side rounds half to even and clamps at 1") {
  CHECK(scaled_long_side(3, 2, 1) == 2);   // 1.5 -> 2
  CHECK(scaled_long_side(5, 2, 1) == 2);   // 2.5 -> 2
  CHECK(scaled_long_side(7, 2, 1) == 4);   // 3.5 -> 4
  CHECK(scaled_long_side(150, 100, 8) == 12);
  CHECK(scaled_long_side(400, 300, 256) == 341);  // 341.33 -> 341
  CHECK(scaled_long_side(100, 100, 1) == 1);
  CHECK(scaled_long_side(3, 100, 1) == 1);  // 0.03 clamps to 1
}

TEST_CASE("degrade equals down-then-up through the documented intermediate") {
  ImageRecord rec;
  rec.pixels = noise_image(100, 150, 1, 9);
  const ImageRecord out = degrade(rec, 8);
  CHECK(out.pixels.h == 100);
  CHECK(out.pixels.w == 150);

  // 150 * 8/100 = 12, so the bottleneck is 8x12.
  Image expected = bilinear_resize(bilinear_resize(rec.pixels, 8, 12), 100, 150);
  for (auto& v : expected.data) v = std::min(1.0, std::max(0.0, v));
  CHECK(out.pixels.data == expected.data);
}

TEST_CASE("degrade is a no-op at or above the native shortest side") {
  ImageRecord rec;
  rec.pixels = noise_image(60, 80, 1, 13);
  CHECK(degrade(rec, 60).pixels.data == rec.pixels.data);
  CHECK(degrade(rec, 256).pixels.data == rec.pixels.data);
  CHECK(degrade(rec, 59).pixels.data != rec.pixels.data);
}

TEST_CASE("degrade output stays inside [0,1]") {
  ImageRecord rec;
  rec.pixels = noise_image(64, 64, 1, 17);
  const ImageRecord out = degrade(rec, 8);
  for (const double v : out.pixels.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("resize_shortest_side hits the documented dimensions") {
  const Image img = noise_image(300, 400, 1, 19);
  const Image out = resize_shortest_side(img, 256);
  CHECK(out.h == 256);
  CHECK(out.w == 341);

  const Image tall = noise_image(400, 300, 1, 19);
  const Image out2 = resize_shortest_side(tall, 256);
  CHECK(out2.h == 341);
  CHECK(out2.w == 256);
}

TEST_CASE("eval input is the center 224 crop of the 256-shortest resize") {
  ImageRecord rec;
  rec.pixels = noise_image(300, 400, 1, 23);
  const Image got = prepare_eval_input(rec);
  CHECK(got.h == 224);
  CHECK(got.w == 224);

  // Resized to 256x341; center offsets (16, 58).
  const Image expected = crop(resize_shortest_side(rec.pixels, 256), 16, 58, 224);
  CHECK(got.data == expected.data);
}

TEST_CASE("eval input with a target degrades before the resize") {
  ImageRecord rec;
  rec.pixels = noise_image(120, 90, 1, 29);
  const Image got = prepare_eval_input(rec, 8);
  // 120x90 resizes to 341x256; center offsets (58, 16).
  const Image expected = crop(resize_shortest_side(degrade(rec, 8).pixels, 256), 58, 16, 224);
  CHECK(got.data == expected.data);
}

TEST_CASE("train view: teacher and student share one crop window") {
  ImageRecord rec;
  rec.pixels = noise_image(137, 180, 1, 37);
  ResolutionSet rset;
  Rng rng(41);
  // Force a run of plans until one is degraded.
  ViewPlan plan;
  do {
    plan = plan_train_view(rec.native_h(), rec.native_w(), 0.5, rng, rset);
  } while (!plan.degraded);

  const TrainView view = build_train_view(rec, plan);
  CHECK(view.degraded);
  CHECK(view.degraded_resolution == plan.resolution);
  CHECK(view.teacher_input.h == 224);
  CHECK(view.student_input.w == 224);

  const Image teacher =
      crop(resize_shortest_side(rec.pixels, 256), plan.crop_y, plan.crop_x, 224);
  const Image student = crop(resize_shortest_side(degrade(rec, plan.resolution).pixels, 256),
                             plan.crop_y, plan.crop_x, 224);
  CHECK(view.teacher_input.data == teacher.data);
  CHECK(view.student_input.data == student.data);
}

TEST_CASE("train view: clean plans give identical teacher and student inputs") {
  ImageRecord rec;
  rec.pixels = noise_image(137, 180, 1, 43);
  ResolutionSet rset;
  Rng rng(47);
  ViewPlan plan;
  do {
    plan = plan_train_view(rec.native_h(), rec.native_w(), 0.5, rng, rset);
  } while (plan.degraded);
  const TrainView view = build_train_view(rec, plan);
  CHECK(!view.degraded);
  CHECK(!view.degraded_resolution.has_value());
  CHECK(view.teacher_input.data == view.student_input.data);
}

TEST_CASE("plans are deterministic in the rng state") {
  ResolutionSet rset;
  Rng a(51), b(51);
  for (int i = 0; i < 200; ++i) {
    const ViewPlan pa = plan_train_view(137, 180, 0.7, a, rset);
    const ViewPlan pb = plan_train_view(137, 180, 0.7, b, rset);
    CHECK(pa.degraded == pb.degraded);
    CHECK(pa.resolution == pb.resolution);
    CHECK(pa.crop_y == pb.crop_y);
    CHECK(pa.crop_x == pb.crop_x);
  }
}

TEST_CASE("crop windows stay inside the resized frame") {
  ResolutionSet rset;
  Rng rng(53);
  for (int i = 0; i < 500; ++i) {
    const ViewPlan plan = plan_train_view(300, 400, 0.5, rng, rset);
    CHECK(plan.crop_y >= 0);
    CHECK(plan.crop_x >= 0);
    CHECK(plan.crop_y + 224 <= 256);
    CHECK(plan.crop_x + 224 <= 341);
  }
}
