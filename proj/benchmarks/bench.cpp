#include <benchmark/benchmark.h>

#include "crossres/image.hpp"
#include "crossres/metrics.hpp"
#include "crossres/model.hpp"

namespace {

using namespace crossres;

Image noise_image(int h, int w, std::uint64_t seed) {
  Image img(h, w, 1);
  Rng rng(seed);
  for (auto& v : img.data) v = rng.uniform();
  return img;
}

void BM_BilinearResize(benchmark::State& state) {
  const Image img = noise_image(137, 180, 1);
  const int side = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(bilinear_resize(img, side, side));
  }
}
BENCHMARK(BM_BilinearResize)->Arg(8)->Arg(64)->Arg(256);

void BM_Degrade(benchmark::State& state) {
  ImageRecord rec;
  rec.pixels = noise_image(137, 180, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(degrade(rec, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_Degrade)->Arg(8)->Arg(64);

void BM_ModelForward(benchmark::State& state) {
  ModelSpec spec;
  spec.num_classes = 32;
  Rng rng(3);
  const Model model = Model::init(spec, rng);
  const Image input = noise_image(224, 224, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(input));
  }
}
BENCHMARK(BM_ModelForward);

void BM_RocSweep(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> genuine, impostor;
  for (int i = 0; i < state.range(0); ++i) {
    genuine.push_back(rng.normal() + 1.0);
    impostor.push_back(rng.normal());
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(roc(genuine, impostor));
  }
}
BENCHMARK(BM_RocSweep)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
