#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "crossres/checkpoint.hpp"
#include "crossres/trainer.hpp"

using namespace crossres;

namespace {

ModelSpec small_spec(int input_size = 16) {
  ModelSpec spec;
  spec.input_size = input_size;
  spec.conv_channels = {2, 2};
  spec.embedding_dim = 4;
  spec.num_classes = 2;
  return spec;
}

Image class_image(int side, int label, std::uint64_t seed) {
  // Separable toy data: class 0 bright left half, class 1 bright right.
  Image img(side, side, 1);
  Rng rng(seed, 6);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const bool bright = (label == 0) == (x < side / 2);
      img.at(y, x, 0) = (bright ? 0.8 : 0.2) + 0.1 * rng.uniform();
    }
  return img;
}

TrainView plain_view(const Image& img) {
  TrainView v;
  v.teacher_input = img;
  v.student_input = img;
  return v;
}

TrainState fresh_state(const ModelSpec& spec, const TrainConfig& cfg, std::uint64_t seed) {
  TrainState state;
  Rng rng(seed, 0);
  state.student = Model::init(spec, rng);
  state.momentum.assign(state.student.num_params(), 0.0);
  state.lr_current = cfg.lr_init;
  return state;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "crossres_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config validation rejects out-of-range values") {
  TrainConfig cfg;
  cfg.validate();
  auto bad = cfg;
  bad.lambda_distill = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.lr_decay_factor = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.fixed_degrade_frequency = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("plateau scheduler fires only after `patience` flat epochs") {
  PlateauScheduler s;
  CHECK(!s.observe(1.0, 1e-3, 3));  // first epoch sets the best
  CHECK(!s.observe(0.5, 1e-3, 3));  // clear improvement
  CHECK(!s.observe(0.4999, 1e-3, 3));  // sub-threshold improvement: flat (1)
  CHECK(!s.observe(0.4999, 1e-3, 3));  // flat (2)
  CHECK(s.observe(0.4999, 1e-3, 3));   // flat (3): decay, counter resets
  CHECK(s.counter == 0);
  CHECK(s.best == 0.5);  // best never moved on sub-threshold gains
  CHECK(!s.observe(0.1, 1e-3, 3));
  CHECK(s.best == 0.1);
}

TEST_CASE("replayed lr decay divides by the factor, not an approximation of it") {
  TrainConfig cfg;
  cfg.plateau_patience = 2;
  cfg.lr_decay_factor = 5.0;
  // 1.0 best; 1.0, 1.0 flat -> one decay; 1.0, 1.0 flat -> second decay.
  const double lr = update_lr_on_plateau({1.0, 1.0, 1.0, 1.0, 1.0}, 1e-3, cfg);
  CHECK(lr == doctest::Approx(1e-3 / 25.0).epsilon(1e-12));
}

TEST_CASE("train_step is bit-identical across jobs counts") {
  const ModelSpec spec = small_spec();
  TrainConfig cfg;
  cfg.mode = TrainMode::nT_nC;
  cfg.lr_init = 0.05;

  std::vector<TrainView> views;
  std::vector<int> labels;
  for (int i = 0; i < 6; ++i) {
    views.push_back(plain_view(class_image(16, i % 2, 50 + i)));
    labels.push_back(i % 2);
  }

  TrainState s1 = fresh_state(spec, cfg, 9);
  TrainState s4 = fresh_state(spec, cfg, 9);
  for (int step = 0; step < 5; ++step) {
    const auto l1 = train_step(s1, cfg, views, labels, 1);
    const auto l4 = train_step(s4, cfg, views, labels, 4);
    CHECK(l1.total == l4.total);
  }
  CHECK(s1.student.params() == s4.student.params());
  CHECK(s1.momentum == s4.momentum);
}

TEST_CASE("training reduces the loss on separable toy data") {
  const ModelSpec spec = small_spec();
  TrainConfig cfg;
  cfg.mode = TrainMode::nT_nC;
  cfg.lr_init = 0.05;
  cfg.weight_decay = 0.0;

  std::vector<TrainView> views;
  std::vector<int> labels;
  for (int i = 0; i < 8; ++i) {
    views.push_back(plain_view(class_image(16, i % 2, 80 + i)));
    labels.push_back(i % 2);
  }
  TrainState state = fresh_state(spec, cfg, 10);
  const double first = train_step(state, cfg, views, labels).total;
  double last = first;
  for (int i = 0; i < 40; ++i) last = train_step(state, cfg, views, labels).total;
  CHECK(last < 0.5 * first);
}

TEST_CASE("T-C steps never touch the teacher and pull student features") {
  const ModelSpec spec = small_spec();
  TrainConfig cfg;
  cfg.mode = TrainMode::T_C;
  cfg.lambda_distill = 0.1;
  cfg.lr_init = 0.02;

  Rng trng(11);
  const Model teacher = Model::init(spec, trng).freeze();
  const std::uint64_t hash_before = teacher.param_hash();

  TrainState state = fresh_state(spec, cfg, 12);
  state.teacher = teacher;
  state.has_teacher = true;

  std::vector<TrainView> views;
  std::vector<int> labels;
  for (int i = 0; i < 4; ++i) {
    views.push_back(plain_view(class_image(16, i % 2, 90 + i)));
    labels.push_back(i % 2);
  }
  double first_dist = 0.0, last_dist = 0.0;
  for (int i = 0; i < 30; ++i) {
    const auto lb = train_step(state, cfg, views, labels);
    CHECK(lb.lambda_applied == 0.1);
    if (i == 0) first_dist = lb.distillation;
    last_dist = lb.distillation;
  }
  CHECK(state.teacher.param_hash() == hash_before);
  CHECK(last_dist < first_dist);
}

TEST_CASE("T-C mode without a teacher is rejected") {
  const ModelSpec spec = small_spec();
  TrainConfig cfg;
  cfg.mode = TrainMode::T_C;
  TrainState state = fresh_state(spec, cfg, 13);
  CHECK_THROWS_AS(
      train_step(state, cfg, {plain_view(class_image(16, 0, 1))}, {0}),
      std::invalid_argument);
}

TEST_CASE("an absurd learning rate raises TrainingDivergedError") {
  const ModelSpec spec = small_spec();
  TrainConfig cfg;
  cfg.mode = TrainMode::nT_nC;
  cfg.lr_init = 1e14;
  TrainState state = fresh_state(spec, cfg, 14);
  std::vector<TrainView> views = {plain_view(class_image(16, 0, 2)),
                                  plain_view(class_image(16, 1, 3))};
  std::vector<int> labels = {0, 1};
  CHECK_THROWS_AS(
      {
        for (int i = 0; i < 50; ++i) train_step(state, cfg, views, labels);
      },
      TrainingDivergedError);
}

TEST_CASE("fit resumes bit-exactly from an epoch-boundary checkpoint") {
  const ModelSpec spec = small_spec(kNetInputSide);
  std::vector<ImageRecord> train, val;
  for (int i = 0; i < 12; ++i) {
    ImageRecord rec;
    rec.pixels = class_image(240, i % 2, 200 + i);
    rec.identity = i % 2;
    (i < 10 ? train : val).push_back(std::move(rec));
  }

  TrainConfig cfg;
  cfg.mode = TrainMode::nT_nC;
  cfg.batch_size = 5;
  cfg.total_steps = 8;  // 4 epochs of 2 steps
  cfg.seed = 99;
  cfg.fixed_degrade_frequency = 0.5;

  FitOptions opts;
  opts.spec = spec;

  const auto dir_full = temp_dir("fit_full");
  const TrainState full = fit(cfg, train, val, nullptr, dir_full, opts);
  CHECK(full.step == 8);

  const auto dir_half = temp_dir("fit_half");
  FitOptions half_opts = opts;
  half_opts.stop_after_epoch = 2;
  const TrainState half = fit(cfg, train, val, nullptr, dir_half, half_opts);
  CHECK(half.step == 4);

  FitOptions resume_opts = opts;
  resume_opts.resume_from = dir_half / "last.ckpt";
  const TrainState resumed = fit(cfg, train, val, nullptr, temp_dir("fit_resume"), resume_opts);

  CHECK(resumed.step == full.step);
  CHECK(resumed.student.params() == full.student.params());
  CHECK(resumed.momentum == full.momentum);
  CHECK(resumed.val_history.size() == full.val_history.size());
  for (std::size_t i = 0; i < full.val_history.size(); ++i) {
    CHECK(resumed.val_history[i].train_loss == full.val_history[i].train_loss);
    CHECK(resumed.val_history[i].lowres24_metric == full.val_history[i].lowres24_metric);
  }
}

TEST_CASE("validate scores both resolutions in [0,1]") {
  const ModelSpec spec = small_spec(kNetInputSide);
  Rng rng(15);
  const Model m = Model::init(spec, rng);
  std::vector<ImageRecord> val;
  for (int i = 0; i < 4; ++i) {
    ImageRecord rec;
    rec.pixels = class_image(240, i % 2, 300 + i);
    rec.identity = i % 2;
    val.push_back(std::move(rec));
  }
  const auto [full, low] = validate(m, val, 2);
  CHECK(full >= 0.0);
  CHECK(full <= 1.0);
  CHECK(low >= 0.0);
  CHECK(low <= 1.0);
}
