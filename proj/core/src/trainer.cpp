#include "crossres/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "crossres/checkpoint.hpp"

namespace crossres {

void TrainConfig::validate() const {
  if (lambda_distill < 0.0) throw std::invalid_argument("TrainConfig: lambda_distill < 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size < 1");
  if (lr_init <= 0.0) throw std::invalid_argument("TrainConfig: lr_init <= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("TrainConfig: momentum out of [0,1)");
  if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay < 0");
  if (lr_decay_factor <= 1.0) throw std::invalid_argument("TrainConfig: lr_decay_factor <= 1");
  if (plateau_patience < 1) throw std::invalid_argument("TrainConfig: plateau_patience < 1");
  if (plateau_min_rel_improvement < 0.0)
    throw std::invalid_argument("TrainConfig: plateau_min_rel_improvement < 0");
  if (total_steps < 1) throw std::invalid_argument("TrainConfig: total_steps < 1");
  if (fixed_degrade_frequency < 0.0 || fixed_degrade_frequency > 1.0)
    throw std::invalid_argument("TrainConfig: fixed_degrade_frequency out of [0,1]");
}

bool PlateauScheduler::observe(double loss, double min_rel_improvement, int patience) {
  if (!has_best || loss < best * (1.0 - min_rel_improvement)) {
    best = loss;
    has_best = true;
    counter = 0;
    return false;
  }
  ++counter;
  if (counter >= patience) {
    counter = 0;
    return true;
  }
  return false;
}

double update_lr_on_plateau(const std::vector<double>& epoch_losses, double lr,
                            const TrainConfig& cfg) {
  if (epoch_losses.empty()) throw std::invalid_argument("update_lr_on_plateau: empty history");
  PlateauScheduler sched;
  for (const double loss : epoch_losses) {
    if (sched.observe(loss, cfg.plateau_min_rel_improvement, cfg.plateau_patience))
      lr /= cfg.lr_decay_factor;
  }
  return lr;
}

LossBreakdown train_step(TrainState& state, const TrainConfig& cfg,
                         const std::vector<TrainView>& views, const std::vector<int>& labels,
                         int jobs) {
  const std::size_t n = views.size();
  if (n == 0) throw std::invalid_argument("train_step: empty batch");
  if (labels.size() != n) throw std::invalid_argument("train_step: label count mismatch");
  const bool use_teacher = cfg.mode == TrainMode::T_C;
  if (use_teacher) {
    if (!state.has_teacher) throw std::invalid_argument("train_step: T-C mode needs a teacher");
    if (!state.teacher.frozen()) throw std::invalid_argument("train_step: teacher must be frozen");
  }

  const std::size_t np = state.student.num_params();

  // Per-image forward/backward, reduced in index order afterwards so the
  // result is bit-identical for any jobs count.
  std::vector<Activations> acts(n);
  std::vector<Embedding> teacher_feats(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    acts[i] = state.student.forward(views[i].student_input);
    if (use_teacher) {
      Activations t = state.teacher.forward(views[i].teacher_input);
      teacher_feats[i].vector = std::move(t.embedding);
      teacher_feats[i].source_role = SourceRole::teacher;
    }
  });

  std::vector<std::vector<double>> logits(n);
  std::vector<Embedding> student_feats(n);
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = acts[i].logits;
    student_feats[i].vector = acts[i].embedding;
  }

  LossBreakdown lb;
  std::vector<std::vector<double>> d_logits, d_feats;
  if (use_teacher) {
    lb = distillation_loss(logits, labels, teacher_feats, student_feats, cfg.lambda_distill,
                           cfg.distill_reduction, &d_logits, &d_feats);
  } else {
    lb.classification = softmax_cross_entropy(logits, labels, &d_logits);
    lb.total = lb.classification;
    lb.lambda_applied = 0.0;
    d_feats.assign(n, {});
  }
  if (!std::isfinite(lb.total))
    throw TrainingDivergedError("train_step: non-finite loss", state.step);

  std::vector<std::vector<double>> grads(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    grads[i].assign(np, 0.0);
    state.student.backward(acts[i], d_feats[i], d_logits[i], grads[i]);
  });

  std::vector<double> grad(np, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < np; ++k) grad[k] += grads[i][k];

  auto& params = state.student.params();
  for (std::size_t k = 0; k < np; ++k) {
    const double g = grad[k] + cfg.weight_decay * params[k];
    state.momentum[k] = cfg.momentum * state.momentum[k] + g;
    params[k] -= state.lr_current * state.momentum[k];
  }
  state.step += 1;
  return lb;
}

std::pair<double, double> validate(const Model& student, const std::vector<ImageRecord>& val_set,
                                   int jobs) {
  if (val_set.empty()) throw std::invalid_argument("validate: empty validation set");

  long correct_full = 0, correct_low = 0;
  std::vector<int> pred_full(val_set.size()), pred_low(val_set.size());
  parallel_for(val_set.size(), jobs, [&](std::size_t i) {
    const auto top1 = [&](const Image& input) {
      const auto logits = student.classify({input}, 1).front();
      return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    };
    pred_full[i] = top1(prepare_eval_input(val_set[i]));
    pred_low[i] = top1(prepare_eval_input(val_set[i], 24));
  });
  for (std::size_t i = 0; i < val_set.size(); ++i) {
    if (pred_full[i] == val_set[i].identity) ++correct_full;
    if (pred_low[i] == val_set[i].identity) ++correct_low;
  }
  const double n = static_cast<double>(val_set.size());
  return {correct_full / n, correct_low / n};
}

namespace {

void write_train_log(const std::filesystem::path& path, const std::vector<ValRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,step,lr,train_loss,classification,distillation,fullres_metric,lowres24_metric\n";
  out.precision(17);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.step << ',' << r.lr << ',' << r.train_loss << ','
        << r.classification << ',' << r.distillation << ',' << r.fullres_metric << ','
        << r.lowres24_metric << '\n';
  }
}

}  // namespace

TrainState fit(const TrainConfig& cfg, const std::vector<ImageRecord>& train_set,
               const std::vector<ImageRecord>& val_set, const Model* teacher,
               const std::filesystem::path& out_dir, const FitOptions& opts) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("fit: empty training set");
  if (val_set.empty()) throw std::invalid_argument("fit: empty validation set");
  if (cfg.mode == TrainMode::T_C && teacher == nullptr)
    throw std::invalid_argument("fit: T-C mode requires a teacher");
  if (teacher != nullptr && !teacher->frozen())
    throw std::invalid_argument("fit: teacher must be frozen");
  std::filesystem::create_directories(out_dir);

  TrainState state;
  if (opts.resume_from) {
    state = state_from_checkpoint(load_checkpoint(*opts.resume_from), teacher);
  } else {
    if (teacher != nullptr) {
      state.student = Model::from_parts(teacher->spec(), teacher->params(), false);
    } else {
      Rng init_rng(cfg.seed, 0);
      state.student = Model::init(opts.spec, init_rng);
    }
    if (teacher != nullptr) {
      state.teacher = *teacher;
      state.has_teacher = true;
    }
    state.momentum.assign(state.student.num_params(), 0.0);
    state.lr_current = cfg.lr_init;
  }

  const std::uint64_t teacher_hash_before =
      state.has_teacher ? state.teacher.param_hash() : 0;

  std::vector<int> labels_all(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) labels_all[i] = train_set[i].identity;

  Rng view_rng(cfg.seed, 0);  // reseeded per epoch below

  while (state.step < cfg.total_steps) {
    const long epoch_idx = state.epoch;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch_idx));
    shuffle_rng.shuffle(order);
    view_rng = Rng(cfg.seed, 2000 + static_cast<std::uint64_t>(epoch_idx));

    double loss_sum = 0.0, cls_sum = 0.0, dist_sum = 0.0;
    long steps_this_epoch = 0;

    for (std::size_t start = 0; start < order.size() && state.step < cfg.total_steps;
         start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double p = cfg.mode == TrainMode::T_C
                           ? degrade_probability(state.step, cfg.total_steps)
                           : cfg.fixed_degrade_frequency;

      std::vector<ViewPlan> plans(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto& rec = train_set[order[i]];
        plans[i - start] = plan_train_view(rec.pixels.h, rec.pixels.w, p, view_rng, opts.rset);
      }
      std::vector<TrainView> views(end - start);
      parallel_for(end - start, opts.jobs, [&](std::size_t i) {
        views[i] = build_train_view(train_set[order[start + i]], plans[i]);
      });
      std::vector<int> labels(end - start);
      for (std::size_t i = start; i < end; ++i) labels[i - start] = labels_all[order[i]];

      const LossBreakdown lb = train_step(state, cfg, views, labels, opts.jobs);
      loss_sum += lb.total;
      cls_sum += lb.classification;
      dist_sum += lb.distillation;
      ++steps_this_epoch;
    }

    const double epoch_loss = loss_sum / steps_this_epoch;
    const auto [full_acc, low_acc] = validate(state.student, val_set, opts.jobs);

    ValRecord rec;
    rec.epoch = epoch_idx + 1;
    rec.step = state.step;
    rec.lr = state.lr_current;
    rec.train_loss = epoch_loss;
    rec.classification = cls_sum / steps_this_epoch;
    rec.distillation = dist_sum / steps_this_epoch;
    rec.fullres_metric = full_acc;
    rec.lowres24_metric = low_acc;
    state.val_history.push_back(rec);

    if (state.plateau.observe(epoch_loss, cfg.plateau_min_rel_improvement, cfg.plateau_patience))
      state.lr_current /= cfg.lr_decay_factor;
    state.epoch = epoch_idx + 1;

    if (state.has_teacher && state.teacher.param_hash() != teacher_hash_before)
      throw std::logic_error("fit: teacher parameters changed");

    const bool improved = low_acc > state.best_val_lowres;
    if (improved) state.best_val_lowres = low_acc;
    Checkpoint ckpt = checkpoint_from_state(state);
    ckpt.rng_state = view_rng.save_state();
    if (improved) save_checkpoint(out_dir / "best.ckpt", ckpt);
    save_checkpoint(out_dir / "last.ckpt", ckpt);
    write_train_log(out_dir / "train_log.csv", state.val_history);

    if (opts.stop_after_epoch && state.epoch >= *opts.stop_after_epoch) break;
  }
  return state;
}

}  // namespace crossres
