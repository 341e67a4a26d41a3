#pragma once

#include <vector>

#include "crossres/model.hpp"

namespace crossres {

enum class DistillReduction { mean, sum };

/// Combined-loss decomposition for one batch.
struct LossBreakdown {
  double total = 0.0;
  double classification = 0.0;
  double distillation = 0.0;  // pre-lambda
  double lambda_applied = 0.0;
};

/// Numerically stable log-softmax cross-entropy, batch mean. Also returns
/// d(loss)/d(logits), i.e. (softmax - onehot)/N per row.
double softmax_cross_entropy(const std::vector<std::vector<double>>& logits,
                             const std::vector<int>& labels,
                             std::vector<std::vector<double>>* d_logits = nullptr);

std::vector<double> softmax(const std::vector<double>& logits);

/// Combined classification + feature-matching loss: classification is the
/// batch-mean cross-entropy, distillation the squared L2 distance between
/// teacher and student features (batch mean by default, batch sum under
/// DistillReduction::sum), total = classification + lambda * distillation.
LossBreakdown distillation_loss(const std::vector<std::vector<double>>& logits,
                                const std::vector<int>& labels,
                                const std::vector<Embedding>& teacher_feats,
                                const std::vector<Embedding>& student_feats, double lambda,
                                DistillReduction reduction = DistillReduction::mean,
                                std::vector<std::vector<double>>* d_logits = nullptr,
                                std::vector<std::vector<double>>* d_student_feats = nullptr);

}  // namespace crossres
