#include "crossres/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crossres {

std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - mx);
    z += p[k];
  }
  for (double& v : p) v /= z;
  return p;
}

double softmax_cross_entropy(const std::vector<std::vector<double>>& logits,
                             const std::vector<int>& labels,
                             std::vector<std::vector<double>>* d_logits) {
  const std::size_t n = logits.size();
  if (n == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
  if (labels.size() != n) throw std::invalid_argument("softmax_cross_entropy: label count mismatch");

  if (d_logits) d_logits->assign(n, {});
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = logits[i];
    const int y = labels[i];
    if (y < 0 || y >= static_cast<int>(row.size()))
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (const double v : row) z += std::exp(v - mx);
    loss += std::log(z) - (row[y] - mx);
    if (d_logits) {
      auto& g = (*d_logits)[i];
      g.resize(row.size());
      for (std::size_t k = 0; k < row.size(); ++k)
        g[k] = (std::exp(row[k] - mx) / z - (static_cast<int>(k) == y ? 1.0 : 0.0)) / n;
    }
  }
  return loss / static_cast<double>(n);
}

LossBreakdown distillation_loss(const std::vector<std::vector<double>>& logits,
                                const std::vector<int>& labels,
                                const std::vector<Embedding>& teacher_feats,
                                const std::vector<Embedding>& student_feats, double lambda,
                                DistillReduction reduction,
                                std::vector<std::vector<double>>* d_logits,
                                std::vector<std::vector<double>>* d_student_feats) {
  const std::size_t n = logits.size();
  if (n == 0) throw std::invalid_argument("distillation_loss: empty batch");
  if (labels.size() != n || teacher_feats.size() != n || student_feats.size() != n)
    throw std::invalid_argument("distillation_loss: batch size mismatch");
  if (lambda < 0.0) throw std::invalid_argument("distillation_loss: lambda must be >= 0");

  LossBreakdown lb;
  lb.lambda_applied = lambda;
  lb.classification = softmax_cross_entropy(logits, labels, d_logits);

  if (d_student_feats) d_student_feats->assign(n, {});
  const double scale = reduction == DistillReduction::mean ? 1.0 / static_cast<double>(n) : 1.0;
  double dist = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ft = teacher_feats[i].vector;
    const auto& fs = student_feats[i].vector;
    if (ft.size() != fs.size())
      throw std::invalid_argument("distillation_loss: embedding dim mismatch");
    double d2 = 0.0;
    for (std::size_t e = 0; e < ft.size(); ++e) {
      const double diff = fs[e] - ft[e];
      d2 += diff * diff;
    }
    dist += d2;
    if (d_student_feats) {
      auto& g = (*d_student_feats)[i];
      g.resize(fs.size());
      for (std::size_t e = 0; e < fs.size(); ++e)
        g[e] = 2.0 * (fs[e] - ft[e]) * scale * lambda;
    }
  }
  lb.distillation = dist * scale;
  lb.total = lb.classification + lambda * lb.distillation;
  return lb;
}

}  // namespace crossres
