#include "crossres/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace crossres {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Template build_template(const std::vector<Embedding>& embs, int subject_id) {
  if (embs.empty()) throw std::invalid_argument("build_template: empty embedding list");
  const std::size_t dim = embs.front().vector.size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& e : embs) {
    if (e.vector.size() != dim)
      throw std::invalid_argument("build_template: embedding dim mismatch");
    for (std::size_t i = 0; i < dim; ++i) mean[i] += e.vector[i];
  }
  for (double& v : mean) v /= static_cast<double>(embs.size());
  double norm = 0.0;
  for (const double v : mean) norm += v * v;
  norm = std::sqrt(norm);
  if (norm < 1e-12) throw DegenerateTemplateError("build_template: zero-norm mean embedding");
  for (double& v : mean) v /= norm;
  return Template{subject_id, std::move(mean), static_cast<int>(embs.size())};
}

double similarity(const Template& a, const Template& b) {
  if (a.vector.size() != b.vector.size())
    throw std::invalid_argument("similarity: dim mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.vector.size(); ++i) s += a.vector[i] * b.vector[i];
  return s;
}

RocCurve roc(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  if (genuine.empty() || impostor.empty())
    throw std::invalid_argument("roc: score lists must be nonempty");

  std::vector<double> g = genuine, im = impostor;
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());

  std::vector<double> thresholds;
  thresholds.reserve(g.size() + im.size() + 2);
  thresholds.push_back(-kInf);
  std::set<double> distinct(g.begin(), g.end());
  distinct.insert(im.begin(), im.end());
  thresholds.insert(thresholds.end(), distinct.begin(), distinct.end());
  thresholds.push_back(kInf);

  RocCurve curve;
  curve.genuine_count = static_cast<long>(g.size());
  curve.impostor_count = static_cast<long>(im.size());
  for (const double t : thresholds) {
    RocPoint p;
    p.threshold = t;
    p.genuine_ge = static_cast<long>(g.end() - std::lower_bound(g.begin(), g.end(), t));
    p.impostor_ge = static_cast<long>(im.end() - std::lower_bound(im.begin(), im.end(), t));
    p.tar = static_cast<double>(p.genuine_ge) / curve.genuine_count;
    p.far = static_cast<double>(p.impostor_ge) / curve.impostor_count;
    curve.points.push_back(p);
  }
  return curve;
}

OperatingPoint tar_at_far(const RocCurve& curve, double far_target) {
  if (far_target < 0.0 || far_target > 1.0)
    throw std::invalid_argument("tar_at_far: far_target must be in [0, 1]");
  OperatingPoint op;
  op.far_unreachable =
      far_target > 0.0 && far_target * static_cast<double>(curve.impostor_count) < 1.0;
  for (const auto& p : curve.points) {
    if (p.far <= far_target) {
      op.tar = p.tar;
      op.threshold = p.threshold;
      op.achieved_far = p.far;
      return op;
    }
  }
  // Unreachable: the +inf sentinel always satisfies FAR = 0.
  const auto& last = curve.points.back();
  op.tar = last.tar;
  op.threshold = last.threshold;
  op.achieved_far = last.far;
  return op;
}

double verification_accuracy(const std::vector<double>& genuine,
                             const std::vector<double>& impostor) {
  const RocCurve curve = roc(genuine, impostor);
  const double total = static_cast<double>(curve.genuine_count + curve.impostor_count);
  double best = 0.0;
  for (const auto& p : curve.points) {
    const long correct = p.genuine_ge + (curve.impostor_count - p.impostor_ge);
    best = std::max(best, static_cast<double>(correct) / total);
  }
  return best;
}

CmcCurve cmc(const std::vector<std::pair<Template, int>>& probes,
             const std::vector<Template>& gallery) {
  if (gallery.empty()) throw std::invalid_argument("cmc: empty gallery");
  std::set<int> gallery_ids;
  for (const auto& t : gallery) {
    if (!gallery_ids.insert(t.subject_id).second)
      throw ProtocolViolationError("cmc: duplicate gallery identity");
  }

  CmcCurve curve;
  curve.probe_count = static_cast<long>(probes.size());
  std::vector<long> hits(gallery.size(), 0);
  for (const auto& [probe, identity] : probes) {
    if (!gallery_ids.count(identity))
      throw ProtocolViolationError("cmc: probe identity missing from gallery");
    double mated = 0.0;
    std::vector<double> others;
    others.reserve(gallery.size() - 1);
    for (const auto& t : gallery) {
      const double s = similarity(probe, t);
      if (t.subject_id == identity)
        mated = s;
      else
        others.push_back(s);
    }
    long rank = 1;
    for (const double s : others)
      if (s >= mated) ++rank;  // pessimistic ties
    hits[rank - 1] += 1;
  }
  curve.hits_at_rank.resize(gallery.size());
  long cum = 0;
  for (std::size_t r = 0; r < gallery.size(); ++r) {
    cum += hits[r];
    curve.hits_at_rank[r] =
        probes.empty() ? 0.0 : static_cast<double>(cum) / curve.probe_count;
  }
  return curve;
}

DetCurve open_set_identification(const std::vector<std::pair<Template, int>>& mated_probes,
                                 const std::vector<Template>& unmated_probes,
                                 const std::vector<Template>& gallery) {
  if (gallery.empty()) throw std::invalid_argument("open_set_identification: empty gallery");
  std::set<int> gallery_ids;
  for (const auto& t : gallery) gallery_ids.insert(t.subject_id);
  for (const auto& t : unmated_probes) {
    if (gallery_ids.count(t.subject_id))
      throw ProtocolViolationError(
          "open_set_identification: unmated probe identity present in gallery");
  }

  struct MatedResult {
    double top_score;
    bool correct_top1;
  };
  std::vector<MatedResult> mated;
  mated.reserve(mated_probes.size());
  for (const auto& [probe, identity] : mated_probes) {
    if (!gallery_ids.count(identity))
      throw ProtocolViolationError("open_set_identification: mated probe identity not enrolled");
    double mated_score = -kInf, best_other = -kInf, top = -kInf;
    for (const auto& t : gallery) {
      const double s = similarity(probe, t);
      top = std::max(top, s);
      if (t.subject_id == identity)
        mated_score = std::max(mated_score, s);
      else
        best_other = std::max(best_other, s);
    }
    mated.push_back({top, mated_score > best_other});
  }
  std::vector<double> unmated_top;
  unmated_top.reserve(unmated_probes.size());
  for (const auto& t : unmated_probes) {
    double top = -kInf;
    for (const auto& g : gallery) top = std::max(top, similarity(t, g));
    unmated_top.push_back(top);
  }

  std::set<double> distinct;
  for (const auto& m : mated) distinct.insert(m.top_score);
  distinct.insert(unmated_top.begin(), unmated_top.end());
  std::vector<double> thresholds;
  thresholds.push_back(-kInf);
  thresholds.insert(thresholds.end(), distinct.begin(), distinct.end());
  thresholds.push_back(kInf);

  DetCurve curve;
  curve.mated_count = static_cast<long>(mated.size());
  curve.unmated_count = static_cast<long>(unmated_top.size());
  for (const double t : thresholds) {
    DetPoint p;
    p.threshold = t;
    for (const double s : unmated_top)
      if (s >= t) ++p.unmated_accepted;
    for (const auto& m : mated)
      if (m.top_score < t || !m.correct_top1) ++p.mated_rejected_or_wrong;
    p.fpir = curve.unmated_count == 0
                 ? 0.0
                 : static_cast<double>(p.unmated_accepted) / curve.unmated_count;
    p.fnir = curve.mated_count == 0
                 ? 0.0
                 : static_cast<double>(p.mated_rejected_or_wrong) / curve.mated_count;
    curve.points.push_back(p);
  }
  return curve;
}

double det_auc(const DetCurve& curve) {
  if (curve.points.empty()) throw std::invalid_argument("det_auc: empty curve");
  // Reverse threshold order = ascending FPIR.
  double auc = 0.0;
  for (std::size_t i = curve.points.size() - 1; i > 0; --i) {
    const auto& lo = curve.points[i];       // smaller fpir
    const auto& hi = curve.points[i - 1];   // larger-or-equal fpir
    const double dx = hi.fpir - lo.fpir;
    const double tpir_lo = 1.0 - lo.fnir;
    const double tpir_hi = 1.0 - hi.fnir;
    auc += dx * 0.5 * (tpir_lo + tpir_hi);
  }
  return auc;
}

double retrieval_map(const std::vector<std::vector<char>>& rankings) {
  if (rankings.empty()) throw std::invalid_argument("retrieval_map: no queries");
  double sum_ap = 0.0;
  for (const auto& flags : rankings) {
    long hits = 0;
    double ap = 0.0;
    for (std::size_t pos = 0; pos < flags.size(); ++pos) {
      if (flags[pos]) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(pos + 1);
      }
    }
    if (hits == 0)
      throw ProtocolViolationError("retrieval_map: query with zero relevant items");
    sum_ap += ap / static_cast<double>(hits);
  }
  return sum_ap / static_cast<double>(rankings.size());
}

std::vector<std::vector<double>> embed_at_resolution(const Model& model,
                                                     const std::vector<ImageRecord>& images,
                                                     int resolution, int jobs) {
  std::vector<Image> inputs(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t i) {
    inputs[i] = prepare_eval_input(images[i], resolution > 0 ? std::optional<int>(resolution)
                                                             : std::nullopt);
  });
  const auto embs = model.extract_features(inputs, jobs);
  std::vector<std::vector<double>> out(embs.size());
  for (std::size_t i = 0; i < embs.size(); ++i)
    out[i] = build_template({embs[i]}).vector;
  return out;
}

CrossResMatrix cross_resolution_matrix(const Model& model,
                                       const std::vector<ImageRecord>& images,
                                       const std::vector<PairRef>& pairs,
                                       const std::vector<int>& resolutions, double far_target,
                                       int jobs) {
  if (pairs.empty()) throw std::invalid_argument("cross_resolution_matrix: no pairs");
  bool any_genuine = false, any_impostor = false;
  for (const auto& p : pairs) (p.genuine ? any_genuine : any_impostor) = true;
  if (!any_genuine || !any_impostor)
    throw std::invalid_argument("cross_resolution_matrix: need both genuine and impostor pairs");

  CrossResMatrix m;
  m.resolutions = resolutions;
  m.far_target = far_target;

  std::vector<std::vector<std::vector<double>>> cache(resolutions.size());
  for (std::size_t r = 0; r < resolutions.size(); ++r)
    cache[r] = embed_at_resolution(model, images, resolutions[r], jobs);

  const std::size_t n = resolutions.size();
  m.tar_at_far.assign(n, {});
  m.threshold.assign(n, {});
  m.far_unreachable.assign(n, {});
  for (std::size_t ra = 0; ra < n; ++ra) {
    m.tar_at_far[ra].assign(ra + 1, 0.0);
    m.threshold[ra].assign(ra + 1, 0.0);
    m.far_unreachable[ra].assign(ra + 1, 0);
    for (std::size_t rb = 0; rb <= ra; ++rb) {
      std::vector<double> genuine, impostor;
      // Pairs are unordered, so both orientations are scored; the matrix
      // is then exactly invariant to which side sits at which resolution.
      for (const auto& p : pairs) {
        double s1 = 0.0, s2 = 0.0;
        const auto& a_hi = cache[ra][p.a];
        const auto& b_lo = cache[rb][p.b];
        const auto& b_hi = cache[ra][p.b];
        const auto& a_lo = cache[rb][p.a];
        for (std::size_t i = 0; i < a_hi.size(); ++i) {
          s1 += a_hi[i] * b_lo[i];
          s2 += b_hi[i] * a_lo[i];
        }
        auto& bucket = p.genuine ? genuine : impostor;
        bucket.push_back(s1);
        bucket.push_back(s2);
      }
      const OperatingPoint op = tar_at_far(roc(genuine, impostor), far_target);
      m.tar_at_far[ra][rb] = op.tar;
      m.threshold[ra][rb] = op.threshold;
      m.far_unreachable[ra][rb] = op.far_unreachable ? 1 : 0;
    }
  }
  return m;
}

}  // namespace crossres
