#pragma once

#include <tuple>
#include <utility>
#include <vector>

#include "crossres/errors.hpp"
#include "crossres/image.hpp"
#include "crossres/model.hpp"

namespace crossres {

/// Unit-norm aggregate embedding for one subject or probe.
struct Template {
  int subject_id = -1;
  std::vector<double> vector;
  int media_count = 0;
};

/// Elementwise mean of the input vectors, L2-normalized.
Template build_template(const std::vector<Embedding>& embs, int subject_id = -1);

/// Cosine similarity of two unit-norm templates.
double similarity(const Template& a, const Template& b);

/// One threshold of a verification sweep. Integer counts are kept so
/// operating points are exact ratios.
struct RocPoint {
  double threshold = 0.0;
  long genuine_ge = 0;   // genuine scores >= threshold
  long impostor_ge = 0;  // impostor scores >= threshold
  double tar = 0.0;
  double far = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // ascending threshold
  long genuine_count = 0;
  long impostor_count = 0;
};

/// Exact step-function sweep over the union of distinct scores, with
/// accept-all (-inf) and reject-all (+inf) sentinel endpoints.
RocCurve roc(const std::vector<double>& genuine, const std::vector<double>& impostor);

struct OperatingPoint {
  double tar = 0.0;
  double threshold = 0.0;
  double achieved_far = 0.0;
  bool far_unreachable = false;  // fewer impostors than 1/far_target
};

/// TAR at the smallest swept threshold whose FAR <= far_target. Step
/// function, no interpolation.
OperatingPoint tar_at_far(const RocCurve& curve, double far_target);

/// Best achievable (accepts + rejects) / total over all thresholds.
double verification_accuracy(const std::vector<double>& genuine,
                             const std::vector<double>& impostor);

struct CmcCurve {
  std::vector<double> hits_at_rank;  // entry r-1 = fraction identified within rank r
  long probe_count = 0;
};

/// Close-set identification with pessimistic ties (tied non-mated scores
/// count against the probe). Probe identities must exist in the gallery.
CmcCurve cmc(const std::vector<std::pair<Template, int>>& probes,
             const std::vector<Template>& gallery);

struct DetPoint {
  double threshold = 0.0;
  long unmated_accepted = 0;        // unmated top score >= threshold
  long mated_rejected_or_wrong = 0; // top score < threshold, or wrong top-1
  double fpir = 0.0;
  double fnir = 0.0;
};

struct DetCurve {
  std::vector<DetPoint> points;  // ascending threshold
  long mated_count = 0;
  long unmated_count = 0;
};

/// Open-set ("watch-list") sweep: candidate score is the max gallery
/// similarity; a mated probe counts as missed when it is rejected or its
/// top-1 identity is wrong (strict-majority tie handling: a tie with a
/// non-mated template counts as wrong).
DetCurve open_set_identification(const std::vector<std::pair<Template, int>>& mated_probes,
                                 const std::vector<Template>& unmated_probes,
                                 const std::vector<Template>& gallery);

/// Trapezoidal area under TPIR-vs-FPIR over the swept points.
double det_auc(const DetCurve& curve);

/// Mean average precision. rankings[q] is the ordered relevance flags of
/// query q's retrieval list; every query needs at least one relevant hit.
double retrieval_map(const std::vector<std::vector<char>>& rankings);

/// An unordered verification pair referencing images by index.
struct PairRef {
  int a = 0;
  int b = 0;
  bool genuine = false;
};

struct CrossResMatrix {
  std::vector<int> resolutions;  // ascending; 0 means full resolution
  std::vector<std::vector<double>> tar_at_far;  // lower triangle, row a >= col b
  std::vector<std::vector<double>> threshold;
  std::vector<std::vector<char>> far_unreachable;
  double far_target = 0.0;
};

/// Verification TAR at far_target for every unordered resolution pair.
/// Each image pair is scored in both orientations (a at the row
/// resolution against b at the column resolution, and vice versa), so
/// entries do not depend on pair order. Embeddings go through
/// prepare_eval_input; resolution 0 denotes "leave at native resolution".
CrossResMatrix cross_resolution_matrix(const Model& model,
                                       const std::vector<ImageRecord>& images,
                                       const std::vector<PairRef>& pairs,
                                       const std::vector<int>& resolutions, double far_target,
                                       int jobs = 1);

/// Per-(image, resolution) unit-normalized embeddings; the building block
/// cross_resolution_matrix and the evaluation bundles share.
std::vector<std::vector<double>> embed_at_resolution(const Model& model,
                                                     const std::vector<ImageRecord>& images,
                                                     int resolution /*0 = full*/, int jobs = 1);

}  // namespace crossres
