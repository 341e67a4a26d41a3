#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "crossres/metrics.hpp"
#include "crossres/rng.hpp"

using namespace crossres;

namespace {

// Brute-force oracles. These recount everything from scratch per
// threshold so the implementation's sweep bookkeeping is checked against
// plain comparisons.

std::vector<double> sweep_thresholds(const std::vector<double>& genuine,
                                     const std::vector<double>& impostor) {
  std::set<double> s(genuine.begin(), genuine.end());
  s.insert(impostor.begin(), impostor.end());
  std::vector<double> t{-std::numeric_limits<double>::infinity()};
  t.insert(t.end(), s.begin(), s.end());
  t.push_back(std::numeric_limits<double>::infinity());
  return t;
}

long count_ge(const std::vector<double>& v, double t) {
  long n = 0;
  for (const double x : v)
    if (x >= t) ++n;
  return n;
}

OperatingPoint oracle_tar_at_far(const std::vector<double>& genuine,
                                 const std::vector<double>& impostor, double far_target) {
  OperatingPoint op;
  const long ni = static_cast<long>(impostor.size());
  op.far_unreachable = far_target > 0.0 && far_target * ni < 1.0;
  for (const double t : sweep_thresholds(genuine, impostor)) {
    const double far = double(count_ge(impostor, t)) / ni;
    if (far <= far_target) {
      op.tar = double(count_ge(genuine, t)) / genuine.size();
      op.threshold = t;
      op.achieved_far = far;
      return op;
    }
  }
  return op;
}

double oracle_accuracy(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  double best = 0.0;
  const double total = genuine.size() + impostor.size();
  for (const double t : sweep_thresholds(genuine, impostor)) {
    const double acc =
        (count_ge(genuine, t) + (impostor.size() - count_ge(impostor, t))) / total;
    best = std::max(best, acc);
  }
  return best;
}

Template unit_template(Rng& rng, int dim, int subject) {
  Embedding e;
  for (int i = 0; i < dim; ++i) e.vector.push_back(rng.normal());
  return build_template({e}, subject);
}

// Scores drawn from a coarse grid so ties actually occur.
std::vector<double> grid_scores(Rng& rng, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(rng.uniform_int(0, 19) / 20.0);
  return v;
}

}  // namespace

TEST_CASE("templates are unit-norm means and degenerate inputs throw") {
  Embedding a, b;
  a.vector = {2.0, 0.0};
  b.vector = {0.0, 2.0};
  const Template t = build_template({a, b}, 7);
  CHECK(t.subject_id == 7);
  CHECK(t.media_count == 2);
  const double inv = 1.0 / std::sqrt(2.0);
  CHECK(t.vector[0] == doctest::Approx(inv).epsilon(1e-12));
  CHECK(t.vector[1] == doctest::Approx(inv).epsilon(1e-12));

  Embedding neg;
  neg.vector = {-2.0, 0.0};
  CHECK_THROWS_AS(build_template({a, neg}), DegenerateTemplateError);
  CHECK_THROWS_AS(build_template({}), std::invalid_argument);
}

TEST_CASE("similarity of unit templates is the dot product") {
  Template a, b;
  a.vector = {1.0, 0.0};
  b.vector = {0.6, 0.8};
  CHECK(similarity(a, b) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("roc hand case with a tie") {
  const std::vector<double> g = {0.9, 0.8, 0.7};
  const std::vector<double> m = {0.75, 0.2};
  const RocCurve curve = roc(g, m);
  CHECK(curve.genuine_count == 3);
  CHECK(curve.impostor_count == 2);
  // -inf, 0.2, 0.7, 0.75, 0.8, 0.9, +inf
  CHECK(curve.points.size() == 7);
  CHECK(curve.points.front().tar == 1.0);
  CHECK(curve.points.front().far == 1.0);
  CHECK(curve.points.back().tar == 0.0);
  CHECK(curve.points.back().far == 0.0);
  const RocPoint& at075 = curve.points[3];
  CHECK(at075.threshold == 0.75);
  CHECK(at075.genuine_ge == 2);
  CHECK(at075.impostor_ge == 1);
  CHECK(at075.tar == doctest::Approx(2.0 / 3.0));
  CHECK(at075.far == 0.5);
}

TEST_CASE("roc and operating points equal the brute-force oracle exactly") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int ng = rng.uniform_int(1, 100), ni = rng.uniform_int(1, 100);
    const auto g = grid_scores(rng, ng), m = grid_scores(rng, ni);

    const RocCurve curve = roc(g, m);
    const auto thresholds = sweep_thresholds(g, m);
    REQUIRE(curve.points.size() == thresholds.size());
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      const RocPoint& p = curve.points[i];
      CHECK(p.threshold == thresholds[i]);
      CHECK(p.genuine_ge == count_ge(g, thresholds[i]));
      CHECK(p.impostor_ge == count_ge(m, thresholds[i]));
      CHECK(p.tar == double(count_ge(g, thresholds[i])) / ng);
      CHECK(p.far == double(count_ge(m, thresholds[i])) / ni);
    }

    for (const double target : {0.5, 0.1, 0.01, 0.0}) {
      const OperatingPoint got = tar_at_far(curve, target);
      const OperatingPoint want = oracle_tar_at_far(g, m, target);
      CHECK(got.tar == want.tar);
      CHECK(got.threshold == want.threshold);
      CHECK(got.achieved_far == want.achieved_far);
      CHECK(got.far_unreachable == want.far_unreachable);
    }

    CHECK(verification_accuracy(g, m) == oracle_accuracy(g, m));
  }
}

TEST_CASE("far_unreachable flags targets below 1/impostor_count") {
  const RocCurve curve = roc({0.9}, {0.1, 0.2, 0.3});
  CHECK(tar_at_far(curve, 0.5).far_unreachable == false);
  CHECK(tar_at_far(curve, 1.0 / 3.0).far_unreachable == false);
  CHECK(tar_at_far(curve, 0.01).far_unreachable == true);
  CHECK(tar_at_far(curve, 0.0).far_unreachable == false);  // exact zero is always swept
}

TEST_CASE("cmc hand case: ties count against the probe") {
  Template g0, g1, g2, p;
  g0.vector = {1.0, 0.0};
  g0.subject_id = 0;
  g1.vector = {1.0, 0.0};
  g1.subject_id = 1;
  g2.vector = {0.0, 1.0};
  g2.subject_id = 2;
  p.vector = {1.0, 0.0};
  // Mated gallery is subject 0 but subject 1 ties at score 1.0: rank 2.
  const CmcCurve curve = cmc({{p, 0}}, {g0, g1, g2});
  CHECK(curve.probe_count == 1);
  CHECK(curve.hits_at_rank[0] == 0.0);
  CHECK(curve.hits_at_rank[1] == 1.0);
  CHECK(curve.hits_at_rank[2] == 1.0);
}

TEST_CASE("cmc equals the exhaustive rank oracle") {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const int ngal = rng.uniform_int(2, 12), nprobe = rng.uniform_int(1, 15), dim = 6;
    std::vector<Template> gallery;
    for (int i = 0; i < ngal; ++i) gallery.push_back(unit_template(rng, dim, i));
    std::vector<std::pair<Template, int>> probes;
    for (int i = 0; i < nprobe; ++i)
      probes.push_back({unit_template(rng, dim, -1), rng.uniform_int(0, ngal - 1)});

    const CmcCurve curve = cmc(probes, gallery);
    REQUIRE(curve.hits_at_rank.size() == static_cast<std::size_t>(ngal));
    for (int r = 1; r <= ngal; ++r) {
      long hits = 0;
      for (const auto& [probe, id] : probes) {
        double mated = 0.0;
        for (const auto& g : gallery)
          if (g.subject_id == id) mated = similarity(probe, g);
        long rank = 1;
        for (const auto& g : gallery)
          if (g.subject_id != id && similarity(probe, g) >= mated) ++rank;
        if (rank <= r) ++hits;
      }
      CHECK(curve.hits_at_rank[r - 1] == double(hits) / nprobe);
    }
    // Monotone nondecreasing, ending at 1.
    for (std::size_t i = 1; i < curve.hits_at_rank.size(); ++i)
      CHECK(curve.hits_at_rank[i] >= curve.hits_at_rank[i - 1]);
    CHECK(curve.hits_at_rank.back() == 1.0);
  }
}

TEST_CASE("open-set sweep equals the brute-force oracle") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int ngal = rng.uniform_int(2, 10), dim = 5;
    std::vector<Template> gallery;
    for (int i = 0; i < ngal; ++i) gallery.push_back(unit_template(rng, dim, i));
    std::vector<std::pair<Template, int>> mated;
    std::vector<Template> unmated;
    for (int i = 0, n = rng.uniform_int(1, 12); i < n; ++i)
      mated.push_back({unit_template(rng, dim, -1), rng.uniform_int(0, ngal - 1)});
    for (int i = 0, n = rng.uniform_int(1, 12); i < n; ++i)
      unmated.push_back(unit_template(rng, dim, -1));

    const DetCurve curve = open_set_identification(mated, unmated, gallery);
    CHECK(curve.mated_count == static_cast<long>(mated.size()));
    CHECK(curve.unmated_count == static_cast<long>(unmated.size()));

    for (const DetPoint& p : curve.points) {
      long fp = 0;
      for (const auto& u : unmated) {
        double top = -2.0;
        for (const auto& g : gallery) top = std::max(top, similarity(u, g));
        if (top >= p.threshold) ++fp;
      }
      long miss = 0;
      for (const auto& [probe, id] : mated) {
        double top = -2.0, mated_score = -2.0;
        for (const auto& g : gallery) {
          const double s = similarity(probe, g);
          top = std::max(top, s);
          if (g.subject_id == id) mated_score = s;
        }
        // Strict top-1: any non-mated template at >= the mated score
        // makes the identification wrong.
        bool correct = true;
        for (const auto& g : gallery)
          if (g.subject_id != id && similarity(probe, g) >= mated_score) correct = false;
        if (top < p.threshold || !correct) ++miss;
      }
      CHECK(p.unmated_accepted == fp);
      CHECK(p.mated_rejected_or_wrong == miss);
      CHECK(p.fpir == double(fp) / unmated.size());
      CHECK(p.fnir == double(miss) / mated.size());
    }
  }
}

TEST_CASE("det_auc matches a hand trapezoid") {
  // Two probes each side, thresholds 0.2 < 0.8.
  Template g0;
  g0.vector = {1.0, 0.0};
  g0.subject_id = 0;
  Template m1, m2, u1, u2;
  m1.vector = {1.0, 0.0};          // score 1.0, correct
  m2.vector = {0.0, 1.0};          // score 0.0, correct but rejected at high t
  u1.vector = {0.8, 0.6};          // score 0.8
  u2.vector = {-1.0, 0.0};         // score -1.0
  const DetCurve curve = open_set_identification({{m1, 0}, {m2, 0}}, {u1, u2}, {g0});
  const double auc = det_auc(curve);
  // Swept thresholds: -inf, -1, 0, 0.8, 1, +inf ->
  // (fpir, tpir): (1,1) (1,1) (0.5,1) (0.5,0.5) (0,0.5) (0,0)
  // Integrating TPIR over FPIR: 0.5*1 + 0.5*0.5 = 0.75.
  CHECK(auc == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("retrieval mAP equals the direct average-precision oracle") {
  // Hand case: hits at positions 1 and 3 -> AP = (1/1 + 2/3)/2.
  CHECK(retrieval_map({{1, 0, 1}}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));

  Rng rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    const int nq = rng.uniform_int(1, 8);
    std::vector<std::vector<char>> rankings(nq);
    for (auto& r : rankings) {
      const int len = rng.uniform_int(1, 20);
      bool any = false;
      for (int i = 0; i < len; ++i) {
        const char hit = static_cast<char>(rng.uniform_int(0, 1));
        any = any || hit;
        r.push_back(hit);
      }
      if (!any) r[rng.uniform_int(0, len - 1)] = 1;
    }
    double sum_ap = 0.0;
    for (const auto& r : rankings) {
      long hits = 0;
      double ap = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i)
        if (r[i]) {
          ++hits;
          ap += double(hits) / (i + 1);
        }
      sum_ap += ap / hits;
    }
    CHECK(retrieval_map(rankings) == sum_ap / nq);
  }
}

TEST_CASE("cross-resolution matrix is symmetric and diagonal-consistent") {
  ModelSpec spec;
  spec.conv_channels = {2, 2};
  spec.embedding_dim = 4;
  spec.num_classes = 2;
  Rng rng(47);
  const Model model = Model::init(spec, rng).freeze();

  std::vector<ImageRecord> images;
  Rng pix(49);
  for (int i = 0; i < 6; ++i) {
    ImageRecord rec;
    rec.pixels = Image(137, 180, 1);
    for (auto& v : rec.pixels.data) v = pix.uniform();
    rec.identity = i / 2;
    images.push_back(std::move(rec));
  }
  std::vector<PairRef> pairs;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j)
      pairs.push_back({i, j, images[i].identity == images[j].identity});

  const std::vector<int> res = {8, 24, 0};
  const CrossResMatrix m = cross_resolution_matrix(model, images, pairs, res, 0.5, 2);
  REQUIRE(m.resolutions == std::vector<int>{8, 24, 0});
  REQUIRE(m.tar_at_far.size() == 3);
  for (std::size_t a = 0; a < 3; ++a) REQUIRE(m.tar_at_far[a].size() == a + 1);

  // Symmetry: swapping both pair sides and the two resolutions must give
  // identical scores, hence an identical matrix.
  std::vector<PairRef> swapped;
  for (const auto& p : pairs) swapped.push_back({p.b, p.a, p.genuine});
  const CrossResMatrix m2 = cross_resolution_matrix(model, images, swapped, res, 0.5, 1);
  CHECK(m.tar_at_far == m2.tar_at_far);
  CHECK(m.threshold == m2.threshold);

  // Diagonal consistency: entry (r, r) equals a direct same-resolution
  // verification sweep.
  for (std::size_t a = 0; a < res.size(); ++a) {
    const auto embs = embed_at_resolution(model, images, res[a], 1);
    std::vector<double> genuine, impostor;
    for (const auto& p : pairs) {
      double s = 0.0;
      for (std::size_t k = 0; k < embs[p.a].size(); ++k) s += embs[p.a][k] * embs[p.b][k];
      (p.genuine ? genuine : impostor).push_back(s);
    }
    const OperatingPoint op = tar_at_far(roc(genuine, impostor), 0.5);
    CHECK(m.tar_at_far[a][a] == op.tar);
  }
}
