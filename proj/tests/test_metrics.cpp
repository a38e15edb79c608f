#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gsplane/metrics.hpp"

#include <cmath>
#include <map>
#include <random>

using namespace gsplane;

namespace {

/// O(N^2) pair-counting oracle.
double brute_rand_index(const std::vector<int>& p, const std::vector<int>& q) {
  const std::size_t n = p.size();
  long agree = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same_p = p[i] == p[j];
      const bool same_q = q[i] == q[j];
      if (same_p == same_q) ++agree;
      ++total;
    }
  return static_cast<double>(agree) / static_cast<double>(total);
}

/// Entropy-table oracle in nats.
double brute_voi(const std::vector<int>& p, const std::vector<int>& q) {
  const double n = static_cast<double>(p.size());
  std::map<int, double> pa, pb;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pa[p[i]] += 1;
    pb[q[i]] += 1;
    joint[{p[i], q[i]}] += 1;
  }
  auto h = [&](const auto& table) {
    double s = 0;
    for (const auto& [_, v] : table) s -= (v / n) * std::log(v / n);
    return s;
  };
  return 2.0 * h(joint) - h(pa) - h(pb);
}

double brute_sc(const std::vector<int>& gt, const std::vector<int>& pred) {
  const double n = static_cast<double>(gt.size());
  std::map<int, std::vector<std::size_t>> gt_regions, pred_regions;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt_regions[gt[i]].push_back(i);
    pred_regions[pred[i]].push_back(i);
  }
  double sc = 0;
  for (const auto& [_, r] : gt_regions) {
    double best = 0;
    for (const auto& [_, rp] : pred_regions) {
      std::size_t inter = 0;
      for (std::size_t a : r)
        for (std::size_t b : rp)
          if (a == b) ++inter;
      const double iou = static_cast<double>(inter) / static_cast<double>(r.size() + rp.size() - inter);
      best = std::max(best, iou);
    }
    sc += (static_cast<double>(r.size()) / n) * best;
  }
  return sc;
}

}  // namespace

TEST_CASE("identical partitions score perfectly") {
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2, 2};
  const Partition p = Partition::from_labels(labels);
  CHECK(rand_index(p, p) == doctest::Approx(1.0));
  CHECK(variation_of_information(p, p) == doctest::Approx(0.0));
  CHECK(segmentation_covering(p, p) == doctest::Approx(1.0));
}

TEST_CASE("worked pair examples reproduce the hand values") {
  // {a,b},{c,d} vs one big cluster
  const Partition p = Partition::from_labels({0, 0, 1, 1});
  const Partition q = Partition::from_labels({0, 0, 0, 0});
  CHECK(rand_index(p, q) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(variation_of_information(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // all singletons vs all-one, N = 3
  const Partition s = Partition::from_labels({0, 1, 2});
  const Partition o = Partition::from_labels({0, 0, 0});
  CHECK(rand_index(s, o) == doctest::Approx(0.0));

  // gt one region, pred split 50/50 (and the transpose)
  const Partition whole = Partition::from_labels({0, 0, 0, 0});
  const Partition halves = Partition::from_labels({0, 0, 1, 1});
  CHECK(segmentation_covering(whole, halves) == doctest::Approx(0.5));
  CHECK(segmentation_covering(halves, whole) == doctest::Approx(0.5));
}

TEST_CASE("contingency metrics equal brute-force enumeration on random partitions") {
  auto rng = make_rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> nd(2, 200);
    const int n = nd(rng);
    std::uniform_int_distribution<int> kd(1, 8);
    std::uniform_int_distribution<int> la(0, kd(rng)), lb(0, kd(rng));
    std::vector<int> p(n), q(n);
    for (int i = 0; i < n; ++i) {
      p[i] = la(rng);
      q[i] = lb(rng);
    }
    const Partition pp = Partition::from_labels(p);
    const Partition pq = Partition::from_labels(q);
    CHECK(rand_index(pp, pq) == doctest::Approx(brute_rand_index(p, q)).epsilon(1e-9));
    CHECK(variation_of_information(pp, pq) == doctest::Approx(brute_voi(p, q)).epsilon(1e-9));
    CHECK(segmentation_covering(pp, pq) == doctest::Approx(brute_sc(p, q)).epsilon(1e-9));
  }
}

TEST_CASE("VOI is a metric on sampled partitions") {
  auto rng = make_rng(29);
  std::uniform_int_distribution<int> ld(0, 4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a(60), b(60), c(60);
    for (int i = 0; i < 60; ++i) {
      a[i] = ld(rng);
      b[i] = ld(rng);
      c[i] = ld(rng);
    }
    const Partition pa = Partition::from_labels(a);
    const Partition pb = Partition::from_labels(b);
    const Partition pc = Partition::from_labels(c);
    const double ab = variation_of_information(pa, pb);
    const double ba = variation_of_information(pb, pa);
    const double bc = variation_of_information(pb, pc);
    const double ac = variation_of_information(pa, pc);
    CHECK(ab >= -1e-12);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ac <= ab + bc + 1e-9);
  }
}

TEST_CASE("metrics reject degenerate input") {
  const Partition tiny = Partition::from_labels({0});
  CHECK_THROWS_AS(rand_index(tiny, tiny), std::invalid_argument);
  const Partition a = Partition::from_labels({0, 1});
  const Partition b = Partition::from_labels({0, 1, 2});
  CHECK_THROWS_AS(rand_index(a, b), std::invalid_argument);
  CHECK_THROWS_AS(accuracy_completeness({}, {Vec3::Zero()}), std::invalid_argument);
}

TEST_CASE("identical point sets have zero accuracy and completeness") {
  auto rng = make_rng(5);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Vec3> pts(200);
  for (auto& p : pts) p = Vec3(uni(rng), uni(rng), uni(rng));
  const auto [acc, comp] = accuracy_completeness(pts, pts);
  CHECK(acc == doctest::Approx(0.0));
  CHECK(comp == doctest::Approx(0.0));
}

TEST_CASE("a rigid shift along the normal moves accuracy by exactly the shift") {
  auto rng = make_rng(6);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Vec3> gt(300), pred(300);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt[i] = Vec3(uni(rng), uni(rng), 0.0);
    pred[i] = gt[i] + Vec3(0, 0, 0.05);
  }
  const auto [acc, comp] = accuracy_completeness(pred, gt);
  CHECK(acc == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(comp == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("half coverage gives zero accuracy but positive completeness") {
  std::vector<Vec3> gt;
  for (int i = 0; i < 100; ++i) gt.push_back(Vec3(0.1 * i, 0, 0));
  const std::vector<Vec3> pred(gt.begin(), gt.begin() + 50);
  const auto [acc, comp] = accuracy_completeness(pred, gt);
  CHECK(acc == doctest::Approx(0.0));
  CHECK(comp > 0.0);
}

TEST_CASE("evaluate_partitions maps unassigned to an extra cluster or drops them") {
  const std::vector<int> gt = {0, 0, 1, 1, 2, 2};
  const std::vector<int> pred = {0, 0, 1, 1, -1, -1};
  const MetricsReport with = evaluate_partitions(gt, pred, true);
  CHECK(with.n_unassigned == 2);
  CHECK(with.n_planes_pred == 2);
  CHECK(with.ri == doctest::Approx(1.0));  // the extra cluster matches gt cluster 2 exactly

  const std::vector<int> pred_bad = {0, 0, 1, -1, -1, 1};
  const MetricsReport drop = evaluate_partitions(gt, pred_bad, false);
  CHECK(drop.n_unassigned == 2);
  // dropped elements leave gt = {0,0,1,2} vs pred = {0,0,1,1}
  CHECK(drop.ri == doctest::Approx(brute_rand_index({0, 0, 1, 2}, {0, 0, 1, 1})).epsilon(1e-12));
}

TEST_CASE("metrics reports round-trip through JSON") {
  MetricsReport r;
  r.ri = 0.951;
  r.voi = 0.312;
  r.sc = 0.876;
  r.accuracy = 0.012;
  r.completeness = 0.018;
  r.n_planes_pred = 8;
  r.n_planes_gt = 8;
  r.n_unassigned = 17;
  const std::string path = "/tmp/gsplane_metrics_test.json";
  save_metrics(r, path);
  const MetricsReport back = load_metrics(path);
  CHECK(back.ri == r.ri);
  CHECK(back.voi == r.voi);
  CHECK(back.sc == r.sc);
  CHECK(back.accuracy == r.accuracy);
  CHECK(back.n_planes_pred == r.n_planes_pred);
  CHECK(back.n_unassigned == r.n_unassigned);
  std::remove(path.c_str());
}
