#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gsplane/geometry.hpp"

#include <random>

using namespace gsplane;

namespace {

std::vector<std::vector<int>> brute_force_knn(const std::vector<Vec3>& pts, int k) {
  struct Cand {
    double d2;
    int idx;
  };
  std::vector<std::vector<int>> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<Cand> cands;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      cands.push_back({(pts[j] - pts[i]).squaredNorm(), static_cast<int>(j)});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      return a.d2 != b.d2 ? a.d2 < b.d2 : a.idx < b.idx;
    });
    const int take = std::min<std::size_t>(k, cands.size());
    for (int t = 0; t < take; ++t) out[i].push_back(cands[t].idx);
  }
  return out;
}

Scene scene_from_points(const std::vector<Vec3>& pts) {
  Scene scene;
  for (const auto& p : pts) {
    GaussianPrimitive prim;
    prim.center = p;
    prim.scale = Vec3(0.05, 0.05, 0.005);
    prim.descriptor = VecX::Unit(3, 0);
    scene.primitives.push_back(prim);
  }
  return scene;
}

}  // namespace

TEST_CASE("middle of three collinear points picks the nearer endpoint") {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(3, 0, 0)};
  const KnnIndex knn = build_knn(pts, 1);
  CHECK(knn.neighbors[1] == std::vector<int>{0});
  CHECK(knn.neighbors[0] == std::vector<int>{1});
  CHECK(knn.neighbors[2] == std::vector<int>{1});
}

TEST_CASE("grid KNN equals the brute-force oracle on random points") {
  auto rng = make_rng(42);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  for (int n : {50, 500, 2000}) {
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = Vec3(uni(rng), uni(rng), 0.3 * uni(rng));
    for (int k : {1, 10, 30}) {
      const KnnIndex fast = build_knn(pts, k);
      const auto slow = brute_force_knn(pts, k);
      for (int i = 0; i < n; ++i) CHECK(fast.neighbors[i] == slow[i]);
    }
  }
}

TEST_CASE("duplicate coordinates break ties by index") {
  std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const KnnIndex knn = build_knn(pts, 2);
  CHECK(knn.neighbors[0] == std::vector<int>{1, 2});
  CHECK(knn.neighbors[1] == std::vector<int>{0, 2});
  CHECK(knn.neighbors[3] == std::vector<int>{0, 1});
  CHECK(build_knn(pts, 2).neighbors == knn.neighbors);  // deterministic
}

TEST_CASE("KNN needs at least two points") {
  CHECK_THROWS_AS(build_knn(std::vector<Vec3>{Vec3::Zero()}, 1), std::invalid_argument);
}

TEST_CASE("neighbor lists clip to N-1") {
  auto rng = make_rng(9);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Vec3> pts(5);
  for (auto& p : pts) p = Vec3(uni(rng), uni(rng), uni(rng));
  const KnnIndex knn = build_knn(pts, 30);
  for (const auto& list : knn.neighbors) CHECK(list.size() == 4);
}

TEST_CASE("coplanar neighborhoods leave aligned centers unchanged") {
  auto rng = make_rng(5);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Vec3> pts(200);
  for (auto& p : pts) p = Vec3(uni(rng), uni(rng), 0.5);  // exact plane z = 0.5
  Scene scene = scene_from_points(pts);
  const KnnIndex knn = build_knn(scene, 10);
  const std::vector<Vec3> before = pts;
  planar_align(scene, knn);
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK((scene.primitives[i].center - before[i]).norm() < 1e-9);
}

TEST_CASE("an off-plane point lands exactly on its neighbors' plane") {
  // plane-fit oracle: neighbors are exactly coplanar, so one alignment must
  // zero the point-plane residual
  std::vector<Vec3> pts;
  auto rng = make_rng(6);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  const Vec3 n = Vec3(0.3, -0.5, 0.81).normalized();
  const Vec3 t1 = n.cross(Vec3::UnitX()).normalized();
  const Vec3 t2 = n.cross(t1).normalized();
  for (int i = 0; i < 40; ++i) pts.push_back(uni(rng) * t1 + uni(rng) * t2);
  pts.push_back(0.1 * n);  // 0.1 m off the plane through the origin
  Scene scene = scene_from_points(pts);
  const KnnIndex knn = build_knn(scene, 12);
  planar_align(scene, knn);
  const Vec3 aligned = scene.primitives.back().center;
  CHECK(std::abs(n.dot(aligned)) < 1e-6);
}

TEST_CASE("alignment strictly reduces noisy-plane residuals and is idempotent when clean") {
  auto rng = make_rng(77);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 0.02);
  std::vector<Vec3> pts(600);
  for (auto& p : pts) p = Vec3(uni(rng), uni(rng), gauss(rng));
  Scene scene = scene_from_points(pts);

  auto mean_residual = [&] {
    double s = 0;
    for (const auto& p : scene.primitives) s += std::abs(p.center.z());
    return s / static_cast<double>(scene.primitives.size());
  };
  const double before = mean_residual();
  KnnIndex knn = build_knn(scene, 30);
  planar_align(scene, knn);
  const double after = mean_residual();
  CHECK(after < before);

  // noiseless idempotence: once the field is exactly planar, another pass is a no-op
  for (auto& p : scene.primitives) p.center.z() = 0.0;
  knn = build_knn(scene, 30);
  planar_align(scene, knn);
  std::vector<Vec3> snap;
  for (const auto& p : scene.primitives) snap.push_back(p.center);
  knn = build_knn(scene, 30);
  planar_align(scene, knn);
  for (std::size_t i = 0; i < snap.size(); ++i)
    CHECK((scene.primitives[i].center - snap[i]).norm() < 1e-9);
}

TEST_CASE("rank-deficient neighborhoods are skipped") {
  // all neighbors coincide, tangent plane undefined
  std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 0, 0),
                           Vec3(0.5, 0.5, 0.5)};
  Scene scene = scene_from_points(pts);
  const KnnIndex knn = build_knn(scene, 4);
  planar_align(scene, knn);
  CHECK((scene.primitives[4].center - Vec3(0.5, 0.5, 0.5)).norm() == 0.0);
}

TEST_CASE("smoothing a uniform field changes nothing") {
  std::vector<Vec3> pts;
  auto rng = make_rng(12);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) pts.push_back(Vec3(uni(rng), uni(rng), uni(rng)));
  Scene scene = scene_from_points(pts);
  const Vec3 n = Vec3(1, 2, 3).normalized();
  for (auto& p : scene.primitives) p.normal = n;
  const KnnIndex knn = build_knn(scene, 8);
  laplacian_smooth(scene, knn, SmoothField::kNormal);
  for (const auto& p : scene.primitives) CHECK((p.normal - n).norm() < 1e-12);
}

TEST_CASE("one flipped normal among aligned neighbors is corrected") {
  std::vector<Vec3> pts;
  auto rng = make_rng(13);
  std::uniform_real_distribution<double> uni(-0.3, 0.3);
  for (int i = 0; i < 31; ++i) pts.push_back(Vec3(uni(rng), uni(rng), 0.0));
  Scene scene = scene_from_points(pts);
  for (auto& p : scene.primitives) p.normal = Vec3::UnitZ();
  scene.primitives[0].normal = -Vec3::UnitZ();
  const KnnIndex knn = build_knn(scene, 30);
  laplacian_smooth(scene, knn, SmoothField::kNormal);
  CHECK(scene.primitives[0].normal.dot(Vec3::UnitZ()) > 0.9);
  CHECK(std::abs(scene.primitives[0].normal.norm() - 1.0) < 1e-12);
}

TEST_CASE("an exactly antipodal neighborhood leaves the feature unchanged") {
  // 1 + 1 antipodal neighbors: the mean collapses to zero
  std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0.01, 0, 0)};
  Scene scene = scene_from_points(pts);
  scene.primitives[0].normal = Vec3::UnitZ();
  scene.primitives[1].normal = -Vec3::UnitZ();
  const KnnIndex knn = build_knn(scene, 1);
  laplacian_smooth(scene, knn, SmoothField::kNormal);
  CHECK((scene.primitives[0].normal - Vec3::UnitZ()).norm() == 0.0);
  CHECK((scene.primitives[1].normal + Vec3::UnitZ()).norm() == 0.0);
}

TEST_CASE("smoothing contracts clustered descriptor fields on the sphere") {
  auto rng = make_rng(21);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  std::vector<Vec3> pts(100);
  for (auto& p : pts) p = Vec3(uni(rng), uni(rng), 0.1 * uni(rng));
  Scene scene = scene_from_points(pts);
  const VecX target = VecX::Unit(3, 2);
  for (auto& p : scene.primitives) {
    VecX z = target + 0.4 * random_unit_vector(rng, 3);
    p.descriptor = z / z.norm();
  }
  auto max_angle = [&] {
    double worst = 0;
    VecX mean = VecX::Zero(3);
    for (const auto& p : scene.primitives) mean += p.descriptor;
    mean /= mean.norm();
    for (const auto& p : scene.primitives)
      worst = std::max(worst, std::acos(std::clamp(p.descriptor.dot(mean), -1.0, 1.0)));
    return worst;
  };
  const KnnIndex knn = build_knn(scene, 15);
  double prev = max_angle();
  for (int pass = 0; pass < 3; ++pass) {
    laplacian_smooth(scene, knn, SmoothField::kDescriptor);
    const double cur = max_angle();
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("nearest distances between point sets are exact") {
  auto rng = make_rng(31);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Vec3> a(300), b(400);
  for (auto& p : a) p = Vec3(uni(rng), uni(rng), uni(rng));
  for (auto& p : b) p = Vec3(uni(rng), uni(rng), uni(rng));
  const auto fast = nearest_distances(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) best = std::min(best, (q - a[i]).norm());
    CHECK(fast[i] == doctest::Approx(best).epsilon(1e-12));
  }
}
