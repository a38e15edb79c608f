#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gsplane/gmt.hpp"

#include <Eigen/Eigenvalues>

#include <random>

using namespace gsplane;

namespace {

GaussianNode node(const Vec3& mu, const Mat3& cov, const Vec3& n = Vec3::UnitZ(),
                  const VecX& z = VecX::Unit(3, 0), long leaves = 1) {
  GaussianNode g;
  g.mu = mu;
  g.cov = cov;
  g.normal = n;
  g.descriptor = z;
  g.leaf_count = leaves;
  return g;
}

Mat3 random_spd(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat3 a;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a(r, c) = gauss(rng);
  return a * a.transpose() + 0.05 * Mat3::Identity();
}

}  // namespace

TEST_CASE("Bhattacharyya distance of identical Gaussians is zero") {
  auto rng = make_rng(2);
  for (int t = 0; t < 20; ++t) {
    const Mat3 cov = random_spd(rng);
    const GaussianNode g = node(Vec3(1, -2, 0.5), cov);
    CHECK(std::abs(bhattacharyya(g, g)) <= 1e-12);
  }
}

TEST_CASE("Bhattacharyya worked values match independent evaluation") {
  // unit covariances two apart: (1/8) * 4 = 0.5, log term zero
  const GaussianNode a = node(Vec3(0, 0, 0), Mat3::Identity());
  const GaussianNode b = node(Vec3(2, 0, 0), Mat3::Identity());
  CHECK(bhattacharyya(a, b) == doctest::Approx(0.5).epsilon(1e-12));

  // equal means, covariances I and 4I: 0.5 * ln(2.5^3 / sqrt(64))
  const GaussianNode c = node(Vec3(1, 1, 1), Mat3::Identity());
  const GaussianNode d = node(Vec3(1, 1, 1), 4.0 * Mat3::Identity());
  const double expected = 0.5 * std::log(15.625 / 8.0);
  CHECK(bhattacharyya(c, d) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(expected == doctest::Approx(0.3347).epsilon(1e-3));
}

TEST_CASE("Bhattacharyya axioms hold on random pairs") {
  auto rng = make_rng(8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const GaussianNode a = node(Vec3(gauss(rng), gauss(rng), gauss(rng)), random_spd(rng));
    const GaussianNode b = node(Vec3(gauss(rng), gauss(rng), gauss(rng)), random_spd(rng));
    const double dab = bhattacharyya(a, b);
    const double dba = bhattacharyya(b, a);
    CHECK(std::abs(dab - dba) <= 1e-12);
    CHECK(dab >= 0.0);
  }
  // zero iff identical parameters
  const GaussianNode g = node(Vec3(0.3, 0.1, -0.7), random_spd(rng));
  CHECK(bhattacharyya(g, g) <= 1e-9);
  GaussianNode h = g;
  h.mu.x() += 0.05;
  CHECK(bhattacharyya(g, h) > 1e-9);
}

TEST_CASE("Bhattacharyya rejects non-SPD input") {
  GaussianNode bad = node(Vec3::Zero(), Mat3::Identity());
  bad.cov(2, 2) = -1.0;
  const GaussianNode ok = node(Vec3::Zero(), Mat3::Identity());
  CHECK_THROWS_AS(bhattacharyya(bad, ok), std::invalid_argument);
}

TEST_CASE("merging symmetric unit Gaussians halves the covariance and averages the means") {
  const GaussianNode a = node(Vec3(1, 0, 0), Mat3::Identity());
  const GaussianNode b = node(Vec3(0, 1, 0), Mat3::Identity());
  const GaussianNode p = merge_nodes(a, b);
  CHECK((p.cov - 0.5 * Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((p.mu - Vec3(0.5, 0.5, 0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(p.leaf_count == 2);
}

TEST_CASE("the tighter node dominates the merged mean") {
  const GaussianNode a = node(Vec3(0, 0, 0), Mat3::Identity());
  const GaussianNode b = node(Vec3(1, 0, 0), 100.0 * Mat3::Identity());
  const GaussianNode p = merge_nodes(a, b);
  // oracle: Sj (Si+Sj)^-1 mui + Si (Si+Sj)^-1 muj = (1/101, 0, 0)
  CHECK((p.mu - Vec3(1.0 / 101.0, 0, 0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("merge is exactly commutative field for field") {
  auto rng = make_rng(12);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    GaussianNode a = node(Vec3(gauss(rng), gauss(rng), gauss(rng)), random_spd(rng),
                          Vec3(random_unit_vector(rng, 3)), random_unit_vector(rng, 3),
                          1 + (t % 5));
    GaussianNode b = node(Vec3(gauss(rng), gauss(rng), gauss(rng)), random_spd(rng),
                          Vec3(random_unit_vector(rng, 3)), random_unit_vector(rng, 3),
                          1 + (t % 3));
    const GaussianNode ab = merge_nodes(a, b);
    const GaussianNode ba = merge_nodes(b, a);
    CHECK((ab.mu - ba.mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ab.cov - ba.cov).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ab.normal - ba.normal).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ab.descriptor - ba.descriptor).cwiseAbs().maxCoeff() == 0.0);
    CHECK(ab.leaf_count == ba.leaf_count);
  }
}

TEST_CASE("merged covariance shrinks both parents in the Loewner order") {
  auto rng = make_rng(23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const GaussianNode a = node(Vec3(gauss(rng), gauss(rng), gauss(rng)), random_spd(rng));
    const GaussianNode b = node(Vec3(gauss(rng), gauss(rng), gauss(rng)), random_spd(rng));
    const GaussianNode p = merge_nodes(a, b);
    for (const Mat3& parent : {a.cov, b.cov}) {
      Eigen::SelfAdjointEigenSolver<Mat3> eig(parent - p.cov);
      CHECK(eig.eigenvalues()[0] >= -1e-9);
    }
  }
}

TEST_CASE("orthogonal descriptors block all merges") {
  std::vector<GaussianNode> leaves;
  for (int i = 0; i < 3; ++i)
    leaves.push_back(node(Vec3(0.01 * i, 0, 0), Mat3::Identity(), Vec3::UnitZ(), VecX::Unit(3, i)));
  const PlaneSet set = build_tree(leaves, 1.0, 0.05);
  CHECK(set.plane_count() == 3);
  double pi_sum = 0;
  for (double pi : set.pi) pi_sum += pi;
  CHECK(pi_sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coplanar leaves with matching descriptors merge into one root child") {
  std::vector<GaussianNode> leaves;
  leaves.push_back(node(Vec3(0, 0, 0), Mat3::Identity()));
  leaves.push_back(node(Vec3(0.5, 0, 0), Mat3::Identity()));
  const PlaneSet set = build_tree(leaves, 1.0, 0.05);
  CHECK(set.plane_count() == 1);
  CHECK(set.pi[0] == doctest::Approx(1.0));
  CHECK(set.nodes[set.roots[0]].leaf_count == 2);
}

TEST_CASE("every leaf descends from exactly one root child") {
  auto rng = make_rng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> cluster(0, 2);
  std::vector<GaussianNode> leaves;
  const Vec3 zs[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (int i = 0; i < 40; ++i) {
    const int c = cluster(rng);
    leaves.push_back(node(Vec3(3.0 * c, 0, 0) + 0.2 * Vec3(gauss(rng), gauss(rng), gauss(rng)),
                          random_spd(rng), Vec3::UnitZ(), zs[c]));
  }
  const PlaneSet set = build_tree(leaves, 10.0, 0.05);

  // walk down from each root and collect leaf arena ids
  std::vector<int> owner(set.nodes.size(), -1);
  std::vector<int> stack;
  int leaf_seen = 0;
  for (std::size_t r = 0; r < set.roots.size(); ++r) {
    stack.push_back(set.roots[r]);
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      const GaussianNode& g = set.nodes[id];
      if (g.left < 0 && g.right < 0) {
        CHECK(owner[id] == -1);
        owner[id] = static_cast<int>(r);
        ++leaf_seen;
        continue;
      }
      stack.push_back(g.left);
      stack.push_back(g.right);
    }
  }
  CHECK(leaf_seen == 40);

  // determinism: identical input gives an identical tree
  const PlaneSet again = build_tree(leaves, 10.0, 0.05);
  REQUIRE(again.roots.size() == set.roots.size());
  for (std::size_t r = 0; r < set.roots.size(); ++r) {
    CHECK((again.nodes[again.roots[r]].mu - set.nodes[set.roots[r]].mu).norm() == 0.0);
    CHECK(again.pi[r] == set.pi[r]);
  }
}

TEST_CASE("build_tree refuses an empty leaf list") {
  CHECK_THROWS_AS(build_tree({}, 1.0, 0.05), std::invalid_argument);
}

// ---- leaf construction ------------------------------------------------------

namespace {

/// A scene plus hand-made maps describing one fronto-parallel rectangle
/// segment at depth 2.
struct LeafFixture {
  Scene scene;
  std::vector<SegmentLabelMap> merged;
  std::vector<RenderedMaps> maps;

  explicit LeafFixture(int size = 32, int x0 = 8, int x1 = 24, int y0 = 10, int y1 = 22) {
    CameraView view;
    view.fx = view.fy = 32;
    view.u0 = view.v0 = size / 2.0;
    view.width = view.height = size;
    view.world_to_camera.setIdentity();
    scene.views.push_back(view);
    GaussianPrimitive p;
    p.descriptor = VecX::Unit(3, 0);
    scene.primitives.push_back(p);  // descriptor_dim needs one primitive

    RenderedMaps m;
    m.height = m.width = size;
    m.desc_dim = 3;
    m.depth = ImageF(size, size, 1, 2.0);
    m.depth_valid = ImageU8(size, size, 1, 1);
    m.acc_alpha = ImageF(size, size, 1, 1.0);
    m.argmax = ImageI(size, size, 1, 0);
    m.normal = ImageF(size, size, 3, 0.0);
    m.descriptor = ImageF(size, size, 3, 0.0);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        m.normal.at(y, x, 2) = -1.0;       // facing the camera
        m.descriptor.at(y, x, 1) = 1.0;
      }
    SegmentLabelMap seg;
    seg.labels = ImageI(size, size, 1, 0);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) seg.labels.at(y, x) = 1;
    seg.m = 1;
    merged.push_back(seg);
    maps.push_back(std::move(m));
  }
};

}  // namespace

TEST_CASE("a rectangle segment lifts to a flat leaf on its plane") {
  LeafFixture fx;
  const auto leaves = build_leaves(fx.scene, fx.merged, fx.maps, 50);
  REQUIRE(leaves.size() == 1);
  const GaussianNode& leaf = leaves[0];
  CHECK(leaf.mu.z() == doctest::Approx(2.0).epsilon(1e-9));
  Eigen::SelfAdjointEigenSolver<Mat3> eig(leaf.cov);
  CHECK(eig.eigenvalues()[0] <= kLeafCovEps + 1e-9);  // flat up to the regularizer
  const Vec3 thin = eig.eigenvectors().col(0);
  CHECK(std::abs(thin.dot(Vec3::UnitZ())) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((leaf.normal - Vec3(0, 0, -1)).norm() < 1e-12);
  CHECK((leaf.descriptor - VecX::Unit(3, 1)).norm() < 1e-12);
  CHECK(leaf.leaf_count == 1);
}

TEST_CASE("segments below the pixel threshold produce no leaf") {
  LeafFixture fx(32, 14, 18, 14, 18);  // 16 px segment
  CHECK(build_leaves(fx.scene, fx.merged, fx.maps, 50).empty());
}

TEST_CASE("segments with too few boundary points are skipped") {
  // a 2 x 30 sliver has 60 px (> p_min = 50) and 60 boundary px; shrink the
  // valid depth region so fewer than 8 boundary points can lift
  LeafFixture fx(32, 1, 31, 10, 12);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (!(y == 10 && x >= 4 && x < 10)) fx.maps[0].depth_valid.at(y, x) = 0;
  CHECK(build_leaves(fx.scene, fx.merged, fx.maps, 50).empty());
}

// ---- assignment and plane fitting -------------------------------------------

namespace {

PlaneSet two_plane_set() {
  std::vector<GaussianNode> leaves;
  Mat3 flat = Mat3::Identity();
  flat(2, 2) = 1e-4;  // thin in z
  leaves.push_back(node(Vec3(0, 0, 0), flat, Vec3::UnitZ(), VecX::Unit(3, 0)));
  Mat3 flat_x = Mat3::Identity();
  flat_x(0, 0) = 1e-4;  // thin in x
  leaves.push_back(node(Vec3(2, 0, 1), flat_x, Vec3::UnitX(), VecX::Unit(3, 1)));
  return build_tree(leaves, 0.5, 0.05);
}

}  // namespace

TEST_CASE("primitives at a plane's mean with matching descriptors pick that plane") {
  const PlaneSet planes = two_plane_set();
  REQUIRE(planes.plane_count() == 2);
  Scene scene;
  GaussianPrimitive p;
  p.center = planes.plane(0).mu;
  p.descriptor = planes.plane(0).descriptor;
  scene.primitives.push_back(p);
  p.center = planes.plane(1).mu;
  p.descriptor = planes.plane(1).descriptor;
  scene.primitives.push_back(p);
  const auto labels = assign_primitives(scene, planes, 0.2, 1e-9);
  CHECK(labels[0] == 0);
  CHECK(labels[1] == 1);
}

TEST_CASE("the descriptor gate beats raw likelihood for equidistant primitives") {
  const PlaneSet planes = two_plane_set();
  // identify the planes by their descriptors; root order is an implementation detail
  const int thin_x = planes.plane(0).descriptor[1] > 0.5 ? 0 : 1;
  const int thin_z = 1 - thin_x;

  Scene scene;
  GaussianPrimitive p;
  p.center = 0.5 * (planes.plane(0).mu + planes.plane(1).mu);
  p.descriptor = planes.plane(thin_x).descriptor;  // gate admits only the x-thin plane
  scene.primitives.push_back(p);
  const auto labels = assign_primitives(scene, planes, 0.2, 1e-9);
  CHECK(labels[0] == thin_x);

  // direct score oracle: the ungated argmax would have picked the other plane
  auto score = [&](int k) {
    const auto& g = planes.plane(k);
    const Vec3 d = scene.primitives[0].center - g.mu;
    return std::log(planes.pi[k]) - 0.5 * (3 * std::log(2 * M_PI) +
                                           std::log(g.cov.determinant()) +
                                           d.dot(g.cov.inverse() * d));
  };
  CHECK(score(thin_z) > score(thin_x));
}

TEST_CASE("isolated outliers stay unassigned") {
  const PlaneSet planes = two_plane_set();
  Scene scene;
  GaussianPrimitive p;
  p.center = Vec3(5, 5, 5);                        // meters away from both planes
  p.descriptor = Vec3(1, 1, 1).normalized();       // matches neither gate
  scene.primitives.push_back(p);
  const auto labels = assign_primitives(scene, planes, 0.2, 1e-9);
  CHECK(labels[0] == -1);
}

TEST_CASE("plane fitting recovers noiseless parameters exactly and flags tiny planes") {
  auto rng = make_rng(3);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Scene scene;
  std::vector<int> labels;
  const Vec3 n = Vec3(0.2, 0.3, 0.93).normalized();
  const Vec3 t1 = n.cross(Vec3::UnitX()).normalized();
  const Vec3 t2 = n.cross(t1).normalized();
  for (int i = 0; i < 100; ++i) {
    GaussianPrimitive p;
    p.center = Vec3(0.5, -0.25, 1.0) + uni(rng) * t1 + uni(rng) * t2;
    p.normal = n;
    p.descriptor = VecX::Unit(3, 0);
    scene.primitives.push_back(p);
    labels.push_back(0);
  }
  // a 2-member plane
  for (int i = 0; i < 2; ++i) {
    GaussianPrimitive p;
    p.center = Vec3(3, 3, static_cast<double>(i));
    p.descriptor = VecX::Unit(3, 0);
    scene.primitives.push_back(p);
    labels.push_back(1);
  }
  const auto fits = fit_plane_params(scene, labels, 2);
  REQUIRE(fits.size() == 2);
  CHECK(fits[0].valid);
  CHECK(std::abs(fits[0].normal.dot(n)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fits[0].normal.dot(n) > 0);  // signed toward member normals
  for (int i = 0; i < 100; ++i) {
    const auto& c = scene.primitives[i].center;
    CHECK(std::abs(fits[0].normal.dot(c) + fits[0].offset) < 1e-9);
  }
  CHECK_FALSE(fits[1].valid);
  CHECK(fits[1].members == 2);
}

TEST_CASE("noisy members still give a fitted normal within a degree") {
  auto rng = make_rng(9);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 0.01);
  Scene scene;
  std::vector<int> labels;
  const Vec3 n = Vec3(0.1, -0.4, 0.91).normalized();
  const Vec3 t1 = n.cross(Vec3::UnitX()).normalized();
  const Vec3 t2 = n.cross(t1).normalized();
  for (int i = 0; i < 400; ++i) {
    GaussianPrimitive p;
    p.center = uni(rng) * t1 + uni(rng) * t2 + gauss(rng) * n;
    p.normal = n;
    p.descriptor = VecX::Unit(3, 0);
    scene.primitives.push_back(p);
    labels.push_back(0);
  }
  const auto fits = fit_plane_params(scene, labels, 1);
  CHECK(std::acos(std::clamp(std::abs(fits[0].normal.dot(n)), 0.0, 1.0)) < deg2rad(1.0));
}
