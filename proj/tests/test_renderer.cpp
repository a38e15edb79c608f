#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gsplane/renderer.hpp"

#include <algorithm>
#include <random>

using namespace gsplane;

namespace {

CameraView identity_view(int size = 128, double focal = 100.0) {
  CameraView v;
  v.fx = v.fy = focal;
  v.u0 = v.v0 = size / 2.0;
  v.width = v.height = size;
  v.world_to_camera.setIdentity();
  return v;
}

GaussianPrimitive unit_prim(const Vec3& center, double opacity = 1.0) {
  GaussianPrimitive p;
  p.center = center;
  p.opacity = opacity;
  p.descriptor = VecX::Unit(3, 0);
  return p;
}

Scene one_prim_scene(const GaussianPrimitive& p, const CameraView& v) {
  Scene s;
  s.primitives.push_back(p);
  s.views.push_back(v);
  return s;
}

}  // namespace

TEST_CASE("on-axis projection lands on the principal point with the hand-evaluated covariance") {
  const CameraView view = identity_view();
  GaussianPrimitive p = unit_prim(Vec3(0, 0, 2));
  // scale 1 => world covariance I
  const auto s = project(p, view);
  REQUIRE(s.has_value());
  CHECK(s->mean2.x() == doctest::Approx(view.u0));
  CHECK(s->mean2.y() == doctest::Approx(view.v0));
  CHECK(s->depth == doctest::Approx(2.0));
  // oracle: J W Sigma W^T J^T with J = [[fx/z,0,0],[0,fy/z,0]] on axis
  const Mat2 expected = Mat2::Identity() * (2500.0 + kCovDilation);
  CHECK((s->cov2d - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("primitives behind the near plane are culled") {
  const CameraView view = identity_view();
  CHECK_FALSE(project(unit_prim(Vec3(0, 0, -1)), view).has_value());
  CHECK_FALSE(project(unit_prim(Vec3(0, 0, kNearPlane)), view).has_value());
  CHECK(project(unit_prim(Vec3(0, 0, kNearPlane + 0.01)), view).has_value());
}

TEST_CASE("isotropic covariance stays isotropic on the optical axis") {
  const CameraView view = identity_view();
  GaussianPrimitive p = unit_prim(Vec3(0, 0, 3));
  p.scale = Vec3(0.2, 0.2, 0.2);
  p.rotation = Quat(Eigen::AngleAxisd(0.8, Vec3(1, 2, 3).normalized()));
  const auto s = project(p, view);
  REQUIRE(s.has_value());
  CHECK(s->cov2d(0, 0) == doctest::Approx(s->cov2d(1, 1)).epsilon(1e-12));
  CHECK(s->cov2d(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single opaque splat blends 0.99 of its color at the mean pixel") {
  const CameraView view = identity_view();
  GaussianPrimitive p = unit_prim(Vec3(0, 0, 2), 1.0);
  p.color = Vec3(0.25, 0.5, 0.75);
  const Scene scene = one_prim_scene(p, view);
  const RenderedMaps maps = render(scene, view, RenderChannels::all());
  const int cx = static_cast<int>(view.u0), cy = static_cast<int>(view.v0);
  // alpha clamps at 0.99 exactly at the mean
  CHECK(maps.color.at(cy, cx, 0) == doctest::Approx(0.99 * 0.25).epsilon(1e-12));
  CHECK(maps.color.at(cy, cx, 1) == doctest::Approx(0.99 * 0.5).epsilon(1e-12));
  CHECK(maps.color.at(cy, cx, 2) == doctest::Approx(0.99 * 0.75).epsilon(1e-12));
  CHECK(maps.acc_alpha.at(cy, cx) == doctest::Approx(0.99).epsilon(1e-12));
  CHECK(maps.argmax.at(cy, cx) == 0);
  CHECK(maps.valid_at(cy, cx));
  CHECK(maps.depth.at(cy, cx) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("two half-opacity splats blend front-to-back") {
  const CameraView view = identity_view();
  Scene scene;
  scene.views.push_back(view);
  GaussianPrimitive front = unit_prim(Vec3(0, 0, 2), 0.5);
  front.scale = Vec3(1, 1, 1);
  front.color = Vec3(1, 0, 0);
  GaussianPrimitive back = unit_prim(Vec3(0, 0, 4), 0.5);
  back.scale = Vec3(2, 2, 2);  // same footprint at double depth
  back.color = Vec3(0, 1, 0);
  scene.primitives = {back, front};  // insertion order must not matter
  const RenderedMaps maps = render(scene, view, RenderChannels::all());
  const int cx = static_cast<int>(view.u0), cy = static_cast<int>(view.v0);
  CHECK(maps.color.at(cy, cx, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(maps.color.at(cy, cx, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(maps.color.at(cy, cx, 2) == doctest::Approx(0.0));
  CHECK(maps.acc_alpha.at(cy, cx) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(maps.argmax.at(cy, cx) == 1);  // the front primitive dominates
}

namespace {

Scene random_wall_scene(int n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Scene scene;
  for (int i = 0; i < n; ++i) {
    GaussianPrimitive p;
    p.center = Vec3(uni(rng), uni(rng), 2.0 + 0.3 * uni(rng));
    p.scale = Vec3(0.08, 0.08, 0.01);
    p.rotation = Quat(Eigen::AngleAxisd(uni(rng), Vec3(uni(rng), uni(rng), 1).normalized()));
    p.opacity = 0.5 + 0.4 * uni(rng);
    p.color = Vec3(0.5 + 0.5 * uni(rng), 0.5 + 0.5 * uni(rng), 0.5 + 0.5 * uni(rng));
    p.normal = random_unit_vector(rng, 3);
    p.descriptor = random_unit_vector(rng, 3);
    scene.primitives.push_back(p);
  }
  return scene;
}

}  // namespace

TEST_CASE("per-pixel weights are non-negative and sum to at most one") {
  const CameraView view = identity_view();
  const Scene scene = random_wall_scene(400, 21);
  const RenderedMaps maps = render(scene, view, RenderChannels::all(true));
  for (int y = 0; y < maps.height; ++y)
    for (int x = 0; x < maps.width; ++x) {
      const auto& contribs = maps.contributions[y * maps.width + x];
      double sum = 0.0;
      for (const auto& c : contribs) {
        CHECK(c.weight >= 0.0);
        sum += c.weight;
      }
      CHECK(sum <= 1.0 + 1e-12);
      CHECK(maps.acc_alpha.at(y, x) == doctest::Approx(sum).epsilon(1e-12));
    }
}

TEST_CASE("permuting primitive order leaves the rendered maps identical") {
  const CameraView view = identity_view();
  Scene scene = random_wall_scene(300, 33);
  const RenderedMaps ref = render(scene, view, RenderChannels::all());

  Scene shuffled = scene;
  auto rng = make_rng(99);
  std::shuffle(shuffled.primitives.begin(), shuffled.primitives.end(), rng);
  const RenderedMaps got = render(shuffled, view, RenderChannels::all());

  for (std::size_t i = 0; i < ref.color.data().size(); ++i)
    CHECK(ref.color.data()[i] == got.color.data()[i]);
  for (std::size_t i = 0; i < ref.depth.data().size(); ++i)
    CHECK(ref.depth.data()[i] == got.depth.data()[i]);
  for (std::size_t i = 0; i < ref.acc_alpha.data().size(); ++i)
    CHECK(ref.acc_alpha.data()[i] == got.acc_alpha.data()[i]);
}

TEST_CASE("rendered descriptor blend is linear in the per-primitive descriptors") {
  const CameraView view = identity_view();
  Scene scene = random_wall_scene(120, 55);
  auto rng = make_rng(17);

  Scene s1 = scene, s2 = scene, s_mix = scene;
  const double a = 0.7, b = -1.3;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const VecX z1 = random_unit_vector(rng, 3);
    const VecX z2 = random_unit_vector(rng, 3);
    s1.primitives[i].descriptor = z1;
    s2.primitives[i].descriptor = z2;
    s_mix.primitives[i].descriptor = a * z1 + b * z2;
  }
  RenderChannels ch{false, false, true, false};
  const RenderedMaps m1 = render(s1, view, ch);
  const RenderedMaps m2 = render(s2, view, ch);
  const RenderedMaps mm = render(s_mix, view, ch);
  for (std::size_t i = 0; i < mm.descriptor_blend.data().size(); ++i) {
    const double expected = a * m1.descriptor_blend.data()[i] + b * m2.descriptor_blend.data()[i];
    CHECK(mm.descriptor_blend.data()[i] == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("rendered normals and descriptors are unit length where valid") {
  const CameraView view = identity_view();
  const Scene scene = random_wall_scene(500, 77);
  const RenderedMaps maps = render(scene, view, RenderChannels::all());
  int valid_count = 0;
  for (int y = 0; y < maps.height; ++y)
    for (int x = 0; x < maps.width; ++x) {
      if (!maps.valid_at(y, x)) continue;
      ++valid_count;
      const double* n = maps.normal.pixel(y, x);
      CHECK(std::abs(Vec3(n[0], n[1], n[2]).norm() - 1.0) < 1e-9);
      const double* z = maps.descriptor.pixel(y, x);
      CHECK(std::abs(Vec3(z[0], z[1], z[2]).norm() - 1.0) < 1e-9);
    }
  CHECK(valid_count > 1000);
}

TEST_CASE("render is reproducible across worker counts") {
  const CameraView view = identity_view();
  const Scene scene = random_wall_scene(400, 13);
  set_thread_count(1);
  const RenderedMaps a = render(scene, view, RenderChannels::all());
  set_thread_count(4);
  const RenderedMaps b = render(scene, view, RenderChannels::all());
  set_thread_count(0);
  for (std::size_t i = 0; i < a.color.data().size(); ++i)
    CHECK(a.color.data()[i] == b.color.data()[i]);
  for (std::size_t i = 0; i < a.depth.data().size(); ++i)
    CHECK(a.depth.data()[i] == b.depth.data()[i]);
}
