#include "gsplane/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gsplane {

std::vector<Vec3> PlaneRect::polygon() const {
  return {center - half_u * axis_u - half_v * axis_v, center + half_u * axis_u - half_v * axis_v,
          center + half_u * axis_u + half_v * axis_v, center - half_u * axis_u + half_v * axis_v};
}

void SynthConfig::validate() const {
  if (gaussians_per_m2 <= 0) throw std::invalid_argument("synth: gaussians_per_m2 must be positive");
  if (position_noise < 0 || normal_noise < 0 || supervision_normal_noise < 0)
    throw std::invalid_argument("synth: noise levels must be non-negative");
  if (view_count < 1 || image_size < 8 || focal <= 0)
    throw std::invalid_argument("synth: invalid camera settings");
  if (lambda_split < 0 || jitter_prob < 0 || jitter_prob > 1)
    throw std::invalid_argument("synth: invalid mask corruption settings");
  for (const auto& p : custom_planes)
    if (p.area() <= 0) throw std::invalid_argument("synth: degenerate plane rectangle (area 0)");
  if (custom_planes.empty() && (room.minCoeff() <= 0 || tilted_count < 0))
    throw std::invalid_argument("synth: invalid room spec");
}

namespace {

std::vector<PlaneRect> default_planes(const SynthConfig& cfg, std::mt19937_64& rng) {
  const double lx = cfg.room.x(), ly = cfg.room.y(), lz = cfg.room.z();
  std::vector<PlaneRect> planes;
  // normals point into the room
  planes.push_back({{0, 0, 0}, Vec3::UnitX(), Vec3::UnitY(), lx / 2, ly / 2});        // floor, +z
  planes.push_back({{0, 0, lz}, Vec3::UnitY(), Vec3::UnitX(), ly / 2, lx / 2});       // ceiling, -z
  planes.push_back({{-lx / 2, 0, lz / 2}, Vec3::UnitY(), Vec3::UnitZ(), ly / 2, lz / 2});   // +x wall
  planes.push_back({{lx / 2, 0, lz / 2}, Vec3::UnitZ(), Vec3::UnitY(), lz / 2, ly / 2});    // -x wall
  planes.push_back({{0, -ly / 2, lz / 2}, Vec3::UnitZ(), Vec3::UnitX(), lz / 2, lx / 2});   // +y wall
  planes.push_back({{0, ly / 2, lz / 2}, Vec3::UnitX(), Vec3::UnitZ(), lx / 2, lz / 2});    // -y wall

  // Tilted rectangles are rejection-sampled so they keep a clear gap from
  // each other; intersecting or near-parallel touching planes make the
  // scene ill-posed for any segmentation.
  auto min_rect_gap = [](const PlaneRect& a, const PlaneRect& b) {
    constexpr int kGrid = 9;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGrid * kGrid; ++i)
      for (int j = 0; j < kGrid * kGrid; ++j) {
        const double au = -1.0 + 2.0 * (i % kGrid) / (kGrid - 1), av = -1.0 + 2.0 * (i / kGrid) / (kGrid - 1);
        const double bu = -1.0 + 2.0 * (j % kGrid) / (kGrid - 1), bv = -1.0 + 2.0 * (j / kGrid) / (kGrid - 1);
        const Vec3 pa = a.center + au * a.half_u * a.axis_u + av * a.half_v * a.axis_v;
        const Vec3 pb = b.center + bu * b.half_u * b.axis_u + bv * b.half_v * b.axis_v;
        best = std::min(best, (pa - pb).norm());
      }
    return best;
  };

  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int t = 0; t < cfg.tilted_count; ++t) {
    constexpr int kMaxTries = 200;
    bool placed = false;
    for (int attempt = 0; attempt < kMaxTries && !placed; ++attempt) {
      PlaneRect r;
      r.half_u = r.half_v = cfg.tilted_half_size;
      // circumradius keeps the rectangle corners clear of the walls
      const double margin = cfg.tilted_half_size * std::sqrt(2.0) + 0.25;
      r.center = Vec3((uni(rng) - 0.5) * std::max(0.0, lx - 2 * margin),
                      (uni(rng) - 0.5) * std::max(0.0, ly - 2 * margin),
                      lz / 2 + (uni(rng) - 0.5) * std::max(0.0, lz - 2 * margin));
      const double yaw = 2.0 * M_PI * uni(rng);
      const double tilt = deg2rad(20.0 + 50.0 * uni(rng));
      const Vec3 n(std::sin(tilt) * std::cos(yaw), std::sin(tilt) * std::sin(yaw), std::cos(tilt));
      Vec3 u = n.cross(Vec3::UnitZ());
      if (u.norm() < 1e-6) u = Vec3::UnitX();
      u.normalize();
      const Vec3 v = n.cross(u).normalized();
      r.axis_u = u;
      r.axis_v = v;
      if (r.normal().dot(n) < 0) std::swap(r.axis_u, r.axis_v);

      bool clear = true;
      for (std::size_t p = 6; p < planes.size(); ++p)
        if (min_rect_gap(planes[p], r) < 0.3) clear = false;
      if (clear) {
        planes.push_back(r);
        placed = true;
      }
    }
    if (!placed)
      throw std::runtime_error("synth: cannot place tilted planes with clearance; shrink tilted_half_size");
  }
  return planes;
}

Vec3 plane_palette(int id) {
  static const Vec3 base[] = {{0.85, 0.3, 0.25}, {0.25, 0.65, 0.85}, {0.35, 0.75, 0.35},
                              {0.9, 0.75, 0.2},  {0.65, 0.4, 0.8},  {0.9, 0.5, 0.7},
                              {0.4, 0.8, 0.75},  {0.75, 0.55, 0.3}};
  return base[id % 8];
}

Quat rotation_from_frame(const Vec3& u, const Vec3& v, const Vec3& n) {
  Mat3 m;
  m.col(0) = u;
  m.col(1) = v;
  m.col(2) = n;
  return Quat(m).normalized();
}

CameraView make_orbit_view(const SynthConfig& cfg, const Vec3& room_center, int i, int count,
                           double radius, double attempt_phase) {
  const double phi = 2.0 * M_PI * i / count + attempt_phase;
  const double lz = cfg.custom_planes.empty() ? cfg.room.z() : 2.0;
  const Vec3 pos = room_center + Vec3(radius * std::cos(phi), radius * std::sin(phi),
                                      0.20 * lz * std::sin(2.0 * phi + 0.7));
  // gentle pitch oscillation so floor and ceiling strips get covered while
  // each view still spans several planes
  const Vec3 target = room_center + Vec3(0, 0, 0.18 * lz * std::sin(3.0 * phi + 1.3));

  Vec3 forward = (target - pos).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) right = Vec3::UnitX();
  right.normalize();
  const Vec3 down = forward.cross(right).normalized();

  CameraView view;
  view.fx = view.fy = cfg.focal;
  view.u0 = view.v0 = cfg.image_size / 2.0;
  view.width = view.height = cfg.image_size;
  Mat3 r;
  r.row(0) = right;
  r.row(1) = down;
  r.row(2) = forward;
  view.world_to_camera.setIdentity();
  view.world_to_camera.topLeftCorner<3, 3>() = r;
  view.world_to_camera.topRightCorner<3, 1>() = -r * pos;
  return view;
}

/// Cheap frustum proxy: fraction of polygon grid samples landing in-image.
bool plane_maybe_visible(const PlaneRect& rect, const CameraView& view) {
  constexpr int kGrid = 9;
  int inside = 0;
  for (int a = 0; a < kGrid; ++a)
    for (int b = 0; b < kGrid; ++b) {
      const double fu = -1.0 + 2.0 * a / (kGrid - 1), fv = -1.0 + 2.0 * b / (kGrid - 1);
      const Vec3 p = rect.center + fu * rect.half_u * rect.axis_u + fv * rect.half_v * rect.axis_v;
      const Vec3 pc = view.to_camera(p);
      if (pc.z() <= kNearPlane) continue;
      const double u = view.fx * pc.x() / pc.z() + view.u0;
      const double v = view.fy * pc.y() / pc.z() + view.v0;
      if (u >= 0 && u < view.width && v >= 0 && v < view.height) ++inside;
    }
  return inside >= kGrid * kGrid / 3;
}

}  // namespace

Vec3 perturb_direction(const Vec3& v, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return v;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 2.0 * M_PI);
  // random axis orthogonal to v
  Vec3 ref = std::abs(v.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 t1 = v.cross(ref).normalized();
  const Vec3 t2 = v.cross(t1).normalized();
  const double a = uni(rng);
  const Vec3 axis = std::cos(a) * t1 + std::sin(a) * t2;
  const double angle = gauss(rng) * sigma;
  return (Eigen::AngleAxisd(angle, axis) * v).normalized();
}

Scene generate_scene(const SynthConfig& cfg) {
  cfg.validate();
  auto plane_rng = make_rng(derive_seed(cfg.seed, 0x504c414e /* "PLAN" */));
  const std::vector<PlaneRect> rects =
      cfg.custom_planes.empty() ? default_planes(cfg, plane_rng) : cfg.custom_planes;
  if (rects.empty()) throw std::invalid_argument("synth: no planes to sample");

  Scene scene;
  for (std::size_t pid = 0; pid < rects.size(); ++pid) {
    GtPlane gt;
    gt.id = static_cast<int>(pid);
    gt.normal = rects[pid].normal();
    gt.offset = -gt.normal.dot(rects[pid].center);
    gt.polygon = rects[pid].polygon();
    scene.gt_planes.push_back(gt);
  }

  const double spacing = 1.0 / std::sqrt(cfg.gaussians_per_m2);
  auto field_rng = make_rng(derive_seed(cfg.seed, 0x4649454c /* "FIEL" */));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  for (std::size_t pid = 0; pid < rects.size(); ++pid) {
    const PlaneRect& rect = rects[pid];
    const Vec3 n = rect.normal();
    std::poisson_distribution<long> count_dist(rect.area() * cfg.gaussians_per_m2);
    const long count = std::max<long>(1, count_dist(field_rng));
    for (long s = 0; s < count; ++s) {
      GaussianPrimitive prim;
      const double fu = (2.0 * uni(field_rng) - 1.0) * rect.half_u;
      const double fv = (2.0 * uni(field_rng) - 1.0) * rect.half_v;
      prim.center = rect.center + fu * rect.axis_u + fv * rect.axis_v;
      if (cfg.position_noise > 0)
        prim.center += cfg.position_noise * Vec3(gauss(field_rng), gauss(field_rng), gauss(field_rng));
      prim.scale = Vec3(cfg.tangent_scale * spacing, cfg.tangent_scale * spacing,
                        std::max(1e-4, cfg.normal_scale * spacing));
      prim.rotation = rotation_from_frame(rect.axis_u, rect.axis_v, n);
      prim.opacity = cfg.opacity_min + (cfg.opacity_max - cfg.opacity_min) * uni(field_rng);
      prim.color = (plane_palette(static_cast<int>(pid)) +
                    0.05 * Vec3(gauss(field_rng), gauss(field_rng), gauss(field_rng)))
                       .cwiseMax(0.0)
                       .cwiseMin(1.0);
      prim.normal = perturb_direction(n, cfg.normal_noise, field_rng);
      prim.descriptor = random_unit_vector(field_rng, cfg.descriptor_dim);
      prim.gt_plane_id = static_cast<int>(pid);
      scene.primitives.push_back(std::move(prim));
    }
  }

  // camera orbit; resample until every plane clears the occupancy requirement
  const Vec3 room_center = cfg.custom_planes.empty()
                               ? Vec3(0, 0, cfg.room.z() / 2)
                               : [&] {
                                   Vec3 c = Vec3::Zero();
                                   for (const auto& r : rects) c += r.center;
                                   return Vec3(c / static_cast<double>(rects.size()));
                                 }();
  const double radius = cfg.custom_planes.empty()
                            ? cfg.orbit_radius_factor * std::min(cfg.room.x(), cfg.room.y())
                            : 1.0;

  constexpr int kMaxAttempts = 30;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    scene.views.clear();
    const double phase = attempt * 0.37;
    for (int i = 0; i < cfg.view_count; ++i)
      scene.views.push_back(make_orbit_view(cfg, room_center, i, cfg.view_count, radius, phase));

    // fast frustum proxy first, then true rendered occupancy
    std::vector<int> proxy_hits(rects.size(), 0);
    for (const auto& view : scene.views)
      for (std::size_t p = 0; p < rects.size(); ++p)
        if (plane_maybe_visible(rects[p], view)) ++proxy_hits[p];
    if (*std::min_element(proxy_hits.begin(), proxy_hits.end()) < cfg.min_views_per_plane) continue;

    std::vector<int> hits(rects.size(), 0);
    RenderChannels occupancy_only{false, false, false, false};
    bool ok = true;
    for (const auto& view : scene.views) {
      const RenderedMaps maps = render(scene, view, occupancy_only);
      std::vector<long> px(rects.size(), 0);
      for (int y = 0; y < maps.height; ++y)
        for (int x = 0; x < maps.width; ++x) {
          if (!maps.valid_at(y, x)) continue;
          const int idx = maps.argmax.at(y, x);
          if (idx < 0) continue;
          const int pid = scene.primitives[idx].gt_plane_id;
          if (pid >= 0) ++px[pid];
        }
      for (std::size_t p = 0; p < rects.size(); ++p)
        if (px[p] >= cfg.min_pixels) ++hits[p];
    }
    for (std::size_t p = 0; p < rects.size(); ++p)
      if (hits[p] < cfg.min_views_per_plane) ok = false;
    if (ok) return scene;
  }
  throw std::runtime_error("synth: could not place cameras so every plane is visible in " +
                           std::to_string(cfg.min_views_per_plane) + " views");
}

SegmentLabelMap simulate_masks(const Scene& scene, int view_index, const SynthConfig& cfg) {
  const RenderedMaps maps = render(scene, scene.views.at(view_index), {false, false, false, false});
  return simulate_masks(scene, view_index, cfg, maps);
}

SegmentLabelMap simulate_masks(const Scene& scene, int view_index, const SynthConfig& cfg,
                               const RenderedMaps& maps) {
  for (const auto& p : scene.primitives)
    if (p.gt_plane_id < 0)
      throw std::invalid_argument("simulate_masks: scene must carry gt plane ids");
  auto rng = make_rng(derive_seed(cfg.seed, 0x4d41534b /* "MASK" */, view_index));
  const int h = maps.height, w = maps.width;

  // true plane id per pixel, -1 where uncovered
  ImageI plane_px(h, w, 1, -1);
  long n_planes = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!maps.valid_at(y, x)) continue;
      const int idx = maps.argmax.at(y, x);
      if (idx < 0) continue;
      const int pid = scene.primitives[idx].gt_plane_id;
      plane_px.at(y, x) = pid;
      n_planes = std::max<long>(n_planes, pid + 1);
    }

  // Voronoi split of each plane region into 1 + Poisson(lambda) cells
  ImageI seg(h, w, 1, 0);
  std::poisson_distribution<int> split_dist(cfg.lambda_split > 0 ? cfg.lambda_split : 1.0);
  int next_segment = 1;
  for (long pid = 0; pid < n_planes; ++pid) {
    std::vector<std::pair<int, int>> pixels;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (plane_px.at(y, x) == pid) pixels.emplace_back(y, x);
    if (pixels.empty()) continue;
    const int cells = 1 + (cfg.lambda_split > 0 ? split_dist(rng) : 0);
    std::vector<std::pair<int, int>> seeds;
    std::vector<std::size_t> order(pixels.size());
    std::iota(order.begin(), order.end(), 0);
    for (int c = 0; c < cells && c < static_cast<int>(pixels.size()); ++c) {
      std::uniform_int_distribution<std::size_t> d(c, order.size() - 1);
      std::swap(order[c], order[d(rng)]);
      seeds.push_back(pixels[order[c]]);
    }
    for (const auto& [y, x] : pixels) {
      long best = std::numeric_limits<long>::max();
      int best_cell = 0;
      for (std::size_t c = 0; c < seeds.size(); ++c) {
        const long dy = y - seeds[c].first, dx = x - seeds[c].second;
        const long d2 = dy * dy + dx * dx;
        if (d2 < best) {
          best = d2;
          best_cell = static_cast<int>(c);
        }
      }
      seg.at(y, x) = next_segment + best_cell;
    }
    next_segment += static_cast<int>(seeds.size());
  }

  // boundary jitter: flip border pixels toward a neighboring segment
  std::bernoulli_distribution flip(cfg.jitter_prob);
  for (int pass = 0; pass < cfg.jitter_passes && cfg.jitter_prob > 0; ++pass) {
    const ImageI snap = seg;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int own = snap.at(y, x);
        if (own <= 0) continue;
        int neighbor = 0;
        const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
        for (int d = 0; d < 4; ++d) {
          const int ny = y + dy[d], nx = x + dx[d];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const int other = snap.at(ny, nx);
          if (other > 0 && other != own) {
            neighbor = other;
            break;
          }
        }
        if (neighbor > 0 && flip(rng)) seg.at(y, x) = neighbor;
      }
  }

  // invalidate pixels near plane-plane intersections
  if (cfg.intersection_invalid_radius > 0) {
    ImageU8 edge(h, w, 1, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int own = plane_px.at(y, x);
        if (own < 0) continue;
        const int dy[2] = {1, 0}, dx[2] = {0, 1};
        for (int d = 0; d < 2; ++d) {
          const int ny = y + dy[d], nx = x + dx[d];
          if (ny >= h || nx >= w) continue;
          const int other = plane_px.at(ny, nx);
          if (other >= 0 && other != own) {
            edge.at(y, x) = 1;
            edge.at(ny, nx) = 1;
          }
        }
      }
    const int r = cfg.intersection_invalid_radius;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!edge.at(y, x)) continue;
        for (int oy = -r; oy <= r; ++oy)
          for (int ox = -r; ox <= r; ++ox) {
            const int ny = y + oy, nx = x + ox;
            if (ny >= 0 && ny < h && nx >= 0 && nx < w) seg.at(ny, nx) = 0;
          }
      }
  }

  // drop undersized segments
  std::vector<long> sizes(next_segment, 0);
  for (const auto v : seg.data())
    if (v > 0) ++sizes[v];
  for (auto& v : seg.data())
    if (v > 0 && sizes[v] < cfg.min_pixels) v = 0;

  return SegmentLabelMap::densify(seg);
}

ImageF make_normal_supervision(const Scene& scene, int view_index, const SynthConfig& cfg) {
  const RenderedMaps maps = render(scene, scene.views.at(view_index), {false, false, false, false});
  return make_normal_supervision(scene, view_index, cfg, maps);
}

ImageF make_normal_supervision(const Scene& scene, int view_index, const SynthConfig& cfg,
                               const RenderedMaps& maps) {
  auto rng = make_rng(derive_seed(cfg.seed, 0x4e4f524d /* "NORM" */, view_index));
  ImageF sup(maps.height, maps.width, 3, 0.0);
  for (int y = 0; y < maps.height; ++y)
    for (int x = 0; x < maps.width; ++x) {
      if (!maps.valid_at(y, x)) continue;
      const int idx = maps.argmax.at(y, x);
      if (idx < 0) continue;
      const int pid = scene.primitives[idx].gt_plane_id;
      Vec3 n = pid >= 0 && pid < static_cast<int>(scene.gt_planes.size())
                   ? scene.gt_planes[pid].normal
                   : scene.primitives[idx].normal;
      n = perturb_direction(n, cfg.supervision_normal_noise, rng);
      double* out = sup.pixel(y, x);
      out[0] = n.x();
      out[1] = n.y();
      out[2] = n.z();
    }
  return sup;
}

std::vector<Vec3> sample_gt_surfaces(const std::vector<GtPlane>& planes, double density) {
  std::vector<Vec3> points;
  for (const auto& plane : planes) {
    if (plane.polygon.size() < 3) continue;
    // fan triangulation, per-triangle jittered grid by a fixed low-discrepancy rule
    for (std::size_t t = 1; t + 1 < plane.polygon.size(); ++t) {
      const Vec3& a = plane.polygon[0];
      const Vec3& b = plane.polygon[t];
      const Vec3& c = plane.polygon[t + 1];
      const double area = 0.5 * (b - a).cross(c - a).norm();
      const long n = std::max<long>(1, std::lround(area * density));
      for (long i = 0; i < n; ++i) {
        // Kronecker sequence in the unit square, folded into the triangle
        double r1 = std::fmod(0.7548776662466927 * (i + 1), 1.0);
        double r2 = std::fmod(0.5698402909980532 * (i + 1), 1.0);
        if (r1 + r2 > 1.0) {
          r1 = 1.0 - r1;
          r2 = 1.0 - r2;
        }
        points.push_back(a + r1 * (b - a) + r2 * (c - a));
      }
    }
  }
  return points;
}

}  // namespace gsplane
