#pragma once

#include "gsplane/renderer.hpp"
#include "gsplane/segfusion.hpp"

#include <random>

namespace gsplane {

/// Finite rectangle in 3D: center plus orthonormal in-plane axes and half
/// extents. The plane normal is axis_u x axis_v.
struct PlaneRect {
  Vec3 center = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double half_u = 1.0, half_v = 1.0;

  Vec3 normal() const { return axis_u.cross(axis_v).normalized(); }
  double area() const { return 4.0 * half_u * half_v; }
  std::vector<Vec3> polygon() const;
};

struct SynthConfig {
  // geometry
  Vec3 room = Vec3(4.0, 3.0, 2.5);       // box extents, meters; z up from 0
  int tilted_count = 2;                  // extra tilted rectangles inside the room
  double tilted_half_size = 0.6;
  std::vector<PlaneRect> custom_planes;  // overrides the box + tilted set when non-empty

  // field sampling
  int descriptor_dim = kDefaultDescriptorDim;
  double gaussians_per_m2 = 800.0;
  double position_noise = 0.02;            // meters, isotropic
  double normal_noise = 0.15;              // radians on the per-primitive normals
  double supervision_normal_noise = 0.05;  // radians on the supervision maps
  double opacity_min = 0.7, opacity_max = 0.95;
  double tangent_scale = 1.0;  // x mean spacing
  double normal_scale = 0.1;   // x mean spacing

  // cameras
  int view_count = 40;
  int image_size = 128;
  double focal = 64.0;
  double orbit_radius_factor = 0.42;
  int min_views_per_plane = 3;

  // mask corruption
  int min_pixels = 25;
  double lambda_split = 2.0;   // Poisson mean of extra Voronoi cells per plane
  double jitter_prob = 0.3;    // boundary flip probability per pass
  int jitter_passes = 2;       // 0 disables jitter
  int intersection_invalid_radius = 2;  // px around plane-plane edges

  std::uint64_t seed = 1234;

  void validate() const;
};

/// Deterministic synthetic planar scene: primitives sampled on the plane
/// rectangles with anisotropic (flat) covariances, ground-truth ids, noisy
/// normals, random unit descriptors, and an inward-facing camera orbit
/// resampled until every plane covers min_pixels in at least
/// min_views_per_plane views.
Scene generate_scene(const SynthConfig& cfg);

/// SAM-like over-segmentation of one view: true per-pixel plane regions from
/// the argmax-contributor render, split into 1 + Poisson(lambda_split)
/// Voronoi cells, boundary-jittered, with small regions and pixels near
/// plane intersections invalidated. Segment ids are per-view local.
SegmentLabelMap simulate_masks(const Scene& scene, int view_index, const SynthConfig& cfg);
SegmentLabelMap simulate_masks(const Scene& scene, int view_index, const SynthConfig& cfg,
                               const RenderedMaps& maps);

/// Per-pixel supervision normals: the true plane normal of the argmax
/// contributor, perturbed by supervision_normal_noise; zero where the view
/// has no coverage.
ImageF make_normal_supervision(const Scene& scene, int view_index, const SynthConfig& cfg);
ImageF make_normal_supervision(const Scene& scene, int view_index, const SynthConfig& cfg,
                               const RenderedMaps& maps);

/// Unit vector drawn by rotating `v` around a random orthogonal axis by an
/// angle ~ N(0, sigma).
Vec3 perturb_direction(const Vec3& v, double sigma, std::mt19937_64& rng);

/// Deterministic grid-ish samples over gt plane polygons, for geometric
/// evaluation. Density is points per square meter.
std::vector<Vec3> sample_gt_surfaces(const std::vector<GtPlane>& planes, double density);

}  // namespace gsplane
