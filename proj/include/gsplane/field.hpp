#pragma once

#include "gsplane/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gsplane {

constexpr int kDefaultDescriptorDim = 3;

/// One anisotropic splat. Rotation is a unit quaternion (w, x, y, z);
/// the world covariance is R diag(scale)^2 R^T.
struct GaussianPrimitive {
  Vec3 center = Vec3::Zero();
  Vec3 scale = Vec3::Ones();
  Quat rotation = Quat::Identity();
  double opacity = 1.0;
  Vec3 color = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  VecX descriptor;            // unit vector, length k
  int gt_plane_id = -1;       // -1 when absent

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// World covariance R diag(s)^2 R^T of a primitive.
Mat3 covariance_of(const GaussianPrimitive& prim);

/// Pinhole camera. world_to_camera maps world points into a frame with
/// +z forward, +x right, +y down; projection is u = fx*x/z + u0,
/// v = fy*y/z + v0.
struct CameraView {
  double fx = 0, fy = 0;
  double u0 = 0, v0 = 0;
  int width = 0, height = 0;
  Mat4 world_to_camera = Mat4::Identity();

  Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
  Vec3 to_camera(const Vec3& p_world) const { return rotation() * p_world + translation(); }
  Vec3 to_world(const Vec3& p_cam) const { return rotation().transpose() * (p_cam - translation()); }
  Vec3 camera_position() const { return -rotation().transpose() * translation(); }

  void validate() const;
};

struct GtPlane {
  int id = -1;
  Vec3 normal = Vec3::UnitZ();  // unit; plane satisfies normal . p + offset = 0
  double offset = 0.0;
  std::vector<Vec3> polygon;    // vertices in plane, world coordinates
};

struct Scene {
  std::vector<GaussianPrimitive> primitives;
  std::vector<CameraView> views;
  std::vector<GtPlane> gt_planes;

  int descriptor_dim() const {
    return primitives.empty() ? kDefaultDescriptorDim : static_cast<int>(primitives.front().descriptor.size());
  }
  void validate() const;
};

// PLY import/export of the primitive list. Binary little-endian by default,
// ASCII supported on both ends. Per-vertex properties:
//   x y z, scale_0..2, rot_0..3 (w,x,y,z), opacity, red green blue,
//   nx ny nz, desc_0..desc_{k-1}, plane_id.
// Missing normals/descriptors are initialized as random unit vectors from
// `seed` so a bare splat export remains ingestible; missing plane_id maps
// to -1. Parse errors carry the offending record or header line.
Scene load_field(const std::string& path, std::uint64_t seed = 0);
void save_field(const Scene& scene, const std::string& path, bool binary = true);

std::vector<CameraView> load_cameras(const std::string& path);
void save_cameras(const std::vector<CameraView>& views, const std::string& path);

std::vector<GtPlane> load_gt_planes(const std::string& path);
void save_gt_planes(const std::vector<GtPlane>& planes, const std::string& path);

}  // namespace gsplane
