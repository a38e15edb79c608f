#pragma once

#include "gsplane/renderer.hpp"

#include <vector>

namespace gsplane {

/// Per-view integer label image. 0 is the invalid sentinel; valid labels are
/// dense in [1, m].
struct SegmentLabelMap {
  ImageI labels;
  int m = 0;

  /// Relabels arbitrary non-negative ids (0 stays invalid) into dense
  /// [1, m] by first appearance in raster order.
  static SegmentLabelMap densify(const ImageI& raw);
};

struct PlanarDistanceMap {
  ImageF d_p;        // meters; 0 where invalid
  ImageU8 valid;
};

/// Per-pixel signed plane offset from rendered depth and normals:
///   d_p = depth * ((n1/fx)(u0-u) + (n2/fy)(v0-v) - n3)
/// with the rendered world normal rotated into the camera frame, which makes
/// d_p = -(n_cam . p_cam). Constant over the pixels of one plane.
PlanarDistanceMap planar_distance_map(const RenderedMaps& maps, const CameraView& view);

struct RagNode {
  int segment = 0;           // label in [1, m]
  long pixel_count = 0;      // all labeled pixels
  long stat_count = 0;       // pixels that carried valid normal/d_p stats
  Vec3 mean_normal = Vec3::Zero();
  double mean_dp = 0.0;
  double normal_var = 0.0;   // mean angular deviation from mean_normal, radians
  bool valid = false;
};

struct Rag {
  std::vector<RagNode> nodes;              // nodes[i] is segment i+1
  std::vector<std::pair<int, int>> edges;  // (label_i, label_j), i < j, unique
};

constexpr double kDefaultNormalVarMax = 25.0 * M_PI / 180.0;

/// Region adjacency graph over a raw segment map. Per-node means are
/// area-weighted over the pixels with valid stats; edges join segments that
/// share a 4-connected boundary. Segments whose mean angular normal
/// deviation exceeds v_max (or that have no valid stats) are marked invalid.
Rag build_rag(const SegmentLabelMap& labels, const RenderedMaps& maps, const PlanarDistanceMap& dp,
              double v_max = kDefaultNormalVarMax);

/// Cuts RAG edges whose nodes disagree in normal angle (> theta_n) or planar
/// distance (> theta_d) and merges the remaining connected components.
/// Pixels of invalid nodes become 0; surviving labels are re-densified.
SegmentLabelMap partition_rag(const SegmentLabelMap& labels, const Rag& rag, double theta_n,
                              double theta_d);

struct OneHotTargets {
  MatX y;                        // n_valid x m, rows one-hot
  std::vector<int> pixel_index;  // row-major linear pixel index per row
};

/// One-hot regression targets over the valid pixels of a merged label map.
/// All-invalid maps give an empty target (caller skips the view).
OneHotTargets one_hot_targets(const SegmentLabelMap& merged);

}  // namespace gsplane
