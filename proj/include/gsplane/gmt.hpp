#pragma once

#include "gsplane/renderer.hpp"
#include "gsplane/segfusion.hpp"

#include <string>
#include <vector>

namespace gsplane {

constexpr double kLeafCovEps = 1e-6;  // m^2, SPD regularizer on leaf covariances

/// Node of the bottom-up Gaussian mixture hierarchy. Leaves summarize the
/// lifted boundary points of one merged 2D segment; parents fuse their
/// children's distributions.
struct GaussianNode {
  Vec3 mu = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
  Vec3 normal = Vec3::UnitZ();
  VecX descriptor;
  long leaf_count = 1;
  int left = -1, right = -1;  // arena indices, -1 at leaves
};

/// Root children of the hierarchy: one mixture component per plane instance.
struct PlaneSet {
  std::vector<GaussianNode> nodes;  // arena; leaves first, parents appended
  std::vector<int> roots;           // arena indices of the root children
  std::vector<double> pi;           // mixture weights, sum 1, aligned with roots

  const GaussianNode& plane(int k) const { return nodes[roots[k]]; }
  int plane_count() const { return static_cast<int>(roots.size()); }
};

/// Bhattacharyya distance between two Gaussian nodes:
///   1/8 dmu^T S^-1 dmu + 1/2 ln(det S / sqrt(det Si det Sj)),  S = (Si+Sj)/2.
/// Throws on non-SPD covariance input.
double bhattacharyya(const GaussianNode& a, const GaussianNode& b);

/// Fuses two Gaussian nodes:
///   Sp = Sj (Si+Sj)^-1 Si,  mup = Sj (Si+Sj)^-1 mui + Si (Si+Sj)^-1 muj,
/// normal/descriptor merged as leaf-count-weighted renormalized means.
/// Arguments are ordered canonically inside, so the result is bit-identical
/// under swap. Child links are left unset.
GaussianNode merge_nodes(const GaussianNode& a, const GaussianNode& b);

/// Builds one leaf per (view, merged segment) with at least p_min pixels:
/// the segment's boundary pixels are lifted through the rendered depth map
/// into world space, and their mean/covariance (plus eps I) parameterize the
/// leaf Gaussian; normal/descriptor are segment-mean rendered values.
/// Segments with fewer than 8 lifted boundary points are skipped.
std::vector<GaussianNode> build_leaves(const Scene& scene, const std::vector<SegmentLabelMap>& merged,
                                       const std::vector<RenderedMaps>& maps, long p_min,
                                       double cov_eps = kLeafCovEps);

/// Greedy bottom-up pass: leaves are visited largest-trace-first (ties by
/// insertion index); each unabsorbed leaf accumulates every later compatible
/// leaf (Bhattacharyya <= eps_b and descriptor distance <= eps_z) and the
/// accumulated node becomes a root child. pi_k is the leaf-count share.
PlaneSet build_tree(const std::vector<GaussianNode>& leaves, double eps_b, double eps_z);

/// Labels every primitive against the plane mixture: descriptor-gated
/// argmax of log pi_k + log N(center | mu_k, cov_k); gate empty -> plain
/// argmax if the best responsibility clears r_min, else -1 (unassigned).
std::vector<int> assign_primitives(const Scene& scene, const PlaneSet& planes, double theta_assign,
                                   double r_min);

struct FittedPlane {
  int plane = -1;
  bool valid = false;   // false when the plane had fewer than 3 members
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;  // plane satisfies normal . p + offset = 0
  long members = 0;
};

/// PCA plane fit over member centers per label; normal signed toward the
/// mean member normal. Planes with fewer than 3 members are kept in the
/// segmentation but flagged invalid for geometric evaluation.
std::vector<FittedPlane> fit_plane_params(const Scene& scene, const std::vector<int>& labels,
                                          int n_planes);

/// JSON export of the plane mixture plus the path of the colored label PLY.
void save_plane_set(const PlaneSet& planes, const std::vector<FittedPlane>& fitted,
                    const std::string& labels_ply_path, const std::string& path);

/// Writes the field as a PLY colored by plane label (unassigned = gray),
/// with plane_id set to the predicted label.
void save_labeled_field(const Scene& scene, const std::vector<int>& labels, const std::string& path);

}  // namespace gsplane
