#pragma once

#include "gsplane/field.hpp"

#include <vector>

namespace gsplane {

/// Exact K-nearest-neighbor lists over primitive centers. Lists are sorted
/// by squared distance ascending, ties broken by index; self excluded;
/// length min(K, N-1).
struct KnnIndex {
  int k = 0;
  std::vector<std::vector<int>> neighbors;
};

KnnIndex build_knn(const std::vector<Vec3>& points, int k);
KnnIndex build_knn(const Scene& scene, int k);

/// Exact nearest-neighbor distance from each point of `from` to the set `to`.
std::vector<double> nearest_distances(const std::vector<Vec3>& from, const std::vector<Vec3>& to);

/// Projects every center onto the tangent plane of its KNN neighborhood
/// (least-squares plane through the neighbor centers). Neighborhoods whose
/// covariance is rank-deficient are skipped. Returns the number of centers
/// moved. The KNN index is stale afterwards and must be rebuilt.
std::size_t planar_align(Scene& scene, const KnnIndex& knn);

enum class SmoothField { kNormal, kDescriptor };

/// One Jacobi-style smoothing pass: each feature becomes the renormalized
/// mean of itself and its neighbors. Features whose mean collapses below
/// 1e-8 are left unchanged.
void laplacian_smooth(Scene& scene, const KnnIndex& knn, SmoothField field);

}  // namespace gsplane
