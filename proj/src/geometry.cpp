#include "gsplane/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsplane {

namespace {

/// Uniform grid over a point set for exact neighbor queries.
class PointGrid {
 public:
  explicit PointGrid(const std::vector<Vec3>& points) : points_(points) {
    const std::size_t n = points.size();
    lo_ = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
    for (const auto& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec3 extent = (hi - lo_).cwiseMax(1e-9);
    // aim for a handful of points per cell, with a cap on grid size
    const double target = std::cbrt(extent.prod() / std::max<std::size_t>(n, 1) * 4.0);
    cell_ = std::max(target, extent.maxCoeff() / 160.0);
    for (int a = 0; a < 3; ++a)
      dims_[a] = std::max(1, static_cast<int>(std::floor(extent[a] / cell_)) + 1);
    cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
    for (std::size_t i = 0; i < n; ++i) cells_[cell_of(points[i])].push_back(static_cast<int>(i));
  }

  /// Collects candidate indices within Chebyshev cell-ring `ring` of `p`.
  void gather_ring(const Vec3& p, int ring, std::vector<int>& out) const {
    int c[3];
    coords_of(p, c);
    const int x0 = c[0] - ring, x1 = c[0] + ring;
    const int y0 = c[1] - ring, y1 = c[1] + ring;
    const int z0 = c[2] - ring, z1 = c[2] + ring;
    for (int z = z0; z <= z1; ++z) {
      if (z < 0 || z >= dims_[2]) continue;
      for (int y = y0; y <= y1; ++y) {
        if (y < 0 || y >= dims_[1]) continue;
        for (int x = x0; x <= x1; ++x) {
          if (x < 0 || x >= dims_[0]) continue;
          if (ring > 0 && std::abs(x - c[0]) != ring && std::abs(y - c[1]) != ring &&
              std::abs(z - c[2]) != ring)
            continue;  // interior cells were gathered by smaller rings
          const auto& cell = cells_[(static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x];
          out.insert(out.end(), cell.begin(), cell.end());
        }
      }
    }
  }

  bool ring_in_range(const Vec3& p, int ring) const {
    int c[3];
    coords_of(p, c);
    for (int a = 0; a < 3; ++a)
      if (c[a] - ring >= 0 || c[a] + ring < dims_[a]) return true;
    return false;
  }

  double cell_size() const { return cell_; }
  int max_ring() const { return std::max({dims_[0], dims_[1], dims_[2]}); }

 private:
  void coords_of(const Vec3& p, int c[3]) const {
    for (int a = 0; a < 3; ++a) {
      int v = static_cast<int>(std::floor((p[a] - lo_[a]) / cell_));
      c[a] = std::clamp(v, 0, dims_[a] - 1);
    }
  }
  std::size_t cell_of(const Vec3& p) const {
    int c[3];
    coords_of(p, c);
    return (static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
  }

  const std::vector<Vec3>& points_;
  Vec3 lo_;
  double cell_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<std::vector<int>> cells_;
};

struct Candidate {
  double d2;
  int index;
  bool operator<(const Candidate& o) const { return d2 != o.d2 ? d2 < o.d2 : index < o.index; }
};

/// Exact k nearest neighbors of `query` among `points`, optionally excluding
/// one index (the query itself).
void knn_query(const PointGrid& grid, const std::vector<Vec3>& points, const Vec3& query,
               int k, int exclude, std::vector<Candidate>& scratch, std::vector<int>& scratch_idx,
               std::vector<int>& out) {
  scratch.clear();
  scratch_idx.clear();
  const int max_ring = grid.max_ring();
  for (int ring = 0; ring <= max_ring; ++ring) {
    if (ring > 0 && !grid.ring_in_range(query, ring)) break;
    const std::size_t before = scratch_idx.size();
    grid.gather_ring(query, ring, scratch_idx);
    for (std::size_t i = before; i < scratch_idx.size(); ++i) {
      const int idx = scratch_idx[i];
      if (idx == exclude) continue;
      scratch.push_back({(points[idx] - query).squaredNorm(), idx});
    }
    if (static_cast<int>(scratch.size()) >= k) {
      std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
      const double kth = scratch[k - 1].d2;
      const double safe = static_cast<double>(ring) * grid.cell_size();
      // any point in an unexplored cell is at least `safe` away
      if (kth <= safe * safe) break;
    }
  }
  const int take = std::min<std::size_t>(k, scratch.size());
  std::partial_sort(scratch.begin(), scratch.begin() + take, scratch.end());
  out.resize(take);
  for (int i = 0; i < take; ++i) out[i] = scratch[i].index;
}

}  // namespace

KnnIndex build_knn(const std::vector<Vec3>& points, int k) {
  const std::size_t n = points.size();
  if (n < 2) throw std::invalid_argument("build_knn needs at least 2 points");
  if (k < 1) throw std::invalid_argument("build_knn needs k >= 1");
  KnnIndex index;
  index.k = k;
  index.neighbors.resize(n);
  const PointGrid grid(points);
  const int want = std::min<std::size_t>(k, n - 1);
  parallel_chunks(n, 256, [&](std::size_t b, std::size_t e) {
    std::vector<Candidate> scratch;
    std::vector<int> scratch_idx;
    for (std::size_t i = b; i < e; ++i)
      knn_query(grid, points, points[i], want, static_cast<int>(i), scratch, scratch_idx,
                index.neighbors[i]);
  });
  return index;
}

KnnIndex build_knn(const Scene& scene, int k) {
  std::vector<Vec3> centers(scene.primitives.size());
  for (std::size_t i = 0; i < centers.size(); ++i) centers[i] = scene.primitives[i].center;
  return build_knn(centers, k);
}

std::vector<double> nearest_distances(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  if (from.empty() || to.empty()) throw std::invalid_argument("nearest_distances: empty point set");
  const PointGrid grid(to);
  std::vector<double> dist(from.size());
  parallel_chunks(from.size(), 256, [&](std::size_t b, std::size_t e) {
    std::vector<Candidate> scratch;
    std::vector<int> scratch_idx;
    std::vector<int> nn;
    for (std::size_t i = b; i < e; ++i) {
      knn_query(grid, to, from[i], 1, -1, scratch, scratch_idx, nn);
      dist[i] = (to[nn[0]] - from[i]).norm();
    }
  });
  return dist;
}

std::size_t planar_align(Scene& scene, const KnnIndex& knn) {
  const std::size_t n = scene.primitives.size();
  if (knn.neighbors.size() != n) throw std::invalid_argument("planar_align: stale KNN index");
  std::vector<Vec3> new_centers(n);
  std::vector<std::uint8_t> moved(n, 0);
  parallel_chunks(n, 512, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto& nbrs = knn.neighbors[i];
      if (nbrs.size() < 3) continue;
      Vec3 centroid = Vec3::Zero();
      for (int j : nbrs) centroid += scene.primitives[j].center;
      centroid /= static_cast<double>(nbrs.size());
      Mat3 cov = Mat3::Zero();
      for (int j : nbrs) {
        const Vec3 d = scene.primitives[j].center - centroid;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(nbrs.size());
      Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
      // eigenvalues ascending; a degenerate tangent plane means skip
      if (eig.eigenvalues()[1] <= 1e-12) continue;
      Vec3 plane_normal = eig.eigenvectors().col(0);
      int apex = 0;
      plane_normal.cwiseAbs().maxCoeff(&apex);
      if (plane_normal[apex] < 0) plane_normal = -plane_normal;
      const Vec3 mu = scene.primitives[i].center;
      new_centers[i] = mu - ((mu - centroid).dot(plane_normal)) * plane_normal;
      moved[i] = 1;
    }
  });
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!moved[i]) continue;
    scene.primitives[i].center = new_centers[i];
    ++count;
  }
  return count;
}

void laplacian_smooth(Scene& scene, const KnnIndex& knn, SmoothField field) {
  const std::size_t n = scene.primitives.size();
  if (knn.neighbors.size() != n) throw std::invalid_argument("laplacian_smooth: stale KNN index");
  const int k = scene.descriptor_dim();
  const int dim = field == SmoothField::kNormal ? 3 : k;
  MatX smoothed(n, dim);
  std::vector<std::uint8_t> keep(n, 0);
  auto feature = [&](std::size_t i) -> VecX {
    if (field == SmoothField::kNormal) return scene.primitives[i].normal;
    return scene.primitives[i].descriptor;
  };
  parallel_chunks(n, 512, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      VecX sum = feature(i);
      for (int j : knn.neighbors[i]) sum += feature(j);
      sum /= static_cast<double>(knn.neighbors[i].size() + 1);
      const double nrm = sum.norm();
      if (nrm < 1e-8) continue;  // degenerate mean, leave feature unchanged
      smoothed.row(i) = sum.transpose() / nrm;
      keep[i] = 1;
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    if (field == SmoothField::kNormal)
      scene.primitives[i].normal = smoothed.row(i).transpose();
    else
      scene.primitives[i].descriptor = smoothed.row(i).transpose();
  }
}

}  // namespace gsplane
