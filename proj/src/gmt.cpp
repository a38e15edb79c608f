#include "gsplane/gmt.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace gsplane {

namespace {

void require_spd(const Mat3& cov, const char* who) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  if (eig.eigenvalues()[0] <= 0.0)
    throw std::invalid_argument(std::string(who) + ": covariance is not positive definite");
}

/// Strict total order on node values; any order works as long as it depends
/// only on the field values, making merge_nodes(a, b) run the same arithmetic
/// as merge_nodes(b, a).
bool node_value_less(const GaussianNode& a, const GaussianNode& b) {
  for (int i = 0; i < 3; ++i)
    if (a.mu[i] != b.mu[i]) return a.mu[i] < b.mu[i];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (a.cov(r, c) != b.cov(r, c)) return a.cov(r, c) < b.cov(r, c);
  if (a.leaf_count != b.leaf_count) return a.leaf_count < b.leaf_count;
  for (int i = 0; i < 3; ++i)
    if (a.normal[i] != b.normal[i]) return a.normal[i] < b.normal[i];
  for (long i = 0; i < std::min(a.descriptor.size(), b.descriptor.size()); ++i)
    if (a.descriptor[i] != b.descriptor[i]) return a.descriptor[i] < b.descriptor[i];
  return false;
}

}  // namespace

double bhattacharyya(const GaussianNode& a, const GaussianNode& b) {
  require_spd(a.cov, "bhattacharyya");
  require_spd(b.cov, "bhattacharyya");
  const Mat3 avg = 0.5 * (a.cov + b.cov);
  const Vec3 dmu = a.mu - b.mu;
  const double quad = 0.125 * dmu.dot(avg.ldlt().solve(dmu));
  const double log_term =
      0.5 * std::log(avg.determinant() / std::sqrt(a.cov.determinant() * b.cov.determinant()));
  return quad + log_term;
}

GaussianNode merge_nodes(const GaussianNode& a, const GaussianNode& b) {
  const bool swap = node_value_less(b, a);
  const GaussianNode& first = swap ? b : a;
  const GaussianNode& second = swap ? a : b;

  const Mat3 sum = first.cov + second.cov;
  Mat3 sum_inv = sum.inverse();
  sum_inv = 0.5 * (sum_inv + sum_inv.transpose());

  GaussianNode p;
  const Mat3 cov_p = second.cov * sum_inv * first.cov;
  p.cov = 0.5 * (cov_p + cov_p.transpose());
  p.mu = second.cov * sum_inv * first.mu + first.cov * sum_inv * second.mu;

  const double ca = static_cast<double>(first.leaf_count), cb = static_cast<double>(second.leaf_count);
  Vec3 n = ca * first.normal + cb * second.normal;
  p.normal = n.norm() > 1e-12 ? Vec3(n / n.norm()) : first.normal;
  VecX z = ca * first.descriptor + cb * second.descriptor;
  p.descriptor = z.norm() > 1e-12 ? VecX(z / z.norm()) : first.descriptor;
  p.leaf_count = first.leaf_count + second.leaf_count;
  return p;
}

std::vector<GaussianNode> build_leaves(const Scene& scene, const std::vector<SegmentLabelMap>& merged,
                                       const std::vector<RenderedMaps>& maps, long p_min,
                                       double cov_eps) {
  if (merged.size() != scene.views.size() || maps.size() != scene.views.size())
    throw std::invalid_argument("build_leaves: per-view inputs do not match the view list");
  constexpr int kMinBoundaryPoints = 8;
  const int k = scene.descriptor_dim();

  std::vector<GaussianNode> leaves;
  for (std::size_t v = 0; v < scene.views.size(); ++v) {
    const CameraView& view = scene.views[v];
    const SegmentLabelMap& seg = merged[v];
    const RenderedMaps& m = maps[v];
    if (seg.m <= 0) continue;
    const int h = seg.labels.height(), w = seg.labels.width();

    struct SegmentStats {
      long pixels = 0;
      Vec3 normal_sum = Vec3::Zero();
      VecX desc_sum;
      std::vector<Vec3> boundary;
    };
    std::vector<SegmentStats> stats(seg.m);
    for (auto& s : stats) s.desc_sum = VecX::Zero(k);

    auto label_at = [&](int y, int x) {
      if (y < 0 || y >= h || x < 0 || x >= w) return 0;  // outside counts as invalid
      return seg.labels.at(y, x);
    };

    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int l = seg.labels.at(y, x);
        if (l <= 0) continue;
        SegmentStats& s = stats[l - 1];
        ++s.pixels;
        if (m.valid_at(y, x)) {
          const double* np = m.normal.pixel(y, x);
          s.normal_sum += Vec3(np[0], np[1], np[2]);
          const double* zp = m.descriptor.pixel(y, x);
          for (int d = 0; d < k; ++d) s.desc_sum[d] += zp[d];
        }
        const bool boundary = label_at(y - 1, x) != l || label_at(y + 1, x) != l ||
                              label_at(y, x - 1) != l || label_at(y, x + 1) != l;
        if (boundary && m.valid_at(y, x)) {
          const double depth = m.depth.at(y, x);
          const Vec3 p_cam(depth * (x - view.u0) / view.fx, depth * (y - view.v0) / view.fy, depth);
          s.boundary.push_back(view.to_world(p_cam));
        }
      }
    }

    for (int l = 0; l < seg.m; ++l) {
      const SegmentStats& s = stats[l];
      if (s.pixels < p_min) continue;
      if (static_cast<int>(s.boundary.size()) < kMinBoundaryPoints) continue;
      GaussianNode leaf;
      Vec3 mean = Vec3::Zero();
      for (const auto& p : s.boundary) mean += p;
      mean /= static_cast<double>(s.boundary.size());
      Mat3 cov = Mat3::Zero();
      for (const auto& p : s.boundary) {
        const Vec3 d = p - mean;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(s.boundary.size());
      leaf.mu = mean;
      leaf.cov = cov + cov_eps * Mat3::Identity();
      leaf.normal = s.normal_sum.norm() > 1e-12 ? Vec3(s.normal_sum / s.normal_sum.norm()) : Vec3::UnitZ();
      leaf.descriptor = s.desc_sum.norm() > 1e-12 ? VecX(s.desc_sum / s.desc_sum.norm())
                                                  : VecX(VecX::Unit(k, 0));
      leaf.leaf_count = 1;
      leaves.push_back(std::move(leaf));
    }
  }
  return leaves;
}

PlaneSet build_tree(const std::vector<GaussianNode>& leaves, double eps_b, double eps_z) {
  if (leaves.empty()) throw std::invalid_argument("build_tree: empty leaf list");
  const std::size_t n = leaves.size();

  // visiting order: leaf extent (trace of cov) descending, ties by index
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ta = leaves[a].cov.trace(), tb = leaves[b].cov.trace();
    if (ta != tb) return ta > tb;
    return a < b;
  });

  PlaneSet set;
  set.nodes.reserve(2 * n);
  for (int idx : order) set.nodes.push_back(leaves[idx]);

  std::vector<bool> absorbed(n, false);
  long total_leaves = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (absorbed[i]) continue;
    int cur = static_cast<int>(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (absorbed[j]) continue;
      const GaussianNode& a = set.nodes[cur];
      const GaussianNode& b = set.nodes[j];
      if (1.0 - a.descriptor.dot(b.descriptor) > eps_z) continue;
      if (bhattacharyya(a, b) > eps_b) continue;
      GaussianNode parent = merge_nodes(a, b);
      parent.left = cur;
      parent.right = static_cast<int>(j);
      set.nodes.push_back(std::move(parent));
      cur = static_cast<int>(set.nodes.size()) - 1;
      absorbed[j] = true;
    }
    absorbed[i] = true;
    set.roots.push_back(cur);
    total_leaves += set.nodes[cur].leaf_count;
  }

  set.pi.resize(set.roots.size());
  for (std::size_t r = 0; r < set.roots.size(); ++r)
    set.pi[r] = static_cast<double>(set.nodes[set.roots[r]].leaf_count) / static_cast<double>(total_leaves);
  return set;
}

std::vector<int> assign_primitives(const Scene& scene, const PlaneSet& planes, double theta_assign,
                                   double r_min) {
  const int n_planes = planes.plane_count();
  if (n_planes == 0) return std::vector<int>(scene.primitives.size(), -1);

  struct PlaneScore {
    Mat3 cov_inv;
    double log_norm;  // ln pi_k - 0.5 ln((2 pi)^3 det cov)
    const VecX* z;
  };
  std::vector<PlaneScore> ps(n_planes);
  for (int p = 0; p < n_planes; ++p) {
    const GaussianNode& node = planes.plane(p);
    require_spd(node.cov, "assign_primitives");
    ps[p].cov_inv = node.cov.inverse();
    ps[p].log_norm = std::log(planes.pi[p]) -
                     0.5 * (3.0 * std::log(2.0 * M_PI) + std::log(node.cov.determinant()));
    ps[p].z = &node.descriptor;
  }

  std::vector<int> labels(scene.primitives.size(), -1);
  parallel_chunks(scene.primitives.size(), 1024, [&](std::size_t b, std::size_t e) {
    std::vector<double> score(n_planes);
    for (std::size_t i = b; i < e; ++i) {
      const GaussianPrimitive& prim = scene.primitives[i];
      int best_gated = -1, best_any = -1;
      double best_gated_score = -std::numeric_limits<double>::infinity();
      double best_any_score = -std::numeric_limits<double>::infinity();
      for (int p = 0; p < n_planes; ++p) {
        const Vec3 d = prim.center - planes.plane(p).mu;
        const double s = ps[p].log_norm - 0.5 * d.dot(ps[p].cov_inv * d);
        if (s > best_any_score) {
          best_any_score = s;
          best_any = p;
        }
        if (prim.descriptor.dot(*ps[p].z) >= 1.0 - theta_assign && s > best_gated_score) {
          best_gated_score = s;
          best_gated = p;
        }
      }
      if (best_gated >= 0)
        labels[i] = best_gated;
      else if (best_any >= 0 && std::exp(best_any_score) >= r_min)
        labels[i] = best_any;
    }
  });
  return labels;
}

std::vector<FittedPlane> fit_plane_params(const Scene& scene, const std::vector<int>& labels,
                                          int n_planes) {
  if (labels.size() != scene.primitives.size())
    throw std::invalid_argument("fit_plane_params: label list does not match the field");
  std::vector<FittedPlane> fits(n_planes);
  for (int p = 0; p < n_planes; ++p) fits[p].plane = p;

  std::vector<std::vector<int>> members(n_planes);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0 && labels[i] < n_planes) members[labels[i]].push_back(static_cast<int>(i));

  for (int p = 0; p < n_planes; ++p) {
    fits[p].members = static_cast<long>(members[p].size());
    if (members[p].size() < 3) continue;  // dropped from geometric evaluation
    Vec3 centroid = Vec3::Zero();
    Vec3 mean_normal = Vec3::Zero();
    for (int i : members[p]) {
      centroid += scene.primitives[i].center;
      mean_normal += scene.primitives[i].normal;
    }
    centroid /= static_cast<double>(members[p].size());
    Mat3 cov = Mat3::Zero();
    for (int i : members[p]) {
      const Vec3 d = scene.primitives[i].center - centroid;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(members[p].size());
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 normal = eig.eigenvectors().col(0);
    if (normal.dot(mean_normal) < 0) normal = -normal;
    fits[p].normal = normal;
    fits[p].offset = -normal.dot(centroid);
    fits[p].valid = true;
  }
  return fits;
}

void save_plane_set(const PlaneSet& planes, const std::vector<FittedPlane>& fitted,
                    const std::string& labels_ply_path, const std::string& path) {
  nlohmann::json j;
  j["labels_ply"] = labels_ply_path;
  auto arr = nlohmann::json::array();
  for (int p = 0; p < planes.plane_count(); ++p) {
    const GaussianNode& node = planes.plane(p);
    nlohmann::json o;
    o["id"] = p;
    o["pi"] = planes.pi[p];
    o["mu"] = {node.mu.x(), node.mu.y(), node.mu.z()};
    auto cov = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cov.push_back(node.cov(r, c));
    o["cov"] = cov;
    o["leaf_count"] = node.leaf_count;
    if (p < static_cast<int>(fitted.size()) && fitted[p].valid) {
      o["normal"] = {fitted[p].normal.x(), fitted[p].normal.y(), fitted[p].normal.z()};
      o["offset"] = fitted[p].offset;
    } else {
      o["normal"] = {node.normal.x(), node.normal.y(), node.normal.z()};
      o["offset"] = -node.normal.dot(node.mu);
    }
    arr.push_back(o);
  }
  j["planes"] = arr;
  std::ofstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << j.dump(2) << "\n";
}

namespace {

Vec3 plane_color(int label) {
  if (label < 0) return Vec3(0.5, 0.5, 0.5);
  // golden-ratio hue wheel
  const double hue = std::fmod(0.61803398875 * (label + 1), 1.0) * 6.0;
  const double sat = 0.75, val = 0.95;
  const int i = static_cast<int>(hue);
  const double f = hue - i;
  const double a = val * (1 - sat), b = val * (1 - sat * f), c = val * (1 - sat * (1 - f));
  switch (i % 6) {
    case 0: return Vec3(val, c, a);
    case 1: return Vec3(b, val, a);
    case 2: return Vec3(a, val, c);
    case 3: return Vec3(a, b, val);
    case 4: return Vec3(c, a, val);
    default: return Vec3(val, a, b);
  }
}

}  // namespace

void save_labeled_field(const Scene& scene, const std::vector<int>& labels, const std::string& path) {
  Scene out = scene;
  for (std::size_t i = 0; i < out.primitives.size(); ++i) {
    const int l = i < labels.size() ? labels[i] : -1;
    out.primitives[i].gt_plane_id = l;
    out.primitives[i].color = plane_color(l);
  }
  save_field(out, path);
}

}  // namespace gsplane
