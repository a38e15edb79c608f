#include "gsplane/segfusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace gsplane {

SegmentLabelMap SegmentLabelMap::densify(const ImageI& raw) {
  SegmentLabelMap out;
  out.labels = ImageI(raw.height(), raw.width(), 1, 0);
  std::vector<int> remap;  // old label -> new label, lazily grown
  int next = 1;
  for (int y = 0; y < raw.height(); ++y) {
    for (int x = 0; x < raw.width(); ++x) {
      const int v = raw.at(y, x);
      if (v <= 0) continue;
      if (v >= static_cast<int>(remap.size())) remap.resize(v + 1, 0);
      if (remap[v] == 0) remap[v] = next++;
      out.labels.at(y, x) = remap[v];
    }
  }
  out.m = next - 1;
  return out;
}

PlanarDistanceMap planar_distance_map(const RenderedMaps& maps, const CameraView& view) {
  PlanarDistanceMap out;
  out.d_p = ImageF(maps.height, maps.width, 1, 0.0);
  out.valid = ImageU8(maps.height, maps.width, 1, 0);
  const Mat3 rw = view.rotation();
  for (int y = 0; y < maps.height; ++y) {
    for (int x = 0; x < maps.width; ++x) {
      if (!maps.valid_at(y, x)) continue;
      const double* nw = maps.normal.pixel(y, x);
      const Vec3 n_cam = rw * Vec3(nw[0], nw[1], nw[2]);
      const double depth = maps.depth.at(y, x);
      const double dp = depth * ((n_cam.x() / view.fx) * (view.u0 - x) +
                                 (n_cam.y() / view.fy) * (view.v0 - y) - n_cam.z());
      out.d_p.at(y, x) = dp;
      out.valid.at(y, x) = 1;
    }
  }
  return out;
}

Rag build_rag(const SegmentLabelMap& labels, const RenderedMaps& maps, const PlanarDistanceMap& dp,
              double v_max) {
  Rag rag;
  if (labels.m <= 0) return rag;
  rag.nodes.resize(labels.m);
  for (int i = 0; i < labels.m; ++i) rag.nodes[i].segment = i + 1;

  const int h = labels.labels.height(), w = labels.labels.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = labels.labels.at(y, x);
      if (l <= 0) continue;
      RagNode& node = rag.nodes[l - 1];
      ++node.pixel_count;
      if (dp.valid.at(y, x)) {
        const double* n = maps.normal.pixel(y, x);
        node.mean_normal += Vec3(n[0], n[1], n[2]);
        node.mean_dp += dp.d_p.at(y, x);
        ++node.stat_count;
      }
    }
  }
  for (auto& node : rag.nodes) {
    if (node.stat_count > 0 && node.mean_normal.norm() > 1e-12) {
      node.mean_normal.normalize();
      node.mean_dp /= static_cast<double>(node.stat_count);
    } else {
      node.stat_count = 0;
    }
  }

  // mean angular deviation pass
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = labels.labels.at(y, x);
      if (l <= 0 || !dp.valid.at(y, x)) continue;
      RagNode& node = rag.nodes[l - 1];
      if (node.stat_count == 0) continue;
      const double* n = maps.normal.pixel(y, x);
      const double cosv = std::clamp(node.mean_normal.dot(Vec3(n[0], n[1], n[2])), -1.0, 1.0);
      node.normal_var += std::acos(cosv);
    }
  }
  for (auto& node : rag.nodes) {
    if (node.stat_count > 0) node.normal_var /= static_cast<double>(node.stat_count);
    node.valid = node.stat_count > 0 && node.normal_var <= v_max;
  }

  // 4-connected adjacency
  std::set<std::pair<int, int>> edges;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = labels.labels.at(y, x);
      if (l <= 0) continue;
      if (x + 1 < w) {
        const int r = labels.labels.at(y, x + 1);
        if (r > 0 && r != l) edges.emplace(std::min(l, r), std::max(l, r));
      }
      if (y + 1 < h) {
        const int b = labels.labels.at(y + 1, x);
        if (b > 0 && b != l) edges.emplace(std::min(l, b), std::max(l, b));
      }
    }
  }
  rag.edges.assign(edges.begin(), edges.end());
  return rag;
}

namespace {

int uf_find(std::vector<int>& parent, int a) {
  while (parent[a] != a) {
    parent[a] = parent[parent[a]];
    a = parent[a];
  }
  return a;
}

}  // namespace

SegmentLabelMap partition_rag(const SegmentLabelMap& labels, const Rag& rag, double theta_n,
                              double theta_d) {
  std::vector<int> parent(rag.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& [li, lj] : rag.edges) {
    const RagNode& a = rag.nodes[li - 1];
    const RagNode& b = rag.nodes[lj - 1];
    if (!a.valid || !b.valid) continue;
    const double ang = std::acos(std::clamp(a.mean_normal.dot(b.mean_normal), -1.0, 1.0));
    if (ang > theta_n) continue;
    if (std::abs(a.mean_dp - b.mean_dp) > theta_d) continue;
    const int ra = uf_find(parent, li - 1), rb = uf_find(parent, lj - 1);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }

  // new ids by ascending original label of the component root
  std::vector<int> component_label(rag.nodes.size(), 0);
  int next = 1;
  for (std::size_t i = 0; i < rag.nodes.size(); ++i) {
    if (!rag.nodes[i].valid) continue;
    const int root = uf_find(parent, static_cast<int>(i));
    if (component_label[root] == 0) component_label[root] = next++;
    component_label[i] = component_label[root];
  }

  SegmentLabelMap out;
  out.labels = ImageI(labels.labels.height(), labels.labels.width(), 1, 0);
  out.m = next - 1;
  for (int y = 0; y < labels.labels.height(); ++y)
    for (int x = 0; x < labels.labels.width(); ++x) {
      const int l = labels.labels.at(y, x);
      if (l <= 0) continue;
      if (!rag.nodes[l - 1].valid) continue;
      out.labels.at(y, x) = component_label[l - 1];
    }
  return out;
}

OneHotTargets one_hot_targets(const SegmentLabelMap& merged) {
  OneHotTargets out;
  if (merged.m <= 0) {
    out.y.resize(0, 0);
    return out;
  }
  long n = 0;
  for (const auto v : merged.labels.data())
    if (v > 0) ++n;
  out.y = MatX::Zero(n, merged.m);
  out.pixel_index.reserve(n);
  long row = 0;
  const int h = merged.labels.height(), w = merged.labels.width();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int l = merged.labels.at(y, x);
      if (l <= 0) continue;
      out.y(row, l - 1) = 1.0;
      out.pixel_index.push_back(y * w + x);
      ++row;
    }
  return out;
}

}  // namespace gsplane
