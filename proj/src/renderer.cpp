#include "gsplane/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace gsplane {

std::optional<ProjectedSplat> project(const GaussianPrimitive& prim, const CameraView& view) {
  const Mat3 rw = view.rotation();
  const Vec3 p = rw * prim.center + view.translation();
  if (p.z() <= kNearPlane) return std::nullopt;

  const double z = p.z();
  const double inv_z = 1.0 / z;
  // The affine approximation is evaluated at the frustum-clamped point
  // (1.3x margin), as in stock splat renderers; far outside the frustum the
  // Jacobian at the true mean smears splats across the whole image.
  const double lim_x = 1.3 * std::max(view.u0, view.width - view.u0) / view.fx;
  const double lim_y = 1.3 * std::max(view.v0, view.height - view.v0) / view.fy;
  const double jx = std::clamp(p.x() * inv_z, -lim_x, lim_x) * z;
  const double jy = std::clamp(p.y() * inv_z, -lim_y, lim_y) * z;
  Eigen::Matrix<double, 2, 3> jac;
  jac << view.fx * inv_z, 0.0, -view.fx * jx * inv_z * inv_z,
      0.0, view.fy * inv_z, -view.fy * jy * inv_z * inv_z;

  const Mat3 cov_cam = rw * covariance_of(prim) * rw.transpose();
  ProjectedSplat s;
  s.cov2d = jac * cov_cam * jac.transpose() + kCovDilation * Mat2::Identity();
  s.mean2 = Vec2(view.fx * p.x() * inv_z + view.u0, view.fy * p.y() * inv_z + view.v0);
  s.depth = z;
  return s;
}

namespace {

constexpr int kTile = 16;

struct RasterSplat {
  double mx, my;            // pixel mean
  double ia, ib, ic;        // inverse 2D covariance (symmetric)
  double depth;
  double opacity;
  int index;
  int x0, x1, y0, y1;       // inclusive pixel bbox
  const GaussianPrimitive* prim;
};

}  // namespace

RenderedMaps render(const Scene& scene, const CameraView& view, const RenderChannels& channels,
                    double tau_alpha) {
  const int w = view.width, h = view.height;
  const int k = scene.descriptor_dim();
  const std::size_t n = scene.primitives.size();

  RenderedMaps maps;
  maps.height = h;
  maps.width = w;
  maps.desc_dim = k;
  maps.tau_alpha = tau_alpha;
  maps.acc_alpha = ImageF(h, w, 1, 0.0);
  maps.depth = ImageF(h, w, 1, 0.0);
  maps.depth_valid = ImageU8(h, w, 1, 0);
  maps.argmax = ImageI(h, w, 1, -1);
  if (channels.color) maps.color = ImageF(h, w, 3, 0.0);
  if (channels.normal) {
    maps.normal_blend = ImageF(h, w, 3, 0.0);
    maps.normal = ImageF(h, w, 3, 0.0);
  }
  if (channels.descriptor) {
    maps.descriptor_blend = ImageF(h, w, k, 0.0);
    maps.descriptor = ImageF(h, w, k, 0.0);
  }
  if (channels.retain_weights) maps.contributions.assign(static_cast<std::size_t>(h) * w, {});

  // Project everything; record survivors.
  std::vector<ProjectedSplat> projected(n);
  std::vector<std::uint8_t> alive(n, 0);
  parallel_chunks(n, 1024, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto s = project(scene.primitives[i], view);
      if (!s) continue;
      s->index = static_cast<int>(i);
      projected[i] = *s;
      alive[i] = 1;
    }
  });

  std::vector<RasterSplat> splats;
  splats.reserve(n / 2);
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    const ProjectedSplat& ps = projected[i];
    const double a = ps.cov2d(0, 0), b = ps.cov2d(0, 1), c = ps.cov2d(1, 1);
    const double det = a * c - b * b;
    if (det <= 0.0) continue;
    const double mid = 0.5 * (a + c);
    const double lmax = mid + std::sqrt(std::max(0.0, mid * mid - det));
    const double radius = 3.0 * std::sqrt(lmax);
    RasterSplat rs;
    rs.x0 = std::max(0, static_cast<int>(std::ceil(ps.mean2.x() - radius)));
    rs.x1 = std::min(w - 1, static_cast<int>(std::floor(ps.mean2.x() + radius)));
    rs.y0 = std::max(0, static_cast<int>(std::ceil(ps.mean2.y() - radius)));
    rs.y1 = std::min(h - 1, static_cast<int>(std::floor(ps.mean2.y() + radius)));
    if (rs.x0 > rs.x1 || rs.y0 > rs.y1) continue;
    const double inv_det = 1.0 / det;
    rs.mx = ps.mean2.x();
    rs.my = ps.mean2.y();
    rs.ia = c * inv_det;
    rs.ib = -b * inv_det;
    rs.ic = a * inv_det;
    rs.depth = ps.depth;
    rs.opacity = scene.primitives[i].opacity;
    rs.index = ps.index;
    rs.prim = &scene.primitives[i];
    splats.push_back(rs);
  }

  // Global front-to-back order; ties broken by source index.
  std::sort(splats.begin(), splats.end(), [](const RasterSplat& a, const RasterSplat& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.index < b.index;
  });

  const int tiles_x = (w + kTile - 1) / kTile;
  const int tiles_y = (h + kTile - 1) / kTile;
  std::vector<std::vector<std::uint32_t>> tile_lists(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (std::uint32_t si = 0; si < splats.size(); ++si) {
    const RasterSplat& rs = splats[si];
    for (int ty = rs.y0 / kTile; ty <= rs.y1 / kTile; ++ty)
      for (int tx = rs.x0 / kTile; tx <= rs.x1 / kTile; ++tx)
        tile_lists[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(si);
  }

  parallel_chunks(tile_lists.size(), 1, [&](std::size_t tb, std::size_t te) {
    // per-tile transmittance state
    double trans[kTile * kTile];
    double best_w[kTile * kTile];
    std::uint8_t done[kTile * kTile];
    for (std::size_t t = tb; t < te; ++t) {
      const auto& list = tile_lists[t];
      if (list.empty()) continue;
      const int tx = static_cast<int>(t) % tiles_x, ty = static_cast<int>(t) / tiles_x;
      const int px0 = tx * kTile, py0 = ty * kTile;
      const int px1 = std::min(w - 1, px0 + kTile - 1), py1 = std::min(h - 1, py0 + kTile - 1);
      std::fill(trans, trans + kTile * kTile, 1.0);
      std::fill(best_w, best_w + kTile * kTile, 0.0);
      std::fill(done, done + kTile * kTile, 0);

      for (std::uint32_t si : list) {
        const RasterSplat& rs = splats[si];
        const int x0 = std::max(rs.x0, px0), x1 = std::min(rs.x1, px1);
        const int y0 = std::max(rs.y0, py0), y1 = std::min(rs.y1, py1);
        for (int y = y0; y <= y1; ++y) {
          const double dy = y - rs.my;
          for (int x = x0; x <= x1; ++x) {
            const int local = (y - py0) * kTile + (x - px0);
            if (done[local]) continue;
            const double dx = x - rs.mx;
            const double power = -0.5 * (rs.ia * dx * dx + rs.ic * dy * dy) - rs.ib * dx * dy;
            if (power > 0.0) continue;
            const double alpha = std::min(kAlphaClamp, rs.opacity * std::exp(power));
            if (alpha < kAlphaCutoff) continue;
            const double t_cur = trans[local];
            const double t_next = t_cur * (1.0 - alpha);
            if (t_next < kTransmittanceStop) {
              done[local] = 1;
              continue;
            }
            const double wgt = alpha * t_cur;
            maps.acc_alpha.at(y, x) += wgt;
            maps.depth.at(y, x) += wgt * rs.depth;
            if (wgt > best_w[local]) {
              best_w[local] = wgt;
              maps.argmax.at(y, x) = rs.index;
            }
            const GaussianPrimitive& prim = *rs.prim;
            if (channels.color) {
              double* px = maps.color.pixel(y, x);
              px[0] += wgt * prim.color[0];
              px[1] += wgt * prim.color[1];
              px[2] += wgt * prim.color[2];
            }
            if (channels.normal) {
              double* px = maps.normal_blend.pixel(y, x);
              px[0] += wgt * prim.normal[0];
              px[1] += wgt * prim.normal[1];
              px[2] += wgt * prim.normal[2];
            }
            if (channels.descriptor) {
              double* px = maps.descriptor_blend.pixel(y, x);
              const double* z = prim.descriptor.data();
              for (int d = 0; d < k; ++d) px[d] += wgt * z[d];
            }
            if (channels.retain_weights)
              maps.contributions[static_cast<std::size_t>(y) * w + x].push_back({rs.index, wgt});
            trans[local] = t_next;
          }
        }
      }
    }
  });

  // Validity, alpha-normalized depth, renormalized unit maps.
  parallel_chunks(static_cast<std::size_t>(h), 8, [&](std::size_t yb, std::size_t ye) {
    for (std::size_t y = yb; y < ye; ++y) {
      for (int x = 0; x < w; ++x) {
        const double acc = maps.acc_alpha.at(static_cast<int>(y), x);
        const bool valid = acc > tau_alpha;
        maps.depth_valid.at(static_cast<int>(y), x) = valid ? 1 : 0;
        if (valid)
          maps.depth.at(static_cast<int>(y), x) /= acc;
        else
          maps.depth.at(static_cast<int>(y), x) = 0.0;
        if (channels.normal) {
          const double* raw = maps.normal_blend.pixel(static_cast<int>(y), x);
          double* out = maps.normal.pixel(static_cast<int>(y), x);
          const double nrm = std::sqrt(raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]);
          if (valid && nrm > 1e-12)
            for (int d = 0; d < 3; ++d) out[d] = raw[d] / nrm;
          else
            for (int d = 0; d < 3; ++d) out[d] = raw[d];
        }
        if (channels.descriptor) {
          const double* raw = maps.descriptor_blend.pixel(static_cast<int>(y), x);
          double* out = maps.descriptor.pixel(static_cast<int>(y), x);
          double sq = 0.0;
          for (int d = 0; d < k; ++d) sq += raw[d] * raw[d];
          const double nrm = std::sqrt(sq);
          if (valid && nrm > 1e-12)
            for (int d = 0; d < k; ++d) out[d] = raw[d] / nrm;
          else
            for (int d = 0; d < k; ++d) out[d] = raw[d];
        }
      }
    }
  });

  return maps;
}

void dump_maps(const RenderedMaps& maps, const std::string& dir, int view_index) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string stem = dir + "/view_" + std::to_string(view_index) + "_";
  if (!maps.color.empty()) write_pfm(stem + "color.pfm", maps.color);
  if (!maps.normal.empty()) write_pfm(stem + "normal.pfm", maps.normal);
  if (!maps.descriptor.empty()) {
    if (maps.desc_dim == 3) {
      write_pfm(stem + "descriptor.pfm", maps.descriptor);
    } else {
      for (int d = 0; d < maps.desc_dim; ++d) {
        ImageF ch(maps.height, maps.width, 1);
        for (int y = 0; y < maps.height; ++y)
          for (int x = 0; x < maps.width; ++x) ch.at(y, x) = maps.descriptor.at(y, x, d);
        write_pfm(stem + "descriptor_" + std::to_string(d) + ".pfm", ch);
      }
    }
  }
  write_pfm(stem + "depth.pfm", maps.depth);
  write_pfm(stem + "alpha.pfm", maps.acc_alpha);
  // contributor indices are clamped into the 16-bit range; 0 means none
  ImageI arg(maps.height, maps.width, 1);
  for (int y = 0; y < maps.height; ++y)
    for (int x = 0; x < maps.width; ++x) {
      const int idx = maps.argmax.at(y, x);
      arg.at(y, x) = idx < 0 ? 0 : std::min(idx + 1, 65535);
    }
  write_pgm16(stem + "argmax.pgm", arg);
}

}  // namespace gsplane
