#pragma once

#include "gsplane/field.hpp"
#include "gsplane/image.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace gsplane {

// Splatting constants follow the usual splat-renderer conventions: 0.3 px
// covariance dilation, 1/255 alpha cutoff, 0.99 alpha clamp, 1e-4
// transmittance stop. Pixel (ix, iy) samples the continuous image plane at
// (u, v) = (ix, iy).
constexpr double kNearPlane = 0.05;
constexpr double kCovDilation = 0.3;
constexpr double kAlphaCutoff = 1.0 / 255.0;
constexpr double kAlphaClamp = 0.99;
constexpr double kTransmittanceStop = 1e-4;
constexpr double kDefaultTauAlpha = 0.5;

struct ProjectedSplat {
  Vec2 mean2 = Vec2::Zero();   // pixel coordinates
  Mat2 cov2d = Mat2::Identity();
  double depth = 0.0;          // camera-space z, meters
  int index = -1;              // source primitive
};

/// Perspective projection of one primitive. Returns nullopt when the center
/// is at or behind the near plane. cov2d includes the 0.3 px dilation.
std::optional<ProjectedSplat> project(const GaussianPrimitive& prim, const CameraView& view);

struct RenderChannels {
  bool color = true;
  bool normal = true;
  bool descriptor = true;
  bool retain_weights = false;

  static RenderChannels all(bool weights = false) { return {true, true, true, weights}; }
};

struct PixelContribution {
  std::int32_t index;
  double weight;  // alpha_i * prod_{j<i} (1 - alpha_j)
};

struct RenderedMaps {
  int height = 0, width = 0, desc_dim = 0;
  double tau_alpha = kDefaultTauAlpha;

  ImageF color;             // H x W x 3
  ImageF normal_blend;      // raw alpha blend, H x W x 3
  ImageF normal;            // unit length where acc_alpha > tau_alpha
  ImageF descriptor_blend;  // raw alpha blend, H x W x k
  ImageF descriptor;        // unit length where acc_alpha > tau_alpha
  ImageF depth;             // alpha-normalized camera z; 0 where invalid
  ImageU8 depth_valid;      // 1 where acc_alpha > tau_alpha
  ImageF acc_alpha;
  ImageI argmax;            // contributor of max weight, -1 where none

  // Per-pixel (index, weight) lists in front-to-back order; populated only
  // when RenderChannels::retain_weights is set.
  std::vector<std::vector<PixelContribution>> contributions;

  bool valid_at(int y, int x) const { return depth_valid.at(y, x) != 0; }
};

/// Forward software splatting of the whole field into one view.
/// Deterministic for a given scene regardless of worker count.
RenderedMaps render(const Scene& scene, const CameraView& view, const RenderChannels& channels,
                    double tau_alpha = kDefaultTauAlpha);

/// Dumps float maps as PFM and index maps as 16-bit PGM under `dir` with the
/// given view index in the filename.
void dump_maps(const RenderedMaps& maps, const std::string& dir, int view_index);

}  // namespace gsplane
