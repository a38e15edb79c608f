#pragma once

#include "gsplane/config.hpp"
#include "gsplane/gmt.hpp"
#include "gsplane/metrics.hpp"

#include <string>
#include <vector>

namespace gsplane {

/// Fixed per-view training inputs: raw segment maps, supervision normals,
/// and the photometric reference images (for the L_rgb diagnostic).
struct Supervision {
  std::vector<SegmentLabelMap> masks;
  std::vector<ImageF> normals;     // H x W x 3, zero rows where unsupervised
  std::vector<ImageF> references;  // H x W x 3 color
};

/// Simulates masks, supervision normals, and reference images for every
/// view of a synthetic scene (one render per view).
Supervision make_supervision(const Scene& scene, const SynthConfig& cfg);

Supervision load_supervision(const Scene& scene, const std::string& masks_dir,
                             const std::string& normals_dir);

struct LossRow {
  long iteration = 0;
  double l_seg = 0.0;
  double l_n = 0.0;
  double l_rgb = 0.0;
};

/// Descriptor/normal optimization loop: per-iteration view rendering,
/// RAG-merged regression targets, closed-form solve plus projected gradient
/// steps, and periodic mean-shift / Laplacian smoothing / planar alignment.
/// Geometry apart from the aligned centers stays frozen.
std::vector<LossRow> optimize(Scene& scene, const Supervision& supervision,
                              const PipelineConfig& cfg);

struct ParsedPlanes {
  PlaneSet planes;
  std::vector<int> labels;  // per primitive, -1 unassigned
  std::vector<FittedPlane> fitted;
};

/// Renders the trained field, re-merges the masks per view, lifts segment
/// boundaries into GMT leaves, builds the tree, and labels the primitives.
ParsedPlanes parse_planes(const Scene& scene, const Supervision& supervision,
                          const PipelineConfig& cfg);

/// Partition metrics vs the scene's gt ids plus geometric
/// accuracy/completeness vs sampled gt surfaces (when gt planes exist).
MetricsReport evaluate(const Scene& scene, const ParsedPlanes& parsed, const PipelineConfig& cfg);

void save_loss_csv(const std::vector<LossRow>& rows, const std::string& path);

/// One-shot run: synth -> supervision -> optimize -> parse -> eval, all
/// artifacts plus manifest under out_dir. Optional directories override the
/// simulated masks / supervision normals with imported files.
MetricsReport run_pipeline(const PipelineConfig& cfg, const std::string& out_dir,
                           const std::string& masks_dir = "", const std::string& normals_dir = "");

}  // namespace gsplane
