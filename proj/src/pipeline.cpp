#include "gsplane/pipeline.hpp"

#include <json.hpp>
#include <cmath>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gsplane {

namespace fs = std::filesystem;

Supervision make_supervision(const Scene& scene, const SynthConfig& cfg) {
  Supervision sup;
  const int n_views = static_cast<int>(scene.views.size());
  sup.masks.resize(n_views);
  sup.normals.resize(n_views);
  sup.references.resize(n_views);
  for (int v = 0; v < n_views; ++v) {
    const RenderedMaps maps = render(scene, scene.views[v], {true, false, false, false});
    sup.masks[v] = simulate_masks(scene, v, cfg, maps);
    sup.normals[v] = make_normal_supervision(scene, v, cfg, maps);
    sup.references[v] = maps.color;
  }
  return sup;
}

Supervision load_supervision(const Scene& scene, const std::string& masks_dir,
                             const std::string& normals_dir) {
  Supervision sup;
  const int n_views = static_cast<int>(scene.views.size());
  sup.masks.resize(n_views);
  sup.normals.resize(n_views);
  sup.references.resize(n_views);
  for (int v = 0; v < n_views; ++v) {
    const CameraView& view = scene.views[v];
    if (!masks_dir.empty()) {
      const std::string path = masks_dir + "/view_" + std::to_string(v) + ".pgm";
      ImageI raw = read_pgm16(path);
      if (raw.height() != view.height || raw.width() != view.width)
        throw std::runtime_error(path + ": mask size does not match the view");
      sup.masks[v] = SegmentLabelMap::densify(raw);
    }
    if (!normals_dir.empty()) {
      const std::string path = normals_dir + "/view_" + std::to_string(v) + ".pfm";
      sup.normals[v] = read_pfm(path);
      if (sup.normals[v].height() != view.height || sup.normals[v].width() != view.width ||
          sup.normals[v].channels() != 3)
        throw std::runtime_error(path + ": supervision normal map size does not match the view");
    }
  }
  return sup;
}

namespace {

/// Merged per-view regression targets: RAG partition of the raw masks using
/// the current rendered normals and planar distances, restricted to pixels
/// the renderer marks valid.
SegmentLabelMap merge_view_segments(const SegmentLabelMap& raw, const RenderedMaps& maps,
                                    const CameraView& view, const SegfusionConfig& cfg) {
  const PlanarDistanceMap dp = planar_distance_map(maps, view);
  const Rag rag = build_rag(raw, maps, dp, cfg.v_max);
  SegmentLabelMap merged = partition_rag(raw, rag, cfg.theta_n, cfg.theta_d);
  for (int y = 0; y < merged.labels.height(); ++y)
    for (int x = 0; x < merged.labels.width(); ++x)
      if (!maps.valid_at(y, x)) merged.labels.at(y, x) = 0;
  return SegmentLabelMap::densify(merged.labels);
}

MatX descriptor_rows(const RenderedMaps& maps, const std::vector<int>& pixel_index) {
  MatX z(pixel_index.size(), maps.desc_dim);
  for (std::size_t r = 0; r < pixel_index.size(); ++r) {
    const int y = pixel_index[r] / maps.width, x = pixel_index[r] % maps.width;
    const double* p = maps.descriptor.pixel(y, x);
    for (int d = 0; d < maps.desc_dim; ++d) z(r, d) = p[d];
  }
  return z;
}

MatX gather_descriptors(const Scene& scene) {
  const int k = scene.descriptor_dim();
  MatX z(scene.primitives.size(), k);
  for (std::size_t i = 0; i < scene.primitives.size(); ++i)
    z.row(i) = scene.primitives[i].descriptor.transpose();
  return z;
}

void scatter_descriptors(Scene& scene, const MatX& z) {
  for (std::size_t i = 0; i < scene.primitives.size(); ++i)
    scene.primitives[i].descriptor = z.row(i).transpose();
}

double l1_image_distance(const ImageF& a, const ImageF& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
  return s;
}

}  // namespace

std::vector<LossRow> optimize(Scene& scene, const Supervision& supervision,
                              const PipelineConfig& cfg) {
  const int n_views = static_cast<int>(scene.views.size());
  if (n_views == 0) throw std::invalid_argument("optimize: scene has no views");
  if (static_cast<int>(supervision.masks.size()) != n_views)
    throw std::invalid_argument("optimize: supervision does not match the view list");

  KnnIndex knn = build_knn(scene, cfg.geometry.knn);
  auto ms_rng = make_rng(derive_seed(cfg.seed, 0x4d534846 /* "MSHF" */));
  const auto& ms = cfg.learn.mean_shift;

  std::vector<LossRow> losses;
  losses.reserve(cfg.iterations);

  for (long it = 0; it < cfg.iterations; ++it) {
    const int v = static_cast<int>(it % n_views);
    const CameraView& view = scene.views[v];
    const double lr =
        cfg.learn.lr * std::pow(cfg.learn.lr_decay,
                                static_cast<double>(it) / static_cast<double>(cfg.iterations));

    RenderChannels channels;
    channels.color = !supervision.references.empty() && !supervision.references[v].empty();
    channels.normal = true;
    channels.descriptor = cfg.learn.use_masks;
    channels.retain_weights = cfg.learn.use_masks || cfg.learn.use_normals;
    const RenderedMaps maps = render(scene, view, channels, cfg.tau_alpha);

    LossRow row;
    row.iteration = it;

    if (cfg.learn.use_masks && supervision.masks[v].m > 0) {
      const SegmentLabelMap merged = merge_view_segments(supervision.masks[v], maps, view, cfg.segfusion);
      const OneHotTargets targets = one_hot_targets(merged);
      if (targets.y.rows() > 0) {
        const MatX z = descriptor_rows(maps, targets.pixel_index);
        const RegressionSolve solve = solve_regression(z, targets.y, cfg.learn.lambda_reg);
        row.l_seg = descriptor_gradient_step(scene, maps, targets, solve, lr);
      }
    }
    if (cfg.learn.use_normals && !supervision.normals[v].empty())
      row.l_n = normal_loss_step(scene, maps, supervision.normals[v], lr);
    if (channels.color) row.l_rgb = l1_image_distance(maps.color, supervision.references[v]);
    losses.push_back(row);

    if (cfg.learn.mean_shift_enabled && it >= ms.warmup && (it - ms.warmup) % ms.period == 0) {
      MatX z = gather_descriptors(scene);
      if (z.rows() <= ms.sample_size)
        mean_shift_exact(z, ms);
      else
        mean_shift_sampled(z, knn, ms, ms_rng);
      scatter_descriptors(scene, z);
    }
    if (cfg.geometry.smoothing_enabled && it > 0 && it % cfg.geometry.smooth_period == 0) {
      laplacian_smooth(scene, knn, SmoothField::kNormal);
      laplacian_smooth(scene, knn, SmoothField::kDescriptor);
    }
    if (cfg.geometry.alignment_enabled && it > 0 && it % cfg.geometry.align_period == 0) {
      planar_align(scene, knn);
      knn = build_knn(scene, cfg.geometry.knn);  // recomputed after any refinement
    }
  }
  return losses;
}

ParsedPlanes parse_planes(const Scene& scene, const Supervision& supervision,
                          const PipelineConfig& cfg) {
  const int n_views = static_cast<int>(scene.views.size());
  std::vector<SegmentLabelMap> merged(n_views);
  std::vector<RenderedMaps> maps(n_views);
  for (int v = 0; v < n_views; ++v) {
    RenderChannels channels{false, true, true, false};
    maps[v] = render(scene, scene.views[v], channels, cfg.tau_alpha);
    if (supervision.masks[v].m > 0)
      merged[v] = merge_view_segments(supervision.masks[v], maps[v], scene.views[v], cfg.segfusion);
  }
  ParsedPlanes out;
  const auto leaves = build_leaves(scene, merged, maps, cfg.gmt.p_min);
  out.planes = build_tree(leaves, cfg.gmt.eps_b, cfg.gmt.eps_z);
  out.labels = assign_primitives(scene, out.planes, cfg.gmt.theta_assign, cfg.gmt.r_min);
  out.fitted = fit_plane_params(scene, out.labels, out.planes.plane_count());
  return out;
}

MetricsReport evaluate(const Scene& scene, const ParsedPlanes& parsed, const PipelineConfig& cfg) {
  std::vector<int> gt(scene.primitives.size());
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = scene.primitives[i].gt_plane_id;
  MetricsReport report = evaluate_partitions(gt, parsed.labels, cfg.eval.include_unassigned);
  report.n_planes_pred = parsed.planes.plane_count();

  if (!scene.gt_planes.empty()) {
    std::vector<Vec3> pred;
    for (std::size_t i = 0; i < parsed.labels.size(); ++i) {
      const int l = parsed.labels[i];
      if (l < 0 || l >= static_cast<int>(parsed.fitted.size()) || !parsed.fitted[l].valid) continue;
      const Vec3& p = scene.primitives[i].center;
      const FittedPlane& f = parsed.fitted[l];
      pred.push_back(p - (f.normal.dot(p) + f.offset) * f.normal);
    }
    const std::vector<Vec3> gt_samples = sample_gt_surfaces(scene.gt_planes, cfg.eval.gt_sample_density);
    if (!pred.empty() && !gt_samples.empty()) {
      const auto [acc, comp] = accuracy_completeness(pred, gt_samples);
      report.accuracy = acc;
      report.completeness = comp;
    }
  }
  return report;
}

void save_loss_csv(const std::vector<LossRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << "iteration,L_seg,L_n,L_rgb\n" << std::setprecision(10);
  for (const auto& r : rows) f << r.iteration << "," << r.l_seg << "," << r.l_n << "," << r.l_rgb << "\n";
}

namespace {

struct Manifest {
  nlohmann::json artifacts = nlohmann::json::array();

  void add(const std::string& stage, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(path + ": cannot hash missing artifact");
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string bytes = ss.str();
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(bytes.data(), bytes.size());
    artifacts.push_back({{"stage", stage}, {"path", path}, {"fnv1a64", hex.str()}});
  }

  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error(path + ": cannot open for writing");
    f << nlohmann::json{{"artifacts", artifacts}}.dump(2) << "\n";
  }
};

}  // namespace

MetricsReport run_pipeline(const PipelineConfig& cfg, const std::string& out_dir,
                           const std::string& masks_dir, const std::string& normals_dir) {
  set_thread_count(cfg.threads);
  fs::create_directories(out_dir);
  Manifest manifest;

  SynthConfig synth_cfg = cfg.synth;
  synth_cfg.seed = cfg.seed;
  Scene scene = generate_scene(synth_cfg);
  save_field(scene, out_dir + "/field.ply");
  save_cameras(scene.views, out_dir + "/cameras.json");
  save_gt_planes(scene.gt_planes, out_dir + "/gt_planes.json");
  manifest.add("synth", out_dir + "/field.ply");
  manifest.add("synth", out_dir + "/cameras.json");
  manifest.add("synth", out_dir + "/gt_planes.json");

  Supervision sup = make_supervision(scene, synth_cfg);
  if (!masks_dir.empty() || !normals_dir.empty()) {
    Supervision imported = load_supervision(scene, masks_dir, normals_dir);
    if (!masks_dir.empty()) sup.masks = std::move(imported.masks);
    if (!normals_dir.empty()) sup.normals = std::move(imported.normals);
  }
  fs::create_directories(out_dir + "/masks");
  fs::create_directories(out_dir + "/normals");
  fs::create_directories(out_dir + "/images");
  for (int v = 0; v < static_cast<int>(scene.views.size()); ++v) {
    const std::string mask_path = out_dir + "/masks/view_" + std::to_string(v) + ".pgm";
    write_pgm16(mask_path, sup.masks[v].labels);
    manifest.add("supervision", mask_path);
    const std::string normal_path = out_dir + "/normals/view_" + std::to_string(v) + ".pfm";
    write_pfm(normal_path, sup.normals[v]);
    manifest.add("supervision", normal_path);
    write_pfm(out_dir + "/images/view_" + std::to_string(v) + ".pfm", sup.references[v]);
    manifest.add("supervision", out_dir + "/images/view_" + std::to_string(v) + ".pfm");
  }

  const auto losses = optimize(scene, sup, cfg);
  save_field(scene, out_dir + "/trained.ply");
  save_loss_csv(losses, out_dir + "/loss.csv");
  manifest.add("optimize", out_dir + "/trained.ply");
  manifest.add("optimize", out_dir + "/loss.csv");

  const ParsedPlanes parsed = parse_planes(scene, sup, cfg);
  save_labeled_field(scene, parsed.labels, out_dir + "/labels.ply");
  save_plane_set(parsed.planes, parsed.fitted, out_dir + "/labels.ply", out_dir + "/planes.json");
  manifest.add("parse_planes", out_dir + "/labels.ply");
  manifest.add("parse_planes", out_dir + "/planes.json");

  const MetricsReport report = evaluate(scene, parsed, cfg);
  save_metrics(report, out_dir + "/metrics.json");
  manifest.add("eval", out_dir + "/metrics.json");

  save_config(cfg, out_dir + "/config_resolved.json");
  manifest.add("config", out_dir + "/config_resolved.json");
  manifest.save(out_dir + "/manifest.json");
  return report;
}

}  // namespace gsplane
