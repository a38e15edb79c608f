// gsplane: parse plane instances out of 3D Gaussian splat fields.
//
// Subcommands cover the full pipeline (synth -> optimize -> parse-planes ->
// eval) plus single-stage entry points for working with saved fields.

#include "gsplane/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

using namespace gsplane;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool threads_set = false;
};

PipelineConfig resolve_config(const CommonArgs& args) {
  PipelineConfig cfg;
  if (!args.config_path.empty()) cfg = load_config(args.config_path);
  if (args.seed_set) {
    cfg.seed = args.seed;
    cfg.synth.seed = args.seed;
  }
  if (args.threads_set) cfg.threads = args.threads;
  set_thread_count(cfg.threads);
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "pipeline config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "override the config seed")
      ->each([&](const std::string&) { args.seed_set = true; });
  cmd->add_option("--threads", args.threads, "worker threads (0 = all cores)")
      ->each([&](const std::string&) { args.threads_set = true; });
}

Scene load_scene(const std::string& field, const std::string& cameras, std::uint64_t seed) {
  Scene scene = load_field(field, seed);
  if (!cameras.empty()) scene.views = load_cameras(cameras);
  return scene;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plane instance parsing for 3D Gaussian splat fields"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string field_path, cameras_path, masks_dir, normals_dir;
  std::string pred_path, gt_path, gt_planes_path;

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic planar scene with masks");
  add_common(synth_cmd, args);

  auto* render_cmd = app.add_subcommand("render", "render per-view maps of a field");
  add_common(render_cmd, args);
  render_cmd->add_option("--field", field_path, "field PLY")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--cameras", cameras_path, "cameras JSON")->required()->check(CLI::ExistingFile);

  auto* opt_cmd = app.add_subcommand("optimize", "train descriptors/normals of a field");
  add_common(opt_cmd, args);
  opt_cmd->add_option("--field", field_path, "field PLY")->required()->check(CLI::ExistingFile);
  opt_cmd->add_option("--cameras", cameras_path, "cameras JSON")->required()->check(CLI::ExistingFile);
  opt_cmd->add_option("--masks", masks_dir, "mask PGM directory")->required()->check(CLI::ExistingDirectory);
  opt_cmd->add_option("--normals", normals_dir, "supervision normal PFM directory")
      ->check(CLI::ExistingDirectory);

  auto* parse_cmd = app.add_subcommand("parse-planes", "build the plane mixture from a trained field");
  add_common(parse_cmd, args);
  parse_cmd->add_option("--field", field_path, "trained field PLY")->required()->check(CLI::ExistingFile);
  parse_cmd->add_option("--cameras", cameras_path, "cameras JSON")->required()->check(CLI::ExistingFile);
  parse_cmd->add_option("--masks", masks_dir, "mask PGM directory")->required()->check(CLI::ExistingDirectory);

  auto* eval_cmd = app.add_subcommand("eval", "compare predicted labels against ground truth");
  add_common(eval_cmd, args);
  eval_cmd->add_option("--pred", pred_path, "labeled field PLY (plane_id = prediction)")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt", gt_path, "reference field PLY (plane_id = ground truth)")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt-planes", gt_planes_path, "gt planes JSON for accuracy/completeness")
      ->check(CLI::ExistingFile);

  auto* pipe_cmd = app.add_subcommand("pipeline", "run the whole pipeline end to end");
  add_common(pipe_cmd, args);
  pipe_cmd->add_option("--masks", masks_dir, "import external masks")->check(CLI::ExistingDirectory);
  pipe_cmd->add_option("--normals", normals_dir, "import external supervision normals")
      ->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    namespace fs = std::filesystem;
    const PipelineConfig cfg = resolve_config(args);

    if (synth_cmd->parsed()) {
      fs::create_directories(args.out_dir);
      Scene scene = generate_scene(cfg.synth);
      save_field(scene, args.out_dir + "/field.ply");
      save_cameras(scene.views, args.out_dir + "/cameras.json");
      save_gt_planes(scene.gt_planes, args.out_dir + "/gt_planes.json");
      const Supervision sup = make_supervision(scene, cfg.synth);
      fs::create_directories(args.out_dir + "/masks");
      fs::create_directories(args.out_dir + "/normals");
      fs::create_directories(args.out_dir + "/images");
      for (int v = 0; v < static_cast<int>(scene.views.size()); ++v) {
        write_pgm16(args.out_dir + "/masks/view_" + std::to_string(v) + ".pgm", sup.masks[v].labels);
        write_pfm(args.out_dir + "/normals/view_" + std::to_string(v) + ".pfm", sup.normals[v]);
        write_pfm(args.out_dir + "/images/view_" + std::to_string(v) + ".pfm", sup.references[v]);
      }
      save_config(cfg, args.out_dir + "/config_resolved.json");
      std::cout << "synth: " << scene.primitives.size() << " primitives, " << scene.views.size()
                << " views, " << scene.gt_planes.size() << " planes -> " << args.out_dir << "\n";
    } else if (render_cmd->parsed()) {
      const Scene scene = load_scene(field_path, cameras_path, cfg.seed);
      fs::create_directories(args.out_dir);
      for (int v = 0; v < static_cast<int>(scene.views.size()); ++v) {
        const RenderedMaps maps = render(scene, scene.views[v], RenderChannels::all(), cfg.tau_alpha);
        dump_maps(maps, args.out_dir, v);
      }
      std::cout << "render: " << scene.views.size() << " views -> " << args.out_dir << "\n";
    } else if (opt_cmd->parsed()) {
      Scene scene = load_scene(field_path, cameras_path, cfg.seed);
      const Supervision sup = load_supervision(scene, masks_dir, normals_dir);
      const auto losses = optimize(scene, sup, cfg);
      fs::create_directories(args.out_dir);
      save_field(scene, args.out_dir + "/trained.ply");
      save_loss_csv(losses, args.out_dir + "/loss.csv");
      save_config(cfg, args.out_dir + "/config_resolved.json");
      std::cout << "optimize: " << cfg.iterations << " iterations -> " << args.out_dir
                << "/trained.ply\n";
    } else if (parse_cmd->parsed()) {
      const Scene scene = load_scene(field_path, cameras_path, cfg.seed);
      const Supervision sup = load_supervision(scene, masks_dir, "");
      const ParsedPlanes parsed = parse_planes(scene, sup, cfg);
      fs::create_directories(args.out_dir);
      save_labeled_field(scene, parsed.labels, args.out_dir + "/labels.ply");
      save_plane_set(parsed.planes, parsed.fitted, args.out_dir + "/labels.ply",
                     args.out_dir + "/planes.json");
      save_config(cfg, args.out_dir + "/config_resolved.json");
      std::cout << "parse-planes: " << parsed.planes.plane_count() << " planes -> " << args.out_dir
                << "/planes.json\n";
    } else if (eval_cmd->parsed()) {
      const Scene pred = load_field(pred_path, cfg.seed);
      const Scene gt = load_field(gt_path, cfg.seed);
      if (pred.primitives.size() != gt.primitives.size())
        throw std::runtime_error("eval: field sizes differ");
      std::vector<int> pred_labels(pred.primitives.size()), gt_labels(gt.primitives.size());
      for (std::size_t i = 0; i < pred.primitives.size(); ++i) {
        pred_labels[i] = pred.primitives[i].gt_plane_id;
        gt_labels[i] = gt.primitives[i].gt_plane_id;
      }
      MetricsReport report = evaluate_partitions(gt_labels, pred_labels, cfg.eval.include_unassigned);
      if (!gt_planes_path.empty()) {
        const auto planes = load_gt_planes(gt_planes_path);
        std::vector<Vec3> pred_pts;
        for (const auto& p : pred.primitives)
          if (p.gt_plane_id >= 0) pred_pts.push_back(p.center);
        const auto samples = sample_gt_surfaces(planes, cfg.eval.gt_sample_density);
        if (!pred_pts.empty() && !samples.empty()) {
          const auto [acc, comp] = accuracy_completeness(pred_pts, samples);
          report.accuracy = acc;
          report.completeness = comp;
        }
      }
      fs::create_directories(args.out_dir);
      save_metrics(report, args.out_dir + "/metrics.json");
      std::cout << "eval: ri=" << report.ri << " voi=" << report.voi << " sc=" << report.sc
                << " -> " << args.out_dir << "/metrics.json\n";
    } else if (pipe_cmd->parsed()) {
      const MetricsReport report = run_pipeline(cfg, args.out_dir, masks_dir, normals_dir);
      std::cout << "pipeline: ri=" << report.ri << " voi=" << report.voi << " sc=" << report.sc
                << " planes=" << report.n_planes_pred << " -> " << args.out_dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "{\"error\": \"" << e.what() << "\"}\n";
    return 1;
  }
  return 0;
}
