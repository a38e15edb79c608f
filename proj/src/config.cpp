#include "gsplane/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace gsplane {

using nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& j, std::string name, std::initializer_list<const char*> known)
      : j_(j), name_(std::move(name)) {
    if (!j.is_object()) throw std::runtime_error(name_ + ": expected a JSON object");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!allowed.count(it.key()))
        throw std::runtime_error(name_ + ": unknown key '" + it.key() + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (j_.contains(key)) {
      try {
        out = j_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw std::runtime_error(name_ + "." + key + ": " + e.what());
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& sub(const char* key) const { return j_.at(key); }

 private:
  const json& j_;
  std::string name_;
};

void parse_synth(const json& j, SynthConfig& out, const std::string& origin) {
  Section s(j, origin + ".synth",
            {"room", "tilted_count", "tilted_half_size", "gaussians_per_m2", "position_noise",
             "normal_noise", "supervision_normal_noise", "opacity_min", "opacity_max",
             "tangent_scale", "normal_scale", "view_count", "image_size", "focal",
             "orbit_radius_factor", "min_views_per_plane", "min_pixels", "lambda_split",
             "jitter_prob", "jitter_passes", "intersection_invalid_radius"});
  if (s.has("room")) {
    const auto& r = s.sub("room");
    out.room = Vec3(r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>());
  }
  s.get("tilted_count", out.tilted_count);
  s.get("tilted_half_size", out.tilted_half_size);
  s.get("gaussians_per_m2", out.gaussians_per_m2);
  s.get("position_noise", out.position_noise);
  s.get("normal_noise", out.normal_noise);
  s.get("supervision_normal_noise", out.supervision_normal_noise);
  s.get("opacity_min", out.opacity_min);
  s.get("opacity_max", out.opacity_max);
  s.get("tangent_scale", out.tangent_scale);
  s.get("normal_scale", out.normal_scale);
  s.get("view_count", out.view_count);
  s.get("image_size", out.image_size);
  s.get("focal", out.focal);
  s.get("orbit_radius_factor", out.orbit_radius_factor);
  s.get("min_views_per_plane", out.min_views_per_plane);
  s.get("min_pixels", out.min_pixels);
  s.get("lambda_split", out.lambda_split);
  s.get("jitter_prob", out.jitter_prob);
  s.get("jitter_passes", out.jitter_passes);
  s.get("intersection_invalid_radius", out.intersection_invalid_radius);
}

void parse_mean_shift(const json& j, LearnConfig& out, const std::string& origin) {
  Section s(j, origin + ".learn.mean_shift",
            {"enabled", "eta", "gamma", "steps", "period", "warmup", "sample_size"});
  s.get("enabled", out.mean_shift_enabled);
  s.get("eta", out.mean_shift.eta);
  s.get("gamma", out.mean_shift.gamma);
  s.get("steps", out.mean_shift.steps);
  s.get("period", out.mean_shift.period);
  s.get("warmup", out.mean_shift.warmup);
  s.get("sample_size", out.mean_shift.sample_size);
}

}  // namespace

PipelineConfig parse_config_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  PipelineConfig cfg;
  Section root(j, origin,
               {"iterations", "seed", "threads", "tau_alpha", "synth", "segfusion", "learn",
                "geometry", "gmt", "eval"});
  root.get("iterations", cfg.iterations);
  root.get("seed", cfg.seed);
  root.get("threads", cfg.threads);
  root.get("tau_alpha", cfg.tau_alpha);
  if (root.has("synth")) parse_synth(root.sub("synth"), cfg.synth, origin);
  if (root.has("segfusion")) {
    Section s(root.sub("segfusion"), origin + ".segfusion", {"theta_n_deg", "theta_d", "v_max_deg"});
    double theta_n_deg = rad2deg(cfg.segfusion.theta_n);
    double v_max_deg = rad2deg(cfg.segfusion.v_max);
    s.get("theta_n_deg", theta_n_deg);
    s.get("theta_d", cfg.segfusion.theta_d);
    s.get("v_max_deg", v_max_deg);
    cfg.segfusion.theta_n = deg2rad(theta_n_deg);
    cfg.segfusion.v_max = deg2rad(v_max_deg);
  }
  if (root.has("learn")) {
    Section s(root.sub("learn"), origin + ".learn",
              {"lambda_reg", "lr", "descriptor_dim", "use_masks", "use_normals", "mean_shift"});
    s.get("lambda_reg", cfg.learn.lambda_reg);
    s.get("lr", cfg.learn.lr);
    s.get("descriptor_dim", cfg.learn.descriptor_dim);
    s.get("use_masks", cfg.learn.use_masks);
    s.get("use_normals", cfg.learn.use_normals);
    if (s.has("mean_shift")) parse_mean_shift(s.sub("mean_shift"), cfg.learn, origin);
  }
  if (root.has("geometry")) {
    Section s(root.sub("geometry"), origin + ".geometry",
              {"knn", "align_period", "smooth_period", "alignment_enabled", "smoothing_enabled"});
    s.get("knn", cfg.geometry.knn);
    s.get("align_period", cfg.geometry.align_period);
    s.get("smooth_period", cfg.geometry.smooth_period);
    s.get("alignment_enabled", cfg.geometry.alignment_enabled);
    s.get("smoothing_enabled", cfg.geometry.smoothing_enabled);
  }
  if (root.has("gmt")) {
    Section s(root.sub("gmt"), origin + ".gmt",
              {"eps_b", "eps_z", "p_min", "theta_assign", "r_min"});
    s.get("eps_b", cfg.gmt.eps_b);
    s.get("eps_z", cfg.gmt.eps_z);
    s.get("p_min", cfg.gmt.p_min);
    s.get("theta_assign", cfg.gmt.theta_assign);
    s.get("r_min", cfg.gmt.r_min);
  }
  if (root.has("eval")) {
    Section s(root.sub("eval"), origin + ".eval", {"gt_sample_density", "include_unassigned"});
    s.get("gt_sample_density", cfg.eval.gt_sample_density);
    s.get("include_unassigned", cfg.eval.include_unassigned);
  }
  cfg.synth.seed = cfg.seed;
  cfg.synth.descriptor_dim = cfg.learn.descriptor_dim;
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_json(ss.str(), path);
}

std::string config_to_json(const PipelineConfig& cfg) {
  json j;
  j["iterations"] = cfg.iterations;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["tau_alpha"] = cfg.tau_alpha;
  j["synth"] = {{"room", {cfg.synth.room.x(), cfg.synth.room.y(), cfg.synth.room.z()}},
                {"tilted_count", cfg.synth.tilted_count},
                {"tilted_half_size", cfg.synth.tilted_half_size},
                {"gaussians_per_m2", cfg.synth.gaussians_per_m2},
                {"position_noise", cfg.synth.position_noise},
                {"normal_noise", cfg.synth.normal_noise},
                {"supervision_normal_noise", cfg.synth.supervision_normal_noise},
                {"opacity_min", cfg.synth.opacity_min},
                {"opacity_max", cfg.synth.opacity_max},
                {"tangent_scale", cfg.synth.tangent_scale},
                {"normal_scale", cfg.synth.normal_scale},
                {"view_count", cfg.synth.view_count},
                {"image_size", cfg.synth.image_size},
                {"focal", cfg.synth.focal},
                {"orbit_radius_factor", cfg.synth.orbit_radius_factor},
                {"min_views_per_plane", cfg.synth.min_views_per_plane},
                {"min_pixels", cfg.synth.min_pixels},
                {"lambda_split", cfg.synth.lambda_split},
                {"jitter_prob", cfg.synth.jitter_prob},
                {"jitter_passes", cfg.synth.jitter_passes},
                {"intersection_invalid_radius", cfg.synth.intersection_invalid_radius}};
  j["segfusion"] = {{"theta_n_deg", rad2deg(cfg.segfusion.theta_n)},
                    {"theta_d", cfg.segfusion.theta_d},
                    {"v_max_deg", rad2deg(cfg.segfusion.v_max)}};
  j["learn"] = {{"lambda_reg", cfg.learn.lambda_reg},
                {"lr", cfg.learn.lr},
                {"descriptor_dim", cfg.learn.descriptor_dim},
                {"use_masks", cfg.learn.use_masks},
                {"use_normals", cfg.learn.use_normals},
                {"mean_shift",
                 {{"enabled", cfg.learn.mean_shift_enabled},
                  {"eta", cfg.learn.mean_shift.eta},
                  {"gamma", cfg.learn.mean_shift.gamma},
                  {"steps", cfg.learn.mean_shift.steps},
                  {"period", cfg.learn.mean_shift.period},
                  {"warmup", cfg.learn.mean_shift.warmup},
                  {"sample_size", cfg.learn.mean_shift.sample_size}}}};
  j["geometry"] = {{"knn", cfg.geometry.knn},
                   {"align_period", cfg.geometry.align_period},
                   {"smooth_period", cfg.geometry.smooth_period},
                   {"alignment_enabled", cfg.geometry.alignment_enabled},
                   {"smoothing_enabled", cfg.geometry.smoothing_enabled}};
  j["gmt"] = {{"eps_b", cfg.gmt.eps_b},
              {"eps_z", cfg.gmt.eps_z},
              {"p_min", cfg.gmt.p_min},
              {"theta_assign", cfg.gmt.theta_assign},
              {"r_min", cfg.gmt.r_min}};
  j["eval"] = {{"gt_sample_density", cfg.eval.gt_sample_density},
               {"include_unassigned", cfg.eval.include_unassigned}};
  return j.dump(2) + "\n";
}

void save_config(const PipelineConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << config_to_json(cfg);
}

}  // namespace gsplane
