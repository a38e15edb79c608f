#pragma once

#include "gsplane/learn.hpp"
#include "gsplane/synth.hpp"

#include <string>

namespace gsplane {

struct SegfusionConfig {
  double theta_n = deg2rad(20.0);  // radians
  double theta_d = 0.10;           // meters
  double v_max = kDefaultNormalVarMax;
};

struct LearnConfig {
  double lambda_reg = 1e-4;
  double lr = 0.05;
  double lr_decay = 1.0;  // multiplicative decay of lr over the whole run
  int descriptor_dim = kDefaultDescriptorDim;
  bool use_masks = true;    // ablation: segmentation supervision
  bool use_normals = true;  // ablation: normal supervision
  MeanShiftConfig mean_shift;
  bool mean_shift_enabled = true;
};

struct GeometryConfig {
  int knn = 30;
  int align_period = 500;
  int smooth_period = 100;
  bool alignment_enabled = true;
  bool smoothing_enabled = true;
};

struct GmtConfig {
  double eps_b = 1.0;
  double eps_z = 0.05;
  long p_min = 50;
  double theta_assign = 0.2;
  double r_min = 1e-9;
};

struct EvalConfig {
  double gt_sample_density = 500.0;  // points per square meter
  bool include_unassigned = true;
};

struct PipelineConfig {
  long iterations = 2000;
  std::uint64_t seed = 1234;
  int threads = 0;  // 0 = hardware concurrency
  double tau_alpha = kDefaultTauAlpha;
  SynthConfig synth;
  SegfusionConfig segfusion;
  LearnConfig learn;
  GeometryConfig geometry;
  GmtConfig gmt;
  EvalConfig eval;
};

/// Strict parse: unknown keys anywhere in the document are rejected.
PipelineConfig load_config(const std::string& path);
PipelineConfig parse_config_json(const std::string& text, const std::string& origin = "<config>");

/// Fully resolved config, round-trippable through parse_config_json.
std::string config_to_json(const PipelineConfig& cfg);
void save_config(const PipelineConfig& cfg, const std::string& path);

}  // namespace gsplane
