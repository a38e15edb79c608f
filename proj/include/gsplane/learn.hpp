#pragma once

#include "gsplane/geometry.hpp"
#include "gsplane/renderer.hpp"
#include "gsplane/segfusion.hpp"

#include <random>

namespace gsplane {

/// Ridge regression of one-hot segment targets from rendered descriptors,
/// solved in closed form per view on the design matrix [Z|1].
struct RegressionSolve {
  MatX weights;          // (k+1) x m
  double lambda = 0.0;
  double l_seg = 0.0;    // sum_i ||y_i - yhat_i||_1
  double condition = 0.0;  // of the ridge normal matrix
};

/// W = ([Z|1]^T [Z|1] + lambda I)^-1 [Z|1]^T Y. Solvable for any n >= 1
/// thanks to the ridge term; the condition number of the regularized normal
/// matrix is reported for diagnostics.
RegressionSolve solve_regression(const MatX& z, const MatX& y, double lambda);

/// L1 segmentation loss of a solved regression on (z, y).
double segmentation_loss(const MatX& z, const MatX& y, const RegressionSolve& solve);

/// One projected gradient step on the per-primitive descriptors. The solve's
/// W is held constant; the loss sees the renormalized pixel descriptors, and
/// the gradient passes through the renormalization and then the (linear)
/// blend weights. Descriptors stay unit length. Returns L_seg. When
/// out_grads is given it receives the raw (pre-projection) N x k gradient.
double descriptor_gradient_step(Scene& scene, const RenderedMaps& maps, const OneHotTargets& targets,
                                const RegressionSolve& solve, double lr, MatX* out_grads = nullptr);

/// Cosine loss between the rendered unit normal map and a supervision normal
/// map (pixels with near-zero supervision are skipped), with one projected
/// gradient step on the per-primitive normals. Returns L_n. When out_grads
/// is given it receives the raw N x 3 gradient.
double normal_loss_step(Scene& scene, const RenderedMaps& maps, const ImageF& supervision,
                        double lr, MatX* out_grads = nullptr);

struct MeanShiftConfig {
  double eta = 0.5;    // update rate in (0, 1]
  double gamma = 60.0; // vMF kernel bandwidth
  int steps = 10;      // update steps per invocation
  int period = 100;    // optimizer iterations between invocations
  int warmup = 300;    // first invocation
  int sample_size = 512;  // M for the sampled variant
};

constexpr int kMeanShiftExactGuard = 20000;

/// Recurrent mean-shift on the unit sphere: per step
///   Z <- eta * D^-1 K Z + (1 - eta) * Z,  K = exp(gamma * Z Z^T),
/// rows renormalized. Refuses N above the N x N kernel guard.
void mean_shift_exact(MatX& z, const MeanShiftConfig& cfg);

/// Sampled approximation: repeatedly draws M unvisited rows, computes the
/// exact update on the M x M kernel of the sweep-start snapshot, and
/// propagates each sample's update vector to its K nearest (spatial)
/// neighbors until every row is visited; then renormalizes. One sweep per
/// step. With M = N a sweep reproduces one exact step.
void mean_shift_sampled(MatX& z, const KnnIndex& knn, const MeanShiftConfig& cfg,
                        std::mt19937_64& rng);

}  // namespace gsplane
