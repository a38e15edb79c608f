#include "gsplane/learn.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gsplane {

namespace {

MatX with_bias(const MatX& z) {
  MatX a(z.rows(), z.cols() + 1);
  a.leftCols(z.cols()) = z;
  a.col(z.cols()).setOnes();
  return a;
}

inline double sgn(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

RegressionSolve solve_regression(const MatX& z, const MatX& y, double lambda) {
  if (z.rows() < 1 || y.rows() != z.rows() || y.cols() < 1)
    throw std::invalid_argument("solve_regression: need n >= 1 aligned rows and m >= 1 targets");
  const MatX a = with_bias(z);
  const MatX gram = a.transpose() * a + lambda * MatX::Identity(a.cols(), a.cols());
  RegressionSolve solve;
  solve.lambda = lambda;
  solve.weights = gram.ldlt().solve(a.transpose() * y);
  Eigen::SelfAdjointEigenSolver<MatX> eig(gram);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  solve.condition = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
  solve.l_seg = segmentation_loss(z, y, solve);
  return solve;
}

double segmentation_loss(const MatX& z, const MatX& y, const RegressionSolve& solve) {
  const MatX residual = with_bias(z) * solve.weights - y;
  return residual.cwiseAbs().sum();
}

double descriptor_gradient_step(Scene& scene, const RenderedMaps& maps, const OneHotTargets& targets,
                                const RegressionSolve& solve, double lr, MatX* out_grads) {
  if (maps.contributions.empty())
    throw std::invalid_argument("descriptor_gradient_step: render without retained weights");
  const int k = maps.desc_dim;
  const long m = solve.weights.cols();
  const std::size_t n_prims = scene.primitives.size();

  MatX grads = MatX::Zero(n_prims, k);
  std::vector<std::uint8_t> touched(n_prims, 0);
  double l_seg = 0.0;

  VecX zhat(k), dl_dzhat(k), dl_draw(k);
  Eigen::VectorXd pred(m), sign_r(m);
  for (std::size_t row = 0; row < targets.pixel_index.size(); ++row) {
    const int px = targets.pixel_index[row];
    const int y = px / maps.width, x = px % maps.width;
    const double* zp = maps.descriptor.pixel(y, x);
    for (int d = 0; d < k; ++d) zhat[d] = zp[d];

    pred = solve.weights.topRows(k).transpose() * zhat + solve.weights.row(k).transpose();
    double row_loss = 0.0;
    for (long j = 0; j < m; ++j) {
      const double r = pred[j] - targets.y(row, j);
      row_loss += std::abs(r);
      sign_r[j] = sgn(r);
    }
    l_seg += row_loss;

    dl_dzhat = solve.weights.topRows(k) * sign_r;
    if (maps.valid_at(y, x)) {
      // back through the unit renormalization of the blended pixel descriptor
      const double* raw = maps.descriptor_blend.pixel(y, x);
      double raw_norm_sq = 0.0;
      for (int d = 0; d < k; ++d) raw_norm_sq += raw[d] * raw[d];
      const double raw_norm = std::sqrt(raw_norm_sq);
      if (raw_norm < 1e-12) continue;
      const double proj = zhat.dot(dl_dzhat);
      for (int d = 0; d < k; ++d) dl_draw[d] = (dl_dzhat[d] - proj * zhat[d]) / raw_norm;
    } else {
      // pixel was never renormalized; the blend feeds the loss directly
      dl_draw = dl_dzhat;
    }

    for (const PixelContribution& c : maps.contributions[px]) {
      for (int d = 0; d < k; ++d) grads(c.index, d) += c.weight * dl_draw[d];
      touched[c.index] = 1;
    }
  }

  for (std::size_t i = 0; i < n_prims; ++i) {
    if (!touched[i] || grads.row(i).isZero(0.0)) continue;
    VecX updated = scene.primitives[i].descriptor - lr * grads.row(i).transpose();
    const double nrm = updated.norm();
    if (nrm < 1e-12) continue;
    scene.primitives[i].descriptor = updated / nrm;
  }
  if (out_grads) *out_grads = std::move(grads);
  return l_seg;
}

double normal_loss_step(Scene& scene, const RenderedMaps& maps, const ImageF& supervision,
                        double lr, MatX* out_grads) {
  if (maps.contributions.empty())
    throw std::invalid_argument("normal_loss_step: render without retained weights");
  const std::size_t n_prims = scene.primitives.size();
  std::vector<Vec3> grads(n_prims, Vec3::Zero());
  std::vector<std::uint8_t> touched(n_prims, 0);
  double l_n = 0.0;

  for (int y = 0; y < maps.height; ++y) {
    for (int x = 0; x < maps.width; ++x) {
      if (!maps.valid_at(y, x)) continue;
      const double* sp = supervision.pixel(y, x);
      const Vec3 sup(sp[0], sp[1], sp[2]);
      if (sup.squaredNorm() < 1e-12) continue;  // no supervision at this pixel
      const double* np = maps.normal.pixel(y, x);
      const Vec3 nhat(np[0], np[1], np[2]);
      l_n += 1.0 - nhat.dot(sup);

      const double* raw = maps.normal_blend.pixel(y, x);
      const double raw_norm = Vec3(raw[0], raw[1], raw[2]).norm();
      if (raw_norm < 1e-12) continue;
      const Vec3 dl_draw = (-sup + nhat.dot(sup) * nhat) / raw_norm;

      const int px = y * maps.width + x;
      for (const PixelContribution& c : maps.contributions[px]) {
        grads[c.index] += c.weight * dl_draw;
        touched[c.index] = 1;
      }
    }
  }

  for (std::size_t i = 0; i < n_prims; ++i) {
    if (!touched[i] || grads[i].isZero(0.0)) continue;
    const Vec3 updated = scene.primitives[i].normal - lr * grads[i];
    const double nrm = updated.norm();
    if (nrm < 1e-12) continue;
    scene.primitives[i].normal = updated / nrm;
  }
  if (out_grads) {
    out_grads->resize(n_prims, 3);
    for (std::size_t i = 0; i < n_prims; ++i) out_grads->row(i) = grads[i].transpose();
  }
  return l_n;
}

namespace {

using RowMatX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One exact mean-shift step on the snapshot `zin`, writing
/// eta * D^-1 K Z + (1 - eta) * Z into `zout` without renormalizing.
/// Row-blocked so the N x N kernel is never materialized; K is symmetric so
/// row sums equal the column sums of the definition.
void exact_step(const RowMatX& zin, double gamma, double eta, RowMatX& zout) {
  const long n = zin.rows();
  const long k = zin.cols();
  parallel_chunks(static_cast<std::size_t>(n), 128, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const double* zi = zin.data() + i * k;
      double dsum = 0.0;
      VecX acc = VecX::Zero(k);
      for (long j = 0; j < n; ++j) {
        const double* zj = zin.data() + j * k;
        double dot = 0.0;
        for (long d = 0; d < k; ++d) dot += zi[d] * zj[d];
        const double kij = std::exp(gamma * dot);
        dsum += kij;
        for (long d = 0; d < k; ++d) acc[d] += kij * zj[d];
      }
      for (long d = 0; d < k; ++d)
        zout(i, d) = eta * acc[d] / dsum + (1.0 - eta) * zin(i, d);
    }
  });
}

template <typename Mat>
void renormalize_rows(Mat& z) {
  for (long i = 0; i < z.rows(); ++i) {
    const double nrm = z.row(i).norm();
    if (nrm > 1e-12) z.row(i) /= nrm;
  }
}

}  // namespace

void mean_shift_exact(MatX& z, const MeanShiftConfig& cfg) {
  if (z.rows() > kMeanShiftExactGuard)
    throw std::invalid_argument("mean_shift_exact: N = " + std::to_string(z.rows()) +
                                " exceeds the N x N kernel guard; use mean_shift_sampled");
  if (z.rows() == 0) return;
  RowMatX cur = z;
  RowMatX next(z.rows(), z.cols());
  for (int s = 0; s < cfg.steps; ++s) {
    exact_step(cur, cfg.gamma, cfg.eta, next);
    cur.swap(next);
    renormalize_rows(cur);
  }
  z = cur;
}

void mean_shift_sampled(MatX& z, const KnnIndex& knn, const MeanShiftConfig& cfg,
                        std::mt19937_64& rng) {
  const long n = z.rows();
  const long k = z.cols();
  if (n == 0) return;
  if (static_cast<long>(knn.neighbors.size()) != n)
    throw std::invalid_argument("mean_shift_sampled: KNN index does not match row count");
  const long m_cfg = std::max<long>(2, cfg.sample_size);

  std::vector<int> pool(n);
  std::vector<std::uint8_t> visited(n);
  std::vector<int> samples;
  RowMatX cur = z;
  RowMatX result(n, k);

  for (int s = 0; s < cfg.steps; ++s) {
    const RowMatX snapshot = cur;
    std::fill(visited.begin(), visited.end(), 0);
    std::iota(pool.begin(), pool.end(), 0);
    long pool_size = n;

    while (pool_size > 0) {
      const long m = std::min(m_cfg, pool_size);
      samples.clear();
      // partial Fisher-Yates draw without replacement
      for (long t = 0; t < m; ++t) {
        std::uniform_int_distribution<long> pick(t, pool_size - 1);
        std::swap(pool[t], pool[pick(rng)]);
        samples.push_back(pool[t]);
      }
      std::sort(samples.begin(), samples.end());

      // exact update vectors on the M x M kernel of the sweep-start snapshot
      for (long a = 0; a < m; ++a) {
        const int i = samples[a];
        const double* zi = snapshot.data() + static_cast<long>(i) * k;
        double dsum = 0.0;
        VecX acc = VecX::Zero(k);
        for (long b = 0; b < m; ++b) {
          const int j = samples[b];
          const double* zj = snapshot.data() + static_cast<long>(j) * k;
          double dot = 0.0;
          for (long d = 0; d < k; ++d) dot += zi[d] * zj[d];
          const double kij = std::exp(cfg.gamma * dot);
          dsum += kij;
          for (long d = 0; d < k; ++d) acc[d] += kij * zj[d];
        }
        for (long d = 0; d < k; ++d)
          result(i, d) = cfg.eta * acc[d] / dsum + (1.0 - cfg.eta) * snapshot(i, d);
        visited[i] = 1;
      }
      // propagate each sample's update vector to its unvisited spatial neighbors
      for (long a = 0; a < m; ++a) {
        const int i = samples[a];
        for (int nb : knn.neighbors[i]) {
          if (visited[nb]) continue;
          result.row(nb) = snapshot.row(nb) + (result.row(i) - snapshot.row(i));
          visited[nb] = 1;
        }
      }
      // shrink the pool to the still-unvisited rows, keeping order
      long write = 0;
      for (long r = 0; r < pool_size; ++r)
        if (!visited[pool[r]]) pool[write++] = pool[r];
      pool_size = write;
    }

    cur = result;
    renormalize_rows(cur);
  }
  z = cur;
}

}  // namespace gsplane
