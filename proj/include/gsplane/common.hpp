#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace gsplane {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using VecX = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

inline double deg2rad(double deg) { return deg * M_PI / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / M_PI; }

// splitmix64; used to derive independent RNG substreams from a master seed
// so that per-view / per-stage streams never alias.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt_a, std::uint64_t salt_b) {
  return derive_seed(derive_seed(seed, salt_a), salt_b);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

/// Uniform point on the unit sphere S^{dim-1}.
inline VecX random_unit_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  VecX v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

// FNV-1a 64-bit, used for artifact manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Process-wide worker count for parallel loops. 0 means hardware concurrency.
void set_thread_count(int n);
int thread_count();

/// Runs fn(begin, end) over [0, total) split into fixed-size chunks.
/// Chunk boundaries depend only on `total` and `grain`, never on the worker
/// count, so any per-chunk outputs can be reduced in chunk order for
/// thread-count-independent results.
void parallel_chunks(std::size_t total, std::size_t grain,
                     const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace gsplane
