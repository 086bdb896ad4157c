#pragma once

#include "distclass/core.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <utility>

namespace distclass {

/// Three Gaussian classes that differ only in the correlation between
/// neighbouring coordinates. Item i belongs to class i mod 3; its mean is
/// drawn from N(mean_center, mean_spread I) and its covariance is
///   sigma_c I + u (I_1 + I_-1),  u ~ Uniform(u_range_c),
/// where I_1 / I_-1 carry ones on the super- / sub-diagonal.
struct ToySpec3Class {
  std::size_t d = 50;
  std::size_t n_dists = 250;
  std::size_t n_samples = 30;
  /// Empty means the all-ones vector.
  Vector mean_center;
  /// Variance of each mean coordinate.
  double mean_spread = 5.0;
  std::array<double, 3> sigma{100.0, 100.0, 100.0};
  std::array<std::pair<double, double>, 3> u_range{{{0.0, 5.0}, {20.0, 25.0}, {40.0, 45.0}}};
  std::uint64_t seed = 1;

  void validate() const;
};

DistributionDataset gen_three_class(const ToySpec3Class& spec);

/// Two classes of Gaussians N(m_i, Sigma) with m_i ~ N(m_neg, Sigma0) for
/// class "neg" (label 0) and N(m_pos, Sigma0) for class "pos" (label 1),
/// alternating.
struct MeanSepSpec {
  std::size_t d = 2;
  /// Class mean-of-means; empty picks the defaults of resolved().
  Vector m_neg;
  Vector m_pos;
  /// Empty matrices default to 0.1 I (Sigma0) and I (Sigma).
  Matrix sigma0;
  Matrix sigma;
  std::size_t n_dists = 100;
  std::size_t n_samples = 30;
  std::uint64_t seed = 1;

  /// Copy with every defaulted field filled in. m_neg = 0, m_pos = 3 e_1.
  MeanSepSpec resolved() const;
  void validate() const;
};

/// Point-set payloads of n_samples draws per item.
DistributionDataset gen_mean_separated(const MeanSepSpec& spec);
/// The same items (same seed, same draws) with their true N(m_i, Sigma) as
/// GaussianParams payloads.
DistributionDataset gen_mean_separated_oracle(const MeanSepSpec& spec);

/// n draws from N(mean, L L^T) as rows.
Matrix sample_gaussian(std::mt19937_64& rng, const Vector& mean, const Matrix& cholesky_lower,
                       std::size_t n);

struct PointCloudOptions {
  /// Points kept per cloud, uniformly without replacement; 0 keeps all.
  std::size_t subsample = 0;
  std::uint64_t seed = 1;
  /// Subtract each cloud's centroid.
  bool center = false;
};

/// Reads <dir>/<class>/<file> where file is .off (vertex section only) or
/// .csv (x,y,z per row, optional header). Classes are subdirectories in
/// name order; files are read in name order. Each file gets its own RNG
/// stream derived from (seed, class name, file name).
DistributionDataset load_point_cloud_dir(const std::filesystem::path& dir,
                                         const PointCloudOptions& options = {});

/// Vertices of an OFF file, one per row.
Matrix read_off_vertices(const std::filesystem::path& file);

struct ShapeCorpusSpec {
  std::size_t per_class = 60;
  std::size_t points = 150;
  /// Relative scale jitter: each cloud's size is multiplied by U(1-j, 1+j).
  double scale_jitter = 0.05;
  /// Standard deviation of the isotropic noise added to every point.
  double noise = 0.01;
  std::uint64_t seed = 7;
};

/// Writes a sphere / box / torus corpus under dir/<shape>/. Spheres and
/// boxes have equal second moments, so their covariances coincide. Clouds
/// are randomly translated; boxes alternate between .off and .csv files.
void write_shape_corpus(const std::filesystem::path& dir, const ShapeCorpusSpec& spec = {});

}  // namespace distclass
