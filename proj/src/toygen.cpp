#include "distclass/toygen.hpp"

#include "distclass/error.hpp"
#include "distclass/linalg.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

namespace distclass {

namespace {

constexpr int kMaxResamples = 100;
constexpr double kMinEigenvalue = 1e-9;

Matrix cholesky_or_throw(const Matrix& cov, const char* what) {
  if (cov.rows() != cov.cols()) {
    throw InvalidArgument(std::string(what) + " must be square");
  }
  const SymEig eig = sym_eig(cov);
  if (cov.rows() > 0 && eig.eigenvalues[cov.rows() - 1] <= kMinEigenvalue) {
    throw InvalidArgument(std::string(what) + " is not positive definite");
  }
  Eigen::LLT<Matrix> llt(0.5 * (cov + cov.transpose()));
  if (llt.info() != Eigen::Success) {
    throw InvalidArgument(std::string(what) + " is not positive definite");
  }
  return llt.matrixL();
}

// sigma I + u (I_1 + I_-1)
Matrix banded_covariance(std::size_t d, double sigma, double u) {
  const auto n = static_cast<Eigen::Index>(d);
  Matrix cov = sigma * Matrix::Identity(n, n);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    cov(k, k + 1) = u;
    cov(k + 1, k) = u;
  }
  return cov;
}

// Smallest eigenvalue of the tridiagonal Toeplitz matrix above, in closed form.
double banded_min_eigenvalue(std::size_t d, double sigma, double u) {
  return sigma - 2.0 * std::abs(u) * std::cos(std::numbers::pi / static_cast<double>(d + 1));
}

struct MeanSepDraw {
  DistributionDataset empirical;
  DistributionDataset oracle;
};

MeanSepDraw draw_mean_separated(const MeanSepSpec& input) {
  const MeanSepSpec spec = input.resolved();
  spec.validate();
  const Matrix l0 = cholesky_or_throw(spec.sigma0, "Sigma0");
  const Matrix l = cholesky_or_throw(spec.sigma, "Sigma");
  std::mt19937_64 rng(spec.seed);
  MeanSepDraw out;
  for (auto* ds : {&out.empirical, &out.oracle}) {
    ds->codebook = {"neg", "pos"};
    ds->dimension = spec.d;
  }
  for (std::size_t i = 0; i < spec.n_dists; ++i) {
    const int label = static_cast<int>(i % 2);
    const Vector& center = label == 0 ? spec.m_neg : spec.m_pos;
    const Vector mean = sample_gaussian(rng, center, l0, 1).row(0).transpose();
    const Matrix samples = sample_gaussian(rng, mean, l, spec.n_samples);
    out.empirical.items.push_back({empirical_from_samples(samples), label});
    out.oracle.items.push_back({GaussianParams(mean, spec.sigma), label});
  }
  return out;
}

}  // namespace

Matrix sample_gaussian(std::mt19937_64& rng, const Vector& mean, const Matrix& cholesky_lower,
                       std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = mean.size();
  Matrix z(d, static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index k = 0; k < d; ++k) z(k, j) = normal(rng);
  }
  Matrix x = (cholesky_lower.triangularView<Eigen::Lower>() * z).transpose();
  x.rowwise() += mean.transpose();
  return x;
}

void ToySpec3Class::validate() const {
  if (d < 2) throw InvalidArgument("toy spec: d must be >= 2");
  if (n_samples < 2) throw InvalidArgument("toy spec: N must be >= 2");
  if (n_dists == 0) throw InvalidArgument("toy spec: n_dists must be >= 1");
  if (mean_center.size() != 0 && static_cast<std::size_t>(mean_center.size()) != d) {
    throw InvalidArgument("toy spec: mean_center must have length d");
  }
  if (!(mean_spread >= 0.0)) throw InvalidArgument("toy spec: mean_spread must be >= 0");
  for (std::size_t c = 0; c < 3; ++c) {
    if (!(sigma[c] > 0.0)) throw InvalidArgument("toy spec: sigma values must be positive");
    if (!(u_range[c].first <= u_range[c].second)) {
      throw InvalidArgument("toy spec: u range lower bound exceeds upper bound");
    }
  }
}

DistributionDataset gen_three_class(const ToySpec3Class& spec) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.d);
  const Vector center = spec.mean_center.size() == 0 ? Vector::Ones(d) : spec.mean_center;
  const Matrix spread_l = std::sqrt(spec.mean_spread) * Matrix::Identity(d, d);
  std::mt19937_64 rng(spec.seed);
  DistributionDataset ds;
  ds.codebook = {"class1", "class2", "class3"};
  ds.dimension = spec.d;
  for (std::size_t i = 0; i < spec.n_dists; ++i) {
    const std::size_t c = i % 3;
    const Vector mean = sample_gaussian(rng, center, spread_l, 1).row(0).transpose();
    std::uniform_real_distribution<double> draw_u(spec.u_range[c].first, spec.u_range[c].second);
    double u = draw_u(rng);
    int tries = 1;
    while (banded_min_eigenvalue(spec.d, spec.sigma[c], u) <= kMinEigenvalue) {
      if (tries == kMaxResamples) {
        throw InvalidArgument("toy spec: covariance of class " + std::to_string(c + 1) +
                              " is not positive definite after " +
                              std::to_string(kMaxResamples) + " draws of u");
      }
      u = draw_u(rng);
      ++tries;
    }
    Eigen::LLT<Matrix> llt(banded_covariance(spec.d, spec.sigma[c], u));
    if (llt.info() != Eigen::Success) {
      throw NumericalError("toy spec: Cholesky factorization failed");
    }
    const Matrix samples = sample_gaussian(rng, mean, llt.matrixL(), spec.n_samples);
    ds.items.push_back({empirical_from_samples(samples), static_cast<int>(c)});
  }
  return ds;
}

MeanSepSpec MeanSepSpec::resolved() const {
  MeanSepSpec out = *this;
  const auto n = static_cast<Eigen::Index>(d);
  if (out.m_neg.size() == 0) out.m_neg = Vector::Zero(n);
  if (out.m_pos.size() == 0) {
    out.m_pos = Vector::Zero(n);
    if (n > 0) out.m_pos[0] = 3.0;
  }
  if (out.sigma0.size() == 0) out.sigma0 = 0.1 * Matrix::Identity(n, n);
  if (out.sigma.size() == 0) out.sigma = Matrix::Identity(n, n);
  return out;
}

void MeanSepSpec::validate() const {
  if (d < 1) throw InvalidArgument("mean-separated spec: d must be >= 1");
  if (n_samples < 2) throw InvalidArgument("mean-separated spec: N must be >= 2");
  if (n_dists < 2) throw InvalidArgument("mean-separated spec: need at least 2 items");
  const auto n = static_cast<Eigen::Index>(d);
  if (m_neg.size() != n || m_pos.size() != n) {
    throw InvalidArgument("mean-separated spec: class means must have length d");
  }
  if (sigma0.rows() != n || sigma0.cols() != n || sigma.rows() != n || sigma.cols() != n) {
    throw InvalidArgument("mean-separated spec: covariances must be d x d");
  }
}

DistributionDataset gen_mean_separated(const MeanSepSpec& spec) {
  return draw_mean_separated(spec).empirical;
}

DistributionDataset gen_mean_separated_oracle(const MeanSepSpec& spec) {
  return draw_mean_separated(spec).oracle;
}

}  // namespace distclass
