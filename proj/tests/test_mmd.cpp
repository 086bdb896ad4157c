#include "distclass/error.hpp"
#include "distclass/mmd.hpp"
#include "distclass/toygen.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace distclass;

TEST_CASE("gram entries") {
  Matrix a(2, 2), b(1, 2);
  a << 0, 0, 1, 1;
  b << 0, 0;
  const double s = 0.7;
  const Matrix k = gram(PointSet::uniform(a), PointSet::uniform(a), s);
  CHECK(k(0, 0) == 1.0);
  // |x - x'| = sqrt(2) = s sqrt(2) when s = 1.
  const Matrix k1 = gram(PointSet::uniform(a), PointSet::uniform(b), 1.0);
  CHECK(k1(1, 0) == doctest::Approx(std::exp(-1.0)));

  std::mt19937_64 rng(1);
  const Matrix x = sample_gaussian(rng, Vector::Zero(3), Matrix::Identity(3, 3), 5);
  const Matrix y = sample_gaussian(rng, Vector::Zero(3), Matrix::Identity(3, 3), 4);
  const Matrix kxy = gram(PointSet::uniform(x), PointSet::uniform(y), s);
  const Matrix kyx = gram(PointSet::uniform(y), PointSet::uniform(x), s);
  CHECK((kxy - kyx.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("biased mmd2") {
  std::mt19937_64 rng(2);
  const PointSet a =
      PointSet::uniform(sample_gaussian(rng, Vector::Zero(2), Matrix::Identity(2, 2), 20));
  CHECK(mmd2(a, a, 1.3) <= 1e-12);

  Matrix p(1, 2), q(1, 2);
  p << 0, 0;
  q << 1.5, 0;
  const double sigma = 0.8;
  const double expected = 2.0 - 2.0 * std::exp(-1.5 * 1.5 / (2.0 * sigma * sigma));
  CHECK(mmd2(PointSet::uniform(p), PointSet::uniform(q), sigma) ==
        doctest::Approx(expected).epsilon(1e-12));

  // gram-based and expansion-based means agree.
  const PointSet b =
      PointSet::uniform(sample_gaussian(rng, Vector::Ones(2), Matrix::Identity(2, 2), 15));
  const double direct = a.weights().dot(gram(a, b, 0.9) * b.weights());
  CHECK(weighted_gram_mean(a, b, 0.9) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("unbiased mmd2 is centred under the null") {
  std::mt19937_64 rng(3);
  const int trials = 100;
  std::vector<double> v;
  for (int t = 0; t < trials; ++t) {
    const PointSet a =
        PointSet::uniform(sample_gaussian(rng, Vector::Zero(2), Matrix::Identity(2, 2), 30));
    const PointSet b =
        PointSet::uniform(sample_gaussian(rng, Vector::Zero(2), Matrix::Identity(2, 2), 30));
    v.push_back(mmd2(a, b, 1.0, MmdEstimator::unbiased));
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= trials;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double se = std::sqrt(var / (trials - 1) / trials);
  CHECK(std::abs(mean) <= 3.0 * se);

  Vector w(2);
  w << 0.3, 0.7;
  const PointSet weighted(Matrix::Zero(2, 2), w);
  CHECK_THROWS_AS(mmd2(weighted, weighted, 1.0, MmdEstimator::unbiased), InvalidArgument);
}

TEST_CASE("median heuristic") {
  Matrix a(3, 1);
  a << 0, 1, 3;
  const PointSet ps = PointSet::uniform(a);
  const PointSet* sets[] = {&ps};
  // distances 1, 3, 2 -> median 2
  CHECK(median_heuristic(sets) == 2.0);
  KernelConfig k;
  k.rule = KernelConfig::BandwidthRule::median;
  CHECK(mmd2(ps, ps, k) <= 1e-12);
}

TEST_CASE("mmd_deviation_bound") {
  CHECK(mmd_deviation_bound(8, 1, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(mmd_deviation_bound(100, 1, 1e-9) == doctest::Approx(1.0));
  // Frozen from the transcription exp(-eps^2 floor(N/2) / (8 K^2)).
  CHECK(std::abs(mmd_deviation_bound(5, 2, 0.5) - 0.9844964370054085) <= 1e-12);
  double previous = 2.0;
  for (double n = 2; n <= 1e5; n *= 2) {
    const double b = mmd_deviation_bound(n, 1, 0.3);
    CHECK(b <= previous);
    previous = b;
  }
}

TEST_CASE("mmd2_gaussian_approx") {
  Vector m1 = Vector::Zero(2), m2 = Vector::Zero(2);
  CHECK(mmd2_gaussian_approx(m1, m2, 1, 1, 2) == 0.0);
  m2[0] = 1.0;
  CHECK(mmd2_gaussian_approx(m1, m2, 1, 1, 2) == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
  double previous = 1e300;
  for (int d = 1; d <= 60; ++d) {
    const double v = mmd2_gaussian_approx(m1, m2, 1, 2, d);
    CHECK(v < previous);
    previous = v;
  }
}
