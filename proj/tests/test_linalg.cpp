#include "distclass/error.hpp"
#include "distclass/linalg.hpp"

#include <doctest.h>

#include <random>

using namespace distclass;

namespace {

Matrix random_spd(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = n(rng);
  }
  return a * a.transpose() + 0.5 * Matrix::Identity(d, d);
}

}  // namespace

TEST_CASE("sym_eig on identity and diagonal inputs") {
  const SymEig id = sym_eig(Matrix::Identity(4, 4));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(id.eigenvalues[i] == doctest::Approx(1.0));

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 3.0;
  const SymEig e = sym_eig(d);
  CHECK(e.eigenvalues[0] == doctest::Approx(3.0));
  CHECK(e.eigenvalues[1] == doctest::Approx(1.0));
  CHECK(std::abs(e.eigenvectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(e.eigenvectors(0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig reconstructs random SPD matrices") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = random_spd(rng, 10);
    const SymEig e = sym_eig(a);
    const Matrix back = e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.transpose();
    CHECK(max_abs(back - a) <= 1e-8);
    const Matrix gram = e.eigenvectors.transpose() * e.eigenvectors;
    CHECK(max_abs(gram - Matrix::Identity(10, 10)) <= 1e-10);
    for (Eigen::Index i = 1; i < 10; ++i) CHECK(e.eigenvalues[i - 1] >= e.eigenvalues[i]);
  }
}

TEST_CASE("sym_eigenvalues agrees with the Jacobi solver") {
  std::mt19937_64 rng(5);
  for (Eigen::Index d : {1, 2, 7, 30}) {
    const Matrix a = random_spd(rng, d);
    const Vector fast = sym_eigenvalues(a);
    const Vector ref = sym_eig(a).eigenvalues;
    CHECK((fast - ref).cwiseAbs().maxCoeff() <= 1e-9 * ref.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("sym_eig rejects asymmetric input") {
  Matrix a = Matrix::Identity(2, 2);
  a(0, 1) = 1.0;
  CHECK_THROWS_AS(sym_eig(a), InvalidArgument);
}

TEST_CASE("spd_sqrt") {
  CHECK(max_abs(spd_sqrt(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)) <= 1e-14);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  const Matrix r = spd_sqrt(d);
  CHECK(r(0, 0) == doctest::Approx(2.0));
  CHECK(r(1, 1) == doctest::Approx(3.0));
  CHECK(std::abs(r(0, 1)) <= 1e-14);

  std::mt19937_64 rng(7);
  const Matrix a = random_spd(rng, 8);
  const Matrix s = spd_sqrt(a);
  CHECK(max_abs(s * s - a) <= 1e-9);
  CHECK(max_abs(s - s.transpose()) <= 1e-12);

  Matrix neg = Matrix::Identity(2, 2);
  neg(1, 1) = -1.0;
  CHECK_THROWS_AS(spd_sqrt(neg), InvalidArgument);
}
