#include "distclass/classify.hpp"
#include "distclass/error.hpp"
#include "distclass/svm.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace distclass;

namespace {

struct Fixture {
  Matrix x;
  std::vector<int> y;
};

Fixture blobs(std::size_t n, double gap, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Fixture f{Matrix(static_cast<Eigen::Index>(n), 2), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : -1;
    f.y[i] = label;
    f.x(static_cast<Eigen::Index>(i), 0) = label * gap + normal(rng);
    f.x(static_cast<Eigen::Index>(i), 1) = normal(rng);
  }
  return f;
}

double linear_decision(const LinearSvmResult& r, const Eigen::RowVectorXd& x) {
  return x.dot(r.w) + r.bias;
}

Vector kernel_decisions(const Matrix& gram, const std::vector<int>& y, const KernelSvmResult& r) {
  Vector yv(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) yv[static_cast<Eigen::Index>(i)] = y[i];
  return gram * yv.cwiseProduct(r.alpha) + Vector::Constant(gram.rows(), r.bias);
}

}  // namespace

TEST_CASE("linear svm dual objective is nondecreasing") {
  const auto f = blobs(80, 1.0, 3);
  const auto r = train_linear_svm(f.x, f.y, 1.0);
  REQUIRE(r.dual_objective.size() >= 2);
  for (std::size_t k = 1; k < r.dual_objective.size(); ++k) {
    CHECK(r.dual_objective[k] >= r.dual_objective[k - 1] - 1e-12);
  }
  CHECK(r.converged);
  CHECK(r.alpha.minCoeff() >= 0.0);
  CHECK(r.alpha.maxCoeff() <= 1.0);
}

TEST_CASE("linear svm separates a separable fixture") {
  const auto f = blobs(60, 8.0, 4);
  const auto r = train_linear_svm(f.x, f.y, 10.0);
  for (std::size_t i = 0; i < f.y.size(); ++i) {
    CHECK(f.y[i] * linear_decision(r, f.x.row(static_cast<Eigen::Index>(i))) > 0.0);
  }
}

TEST_CASE("linear svm weight vanishes as C goes to zero") {
  const auto f = blobs(40, 1.0, 5);
  double previous = 1e300;
  for (double c : {1.0, 1e-2, 1e-4, 1e-6}) {
    const auto r = train_linear_svm(f.x, f.y, c);
    const double norm = r.w.norm();
    CHECK(norm <= previous);
    previous = norm;
  }
  CHECK(previous < 1e-4);
}

TEST_CASE("duplicating rows with half C leaves the decision function unchanged") {
  const auto f = blobs(30, 1.0, 6);
  Matrix doubled(f.x.rows() * 2, f.x.cols());
  doubled << f.x, f.x;
  std::vector<int> y2 = f.y;
  y2.insert(y2.end(), f.y.begin(), f.y.end());
  LinearSvmOptions tight;
  tight.tol = 1e-10;
  tight.max_epochs = 200000;
  const auto a = train_linear_svm(f.x, f.y, 1.0, tight);
  const auto b = train_linear_svm(doubled, y2, 0.5, tight);
  CHECK((a.w - b.w).norm() <= 1e-8);
  CHECK(std::abs(a.bias - b.bias) <= 1e-8);

  const Matrix g = rbf_gram(f.x, f.x, 1.0);
  const Matrix g2 = rbf_gram(doubled, doubled, 1.0);
  KernelSvmOptions kt;
  kt.tol = 1e-10;
  const auto ka = train_kernel_svm(g, f.y, 1.0, kt);
  const auto kb = train_kernel_svm(g2, y2, 0.5, kt);
  const Vector da = kernel_decisions(g, f.y, ka);
  const Vector db = kernel_decisions(g2, y2, kb).head(f.x.rows());
  CHECK((da - db).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("kernel svm solves XOR") {
  Matrix x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<int> y{1, 1, -1, -1};
  const Matrix g = rbf_gram(x, x, 0.5);
  const auto r = train_kernel_svm(g, y, 100.0);
  const Vector d = kernel_decisions(g, y, r);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] * d[static_cast<Eigen::Index>(i)] > 0.0);
  CHECK(r.converged);
  CHECK(r.kkt_violation <= 1e-3);
  CHECK(kkt_violation(g, y, r.alpha, 100.0) == doctest::Approx(r.kkt_violation));

  const auto linear = train_linear_svm(x, y, 100.0);
  int correct = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    correct += y[i] * linear_decision(linear, x.row(static_cast<Eigen::Index>(i))) > 0.0 ? 1 : 0;
  }
  CHECK(correct < 4);
}

TEST_CASE("kernel svm satisfies the KKT tolerance on noisy data") {
  const auto f = blobs(120, 0.7, 7);
  const Matrix g = rbf_gram(f.x, f.x, 1.0);
  for (double c : {0.1, 1.0, 10.0}) {
    const auto r = train_kernel_svm(g, f.y, c);
    CHECK(r.converged);
    CHECK(kkt_violation(g, f.y, r.alpha, c) <= 1e-3);
    CHECK(r.alpha.minCoeff() >= 0.0);
    CHECK(r.alpha.maxCoeff() <= c + 1e-12);
    double balance = 0.0;
    for (std::size_t i = 0; i < f.y.size(); ++i) balance += f.y[i] * r.alpha[static_cast<Eigen::Index>(i)];
    CHECK(std::abs(balance) <= 1e-9 * c * static_cast<double>(f.y.size()));
  }
}

TEST_CASE("equal labels give a trivial machine") {
  const auto f = blobs(10, 1.0, 8);
  const std::vector<int> ones(10, -1);
  const auto l = train_linear_svm(f.x, ones, 1.0);
  CHECK(l.trivial);
  CHECK(l.bias < 0.0);
  const auto k = train_kernel_svm(rbf_gram(f.x, f.x, 1.0), ones, 1.0);
  CHECK(k.trivial);
  CHECK(k.bias < 0.0);
}

TEST_CASE("wide rbf kernel behaves like the linear machine") {
  const auto f = blobs(60, 2.0, 9);
  const auto lin = train_linear_svm(f.x, f.y, 1.0);
  const Matrix g = rbf_gram(f.x, f.x, 1e3);
  const auto k = train_kernel_svm(g, f.y, 1e6);
  const Vector dk = kernel_decisions(g, f.y, k);
  int agree = 0;
  for (std::size_t i = 0; i < f.y.size(); ++i) {
    const double dl = linear_decision(lin, f.x.row(static_cast<Eigen::Index>(i)));
    agree += (dl > 0) == (dk[static_cast<Eigen::Index>(i)] > 0) ? 1 : 0;
  }
  CHECK(agree >= 57);
}

TEST_CASE("svm input validation") {
  const auto f = blobs(6, 1.0, 10);
  CHECK_THROWS_AS(train_linear_svm(f.x, f.y, 0.0), InvalidArgument);
  CHECK_THROWS_AS(train_linear_svm(f.x, std::vector<int>{1, -1}, 1.0), InvalidArgument);
  CHECK_THROWS_AS(train_linear_svm(f.x, std::vector<int>{1, -1, 2, 1, 1, 1}, 1.0),
                  InvalidArgument);
  CHECK_THROWS_AS(train_kernel_svm(Matrix::Identity(5, 5), f.y, 1.0), InvalidArgument);
}
