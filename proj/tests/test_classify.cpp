#include "distclass/classify.hpp"
#include "distclass/error.hpp"
#include "distclass/toygen.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace distclass;

namespace {

struct Blobs {
  Matrix x;
  std::vector<int> labels;
};

Blobs three_blobs(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.3);
  const double centres[3][2] = {{0, 0}, {3, 0}, {0, 3}};
  Blobs b{Matrix(static_cast<Eigen::Index>(3 * per_class), 2), {}};
  for (std::size_t i = 0; i < 3 * per_class; ++i) {
    const int k = static_cast<int>(i % 3);
    b.labels.push_back(k);
    b.x(static_cast<Eigen::Index>(i), 0) = centres[k][0] + normal(rng);
    b.x(static_cast<Eigen::Index>(i), 1) = centres[k][1] + normal(rng);
  }
  return b;
}

Matrix euclidean(const Matrix& x) {
  Matrix d(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.rows(); ++j) d(i, j) = (x.row(i) - x.row(j)).norm();
  }
  return d;
}

const std::vector<std::string> kCodebook{"a", "b", "c"};

}  // namespace

TEST_CASE("generalized rbf gram") {
  Matrix d(2, 2);
  d << 0, 2, 2, 0;
  const Matrix g = generalized_rbf_gram(d, 0.5);
  CHECK(g(0, 0) == 1.0);
  CHECK(g(0, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  Matrix asym = d;
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(generalized_rbf_gram(asym, 0.5), InvalidArgument);
  Matrix neg = d;
  neg(0, 1) = neg(1, 0) = -1.0;
  CHECK_THROWS_AS(generalized_rbf_gram(neg, 0.5), InvalidArgument);
  CHECK_THROWS_AS(generalized_rbf_gram(d, 0.0), InvalidArgument);
}

TEST_CASE("rbf gram and medians") {
  Matrix x(3, 1);
  x << 0, 1, 3;
  const Matrix g = rbf_gram(x, x, 1.0);
  CHECK(g(0, 1) == doctest::Approx(std::exp(-0.5)));
  CHECK(g(0, 2) == doctest::Approx(std::exp(-4.5)));
  CHECK(median_row_distance(x) == 2.0);
  CHECK(median_squared_entry(euclidean(x)) == 4.0);
}

TEST_CASE("stratified folds") {
  std::vector<int> labels;
  for (int i = 0; i < 23; ++i) labels.push_back(i % 3 == 0 ? 0 : (i % 3 == 1 ? 1 : 2));
  const auto f = stratified_folds(labels, 5, 11);
  CHECK(f == stratified_folds(labels, 5, 11));
  CHECK(f != stratified_folds(labels, 5, 12));
  std::vector<int> sizes(5, 0);
  std::vector<std::vector<int>> per(5, std::vector<int>(3, 0));
  for (std::size_t i = 0; i < f.size(); ++i) {
    ++sizes[f[i]];
    ++per[f[i]][static_cast<std::size_t>(labels[i])];
  }
  CHECK(*std::max_element(sizes.begin(), sizes.end()) -
            *std::min_element(sizes.begin(), sizes.end()) <=
        1);
  for (int k = 0; k < 3; ++k) {
    int lo = 100, hi = 0;
    for (int fold = 0; fold < 5; ++fold) {
      lo = std::min(lo, per[fold][k]);
      hi = std::max(hi, per[fold][k]);
    }
    CHECK(hi - lo <= 1);
  }
  CHECK_THROWS_AS(stratified_folds(labels, 1, 1), InvalidArgument);
}

TEST_CASE("multiclass models fit three blobs") {
  const auto b = three_blobs(20, 1);
  const auto lin = train_linear(b.x, b.labels, kCodebook, 1.0);
  CHECK(accuracy(predict(lin, b.x), b.labels) == 1.0);
  const auto ker = train_kernel(b.x, b.labels, kCodebook, 1.0, 1.0);
  CHECK(accuracy(predict(ker, b.x), b.labels) == 1.0);
  const Matrix d = euclidean(b.x);
  const auto g = train_grbf(d, b.labels, kCodebook, 1.0, 1.0);
  CHECK(accuracy(predict(g, d), b.labels) == 1.0);
  CHECK(decision_values(lin, b.x).cols() == 3);
}

TEST_CASE("prediction ties go to the lowest class") {
  TrainedModel m;
  m.kind = ModelKind::linear;
  m.codebook = kCodebook;
  m.weights = Matrix::Zero(3, 2);
  m.biases = Vector::Constant(3, 0.5);
  const Matrix x = Matrix::Ones(4, 2);
  CHECK(predict(m, x) == std::vector<int>{0, 0, 0, 0});
  m.biases[2] = 0.6;
  CHECK(predict(m, x) == std::vector<int>{2, 2, 2, 2});
  CHECK(accuracy({0, 1, 2, 2}, {0, 1, 1, 2}) == 0.75);
}

TEST_CASE("model json round trip is exact") {
  const auto b = three_blobs(10, 2);
  const Matrix d = euclidean(b.x);
  for (ModelKind kind : {ModelKind::linear, ModelKind::kernel, ModelKind::grbf}) {
    TrainedModel m;
    if (kind == ModelKind::linear) m = train_linear(b.x, b.labels, kCodebook, 0.3);
    if (kind == ModelKind::kernel) m = train_kernel(b.x, b.labels, kCodebook, 0.3, 0.7);
    if (kind == ModelKind::grbf) m = train_grbf(d, b.labels, kCodebook, 0.3, 0.1);
    const auto back = model_from_json(model_to_json(m));
    CHECK(back == m);
    const Matrix& f = kind == ModelKind::grbf ? d : b.x;
    CHECK(decision_values(back, f) == decision_values(m, f));
  }
  CHECK_THROWS_AS(model_from_json("{\"kind\": 3"), ParseError);
  CHECK_THROWS_AS(model_from_json("{\"kind\": \"tree\"}"), Error);
}

TEST_CASE("cross validation with a one-point grid") {
  const auto b = three_blobs(15, 3);
  const Matrix d = euclidean(b.x);
  CVGrid grid;
  grid.c_values = {1.0};
  grid.kernel_scales = {1.0};
  grid.grbf_scales = {1.0};
  grid.folds = 3;
  for (ModelKind kind : {ModelKind::linear, ModelKind::kernel, ModelKind::grbf}) {
    const auto r = cross_validate(d, b.labels, 3, d.maxCoeff(), grid, kind);
    CHECK(r.table.size() == 1);
    CHECK(r.best.c == 1.0);
    CHECK(r.best.fold_accuracy.size() == 3);
    CHECK(r.best.mean_accuracy >= 0.9);
    CHECK(r.best.scale == (kind == ModelKind::linear ? 0.0 : 1.0));
  }
}

TEST_CASE("cross validation ties prefer smaller C") {
  const auto b = three_blobs(15, 4);
  const Matrix d = euclidean(b.x);
  CVGrid grid;
  grid.c_values = {100.0, 10.0, 1.0};
  grid.folds = 3;
  const auto r = cross_validate(d, b.labels, 3, d.maxCoeff(), grid, ModelKind::linear);
  CHECK(r.table.size() == 3);
  double best = 0.0;
  for (const auto& row : r.table) best = std::max(best, row.mean_accuracy);
  double smallest = 1e300;
  for (const auto& row : r.table) {
    if (row.mean_accuracy == best) smallest = std::min(smallest, row.c);
  }
  CHECK(r.best.c == smallest);
}

TEST_CASE("cross validation on a dataset matches the matrix path") {
  ToySpec3Class spec;
  spec.d = 3;
  spec.n_dists = 24;
  spec.n_samples = 10;
  const auto ds = gen_three_class(spec);
  DissimilaritySpec diss;
  diss.kind = DissimilarityKind::bures;
  diss.bound_m = 1e9;
  CVGrid grid;
  grid.c_values = {1.0, 10.0};
  grid.folds = 3;
  const auto a = cross_validate(ds, diss, grid, ModelKind::linear, 1);
  const auto b = cross_validate(ds, diss, grid, ModelKind::linear, 3);
  CHECK(a.best.mean_accuracy == b.best.mean_accuracy);
  CHECK(a.best.c == b.best.c);
}
