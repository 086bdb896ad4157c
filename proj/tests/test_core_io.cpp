#include "distclass/core.hpp"
#include "distclass/csv.hpp"
#include "distclass/dataset_io.hpp"
#include "distclass/error.hpp"
#include "distclass/linalg.hpp"
#include "distclass/toygen.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace distclass;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("distclass_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("uniform point sets") {
  Matrix pts(3, 2);
  pts << 0, 0, 1, 0, 0, 1;
  const PointSet ps = PointSet::uniform(pts);
  CHECK(ps.size() == 3);
  CHECK(ps.dim() == 2);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(ps.weights()[i] == doctest::Approx(1.0 / 3.0));
  CHECK(ps.has_uniform_weights());

  const PointSet one = PointSet::uniform(Matrix::Ones(1, 4));
  CHECK(one.weights()[0] == 1.0);

  std::mt19937_64 rng(1);
  const Matrix samples = sample_gaussian(rng, Vector::Zero(50), Matrix::Identity(50, 50), 30);
  CHECK(empirical_from_samples(samples).size() == 30);
}

TEST_CASE("point set invariants") {
  CHECK_THROWS_AS(PointSet(Matrix(0, 2), Vector(0)), InvalidArgument);
  Vector w(2);
  w << 0.7, 0.7;
  CHECK_THROWS_AS(PointSet(Matrix::Zero(2, 1), w), InvalidArgument);
  w << 1.5, -0.5;
  CHECK_THROWS_AS(PointSet(Matrix::Zero(2, 1), w), InvalidArgument);
}

TEST_CASE("gaussian_fit") {
  Matrix same(3, 2);
  same << 1, 2, 1, 2, 1, 2;
  const GaussianParams g = gaussian_fit(same);
  CHECK(g.mean()[0] == 1.0);
  CHECK(g.mean()[1] == 2.0);
  CHECK(max_abs(g.covariance()) == 0.0);

  Matrix two(2, 2);
  two << 0, 0, 2, 0;
  const GaussianParams h = gaussian_fit(two);
  CHECK(h.mean()[0] == doctest::Approx(1.0));
  CHECK(h.mean()[1] == doctest::Approx(0.0));
  CHECK(h.covariance()(0, 0) == doctest::Approx(2.0));
  CHECK(h.covariance()(0, 1) == doctest::Approx(0.0));
  CHECK(h.covariance()(1, 1) == doctest::Approx(0.0));

  std::mt19937_64 rng(11);
  const Matrix big = sample_gaussian(rng, Vector::Zero(3), Matrix::Identity(3, 3), 10000);
  CHECK(max_abs(gaussian_fit(big).covariance() - Matrix::Identity(3, 3)) <= 0.1);

  CHECK_THROWS_AS(gaussian_fit(Matrix::Zero(1, 2)), InvalidArgument);
}

TEST_CASE("weighted gaussian_fit matches duplicated samples") {
  Matrix pts(3, 1);
  pts << 0, 1, 3;
  Vector w(3);
  w << 0.5, 0.25, 0.25;
  const GaussianParams g = gaussian_fit(PointSet(pts, w));
  CHECK(g.mean()[0] == doctest::Approx(1.0));
  // Reliability weights: sum w (x - m)^2 / (1 - sum w^2) = 1.5 / 0.625.
  CHECK(g.covariance()(0, 0) == doctest::Approx(2.4));
}

TEST_CASE("dataset round trip") {
  ToySpec3Class spec;
  spec.d = 3;
  spec.n_dists = 6;
  spec.n_samples = 5;
  DistributionDataset ds = gen_three_class(spec);
  Vector w = Vector::Constant(5, 0.1);
  w[0] = 0.6;
  ds.items[1].payload = PointSet(std::get<PointSet>(ds.items[1].payload).points(), w);
  ds.items.push_back({GaussianParams(Vector::Ones(3), 2.0 * Matrix::Identity(3, 3)), 2});

  const fs::path dir = scratch("roundtrip");
  save_dataset(ds, dir);
  const DistributionDataset back = load_dataset(dir);
  CHECK(back == ds);
  fs::remove_all(dir);
}

TEST_CASE("empty dataset round trip") {
  DistributionDataset ds;
  ds.dimension = 2;
  ds.codebook = {"a", "b"};
  const fs::path dir = scratch("empty");
  save_dataset(ds, dir);
  const DistributionDataset back = load_dataset(dir);
  CHECK(back.size() == 0);
  CHECK(back.codebook == ds.codebook);
  fs::remove_all(dir);
}

TEST_CASE("truncated files raise parse errors") {
  ToySpec3Class spec;
  spec.d = 2;
  spec.n_dists = 3;
  spec.n_samples = 4;
  const fs::path dir = scratch("truncated");
  save_dataset(gen_three_class(spec), dir);

  const std::string manifest = csv::read_file(dir / "manifest.json");
  csv::write_file(dir / "manifest.json", manifest.substr(0, manifest.size() / 2));
  CHECK_THROWS_AS(load_dataset(dir), ParseError);
  csv::write_file(dir / "manifest.json", manifest);

  fs::path item;
  for (const auto& e : fs::directory_iterator(dir / "items")) item = e.path();
  const std::string text = csv::read_file(item);
  csv::write_file(item, text.substr(0, text.find(',') + 1));
  CHECK_THROWS_AS(load_dataset(dir), ParseError);

  fs::remove(item);
  CHECK_THROWS_AS(load_dataset(dir), InvalidArgument);
  fs::remove_all(dir);
}

TEST_CASE("parse errors carry the byte offset") {
  try {
    csv::parse_numeric("1,2\n3,x\n", "mem");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.file() == "mem");
    CHECK(e.offset() == 6);
  }
}

TEST_CASE("dataset validation") {
  DistributionDataset ds;
  ds.dimension = 2;
  ds.codebook = {"a"};
  ds.items.push_back({PointSet::uniform(Matrix::Zero(2, 2)), 1});
  CHECK_THROWS_AS(ds.validate(), InvalidArgument);
  ds.items[0].label = 0;
  ds.items.push_back({PointSet::uniform(Matrix::Zero(2, 3)), 0});
  CHECK_THROWS_AS(ds.validate(), InvalidArgument);
}
