#include "distclass/classify.hpp"
#include "distclass/csv.hpp"
#include "distclass/dataset_io.hpp"
#include "distclass/error.hpp"
#include "distclass/toygen.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace distclass;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("distclass_toygen_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const Matrix& points_of(const DistributionDataset& ds, std::size_t i) {
  return std::get<PointSet>(ds.items[i].payload).points();
}

}  // namespace

TEST_CASE("three-class generator is deterministic and balanced") {
  ToySpec3Class spec;
  spec.d = 5;
  spec.n_dists = 31;
  spec.n_samples = 7;
  spec.seed = 9;
  const auto a = gen_three_class(spec);
  const auto b = gen_three_class(spec);
  REQUIRE(a.size() == 31);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(points_of(a, i) == points_of(b, i));
    CHECK(a.items[i].label == static_cast<int>(i % 3));
    CHECK(points_of(a, i).rows() == 7);
    CHECK(points_of(a, i).cols() == 5);
  }
  spec.seed = 10;
  CHECK(points_of(gen_three_class(spec), 0) != points_of(a, 0));
  CHECK(a.codebook.size() == 3);
}

TEST_CASE("three-class covariance structure") {
  ToySpec3Class spec;
  spec.d = 4;
  spec.n_dists = 3;
  spec.n_samples = 20000;
  spec.mean_spread = 0.0;
  spec.sigma = {1.0, 1.0, 1.0};
  spec.u_range = {{{0.0, 0.0}, {0.3, 0.3}, {0.45, 0.45}}};
  const auto ds = gen_three_class(spec);
  const double u[3] = {0.0, 0.3, 0.45};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto g = gaussian_fit(points_of(ds, k));
    CHECK((g.mean() - Vector::Ones(4)).cwiseAbs().maxCoeff() < 0.05);
    CHECK(g.covariance()(0, 0) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(g.covariance()(1, 2) - u[k]) < 0.05);
    CHECK(std::abs(g.covariance()(0, 2)) < 0.05);
  }
}

TEST_CASE("three-class null construction is not learnable") {
  ToySpec3Class spec;
  spec.d = 3;
  spec.n_dists = 90;
  spec.n_samples = 15;
  spec.sigma = {1.0, 1.0, 1.0};
  spec.u_range = {{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}}};
  const auto ds = gen_three_class(spec);
  DissimilaritySpec diss;
  diss.kind = DissimilarityKind::bures;
  diss.bound_m = 1e9;
  CVGrid grid;
  grid.c_values = {1.0};
  grid.folds = 3;
  const auto r = cross_validate(ds, diss, grid, ModelKind::linear);
  CHECK(std::abs(r.best.mean_accuracy - 1.0 / 3.0) < 0.15);
}

TEST_CASE("three-class validation") {
  ToySpec3Class spec;
  spec.d = 1;
  CHECK_THROWS_AS(gen_three_class(spec), InvalidArgument);
  spec = {};
  spec.n_samples = 1;
  CHECK_THROWS_AS(gen_three_class(spec), InvalidArgument);
  spec = {};
  spec.d = 6;
  spec.sigma = {1.0, 1.0, 1.0};
  spec.u_range[2] = {2.0, 3.0};
  CHECK_THROWS_AS(gen_three_class(spec), Error);
}

TEST_CASE("mean-separated generator with vanishing spread") {
  MeanSepSpec spec;
  spec.d = 3;
  spec.n_dists = 10;
  spec.n_samples = 5;
  spec.sigma0 = 1e-8 * Matrix::Identity(3, 3);
  const auto oracle = gen_mean_separated_oracle(spec);
  const auto resolved = spec.resolved();
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    const auto& g = std::get<GaussianParams>(oracle.items[i].payload);
    const Vector& target = oracle.items[i].label == 0 ? resolved.m_neg : resolved.m_pos;
    CHECK((g.mean() - target).norm() < 1e-3);
  }
  CHECK(oracle.codebook == std::vector<std::string>{"neg", "pos"});
}

TEST_CASE("mean-separated expected squared distance identity") {
  MeanSepSpec spec;
  spec.d = 2;
  spec.n_dists = 10000;
  spec.n_samples = 2;
  spec.sigma0 = Matrix(2, 2);
  spec.sigma0 << 0.5, 0.1, 0.1, 0.3;
  spec.seed = 12;
  const auto oracle = gen_mean_separated_oracle(spec);
  const auto resolved = spec.resolved();
  Vector x(2);
  x << 1.0, -2.0;
  double sum = 0.0, sum2 = 0.0;
  std::size_t count = 0;
  for (const auto& item : oracle.items) {
    if (item.label != 0) continue;
    const double v = (std::get<GaussianParams>(item.payload).mean() - x).squaredNorm();
    sum += v;
    sum2 += v * v;
    ++count;
  }
  const double mean = sum / static_cast<double>(count);
  const double se = std::sqrt((sum2 / static_cast<double>(count) - mean * mean) /
                              static_cast<double>(count));
  const double expected = (resolved.m_neg - x).squaredNorm() + spec.sigma0.trace();
  CHECK(std::abs(mean - expected) <= 3.0 * se);
}

TEST_CASE("oracle and empirical payloads agree") {
  MeanSepSpec spec;
  spec.d = 2;
  spec.n_dists = 20;
  spec.n_samples = 400;
  const auto emp = gen_mean_separated(spec);
  const auto oracle = gen_mean_separated_oracle(spec);
  const double n = static_cast<double>(spec.n_samples);
  for (std::size_t i = 0; i < emp.size(); ++i) {
    const auto& g = std::get<GaussianParams>(oracle.items[i].payload);
    const Vector m = gaussian_fit(std::get<PointSet>(emp.items[i].payload)).mean();
    for (Eigen::Index k = 0; k < 2; ++k) {
      CHECK(std::abs(m[k] - g.mean()[k]) <= 4.0 * std::sqrt(g.covariance()(k, k) / n));
    }
    CHECK(emp.items[i].label == oracle.items[i].label);
  }
  spec.sigma = -Matrix::Identity(2, 2);
  CHECK_THROWS_AS(gen_mean_separated(spec), InvalidArgument);
}

TEST_CASE("OFF cube") {
  const auto dir = scratch("off");
  csv::write_file(dir / "cube.off",
                  "OFF\n# a cube\n8 6 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n0 0 1\n1 0 1\n0 1 1\n1 1 1\n"
                  "4 0 1 3 2\n4 4 5 7 6\n4 0 1 5 4\n4 2 3 7 6\n4 0 2 6 4\n4 1 3 7 5\n");
  const Matrix v = read_off_vertices(dir / "cube.off");
  CHECK(v.rows() == 8);
  CHECK(v.row(7) == Eigen::RowVector3d(1, 1, 1));
  csv::write_file(dir / "short.off", "OFF\n8 6 0\n0 0 0\n");
  CHECK_THROWS_AS(read_off_vertices(dir / "short.off"), ParseError);
  csv::write_file(dir / "bad.off", "PLY\n");
  CHECK_THROWS_AS(read_off_vertices(dir / "bad.off"), ParseError);
}

TEST_CASE("point cloud directory loading") {
  const auto dir = scratch("clouds");
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  std::string rows = "x,y,z\n";
  for (int i = 0; i < 10; ++i) rows += std::to_string(i) + ",0,0\n";
  csv::write_file(dir / "a" / "one.csv", rows);
  csv::write_file(dir / "b" / "two.off", "OFF\n2 0 0\n0 0 0\n2 2 2\n");

  PointCloudOptions opt;
  opt.subsample = 5;
  opt.seed = 3;
  const auto ds = load_point_cloud_dir(dir, opt);
  CHECK(ds.codebook == std::vector<std::string>{"a", "b"});
  REQUIRE(ds.size() == 2);
  CHECK(points_of(ds, 0).rows() == 5);
  CHECK(points_of(ds, 1).rows() == 2);
  CHECK(points_of(load_point_cloud_dir(dir, opt), 0) == points_of(ds, 0));

  opt.center = true;
  const auto centred = load_point_cloud_dir(dir, opt);
  CHECK(points_of(centred, 1).colwise().sum().norm() < 1e-12);

  const auto saved = scratch("clouds_saved");
  save_dataset(ds, saved);
  const auto back = load_dataset(saved);
  CHECK(back.codebook == ds.codebook);
  CHECK(points_of(back, 0) == points_of(ds, 0));

  fs::create_directories(dir / "c");
  CHECK_THROWS_AS(load_point_cloud_dir(dir, opt), InvalidArgument);
  fs::remove_all(dir / "c");
  csv::write_file(dir / "a" / "bad.csv", "1,2\n");
  try {
    load_point_cloud_dir(dir, opt);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bad.csv") != std::string::npos);
  }
}

TEST_CASE("shape corpus round trip") {
  const auto dir = scratch("shapes");
  ShapeCorpusSpec spec;
  spec.per_class = 4;
  spec.points = 30;
  write_shape_corpus(dir, spec);
  CHECK(fs::exists(dir / "box" / "box_001.off"));
  CHECK(fs::exists(dir / "torus" / "torus_003.csv"));
  const auto ds = load_point_cloud_dir(dir);
  CHECK(ds.size() == 12);
  CHECK(ds.codebook == std::vector<std::string>{"box", "sphere", "torus"});
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(points_of(ds, i).rows() == 30);
}
