#include "distclass/error.hpp"
#include "distclass/experiment.hpp"

#include <Eigen/Cholesky>
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace distclass;

namespace {

ExperimentConfig tiny_bench() {
  ExperimentConfig cfg;
  cfg.toy.d = 3;
  cfg.toy.n_dists = 18;
  cfg.toy.n_samples = 10;
  cfg.toy.sigma = {1.0, 1.0, 1.0};
  cfg.toy.u_range = {{{0.0, 0.1}, {0.2, 0.3}, {0.4, 0.45}}};
  cfg.n_test = 30;
  cfg.methods = {MethodSpec::parse("bures+linear")};
  cfg.grid.c_values = {1.0, 10.0};
  cfg.grid.kernel_scales = {1.0};
  cfg.grid.grbf_scales = {1.0};
  cfg.grid.folds = 3;
  cfg.trials = 1;
  return cfg;
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n' ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("single trial single method gives a single row") {
  const auto r = run_bench(tiny_bench());
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].row == "trial");
  CHECK(r.rows[0].status == "ok");
  CHECK(r.rows[0].method == "bures+linear");
  CHECK(r.rows[0].accuracy >= 0.0);
  CHECK(r.rows[0].accuracy <= 1.0);
  const std::string csv = bench_csv(r);
  CHECK(count_lines(csv) == 2);
  CHECK(csv.rfind("row,n,d,trial,method,c,scale,M,accuracy,accuracy_std,trials_ok,status,message\n",
                  0) == 0);
  CHECK(timing_csv(r).rfind("n,d,trial,diss,pairs,seconds,seconds_per_pair\n", 0) == 0);
}

TEST_CASE("sweeps emit one aggregate row per value and method") {
  auto cfg = tiny_bench();
  cfg.methods = {MethodSpec::parse("bures+linear"), MethodSpec::parse("mmd+kernel")};
  cfg.trials = 2;
  cfg.sweep = ExperimentConfig::Sweep::n;
  cfg.sweep_values = {12, 15, 18};
  const auto r = run_bench(cfg, 2);
  std::size_t aggregates = 0;
  for (const auto& row : r.rows) {
    if (row.row != "aggregate") continue;
    ++aggregates;
    CHECK(row.trials_ok == 2);
  }
  CHECK(aggregates == 6);
  CHECK(r.rows.size() == 3 * (2 * 2 + 2));
  CHECK(r.rows.front().n == 12);
  CHECK(r.rows.back().n == 18);
  CHECK(bench_csv(r) == bench_csv(run_bench(cfg, 1)));
}

TEST_CASE("failed trials are recorded and the run continues") {
  auto cfg = tiny_bench();
  cfg.methods = {MethodSpec::parse("bures+linear")};
  cfg.templates = TemplateStrategy::parse("per-class:50");
  const auto r = run_bench(cfg);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].status == "failed");
  CHECK_FALSE(r.rows[0].message.empty());
}

TEST_CASE("experiment config json round trip") {
  auto cfg = tiny_bench();
  cfg.bound_m = 2.5;
  cfg.sweep = ExperimentConfig::Sweep::d;
  cfg.sweep_values = {2, 4};
  cfg.templates = TemplateStrategy::parse("per-class:2");
  const std::string text = config_to_json(cfg);
  const auto back = config_from_json(text);
  CHECK(config_to_json(back) == text);
  CHECK(back.bound_m == 2.5);
  CHECK(back.methods.size() == 1);
  CHECK_THROWS_AS(config_from_json("{\"trials\": 0}"), InvalidArgument);
  CHECK_THROWS_AS(config_from_json("{\"no_such_key\": 1}"), InvalidArgument);
  CHECK_THROWS_AS(config_from_json("{"), ParseError);
  CHECK_THROWS_AS(MethodSpec::parse("wd+forest"), InvalidArgument);
}

TEST_CASE("spec json round trips") {
  ToySpec3Class toy;
  toy.d = 7;
  toy.sigma = {1.5, 2.0, 2.5};
  toy.seed = 99;
  CHECK(toy_spec_to_json(toy_spec_from_json(toy_spec_to_json(toy))) == toy_spec_to_json(toy));
  MeanSepSpec ms;
  ms.d = 3;
  ms.sigma0 = 0.2 * Matrix::Identity(3, 3);
  CHECK(mean_sep_spec_to_json(mean_sep_spec_from_json(mean_sep_spec_to_json(ms))) ==
        mean_sep_spec_to_json(ms));
  DissimilaritySpec diss;
  diss.kind = DissimilarityKind::mmd;
  diss.kernel.bandwidth = 0.75;
  diss.bound_m = 3.0;
  CHECK(dissimilarity_to_json(dissimilarity_from_json(dissimilarity_to_json(diss))) ==
        dissimilarity_to_json(diss));
}

TEST_CASE("gaussian versus samples mmd matches Monte-Carlo") {
  Vector mean(2);
  mean << 0.5, -0.5;
  Matrix cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.5;
  Matrix samples(3, 2);
  samples << 0, 0, 1, 1, -1, 2;
  const double s = 1.3;
  const double exact = mmd2_gaussian_vs_samples(mean, cov, samples, s);

  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix l = cov.llt().matrixL();
  auto draw = [&] {
    Vector z(2);
    z << normal(rng), normal(rng);
    return Vector(mean + l * z);
  };
  auto k = [&](const Vector& a, const Vector& b) {
    return std::exp(-(a - b).squaredNorm() / (2 * s * s));
  };
  const int draws = 400000;
  double zz = 0.0, zy = 0.0;
  for (int t = 0; t < draws; ++t) {
    const Vector a = draw();
    const Vector b = draw();
    zz += k(a, b);
    for (Eigen::Index j = 0; j < 3; ++j) zy += k(a, samples.row(j).transpose());
  }
  double yy = 0.0;
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) yy += k(samples.row(i).transpose(), samples.row(j).transpose());
  }
  const double mc = zz / draws - 2.0 * zy / (3.0 * draws) + yy / 9.0;
  CHECK(std::abs(exact - mc) < 3e-3);
  CHECK(exact >= 0.0);
}

TEST_CASE("concentration harness") {
  ConcentrationConfig cfg;
  cfg.mean = Vector::Zero(2);
  cfg.covariance = Matrix::Identity(2, 2);
  cfg.n_grid = {20, 200};
  cfg.eps_grid = {0.01, 1e3};
  cfg.trials = 60;
  const auto rows = run_concentration(cfg, 2);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.exceeds_bures == (r.freq_bures > r.bound_bures));
    CHECK(r.exceeds_mmd == (r.freq_mmd > r.bound_mmd));
    if (r.eps == 1e3) {
      CHECK(r.freq_bures == 0.0);
      CHECK(r.freq_mmd == 0.0);
    } else {
      CHECK(r.freq_bures == 1.0);
    }
  }
  const auto again = run_concentration(cfg, 1);
  CHECK(concentration_csv(rows) == concentration_csv(again));
  CHECK(concentration_csv(rows).rfind(
            "n,eps,freq_bures,bound_bures,exceeds_bures,freq_mmd,bound_mmd,exceeds_mmd\n", 0) == 0);
  cfg.trials = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("concentration spec parsing") {
  const auto cfg = concentration_from_json(
      R"({"gaussian": {"mean": [0, 1], "covariance": [[1, 0], [0, 2]]}, "trials": 10})");
  CHECK(cfg.mean.size() == 2);
  CHECK(cfg.covariance(1, 1) == 2.0);
  CHECK(cfg.trials == 10);
  const auto toy = concentration_from_json(R"({"toy": {"d": 4}, "class": 1})");
  CHECK(toy.mean.size() == 4);
  CHECK(toy.covariance(0, 1) == doctest::Approx(22.5));
  CHECK_THROWS_AS(concentration_from_json(R"({"trials": 10})"), InvalidArgument);
}

TEST_CASE("goodness curve is nondecreasing in gamma") {
  MeanSepSpec spec;
  spec.n_dists = 20;
  spec.n_samples = 10;
  const auto ds = gen_mean_separated(spec);
  DissimilaritySpec diss;
  diss.kind = DissimilarityKind::bures;
  diss.bound_m = 1e9;
  const auto reports = goodness_curve(ds, diss, {0.0, 1.0, 2.0, 100.0}, 2);
  REQUIRE(reports.size() == 4);
  for (std::size_t k = 1; k < reports.size(); ++k) {
    CHECK(reports[k].epsilon_hat >= reports[k - 1].epsilon_hat);
  }
  CHECK(reports.back().epsilon_hat == 1.0);
  CHECK(goodness_csv(reports).rfind("gamma,epsilon_hat\n", 0) == 0);
}
