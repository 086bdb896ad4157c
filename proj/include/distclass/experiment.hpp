#pragma once

#include "distclass/classify.hpp"
#include "distclass/embed.hpp"
#include "distclass/toygen.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace distclass {

/// Spec files are JSON objects whose keys mirror the struct fields.
std::string toy_spec_to_json(const ToySpec3Class& spec);
ToySpec3Class toy_spec_from_json(const std::string& text, const std::string& source = "<spec>");
std::string mean_sep_spec_to_json(const MeanSepSpec& spec);
MeanSepSpec mean_sep_spec_from_json(const std::string& text,
                                    const std::string& source = "<spec>");

std::string dissimilarity_to_json(const DissimilaritySpec& spec);
DissimilaritySpec dissimilarity_from_json(const std::string& text,
                                          const std::string& source = "<spec>");

/// One dissimilarity + classifier pairing, e.g. "wd+kernel".
struct MethodSpec {
  DissimilarityKind diss = DissimilarityKind::wasserstein;
  ModelKind model = ModelKind::kernel;

  std::string name() const;
  static MethodSpec parse(const std::string& text);
};

struct ExperimentConfig {
  enum class Source { toy, dataset, point_cloud };
  enum class Sweep { none, n, d };

  Source source = Source::toy;
  /// toy: training sets have toy.n_dists items; test sets n_test items.
  ToySpec3Class toy;
  std::size_t n_test = 2000;
  /// dataset / point_cloud: the data directory. Trial t tests on outer
  /// stratified fold t mod grid.folds and trains on the rest.
  std::filesystem::path path;
  PointCloudOptions cloud{0, 1, true};

  std::vector<MethodSpec> methods{{DissimilarityKind::wasserstein, ModelKind::kernel},
                                  {DissimilarityKind::mmd, ModelKind::kernel},
                                  {DissimilarityKind::bures, ModelKind::kernel}};
  SinkhornConfig sinkhorn{0.05, 10000, 1e-6, 2.0, true};
  KernelConfig kernel{1.0, KernelConfig::BandwidthRule::median};
  /// Clipping ceiling shared by every dissimilarity; nullopt estimates it
  /// per trial and dissimilarity from the training items.
  std::optional<double> bound_m;
  TemplateStrategy templates;
  CVGrid grid;
  std::size_t trials = 5;
  std::uint64_t seed = 1;
  Sweep sweep = Sweep::none;
  std::vector<std::size_t> sweep_values;

  void validate() const;
};

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text, const std::string& source = "<config>");

struct BenchRow {
  std::string row;  // "trial" or "aggregate"
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t trial = 0;  // unused for aggregate rows
  std::string method;
  double c = 0.0;
  double scale = 0.0;
  double bound_m = 0.0;
  /// Trial accuracy, or the mean over successful trials.
  double accuracy = 0.0;
  double accuracy_std = 0.0;
  std::size_t trials_ok = 0;
  std::string status;  // "ok" or "failed"
  std::string message;
};

struct TimingRow {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t trial = 0;
  std::string diss;
  std::size_t pairs = 0;
  double seconds = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<TimingRow> timing;
};

/// Runs every (sweep value, trial, method) cell. Trial failures are
/// recorded in their row and the run continues. Aggregate rows (mean and
/// sample standard deviation over successful trials) follow the trial rows
/// of each sweep value when trials > 1. Results never depend on `workers`.
BenchResult run_bench(const ExperimentConfig& cfg, std::size_t workers = 1);

/// Columns: row,n,d,trial,method,c,scale,M,accuracy,accuracy_std,trials_ok,status,message
std::string bench_csv(const BenchResult& r);
/// Columns: n,d,trial,diss,pairs,seconds,seconds_per_pair
std::string timing_csv(const BenchResult& r);

/// Monte-Carlo deviation of plug-in estimates from a known Gaussian mu.
/// Per trial, N samples are drawn; the Bures column uses the 2-Wasserstein
/// distance between mu and the fitted Gaussian, the MMD column the biased
/// MMD between mu and the empirical measure (exact expectations under mu).
struct ConcentrationConfig {
  Vector mean;
  Matrix covariance;
  std::vector<std::size_t> n_grid{10, 30, 100, 300, 1000, 3000};
  std::vector<double> eps_grid{0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
  std::size_t trials = 500;
  std::uint64_t seed = 1;
  /// Bures bound constants; nullopt means trace(covariance) and the
  /// spectral norm of the covariance.
  std::optional<double> c_v;
  std::optional<double> c_sigma;
  double kernel_bandwidth = 1.0;
  /// Bound K on the kernel; 1 for the Gaussian kernel.
  double kernel_bound = 1.0;

  void validate() const;
};

/// Accepts {"gaussian": {"mean": [...], "covariance": [[...]]}} or
/// {"toy": {...}, "class": k}; the toy class uses its mean centre and the
/// midpoint of its u range. Grid and constant keys are optional.
ConcentrationConfig concentration_from_json(const std::string& text,
                                            const std::string& source = "<spec>");

struct ConcentrationRow {
  std::size_t n = 0;
  double eps = 0.0;
  double freq_bures = 0.0;
  double bound_bures = 0.0;
  bool exceeds_bures = false;
  double freq_mmd = 0.0;
  double bound_mmd = 0.0;
  bool exceeds_mmd = false;
};

std::vector<ConcentrationRow> run_concentration(const ConcentrationConfig& cfg,
                                                std::size_t workers = 1);
/// Columns: n,eps,freq_bures,bound_bures,exceeds_bures,freq_mmd,bound_mmd,exceeds_mmd
std::string concentration_csv(const std::vector<ConcentrationRow>& rows);

/// Exact biased MMD^2 between N(mean, cov) and the uniform empirical
/// measure on the rows of `samples` under a Gaussian kernel.
double mmd2_gaussian_vs_samples(const Vector& mean, const Matrix& cov, const Matrix& samples,
                                double bandwidth);

/// epsilon_hat for each gamma from one clipped square matrix.
std::vector<GoodnessReport> goodness_curve(const DistributionDataset& ds,
                                           const DissimilaritySpec& spec,
                                           const std::vector<double>& gammas,
                                           std::size_t workers = 1);
/// Columns: gamma,epsilon_hat
std::string goodness_csv(const std::vector<GoodnessReport>& reports);

}  // namespace distclass
