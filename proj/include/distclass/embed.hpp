#pragma once

#include "distclass/core.hpp"
#include "distclass/mmd.hpp"
#include "distclass/ot.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace distclass {

enum class DissimilarityKind { wasserstein, bures, mmd };

std::string to_string(DissimilarityKind kind);
DissimilarityKind parse_dissimilarity_kind(const std::string& name);

/// Which dissimilarity to evaluate between distributions, with its
/// parameters and the clipping ceiling M.
///   wasserstein: sinkhorn-approximated W_p on point sets.
///   bures:       closed-form Gaussian W_2; point sets are fitted first.
///   mmd:         square root of the biased MMD^2 with a Gaussian kernel.
struct DissimilaritySpec {
  DissimilarityKind kind = DissimilarityKind::wasserstein;
  SinkhornConfig sinkhorn;
  KernelConfig kernel;
  double bound_m = 1.0;

  void validate() const;
  /// Human-readable parameter summary recorded as matrix provenance.
  std::string describe() const;
};

/// Dissimilarities between row items and column items of a dataset.
struct DistanceMatrix {
  Matrix values;
  std::vector<std::size_t> row_ids;
  std::vector<std::size_t> col_ids;
  std::string provenance;

  /// Square with identical row/column ids and |D - D^T| <= tol.
  bool is_symmetric(double tol = 1e-12) const;
};

/// Cached per-item state so repeated pair evaluations do not refit
/// Gaussians or recompute self-similarity terms.
class DissimilarityEvaluator {
 public:
  /// Prepares only the items listed in `needed` (all items when empty).
  DissimilarityEvaluator(const DistributionDataset& ds, DissimilaritySpec spec,
                         const std::vector<std::size_t>& needed = {}, std::size_t workers = 1);
  ~DissimilarityEvaluator();
  DissimilarityEvaluator(DissimilarityEvaluator&&) noexcept;
  DissimilarityEvaluator& operator=(DissimilarityEvaluator&&) noexcept;

  /// Unclipped D(item_i, item_j). The second argument plays the template
  /// role (its Gaussian square root is the one reused).
  double operator()(std::size_t i, std::size_t j) const;

  /// The spec with any median-rule kernel bandwidth resolved to a value.
  const DissimilaritySpec& spec() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Resolves a median-rule kernel bandwidth against the pooled points of the
/// listed items. Returns `spec` unchanged for other kinds and rules.
DissimilaritySpec resolve_bandwidth(const DistributionDataset& ds, DissimilaritySpec spec,
                                    const std::vector<std::size_t>& items);

/// Entry (r, c) = min(D(rows[r], cols[c]), M). When rows == cols only the
/// upper triangle is evaluated and mirrored, so the result is exactly
/// symmetric. Rows are distributed over `workers` threads; every cell is
/// written by one worker, so the result does not depend on `workers`.
DistanceMatrix pairwise_matrix(const DistributionDataset& ds, const std::vector<std::size_t>& rows,
                               const std::vector<std::size_t>& cols, const DissimilaritySpec& spec,
                               std::size_t workers = 1);

/// All items against the given templates.
DistanceMatrix pairwise_matrix(const DistributionDataset& ds,
                               const std::vector<std::size_t>& templates,
                               const DissimilaritySpec& spec, std::size_t workers = 1);

/// Same as above with a prepared evaluator (bandwidth already resolved).
DistanceMatrix pairwise_matrix(const DissimilarityEvaluator& eval,
                               const std::vector<std::size_t>& rows,
                               const std::vector<std::size_t>& cols, double bound_m,
                               std::size_t workers = 1);

/// Rows rho(mu) = (min(D(mu, nu_t), M) / M)_t over the templates.
struct EmbeddedDataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::size_t> template_ids;
  std::vector<std::string> codebook;
  DissimilaritySpec spec;
};

EmbeddedDataset embed(const DistributionDataset& ds, const std::vector<std::size_t>& templates,
                      const DissimilaritySpec& spec, std::size_t workers = 1);

/// Builds embedding features from an already clipped distance matrix.
EmbeddedDataset embed_distances(const DistanceMatrix& d, std::vector<int> labels,
                                std::vector<std::string> codebook, const DissimilaritySpec& spec);

struct TemplateStrategy {
  enum class Kind { all, per_class };
  Kind kind = Kind::all;
  std::size_t per_class = 0;

  static TemplateStrategy parse(const std::string& text);  // "all" | "per-class:k"
  std::string to_string() const;
};

/// Template indices drawn from `pool` (all dataset items when empty), in
/// ascending order. per_class samples k items of each class without
/// replacement; deterministic per seed.
std::vector<std::size_t> select_templates(const DistributionDataset& ds, TemplateStrategy strategy,
                                          std::uint64_t seed,
                                          const std::vector<std::size_t>& pool = {});

/// Default clipping ceiling: 99th percentile (nearest rank) of D over
/// `samples` uniformly drawn pairs i != j of `items` (with replacement).
double estimate_bound(const DistributionDataset& ds, const std::vector<std::size_t>& items,
                      const DissimilaritySpec& spec, std::uint64_t seed,
                      std::size_t samples = 1000, std::size_t workers = 1);

/// Same rule applied to the off-diagonal entries of a square matrix.
double estimate_bound(const Matrix& square_distances, std::uint64_t seed,
                      std::size_t samples = 1000);

/// Number of templates per class for population distributions:
/// ceil((4M/gamma)^2 ln(2/delta)). Requires gamma in (0, 4M], delta in (0,1).
std::uint64_t sample_complexity_population(double m, double gamma, double delta);

/// Number of templates per class for empirical distributions:
/// ceil((32 M^2/gamma^2) ln(2/(delta^2 (1 - lambda)))). lambda in (0,1).
std::uint64_t sample_complexity_empirical(double m, double gamma, double delta, double lambda);

/// Concentration function g(N, eps) bounding P(D(mu, mu_hat_N) > eps).
using ConcentrationBound = std::function<double(double n, double eps)>;

ConcentrationBound mmd_concentration(double k_bound);
ConcentrationBound bures_concentration(double d, double c_v, double c_sigma);
/// C exp(-K N eps^{d/p}); the constants depend on moments of the
/// distribution and are supplied by the caller.
ConcentrationBound wasserstein_concentration(double c, double k, double d, double p);

/// Per-sample condition delta^2 lambda >= N g(N, eps / 4).
bool sample_condition_holds(double delta, double lambda, double n_samples, double eps,
                            const ConcentrationBound& g);

/// Probability bound on the deviation of a same-class average of n
/// empirical dissimilarities from its population expectation:
///   N g(N, eps/4) + 2 exp(-n eps^2 / (2 M^2)), clamped to [0, 1].
double average_deviation_bound(double n_templates, double n_samples, double eps, double m,
                               const ConcentrationBound& g);

/// Empirical (eps, gamma)-goodness with unit weighting.
struct GoodnessReport {
  double gamma = 0.0;
  double epsilon_hat = 0.0;
  /// mean D to other-class items minus mean D to same-class items (j != i).
  std::vector<double> per_item_margins;
};

GoodnessReport goodness_estimate(const Matrix& square_distances, const std::vector<int>& labels,
                                 double gamma);
GoodnessReport goodness_estimate(const DistributionDataset& ds, const DissimilaritySpec& spec,
                                 double gamma, std::size_t workers = 1);

struct TheoryMargins {
  double gamma_wd = 0.0;
  double gamma_mmd = 0.0;
};

/// Margins of the mean-separated Gaussian problem with N(m, sigma^2 I)
/// spread: gamma_wd = alpha ||m_neg - m_pos||^2 and gamma_mmd = alpha times
/// the closed-form MMD^2 approximation. alpha in (0, 1].
TheoryMargins margin_theory(const Vector& m_neg, const Vector& m_pos, double alpha, double sigma,
                            double sigma_k, double d);

/// Template-count and per-sample feasibility of the empirical guarantee.
struct FeasibilityReport {
  std::uint64_t required_population = 0;
  std::uint64_t required_empirical = 0;
  std::size_t available_per_class = 0;  // smallest class among templates
  std::size_t min_samples = 0;          // smallest point-set size
  bool enough_templates = false;
  bool sample_condition = false;
};

FeasibilityReport theory_feasibility(const DistributionDataset& ds,
                                     const std::vector<std::size_t>& templates, double m,
                                     double gamma, double delta, double lambda, double eps,
                                     const ConcentrationBound& g);

}  // namespace distclass
