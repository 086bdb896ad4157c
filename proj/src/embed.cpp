#include "distclass/embed.hpp"

#include "distclass/csv.hpp"
#include "distclass/error.hpp"
#include "distclass/gaussian.hpp"
#include "distclass/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace distclass {

namespace {

// Ceiling that ignores round-off just above an integer.
std::uint64_t stable_ceil(double x) {
  const double snapped = std::round(x);
  if (std::abs(x - snapped) <= 1e-9 * std::max(1.0, std::abs(x))) {
    return static_cast<std::uint64_t>(snapped);
  }
  return static_cast<std::uint64_t>(std::ceil(x));
}

double nearest_rank(std::vector<double> values, double q) {
  if (values.empty()) {
    throw InvalidArgument("percentile of an empty sample");
  }
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

}  // namespace

std::string to_string(DissimilarityKind kind) {
  switch (kind) {
    case DissimilarityKind::wasserstein: return "wd";
    case DissimilarityKind::bures: return "bures";
    case DissimilarityKind::mmd: return "mmd";
  }
  return "?";
}

DissimilarityKind parse_dissimilarity_kind(const std::string& name) {
  if (name == "wd" || name == "wasserstein") return DissimilarityKind::wasserstein;
  if (name == "bures") return DissimilarityKind::bures;
  if (name == "mmd") return DissimilarityKind::mmd;
  throw InvalidArgument("unknown dissimilarity '" + name + "' (expected wd, bures or mmd)");
}

void DissimilaritySpec::validate() const {
  if (!(bound_m > 0.0) || !std::isfinite(bound_m)) {
    throw InvalidArgument("dissimilarity bound M must be positive");
  }
  if (kind == DissimilarityKind::wasserstein) sinkhorn.validate();
  if (kind == DissimilarityKind::mmd) kernel.validate();
}

std::string DissimilaritySpec::describe() const {
  std::string out = to_string(kind);
  switch (kind) {
    case DissimilarityKind::wasserstein:
      out += " p=" + csv::format_double(sinkhorn.p) + " reg=" + csv::format_double(sinkhorn.reg) +
             " tol=" + csv::format_double(sinkhorn.tol) +
             " max_iter=" + std::to_string(sinkhorn.max_iter) +
             " normalize=" + (sinkhorn.normalize_median ? "median" : "none");
      break;
    case DissimilarityKind::mmd:
      out += kernel.rule == KernelConfig::BandwidthRule::median
                 ? std::string(" bandwidth=median")
                 : " bandwidth=" + csv::format_double(kernel.bandwidth);
      break;
    case DissimilarityKind::bures:
      break;
  }
  out += " M=" + csv::format_double(bound_m);
  return out;
}

bool DistanceMatrix::is_symmetric(double tol) const {
  if (values.rows() != values.cols() || row_ids != col_ids) return false;
  return (values - values.transpose()).cwiseAbs().maxCoeff() <= tol;
}

struct DissimilarityEvaluator::Impl {
  const DistributionDataset* ds = nullptr;
  DissimilaritySpec spec;
  std::vector<std::optional<PreparedGaussian>> gaussians;
  std::vector<double> self_terms;
  std::vector<char> prepared;

  const PointSet& point_set(std::size_t i) const {
    const auto* ps = std::get_if<PointSet>(&ds->items.at(i).payload);
    if (ps == nullptr) {
      throw InvalidArgument("item " + std::to_string(i) + ": " + to_string(spec.kind) +
                            " requires a point-set payload");
    }
    return *ps;
  }

  void prepare(std::size_t i) {
    switch (spec.kind) {
      case DissimilarityKind::wasserstein:
        point_set(i);
        break;
      case DissimilarityKind::mmd: {
        const PointSet& ps = point_set(i);
        self_terms[i] = weighted_gram_mean(ps, ps, spec.kernel.bandwidth);
        break;
      }
      case DissimilarityKind::bures: {
        const auto& payload = ds->items.at(i).payload;
        try {
          if (const auto* ps = std::get_if<PointSet>(&payload)) {
            gaussians[i].emplace(gaussian_fit(*ps));
          } else {
            gaussians[i].emplace(std::get<GaussianParams>(payload));
          }
        } catch (const InvalidArgument& e) {
          throw InvalidArgument("item " + std::to_string(i) + ": " + e.what());
        }
        break;
      }
    }
    prepared[i] = 1;
  }
};

DissimilarityEvaluator::DissimilarityEvaluator(const DistributionDataset& ds,
                                               DissimilaritySpec spec,
                                               const std::vector<std::size_t>& needed,
                                               std::size_t workers)
    : impl_(std::make_unique<Impl>()) {
  if (spec.kind == DissimilarityKind::mmd &&
      spec.kernel.rule == KernelConfig::BandwidthRule::median) {
    spec = resolve_bandwidth(ds, spec, needed.empty() ? all_indices(ds.size()) : needed);
  }
  spec.validate();
  impl_->ds = &ds;
  impl_->spec = spec;
  impl_->gaussians.resize(ds.size());
  impl_->self_terms.assign(ds.size(), 0.0);
  impl_->prepared.assign(ds.size(), 0);
  const std::vector<std::size_t> todo = needed.empty() ? all_indices(ds.size()) : needed;
  // Duplicates in `todo` would race; deduplicate first.
  std::vector<std::size_t> unique = todo;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  for (auto i : unique) {
    if (i >= ds.size()) throw InvalidArgument("item index " + std::to_string(i) + " out of range");
  }
  parallel_for(unique.size(), workers, [&](std::size_t k) { impl_->prepare(unique[k]); });
}

DissimilarityEvaluator::~DissimilarityEvaluator() = default;
DissimilarityEvaluator::DissimilarityEvaluator(DissimilarityEvaluator&&) noexcept = default;
DissimilarityEvaluator& DissimilarityEvaluator::operator=(DissimilarityEvaluator&&) noexcept =
    default;

const DissimilaritySpec& DissimilarityEvaluator::spec() const { return impl_->spec; }

double DissimilarityEvaluator::operator()(std::size_t i, std::size_t j) const {
  const Impl& m = *impl_;
  if (i >= m.prepared.size() || j >= m.prepared.size() || !m.prepared[i] || !m.prepared[j]) {
    throw InvalidArgument("dissimilarity requested for an unprepared item");
  }
  switch (m.spec.kind) {
    case DissimilarityKind::wasserstein:
      return wasserstein(m.point_set(i), m.point_set(j), m.spec.sinkhorn);
    case DissimilarityKind::mmd: {
      const double cross =
          weighted_gram_mean(m.point_set(i), m.point_set(j), m.spec.kernel.bandwidth);
      return std::sqrt(std::max(0.0, m.self_terms[i] - 2.0 * cross + m.self_terms[j]));
    }
    case DissimilarityKind::bures:
      return bures_wasserstein(*m.gaussians[j], *m.gaussians[i]);
  }
  return 0.0;
}

DissimilaritySpec resolve_bandwidth(const DistributionDataset& ds, DissimilaritySpec spec,
                                    const std::vector<std::size_t>& items) {
  if (spec.kind != DissimilarityKind::mmd ||
      spec.kernel.rule != KernelConfig::BandwidthRule::median) {
    return spec;
  }
  std::vector<const PointSet*> sets;
  for (auto i : items) {
    const auto* ps = std::get_if<PointSet>(&ds.items.at(i).payload);
    if (ps == nullptr) {
      throw InvalidArgument("item " + std::to_string(i) + ": mmd requires a point-set payload");
    }
    sets.push_back(ps);
  }
  spec.kernel.bandwidth = median_heuristic(sets);
  spec.kernel.rule = KernelConfig::BandwidthRule::fixed;
  return spec;
}

DistanceMatrix pairwise_matrix(const DissimilarityEvaluator& eval,
                               const std::vector<std::size_t>& rows,
                               const std::vector<std::size_t>& cols, double bound_m,
                               std::size_t workers) {
  if (!(bound_m > 0.0)) {
    throw InvalidArgument("dissimilarity bound M must be positive");
  }
  DistanceMatrix out;
  out.row_ids = rows;
  out.col_ids = cols;
  DissimilaritySpec spec = eval.spec();
  spec.bound_m = bound_m;
  out.provenance = spec.describe();
  const auto nr = static_cast<Eigen::Index>(rows.size());
  const auto nc = static_cast<Eigen::Index>(cols.size());
  out.values.resize(nr, nc);
  const bool square = rows == cols;
  parallel_for(rows.size(), workers, [&](std::size_t r) {
    const auto ri = static_cast<Eigen::Index>(r);
    const std::size_t start = square ? r : 0;
    for (std::size_t c = start; c < cols.size(); ++c) {
      const double d = std::min(eval(rows[r], cols[c]), bound_m);
      out.values(ri, static_cast<Eigen::Index>(c)) = d;
      if (square) out.values(static_cast<Eigen::Index>(c), ri) = d;
    }
  });
  return out;
}

DistanceMatrix pairwise_matrix(const DistributionDataset& ds, const std::vector<std::size_t>& rows,
                               const std::vector<std::size_t>& cols, const DissimilaritySpec& spec,
                               std::size_t workers) {
  if (cols.empty()) {
    throw InvalidArgument("pairwise_matrix: no templates");
  }
  std::vector<std::size_t> needed = rows;
  needed.insert(needed.end(), cols.begin(), cols.end());
  // A median-rule bandwidth is resolved on the templates only.
  const DissimilaritySpec resolved = resolve_bandwidth(ds, spec, cols);
  const DissimilarityEvaluator eval(ds, resolved, needed, workers);
  return pairwise_matrix(eval, rows, cols, spec.bound_m, workers);
}

DistanceMatrix pairwise_matrix(const DistributionDataset& ds,
                               const std::vector<std::size_t>& templates,
                               const DissimilaritySpec& spec, std::size_t workers) {
  return pairwise_matrix(ds, all_indices(ds.size()), templates, spec, workers);
}

EmbeddedDataset embed_distances(const DistanceMatrix& d, std::vector<int> labels,
                                std::vector<std::string> codebook, const DissimilaritySpec& spec) {
  spec.validate();
  if (labels.size() != static_cast<std::size_t>(d.values.rows())) {
    throw InvalidArgument("embed: label count does not match matrix rows");
  }
  EmbeddedDataset out;
  out.features = d.values.cwiseMin(spec.bound_m) / spec.bound_m;
  out.labels = std::move(labels);
  out.template_ids = d.col_ids;
  out.codebook = std::move(codebook);
  out.spec = spec;
  return out;
}

EmbeddedDataset embed(const DistributionDataset& ds, const std::vector<std::size_t>& templates,
                      const DissimilaritySpec& spec, std::size_t workers) {
  const DistanceMatrix d = pairwise_matrix(ds, templates, spec, workers);
  return embed_distances(d, ds.labels(), ds.codebook, spec);
}

TemplateStrategy TemplateStrategy::parse(const std::string& text) {
  if (text == "all") return {Kind::all, 0};
  const std::string prefix = "per-class:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string num = text.substr(prefix.size());
    std::size_t pos = 0;
    unsigned long k = 0;
    try {
      k = std::stoul(num, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == num.size() && !num.empty() && k > 0) {
      return {Kind::per_class, static_cast<std::size_t>(k)};
    }
  }
  throw InvalidArgument("bad template strategy '" + text + "' (expected all or per-class:k)");
}

std::string TemplateStrategy::to_string() const {
  return kind == Kind::all ? std::string("all") : "per-class:" + std::to_string(per_class);
}

std::vector<std::size_t> select_templates(const DistributionDataset& ds, TemplateStrategy strategy,
                                          std::uint64_t seed,
                                          const std::vector<std::size_t>& pool_in) {
  std::vector<std::size_t> pool = pool_in.empty() ? all_indices(ds.size()) : pool_in;
  std::sort(pool.begin(), pool.end());
  if (strategy.kind == TemplateStrategy::Kind::all) {
    return pool;
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < ds.num_classes(); ++c) {
    std::vector<std::size_t> members;
    for (auto i : pool) {
      if (static_cast<std::size_t>(ds.items.at(i).label) == c) members.push_back(i);
    }
    if (members.size() < strategy.per_class) {
      throw InvalidArgument("class '" + ds.codebook[c] + "' has " +
                            std::to_string(members.size()) + " items, fewer than " +
                            std::to_string(strategy.per_class) + " templates requested");
    }
    std::shuffle(members.begin(), members.end(), rng);
    out.insert(out.end(), members.begin(),
               members.begin() + static_cast<std::ptrdiff_t>(strategy.per_class));
  }
  std::sort(out.begin(), out.end());
  return out;
}

double estimate_bound(const DistributionDataset& ds, const std::vector<std::size_t>& items,
                      const DissimilaritySpec& spec, std::uint64_t seed, std::size_t samples,
                      std::size_t workers) {
  if (items.size() < 2) {
    throw InvalidArgument("estimate_bound needs at least two items");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
  std::vector<std::pair<std::size_t, std::size_t>> pairs(samples);
  for (auto& pr : pairs) {
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    while (b == a) b = pick(rng);
    pr = {items[a], items[b]};
  }
  const DissimilarityEvaluator eval(ds, resolve_bandwidth(ds, spec, items), items, workers);
  std::vector<double> values(samples);
  parallel_for(samples, workers, [&](std::size_t k) {
    values[k] = eval(pairs[k].first, pairs[k].second);
  });
  const double bound = nearest_rank(std::move(values), 0.99);
  if (!(bound > 0.0)) {
    throw InvalidArgument("cannot derive M: sampled dissimilarities are all zero");
  }
  return bound;
}

double estimate_bound(const Matrix& d, std::uint64_t seed, std::size_t samples) {
  if (d.rows() != d.cols() || d.rows() < 2) {
    throw InvalidArgument("estimate_bound needs a square matrix of at least two items");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, d.rows() - 1);
  std::vector<double> values(samples);
  for (auto& v : values) {
    const Eigen::Index a = pick(rng);
    Eigen::Index b = pick(rng);
    while (b == a) b = pick(rng);
    v = d(a, b);
  }
  const double bound = nearest_rank(std::move(values), 0.99);
  if (!(bound > 0.0)) {
    throw InvalidArgument("cannot derive M: sampled dissimilarities are all zero");
  }
  return bound;
}

std::uint64_t sample_complexity_population(double m, double gamma, double delta) {
  if (!(m > 0.0) || !(gamma > 0.0) || gamma > 4.0 * m) {
    throw InvalidArgument("sample_complexity_population: need 0 < gamma <= 4M");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("sample_complexity_population: need delta in (0, 1)");
  }
  const double ratio = 4.0 * m / gamma;
  return stable_ceil(ratio * ratio * std::log(2.0 / delta));
}

std::uint64_t sample_complexity_empirical(double m, double gamma, double delta, double lambda) {
  if (!(m > 0.0) || !(gamma > 0.0)) {
    throw InvalidArgument("sample_complexity_empirical: need M > 0 and gamma > 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("sample_complexity_empirical: need delta in (0, 1)");
  }
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw InvalidArgument("sample_complexity_empirical: need lambda in (0, 1)");
  }
  const double q = delta * delta * (1.0 - lambda);
  if (!(q < 2.0)) {
    throw InvalidArgument("sample_complexity_empirical: need delta^2 (1 - lambda) < 2");
  }
  return stable_ceil(32.0 * m * m / (gamma * gamma) * std::log(2.0 / q));
}

ConcentrationBound mmd_concentration(double k_bound) {
  return [k_bound](double n, double eps) { return mmd_deviation_bound(n, k_bound, eps); };
}

ConcentrationBound bures_concentration(double d, double c_v, double c_sigma) {
  return [=](double n, double eps) { return bures_deviation_bound(n, d, eps, c_v, c_sigma); };
}

ConcentrationBound wasserstein_concentration(double c, double k, double d, double p) {
  if (!(c > 0) || !(k > 0) || !(d > 0) || !(p >= 1)) {
    throw InvalidArgument("wasserstein_concentration: constants must be positive, p >= 1");
  }
  return [=](double n, double eps) {
    return std::clamp(c * std::exp(-k * n * std::pow(eps, d / p)), 0.0, 1.0);
  };
}

bool sample_condition_holds(double delta, double lambda, double n_samples, double eps,
                            const ConcentrationBound& g) {
  return delta * delta * lambda >= n_samples * g(n_samples, eps / 4.0);
}

double average_deviation_bound(double n_templates, double n_samples, double eps, double m,
                               const ConcentrationBound& g) {
  if (!(n_templates > 0) || !(n_samples > 0) || !(eps > 0) || !(m > 0)) {
    throw InvalidArgument("average_deviation_bound: arguments must be positive");
  }
  const double value =
      n_samples * g(n_samples, eps / 4.0) + 2.0 * std::exp(-n_templates * eps * eps / (2.0 * m * m));
  return std::clamp(value, 0.0, 1.0);
}

GoodnessReport goodness_estimate(const Matrix& d, const std::vector<int>& labels, double gamma) {
  const auto n = labels.size();
  if (d.rows() != d.cols() || static_cast<std::size_t>(d.rows()) != n) {
    throw InvalidArgument("goodness_estimate: need a square matrix matching the labels");
  }
  std::vector<std::size_t> counts;
  for (int y : labels) {
    if (y < 0) throw InvalidArgument("goodness_estimate: negative label");
    if (static_cast<std::size_t>(y) >= counts.size()) counts.resize(static_cast<std::size_t>(y) + 1, 0);
    ++counts[static_cast<std::size_t>(y)];
  }
  std::size_t present = 0;
  for (auto c : counts) {
    if (c == 1) throw InvalidArgument("goodness_estimate: every class needs at least 2 items");
    if (c >= 2) ++present;
  }
  if (present < 2) {
    throw InvalidArgument("goodness_estimate: need at least 2 classes");
  }

  GoodnessReport report;
  report.gamma = gamma;
  report.per_item_margins.resize(n);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double same = 0.0, other = 0.0;
    std::size_t n_same = 0, n_other = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (labels[j] == labels[i]) {
        same += v;
        ++n_same;
      } else {
        other += v;
        ++n_other;
      }
    }
    const double margin = other / static_cast<double>(n_other) - same / static_cast<double>(n_same);
    report.per_item_margins[i] = margin;
    if (margin < gamma) ++violations;
  }
  report.epsilon_hat = static_cast<double>(violations) / static_cast<double>(n);
  return report;
}

GoodnessReport goodness_estimate(const DistributionDataset& ds, const DissimilaritySpec& spec,
                                 double gamma, std::size_t workers) {
  const auto idx = all_indices(ds.size());
  const DistanceMatrix d = pairwise_matrix(ds, idx, idx, spec, workers);
  return goodness_estimate(d.values, ds.labels(), gamma);
}

TheoryMargins margin_theory(const Vector& m_neg, const Vector& m_pos, double alpha, double sigma,
                            double sigma_k, double d) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("margin_theory: alpha must be in (0, 1]");
  }
  TheoryMargins out;
  out.gamma_wd = alpha * (m_neg - m_pos).squaredNorm();
  out.gamma_mmd = alpha * mmd2_gaussian_approx(m_neg, m_pos, sigma, sigma_k, d);
  return out;
}

FeasibilityReport theory_feasibility(const DistributionDataset& ds,
                                     const std::vector<std::size_t>& templates, double m,
                                     double gamma, double delta, double lambda, double eps,
                                     const ConcentrationBound& g) {
  FeasibilityReport r;
  r.required_population = sample_complexity_population(m, gamma, delta);
  r.required_empirical = sample_complexity_empirical(m, gamma, delta, lambda);
  std::vector<std::size_t> per_class(ds.num_classes(), 0);
  for (auto t : templates) ++per_class.at(static_cast<std::size_t>(ds.items.at(t).label));
  r.available_per_class =
      per_class.empty() ? 0 : *std::min_element(per_class.begin(), per_class.end());
  std::size_t min_n = 0;
  for (const auto& item : ds.items) {
    if (const auto* ps = std::get_if<PointSet>(&item.payload)) {
      min_n = min_n == 0 ? ps->size() : std::min(min_n, ps->size());
    }
  }
  r.min_samples = min_n;
  r.enough_templates = r.available_per_class >= r.required_empirical;
  r.sample_condition =
      min_n > 0 && sample_condition_holds(delta, lambda, static_cast<double>(min_n), eps, g);
  return r;
}

}  // namespace distclass
