#include "distclass/classify.hpp"

#include "distclass/error.hpp"
#include "distclass/linalg.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace distclass {

namespace {

using nlohmann::json;

std::vector<int> one_vs_rest(const std::vector<int>& labels, int cls) {
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == cls ? 1 : -1;
  return y;
}

void check_training_set(Eigen::Index rows, const std::vector<int>& labels,
                        const std::vector<std::string>& codebook) {
  if (rows == 0 || labels.empty()) {
    throw InvalidArgument("train: empty training set");
  }
  if (static_cast<std::size_t>(rows) != labels.size()) {
    throw InvalidArgument("train: label count does not match feature rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= codebook.size()) {
      throw InvalidArgument("train: label outside the codebook");
    }
  }
  if (std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels.front(); })) {
    throw InvalidArgument("train: need at least two classes in the training data");
  }
}

double lower_median(std::vector<double> v) {
  if (v.empty()) {
    throw InvalidArgument("median of an empty sample");
  }
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Shared by kernel and grbf: solve one machine per class on `gram`.
TrainedModel train_dual(ModelKind kind, const Matrix& gram, const std::vector<int>& labels,
                        const std::vector<std::string>& codebook, double c, double bandwidth,
                        const KernelSvmOptions& options) {
  const auto n = gram.rows();
  const auto classes = static_cast<Eigen::Index>(codebook.size());
  Matrix coef = Matrix::Zero(classes, n);
  TrainedModel m;
  m.kind = kind;
  m.codebook = codebook;
  m.c = c;
  m.bandwidth = bandwidth;
  m.biases = Vector::Zero(classes);
  for (Eigen::Index k = 0; k < classes; ++k) {
    const auto y = one_vs_rest(labels, static_cast<int>(k));
    const KernelSvmResult r = train_kernel_svm(gram, y, c, options);
    if (!r.converged) {
      throw NumericalError("kernel svm did not converge for class '" +
                           codebook[static_cast<std::size_t>(k)] + "'");
    }
    for (Eigen::Index i = 0; i < n; ++i) coef(k, i) = y[static_cast<std::size_t>(i)] * r.alpha[i];
    m.biases[k] = r.bias;
    m.diagonal_shifts.push_back(r.diagonal_shift);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (coef.col(i).cwiseAbs().maxCoeff() > 0.0) m.support_ids.push_back(static_cast<std::size_t>(i));
  }
  m.coefficients.resize(classes, static_cast<Eigen::Index>(m.support_ids.size()));
  for (std::size_t s = 0; s < m.support_ids.size(); ++s) {
    m.coefficients.col(static_cast<Eigen::Index>(s)) =
        coef.col(static_cast<Eigen::Index>(m.support_ids[s]));
  }
  return m;
}

Matrix select_columns(const Matrix& m, const std::vector<std::size_t>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(cols[k]));
  }
  return out;
}

Matrix select_block(const Matrix& m, const std::vector<std::size_t>& rows,
                    const std::vector<std::size_t>& cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          m(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
    }
  }
  return out;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (data.size() != static_cast<std::size_t>(rows)) {
    throw InvalidArgument("model: matrix row count mismatch");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = data.at(static_cast<std::size_t>(i));
    if (row.size() != static_cast<std::size_t>(cols)) {
      throw InvalidArgument("model: matrix column count mismatch");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

bool operator==(const TrainedModel& a, const TrainedModel& b) {
  return a.kind == b.kind && a.codebook == b.codebook && a.c == b.c &&
         a.bandwidth == b.bandwidth && same(a.weights, b.weights) && same(a.biases, b.biases) &&
         a.support_ids == b.support_ids && same(a.support_vectors, b.support_vectors) &&
         same(a.coefficients, b.coefficients) && a.diagonal_shifts == b.diagonal_shifts;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear: return "linear";
    case ModelKind::kernel: return "kernel";
    case ModelKind::grbf: return "grbf";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "linear") return ModelKind::linear;
  if (name == "kernel") return ModelKind::kernel;
  if (name == "grbf") return ModelKind::grbf;
  throw InvalidArgument("unknown model kind '" + name + "' (expected linear, kernel or grbf)");
}

TrainedModel train_linear(const Matrix& features, const std::vector<int>& labels,
                          const std::vector<std::string>& codebook, double c,
                          const TrainOptions& options) {
  check_training_set(features.rows(), labels, codebook);
  const auto classes = static_cast<Eigen::Index>(codebook.size());
  TrainedModel m;
  m.kind = ModelKind::linear;
  m.codebook = codebook;
  m.c = c;
  m.weights = Matrix::Zero(classes, features.cols());
  m.biases = Vector::Zero(classes);
  for (Eigen::Index k = 0; k < classes; ++k) {
    const LinearSvmResult r =
        train_linear_svm(features, one_vs_rest(labels, static_cast<int>(k)), c, options.linear);
    m.weights.row(k) = r.w.transpose();
    m.biases[k] = r.bias;
  }
  return m;
}

TrainedModel train_linear(const EmbeddedDataset& e, double c, const TrainOptions& options) {
  return train_linear(e.features, e.labels, e.codebook, c, options);
}

TrainedModel train_kernel(const Matrix& features, const std::vector<int>& labels,
                          const std::vector<std::string>& codebook, double c, double bandwidth,
                          const TrainOptions& options) {
  check_training_set(features.rows(), labels, codebook);
  TrainedModel m = train_dual(ModelKind::kernel, rbf_gram(features, features, bandwidth), labels,
                              codebook, c, bandwidth, options.kernel);
  m.support_vectors.resize(static_cast<Eigen::Index>(m.support_ids.size()), features.cols());
  for (std::size_t s = 0; s < m.support_ids.size(); ++s) {
    m.support_vectors.row(static_cast<Eigen::Index>(s)) =
        features.row(static_cast<Eigen::Index>(m.support_ids[s]));
  }
  return m;
}

TrainedModel train_kernel(const EmbeddedDataset& e, double c, double bandwidth,
                          const TrainOptions& options) {
  return train_kernel(e.features, e.labels, e.codebook, c, bandwidth, options);
}

TrainedModel train_grbf(const Matrix& distances, const std::vector<int>& labels,
                        const std::vector<std::string>& codebook, double c, double sigma,
                        const TrainOptions& options) {
  check_training_set(distances.rows(), labels, codebook);
  return train_dual(ModelKind::grbf, generalized_rbf_gram(distances, sigma), labels, codebook, c,
                    sigma, options.kernel);
}

Matrix rbf_gram(const Matrix& x, const Matrix& y, double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InvalidArgument("rbf bandwidth must be positive");
  }
  if (x.cols() != y.cols()) {
    throw InvalidArgument("rbf_gram: feature dimension mismatch");
  }
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  const Matrix xt = x.transpose();
  const Matrix yt = y.transpose();
  Matrix k(x.rows(), y.rows());
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      k(i, j) = std::exp(scale * (xt.col(i) - yt.col(j)).squaredNorm());
    }
  }
  return k;
}

Matrix generalized_rbf_gram(const Matrix& d, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("generalized rbf: sigma must be positive");
  }
  if (d.rows() != d.cols()) {
    throw InvalidArgument("generalized rbf: distance matrix must be square");
  }
  const double scale = std::max(1.0, max_abs(d));
  if ((d - d.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw InvalidArgument("generalized rbf: distance matrix is not symmetric");
  }
  if (d.size() > 0 && d.minCoeff() < 0.0) {
    throw InvalidArgument("generalized rbf: negative distance");
  }
  return (-sigma * d.array().square()).exp().matrix();
}

Matrix generalized_rbf_gram(const DistanceMatrix& d, double sigma) {
  if (d.row_ids != d.col_ids) {
    throw InvalidArgument("generalized rbf: rows and columns differ");
  }
  return generalized_rbf_gram(d.values, sigma);
}

Matrix decision_values(const TrainedModel& model, const Matrix& features) {
  const auto classes = static_cast<Eigen::Index>(model.codebook.size());
  switch (model.kind) {
    case ModelKind::linear: {
      if (features.cols() != model.weights.cols()) {
        throw InvalidArgument("predict: expected " + std::to_string(model.weights.cols()) +
                              " features, got " + std::to_string(features.cols()));
      }
      Matrix out = features * model.weights.transpose();
      out.rowwise() += model.biases.transpose();
      return out;
    }
    case ModelKind::kernel: {
      if (features.cols() != model.support_vectors.cols() && !model.support_ids.empty()) {
        throw InvalidArgument("predict: feature dimension does not match the model");
      }
      Matrix out = Matrix::Zero(features.rows(), classes);
      if (!model.support_ids.empty()) {
        out = rbf_gram(features, model.support_vectors, model.bandwidth) *
              model.coefficients.transpose();
      }
      out.rowwise() += model.biases.transpose();
      return out;
    }
    case ModelKind::grbf: {
      Matrix out = Matrix::Zero(features.rows(), classes);
      if (!model.support_ids.empty()) {
        const auto needed = static_cast<Eigen::Index>(model.support_ids.back()) + 1;
        if (features.cols() < needed) {
          throw InvalidArgument("predict: distance rows are shorter than the training set");
        }
        const Matrix d = select_columns(features, model.support_ids);
        out = (-model.bandwidth * d.array().square()).exp().matrix() *
              model.coefficients.transpose();
      }
      out.rowwise() += model.biases.transpose();
      return out;
    }
  }
  return {};
}

std::vector<int> predict(const TrainedModel& model, const Matrix& features) {
  if (features.rows() == 0) {
    throw InvalidArgument("predict: no items");
  }
  const Matrix dv = decision_values(model, features);
  std::vector<int> out(static_cast<std::size_t>(dv.rows()));
  for (Eigen::Index i = 0; i < dv.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < dv.cols(); ++k) {
      if (dv(i, k) > dv(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.empty()) {
    throw InvalidArgument("accuracy: empty prediction set");
  }
  if (predicted.size() != truth.size()) {
    throw InvalidArgument("accuracy: size mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double median_row_distance(const Matrix& x) {
  if (x.rows() < 2) {
    throw InvalidArgument("median distance needs at least two rows");
  }
  const Matrix xt = x.transpose();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(x.rows() * (x.rows() - 1) / 2));
  for (Eigen::Index j = 1; j < x.rows(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) d.push_back((xt.col(i) - xt.col(j)).norm());
  }
  return lower_median(std::move(d));
}

double median_squared_entry(const Matrix& dist) {
  if (dist.rows() < 2 || dist.rows() != dist.cols()) {
    throw InvalidArgument("median of D^2 needs a square matrix of at least two items");
  }
  std::vector<double> d;
  for (Eigen::Index j = 1; j < dist.rows(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) d.push_back(dist(i, j) * dist(i, j));
  }
  return lower_median(std::move(d));
}

void CVGrid::validate() const {
  if (folds < 2) throw InvalidArgument("cv: folds must be >= 2");
  if (c_values.empty() || kernel_scales.empty() || grbf_scales.empty()) {
    throw InvalidArgument("cv: grids must be nonempty");
  }
  auto positive = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0 && std::isfinite(x); });
  };
  if (!positive(c_values) || !positive(kernel_scales) || !positive(grbf_scales)) {
    throw InvalidArgument("cv: grid values must be positive");
  }
}

std::vector<std::size_t> stratified_folds(const std::vector<int>& labels, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) {
    throw InvalidArgument("cv: folds must be >= 2");
  }
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw InvalidArgument("cv: negative label");
    max_label = std::max(max_label, y);
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> fold(labels.size(), 0);
  std::size_t next = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& m = members[c];
    if (m.empty()) continue;
    if (m.size() < folds) {
      throw InvalidArgument("cv: class " + std::to_string(c) + " has " + std::to_string(m.size()) +
                            " items, fewer than " + std::to_string(folds) + " folds");
    }
    std::shuffle(m.begin(), m.end(), rng);
    for (auto i : m) {
      fold[i] = next;
      next = (next + 1) % folds;
    }
  }
  return fold;
}

CvResult cross_validate(const Matrix& distances, const std::vector<int>& labels,
                        std::size_t num_classes, double bound_m, const CVGrid& grid,
                        ModelKind kind, const TrainOptions& options) {
  grid.validate();
  if (distances.rows() != distances.cols() ||
      static_cast<std::size_t>(distances.rows()) != labels.size()) {
    throw InvalidArgument("cv: need a square distance matrix matching the labels");
  }
  if (!(bound_m > 0.0)) {
    throw InvalidArgument("cv: M must be positive");
  }
  std::vector<std::string> codebook(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) codebook[k] = std::to_string(k);

  const auto fold_of = stratified_folds(labels, grid.folds, grid.seed);
  const std::vector<double> none{0.0};
  const std::vector<double>& scales = kind == ModelKind::linear   ? none
                                      : kind == ModelKind::kernel ? grid.kernel_scales
                                                                  : grid.grbf_scales;
  std::vector<CvRow> table;
  for (double c : grid.c_values) {
    for (double s : scales) table.push_back({c, s, std::vector<double>(grid.folds, 0.0), 0.0});
  }
  auto row_index = [&](std::size_t ci, std::size_t si) { return ci * scales.size() + si; };

  for (std::size_t f = 0; f < grid.folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < labels.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
    const auto y_train = pick(labels, train);
    const auto y_test = pick(labels, test);
    const Matrix d_train = select_block(distances, train, train);
    const Matrix d_test = select_block(distances, test, train);

    if (kind == ModelKind::grbf) {
      const double ref = median_squared_entry(d_train);
      if (!(ref > 0.0)) throw InvalidArgument("cv: median of D^2 is zero");
      for (std::size_t si = 0; si < scales.size(); ++si) {
        const double sigma = scales[si] / ref;
        for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci) {
          const auto m = train_grbf(d_train, y_train, codebook, grid.c_values[ci], sigma, options);
          table[row_index(ci, si)].fold_accuracy[f] = accuracy(predict(m, d_test), y_test);
        }
      }
      continue;
    }

    const Matrix x_train = d_train.cwiseMin(bound_m) / bound_m;
    const Matrix x_test = d_test.cwiseMin(bound_m) / bound_m;
    if (kind == ModelKind::linear) {
      for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci) {
        const auto m = train_linear(x_train, y_train, codebook, grid.c_values[ci], options);
        table[row_index(ci, 0)].fold_accuracy[f] = accuracy(predict(m, x_test), y_test);
      }
      continue;
    }
    const double ref = median_row_distance(x_train);
    if (!(ref > 0.0)) throw InvalidArgument("cv: median feature distance is zero");
    for (std::size_t si = 0; si < scales.size(); ++si) {
      const double bw = scales[si] * ref;
      const Matrix k_train = rbf_gram(x_train, x_train, bw);
      const Matrix k_test = rbf_gram(x_test, x_train, bw);
      for (std::size_t ci = 0; ci < grid.c_values.size(); ++ci) {
        TrainedModel m = train_dual(ModelKind::kernel, k_train, y_train, codebook,
                                    grid.c_values[ci], bw, options.kernel);
        Matrix dv = select_columns(k_test, m.support_ids) * m.coefficients.transpose();
        dv.rowwise() += m.biases.transpose();
        std::vector<int> pred(static_cast<std::size_t>(dv.rows()));
        for (Eigen::Index i = 0; i < dv.rows(); ++i) {
          Eigen::Index best = 0;
          for (Eigen::Index k = 1; k < dv.cols(); ++k) {
            if (dv(i, k) > dv(i, best)) best = k;
          }
          pred[static_cast<std::size_t>(i)] = static_cast<int>(best);
        }
        table[row_index(ci, si)].fold_accuracy[f] = accuracy(pred, y_test);
      }
    }
  }

  for (auto& row : table) {
    double sum = 0.0;
    for (double a : row.fold_accuracy) sum += a;
    row.mean_accuracy = sum / static_cast<double>(row.fold_accuracy.size());
  }
  // Ties: smaller C, then the wider kernel (larger bandwidth, smaller sigma).
  auto better = [&](const CvRow& a, const CvRow& b) {
    if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
    if (a.c != b.c) return a.c < b.c;
    return kind == ModelKind::grbf ? a.scale < b.scale : a.scale > b.scale;
  };
  CvResult out;
  out.table = table;
  out.best = *std::min_element(table.begin(), table.end(),
                               [&](const CvRow& a, const CvRow& b) { return better(a, b); });
  return out;
}

CvResult cross_validate(const DistributionDataset& ds, const DissimilaritySpec& spec,
                        const CVGrid& grid, ModelKind kind, std::size_t workers) {
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const DistanceMatrix d = pairwise_matrix(ds, all, all, spec, workers);
  return cross_validate(d.values, ds.labels(), ds.num_classes(), spec.bound_m, grid, kind);
}

std::string model_to_json(const TrainedModel& m) {
  json j;
  j["format"] = "distclass-model";
  j["version"] = 1;
  j["kind"] = to_string(m.kind);
  j["codebook"] = m.codebook;
  j["C"] = m.c;
  j["bandwidth"] = m.bandwidth;
  j["biases"] = std::vector<double>(m.biases.data(), m.biases.data() + m.biases.size());
  if (m.kind == ModelKind::linear) {
    j["weights"] = matrix_json(m.weights);
  } else {
    j["support_ids"] = m.support_ids;
    j["coefficients"] = matrix_json(m.coefficients);
    j["diagonal_shifts"] = m.diagonal_shifts;
    if (m.kind == ModelKind::kernel) j["support_vectors"] = matrix_json(m.support_vectors);
  }
  return j.dump(1);
}

TrainedModel model_from_json(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, e.byte, e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "distclass-model" || j.at("version").get<int>() != 1) {
      throw InvalidArgument(source + ": not a version-1 distclass model");
    }
    TrainedModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.codebook = j.at("codebook").get<std::vector<std::string>>();
    m.c = j.at("C").get<double>();
    m.bandwidth = j.at("bandwidth").get<double>();
    const auto biases = j.at("biases").get<std::vector<double>>();
    m.biases = Eigen::Map<const Vector>(biases.data(), static_cast<Eigen::Index>(biases.size()));
    if (m.biases.size() != static_cast<Eigen::Index>(m.codebook.size())) {
      throw InvalidArgument(source + ": one bias per class expected");
    }
    if (m.kind == ModelKind::linear) {
      m.weights = matrix_from_json(j.at("weights"));
    } else {
      m.support_ids = j.at("support_ids").get<std::vector<std::size_t>>();
      m.coefficients = matrix_from_json(j.at("coefficients"));
      m.diagonal_shifts = j.at("diagonal_shifts").get<std::vector<double>>();
      if (m.kind == ModelKind::kernel) m.support_vectors = matrix_from_json(j.at("support_vectors"));
    }
    return m;
  } catch (const json::exception& e) {
    throw InvalidArgument(source + ": malformed model: " + e.what());
  }
}

}  // namespace distclass
