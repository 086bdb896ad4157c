#pragma once

#include "distclass/embed.hpp"
#include "distclass/svm.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace distclass {

/// linear: linear SVM on embedding features.
/// kernel: Gaussian RBF SVM on embedding features, bandwidth sigma_k.
/// grbf:   SVM with K = exp(-sigma D^2) directly on dissimilarities; its
///         "features" are distance rows to the training items.
enum class ModelKind { linear, kernel, grbf };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// One-vs-rest machines, one per codebook class.
struct TrainedModel {
  ModelKind kind = ModelKind::linear;
  std::vector<std::string> codebook;
  double c = 1.0;
  /// kernel: RBF bandwidth; grbf: sigma. Unused for linear.
  double bandwidth = 0.0;

  Matrix weights;  // linear: classes x features
  Vector biases;   // all kinds: one per class

  /// kernel/grbf: training rows with a nonzero coefficient in any machine.
  std::vector<std::size_t> support_ids;
  Matrix support_vectors;  // kernel only: features of support_ids (rows)
  Matrix coefficients;     // classes x support: y_i alpha_i
  std::vector<double> diagonal_shifts;

  /// Exact equality of every field.
  friend bool operator==(const TrainedModel&, const TrainedModel&);
};

struct TrainOptions {
  LinearSvmOptions linear;
  KernelSvmOptions kernel;
};

TrainedModel train_linear(const Matrix& features, const std::vector<int>& labels,
                          const std::vector<std::string>& codebook, double c,
                          const TrainOptions& options = {});
TrainedModel train_linear(const EmbeddedDataset& e, double c, const TrainOptions& options = {});

TrainedModel train_kernel(const Matrix& features, const std::vector<int>& labels,
                          const std::vector<std::string>& codebook, double c, double bandwidth,
                          const TrainOptions& options = {});
TrainedModel train_kernel(const EmbeddedDataset& e, double c, double bandwidth,
                          const TrainOptions& options = {});

/// `distances` is the square train x train dissimilarity matrix.
TrainedModel train_grbf(const Matrix& distances, const std::vector<int>& labels,
                        const std::vector<std::string>& codebook, double c, double sigma,
                        const TrainOptions& options = {});

/// exp(-|x_i - y_j|^2 / (2 bandwidth^2)) between rows.
Matrix rbf_gram(const Matrix& x, const Matrix& y, double bandwidth);

/// exp(-sigma D_ij^2). Requires a symmetric, nonnegative D (within 1e-9).
Matrix generalized_rbf_gram(const DistanceMatrix& d, double sigma);
Matrix generalized_rbf_gram(const Matrix& d, double sigma);

/// Items x classes. For grbf, `features` holds distances to every training
/// item (columns in training order).
Matrix decision_values(const TrainedModel& model, const Matrix& features);

/// Argmax over decision values; ties go to the lowest class index.
std::vector<int> predict(const TrainedModel& model, const Matrix& features);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Median Euclidean distance between distinct rows (lower median).
double median_row_distance(const Matrix& x);
/// Median of D_ij^2 over i < j (lower median).
double median_squared_entry(const Matrix& d);

/// Hyper-parameter grid. Kernel bandwidths are multiples of the median
/// distance between training feature rows; grbf sigmas are multiples of
/// 1 / median(D^2) over training pairs. Both references are recomputed on
/// each fold's training side.
struct CVGrid {
  std::vector<double> c_values{0.01, 0.1, 1.0, 10.0, 100.0};
  std::vector<double> kernel_scales{0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> grbf_scales{0.1, 1.0, 10.0};
  std::size_t folds = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Fold index per item. Each class is shuffled (seeded) and dealt round
/// robin, continuing where the previous class stopped, so fold sizes and
/// per-class counts differ by at most one.
std::vector<std::size_t> stratified_folds(const std::vector<int>& labels, std::size_t folds,
                                          std::uint64_t seed);

struct CvRow {
  double c = 0.0;
  double scale = 0.0;  // 0 for linear
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
};

struct CvResult {
  CvRow best;
  std::vector<CvRow> table;
};

/// Cross-validation on a precomputed square dissimilarity matrix (already
/// clipped at M). Templates of each fold are its training items; features
/// are D / M restricted to those columns.
CvResult cross_validate(const Matrix& distances, const std::vector<int>& labels,
                        std::size_t num_classes, double bound_m, const CVGrid& grid,
                        ModelKind kind, const TrainOptions& options = {});

/// Computes the square matrix once, then cross-validates.
CvResult cross_validate(const DistributionDataset& ds, const DissimilaritySpec& spec,
                        const CVGrid& grid, ModelKind kind, std::size_t workers = 1);

/// Structured-text persistence (JSON). Doubles round-trip exactly.
std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text, const std::string& source = "<model>");

}  // namespace distclass
