#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "atd/corpus.hpp"
#include "atd/model.hpp"

namespace atd {

using FeatureMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using FeatureRow = FeatureMatrix::ConstRowXpr;

struct TfidfFeatures {
  FeatureMatrix features;
  std::vector<int> empty_rows;  // documents with no tokens; their rows are zero
};

// tf(t, d) * log(N / df(t)) with L2-normalized rows. Columns are word ids.
TfidfFeatures tfidf_features(std::span<const std::vector<int>> docs, int vocab_size);

// Scales every non-zero row to unit L2 norm.
void normalize_rows(FeatureMatrix& m);

FeatureMatrix to_features(const MatrixXd& dense);

// Column-wise concatenation; each block is row-normalized first.
FeatureMatrix concat_features(std::span<const FeatureMatrix> blocks);

// Rows are documents: the sum of the words' rows of `embedding` (V x K),
// projected to unit norm.
MatrixXd document_vectors(const MatrixXd& embedding, std::span<const std::vector<int>> docs);

// Per-document embedding features. Conditioned features use each document's
// own attribute; unconditioned ones use (Wfv)^T Wfk.
MatrixXd embedding_features(const FactoredParams& params, const AttributeTable& table,
                            std::span<const Document> docs, bool conditioned);

struct LogisticConfig {
  double l2 = 1e-4;
  int epochs = 20;
  double lr = 0.1;
  std::uint64_t seed = 1;
};

// Multinomial logistic regression; the bias is not regularized.
struct LogisticModel {
  MatrixXd weights;  // classes x features
  VectorXd bias;

  int num_classes() const { return static_cast<int>(bias.size()); }
  VectorXd log_probs(const FeatureRow& x) const;
  int predict(const FeatureRow& x) const;
};

// Shuffled SGD, one example per step.
LogisticModel train_logistic(const FeatureMatrix& x, std::span<const int> labels,
                             const LogisticConfig& config = {});

// Mean NLL + (l2 / 2) ||W||^2 and its gradient.
double logistic_objective(const LogisticModel& model, const FeatureMatrix& x,
                          std::span<const int> labels, double l2);
void logistic_gradient(const LogisticModel& model, const FeatureMatrix& x,
                       std::span<const int> labels, double l2, MatrixXd& grad_weights,
                       VectorXd& grad_bias);

struct PerceptronModel {
  MatrixXd weights;  // classes x features, averaged
  VectorXd bias;

  VectorXd scores(const FeatureRow& x) const;
  int predict(const FeatureRow& x) const;  // ties go to the lower class
};

// Multiclass perceptron with bias. The result is the mean of the weights
// after every example visit across all epochs.
PerceptronModel train_avg_perceptron(const FeatureMatrix& x, std::span<const int> labels,
                                     int epochs, std::uint64_t seed = 1);

// Number of classes implied by the labels (max + 1); throws unless at least
// two distinct labels occur.
int count_classes(std::span<const int> labels);

double accuracy(const std::function<int(const FeatureRow&)>& predict, const FeatureMatrix& x,
                std::span<const int> labels);

FeatureMatrix select_rows(const FeatureMatrix& x, std::span<const int> rows);

// Seeded fold index per example; fold sizes differ by at most one.
std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed);

using Trainer = std::function<std::function<int(const FeatureRow&)>(const FeatureMatrix&,
                                                                    std::span<const int>)>;

struct CrossValidation {
  std::vector<double> fold_accuracy;
  double mean = 0.0;
};

CrossValidation cross_validate(const FeatureMatrix& x, std::span<const int> labels, int folds,
                               std::uint64_t seed, const Trainer& trainer);

struct LabeledFeatures {
  FeatureMatrix features;
  std::vector<int> labels;
};

// `<label>\t<idx:val idx:val ...>` per line, 0-based column indices.
void write_labeled_features(std::ostream& out, const FeatureMatrix& x,
                            std::span<const int> labels);
LabeledFeatures read_labeled_features(std::istream& in, int columns = 0);

}  // namespace atd
