#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "atd/corpus.hpp"

namespace atd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ModelDims {
  int K = 0;             // word representation width
  int F = 0;             // factors
  int D = 0;             // attribute vector width
  int context_size = 0;  // n - 1

  bool operator==(const ModelDims&) const = default;
};

// Trainable parameters of the factored multiplicative model. Every language
// has its own factors-to-vocabulary matrix and bias; the factors-to-hidden,
// factors-to-attribute and context matrices are shared.
struct FactoredParams {
  ModelDims dims;
  MatrixXd wfk;                  // F x K
  MatrixXd wfd;                  // F x D
  std::vector<MatrixXd> wfv;     // per language, F x V_l
  std::vector<MatrixXd> context; // n-1 matrices, K x K
  std::vector<VectorXd> bias;    // per language, V_l

  static FactoredParams zeros(const ModelDims& dims, std::span<const int> vocab_sizes);

  int num_languages() const { return static_cast<int>(wfv.size()); }
  int vocab_size(int lang) const;
  void validate() const;
};

// Attribute lookup table L (D x A); x = max(0, L(:,a)) when rectifying.
struct AttributeTable {
  MatrixXd lookup;
  bool rectify = true;

  static AttributeTable zeros(int D, int num_attributes, bool rectify = true);
  int size() const { return static_cast<int>(lookup.cols()); }
};

VectorXd attribute_vector(const AttributeTable& table, int attribute);
VectorXd rectify_if(const VectorXd& raw, bool rectify);

// K x V matrix (Wfk)^T Wfv used to embed context words.
MatrixXd folded_embedding(const FactoredParams& params, int lang = 0);

// V x K matrix (Wfv)^T diag(Wfd x) Wfk; row w is word w's representation
// under attribute vector x.
MatrixXd conditioned_embedding(const FactoredParams& params, const VectorXd& x, int lang = 0);

// Same as conditioned_embedding with the gate Wfd x replaced by all ones.
MatrixXd unconditioned_embedding(const FactoredParams& params, int lang = 0);

// Single row of conditioned_embedding without materializing the matrix.
VectorXd conditioned_row(const FactoredParams& params, const VectorXd& gate, int lang, int word);

struct ForwardTrace {
  std::vector<VectorXd> context_embeddings;  // E(:, w_i)
  VectorXd rhat;      // K, predicted representation
  VectorXd hidden;    // F, Wfk rhat
  VectorXd gate;      // F, Wfd x
  VectorXd factors;   // F, hidden .* gate
  VectorXd logits;    // V
  VectorXd log_probs; // V
};

ForwardTrace forward(const FactoredParams& params, const VectorXd& x,
                     const TrainingExample& example);
ForwardTrace forward(const FactoredParams& params, const AttributeTable& table,
                     const TrainingExample& example);

VectorXd log_softmax(const VectorXd& logits);

// Mean negative log-likelihood over the batch.
double nll_loss(const FactoredParams& params, const AttributeTable& table,
                std::span<const TrainingExample> batch);

// Same shapes as the parameter groups.
struct Gradients {
  MatrixXd wfk;
  MatrixXd wfd;
  std::vector<MatrixXd> wfv;
  std::vector<MatrixXd> context;
  std::vector<VectorXd> bias;
  MatrixXd lookup;

  static Gradients zeros_like(const FactoredParams& params, const AttributeTable& table);
  void set_zero();
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double s);
  double squared_norm() const;
};

// Visits every parameter group in a fixed order as (name, values). Names are
// "Wfk", "Wfd", "Wfv[l]", "C[i]", "b[l]" and "L"; vectors are viewed as
// single-column matrices.
using GroupView = Eigen::Map<MatrixXd>;
using ConstGroupView = Eigen::Map<const MatrixXd>;
void for_each_group(const FactoredParams& params, const AttributeTable& table,
                    const std::function<void(const std::string&, ConstGroupView)>& fn);
void for_each_group(FactoredParams& params, AttributeTable& table,
                    const std::function<void(const std::string&, GroupView)>& fn);
void for_each_group(const Gradients& grads,
                    const std::function<void(const std::string&, ConstGroupView)>& fn);
void for_each_group(Gradients& grads,
                    const std::function<void(const std::string&, GroupView)>& fn);

struct BackwardOptions {
  // Examples are split into this many contiguous chunks whose partial sums are
  // reduced in chunk order, so results depend only on the chunk count.
  int threads = 1;
};

// Analytic gradients of the mean NLL over the batch. Returns the loss.
double backward(const FactoredParams& params, const AttributeTable& table,
                std::span<const TrainingExample> batch, Gradients& grads,
                const BackwardOptions& options = {});

// Mean NLL and its gradient with respect to a single raw attribute column,
// which replaces the attribute of every example. Other parameters are read-only.
double attribute_loss_and_gradient(const FactoredParams& params, const VectorXd& raw,
                                   bool rectify, std::span<const TrainingExample> batch,
                                   VectorXd& grad);

// Plain log-bilinear model: rhat = sum_i C_i r_{w_i}, logits = R rhat + b.
// `reps` is V x K.
VectorXd lbl_forward(const MatrixXd& reps, std::span<const MatrixXd> context,
                     const VectorXd& bias, const TrainingExample& example);

struct InitConfig {
  double weight_scale = 0.2;     // weights ~ U(-s, s)
  double attribute_scale = 1.0;  // lookup ~ U(0, s)
  bool unigram_bias = true;      // bias = log unigram frequency
};

// Initializes every group from a seeded stream. `unigram_counts[l][w]` feeds
// the log-frequency bias; pass an empty span for zero biases.
void initialize(FactoredParams& params, AttributeTable& table, std::uint64_t seed,
                const InitConfig& config = {},
                std::span<const std::vector<double>> unigram_counts = {});

std::vector<std::vector<double>> unigram_counts(const EncodedCorpus& corpus,
                                                std::span<const int> vocab_sizes);

// Imports `word v1 ... vK` lines: Wfk becomes an identity-padded F x K block
// and each listed word's Wfv column takes its vector in the first K factors.
// Returns the number of words found in the vocabulary.
int import_embeddings(std::istream& in, const Vocabulary& vocab, FactoredParams& params,
                      int lang = 0);

// First non-finite group, or empty when all values are finite.
std::string first_non_finite(const FactoredParams& params, const AttributeTable& table);

}  // namespace atd
