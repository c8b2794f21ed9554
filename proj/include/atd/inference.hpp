#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atd/model.hpp"

namespace atd {

enum class InitMode { Zeros, Random, WordAverage };

struct InferenceConfig {
  InitMode init = InitMode::Random;
  int steps = 30;
  double lr = 0.1;
  std::uint64_t seed = 1;
  double random_scale = 1.0;  // Random init ~ U(0, random_scale)
};

struct InferenceResult {
  VectorXd raw;                 // inferred lookup column
  VectorXd x;                   // rectified attribute vector
  std::vector<double> losses;   // mean NLL before each step, then the final value
};

// Starting column for inference. WordAverage averages the folded embeddings
// E(:, w) of the words in the examples and keeps the first D coordinates
// (zero-padding when D > K).
VectorXd initial_attribute(const FactoredParams& params, std::span<const TrainingExample> examples,
                           const InferenceConfig& config);

// Full-batch gradient descent on a new attribute column with every model
// parameter frozen. The examples' attribute ids are ignored.
InferenceResult infer_attribute(const FactoredParams& params, bool rectify,
                                std::span<const TrainingExample> examples,
                                const InferenceConfig& config = {});

enum class SoftWeighting {
  Probabilities,  // softmax of the classifier log-probabilities
  RawLogProbs,    // the log-probabilities themselves, normalized by their sum
};

// Weighted average of the rectified attribute vectors.
VectorXd infer_soft_attribute(std::span<const double> log_probs, const AttributeTable& table,
                              SoftWeighting weighting = SoftWeighting::Probabilities);

}  // namespace atd
