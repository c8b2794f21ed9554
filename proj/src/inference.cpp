#include "atd/inference.hpp"

#include <cmath>

#include "atd/error.hpp"
#include "atd/random.hpp"

namespace atd {

VectorXd initial_attribute(const FactoredParams& params, std::span<const TrainingExample> examples,
                           const InferenceConfig& config) {
  const int D = params.dims.D;
  switch (config.init) {
    case InitMode::Zeros:
      return VectorXd::Zero(D);
    case InitMode::Random: {
      Rng rng(config.seed);
      VectorXd v(D);
      for (int d = 0; d < D; ++d) v[d] = rng.uniform(0.0, config.random_scale);
      return v;
    }
    case InitMode::WordAverage: {
      if (examples.empty()) throw UsageError("word-average init needs at least one word");
      VectorXd mean = VectorXd::Zero(params.dims.K);
      for (const auto& ex : examples) {
        const auto& wfv = params.wfv.at(static_cast<std::size_t>(ex.language));
        mean.noalias() += params.wfk.transpose() * wfv.col(ex.target);
      }
      mean /= static_cast<double>(examples.size());
      VectorXd v = VectorXd::Zero(D);
      const int n = std::min(D, params.dims.K);
      v.head(n) = mean.head(n);
      return v;
    }
  }
  return VectorXd::Zero(D);
}

InferenceResult infer_attribute(const FactoredParams& params, bool rectify,
                                std::span<const TrainingExample> examples,
                                const InferenceConfig& config) {
  if (examples.empty()) throw UsageError("attribute inference needs at least one context");
  if (config.steps < 0) throw UsageError("steps must be non-negative");
  InferenceResult r;
  r.raw = initial_attribute(params, examples, config);
  VectorXd grad;
  for (int step = 0; step < config.steps; ++step) {
    r.losses.push_back(attribute_loss_and_gradient(params, r.raw, rectify, examples, grad));
    r.raw -= config.lr * grad;
  }
  r.losses.push_back(attribute_loss_and_gradient(params, r.raw, rectify, examples, grad));
  if (!r.raw.allFinite()) throw NonFiniteError("L", "attribute inference diverged");
  r.x = rectify_if(r.raw, rectify);
  return r;
}

VectorXd infer_soft_attribute(std::span<const double> log_probs, const AttributeTable& table,
                              SoftWeighting weighting) {
  if (static_cast<int>(log_probs.size()) != table.size()) {
    throw UsageError("need one log-probability per attribute");
  }
  if (log_probs.empty()) throw UsageError("attribute table is empty");
  for (double lp : log_probs) {
    if (!std::isfinite(lp)) throw UsageError("log-probabilities must be finite");
  }
  VectorXd w(static_cast<Eigen::Index>(log_probs.size()));
  for (std::size_t a = 0; a < log_probs.size(); ++a) w[static_cast<Eigen::Index>(a)] = log_probs[a];
  if (weighting == SoftWeighting::Probabilities) {
    w = (w.array() - w.maxCoeff()).exp();
  }
  const double total = w.sum();
  if (total == 0.0) throw DataError("attribute weights sum to zero");
  w /= total;
  VectorXd x = VectorXd::Zero(table.lookup.rows());
  for (int a = 0; a < table.size(); ++a) x.noalias() += w[a] * attribute_vector(table, a);
  return x;
}

}  // namespace atd
