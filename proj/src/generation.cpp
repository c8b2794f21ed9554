#include "atd/generation.hpp"

#include <cmath>
#include <limits>

#include "atd/error.hpp"

namespace atd {

namespace {

TrainingExample make_example(std::span<const int> context, int n, int lang) {
  TrainingExample ex;
  ex.context.assign(static_cast<std::size_t>(n), kPadId);
  const int have = static_cast<int>(context.size());
  const int take = std::min(have, n);
  for (int i = 0; i < take; ++i) {
    ex.context[static_cast<std::size_t>(n - take + i)] =
        context[static_cast<std::size_t>(have - take + i)];
  }
  ex.target = kPadId;
  ex.language = lang;
  return ex;
}

int argmax(const VectorXd& probs) {
  int best = 0;
  for (int i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

}  // namespace

VectorXd next_word_distribution(const FactoredParams& params, const VectorXd& x,
                                std::span<const int> context, int lang, double temperature,
                                bool allow_special) {
  if (!(temperature > 0.0)) throw UsageError("temperature must be positive");
  if (lang < 0 || lang >= params.num_languages()) throw UsageError("language id out of range");
  const TrainingExample ex = make_example(context, params.dims.context_size, lang);
  const ForwardTrace trace = forward(params, x, ex);
  VectorXd scaled = temperature == 1.0 ? trace.logits : VectorXd(trace.logits / temperature);
  if (!allow_special) {
    scaled[kPadId] = -std::numeric_limits<double>::infinity();
    scaled[kUnkId] = -std::numeric_limits<double>::infinity();
  }
  const double m = scaled.maxCoeff();
  if (!std::isfinite(m)) throw DataError("no word left to sample");
  VectorXd p = (scaled.array() - m).exp();
  if (!allow_special) p[kPadId] = p[kUnkId] = 0.0;
  return p / p.sum();
}

int draw(const VectorXd& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  if (last < 0) throw DataError("empty distribution");
  return last;
}

namespace {

std::vector<int> run(const FactoredParams& params, std::span<const VectorXd> xs,
                     std::span<const int> seed_context, const SampleConfig& config) {
  std::vector<int> history(seed_context.begin(), seed_context.end());
  const std::size_t start = history.size();
  Rng rng(config.seed);
  for (const VectorXd& x : xs) {
    const VectorXd p = next_word_distribution(params, x, history, config.lang,
                                              config.temperature, config.allow_special);
    history.push_back(config.greedy ? argmax(p) : draw(p, rng));
  }
  return {history.begin() + static_cast<std::ptrdiff_t>(start), history.end()};
}

}  // namespace

std::vector<int> sample(const FactoredParams& params, const VectorXd& x,
                        std::span<const int> seed_context, const SampleConfig& config) {
  if (config.length < 0) throw UsageError("length must be non-negative");
  if (x.size() != params.dims.D) throw UsageError("attribute vector has wrong width");
  std::vector<VectorXd> xs(static_cast<std::size_t>(config.length), x);
  return run(params, xs, seed_context, config);
}

VectorXd mix_attributes(const AttributeTable& table, std::span<const int> attributes,
                        std::span<const double> weights) {
  if (attributes.size() != weights.size()) {
    throw UsageError("attribute and weight lists differ in length");
  }
  if (attributes.empty()) throw UsageError("no attributes to mix");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw UsageError("mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw UsageError("mixture weights must sum to 1");
  VectorXd out = VectorXd::Zero(table.lookup.rows());
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    out += weights[i] * attribute_vector(table, attributes[i]);
  }
  return out;
}

std::vector<int> sample_with_attribute_sequence(const FactoredParams& params,
                                                const AttributeTable& table,
                                                std::span<const int> attributes,
                                                std::span<const int> seed_context,
                                                SampleConfig config) {
  if (attributes.empty()) throw UsageError("attribute sequence is empty");
  std::vector<VectorXd> xs;
  xs.reserve(attributes.size());
  for (int a : attributes) {
    if (a < 0 || a >= table.size()) {
      throw UsageError("attribute id " + std::to_string(a) + " out of range");
    }
    xs.push_back(attribute_vector(table, a));
  }
  config.length = static_cast<int>(attributes.size());
  return run(params, xs, seed_context, config);
}

}  // namespace atd
