#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atd/model.hpp"
#include "atd/random.hpp"

namespace atd {

struct SampleConfig {
  int length = 20;
  double temperature = 1.0;
  bool greedy = false;         // argmax instead of sampling
  bool allow_special = false;  // permit PAD and UNK
  std::uint64_t seed = 1;
  int lang = 0;
};

// Next-word distribution for the given context under x, after temperature
// scaling and, unless allowed, removal of PAD and UNK.
VectorXd next_word_distribution(const FactoredParams& params, const VectorXd& x,
                                std::span<const int> context, int lang, double temperature,
                                bool allow_special);

// Inverse-CDF draw from a normalized distribution.
int draw(const VectorXd& probs, Rng& rng);

// Autoregressive sampling with a sliding context. `seed_context` holds the
// most recent words and is left-padded with PAD to the model's context size.
std::vector<int> sample(const FactoredParams& params, const VectorXd& x,
                        std::span<const int> seed_context, const SampleConfig& config);

// Convex combination of rectified attribute vectors.
VectorXd mix_attributes(const AttributeTable& table, std::span<const int> attributes,
                        std::span<const double> weights);

// Step t is conditioned on attribute_vector(attributes[t]); generates one word
// per entry.
std::vector<int> sample_with_attribute_sequence(const FactoredParams& params,
                                                const AttributeTable& table,
                                                std::span<const int> attributes,
                                                std::span<const int> seed_context,
                                                SampleConfig config);

}  // namespace atd
