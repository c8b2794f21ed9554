#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "atd/model.hpp"
#include "atd/random.hpp"

namespace atd::test {

struct Tiny {
  FactoredParams params;
  AttributeTable table;
};

inline Tiny random_model(const ModelDims& dims, std::vector<int> vocab_sizes, int attributes,
                         std::uint64_t seed, double scale = 0.5, bool rectify = true) {
  Tiny t{FactoredParams::zeros(dims, vocab_sizes),
         AttributeTable::zeros(dims.D, attributes, rectify)};
  Rng rng(seed);
  for_each_group(t.params, t.table, [&](const std::string& name, GroupView g) {
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      g.data()[i] = name == "L" ? rng.uniform(-0.3, 1.0) : rng.uniform(-scale, scale);
    }
  });
  return t;
}

inline TrainingExample random_example(Rng& rng, const FactoredParams& p, int attributes,
                                      int lang = 0) {
  TrainingExample ex;
  const auto v = static_cast<std::uint64_t>(p.vocab_size(lang));
  for (int i = 0; i < p.dims.context_size; ++i) ex.context.push_back(static_cast<int>(rng.below(v)));
  ex.target = static_cast<int>(rng.below(v));
  ex.attribute = static_cast<int>(rng.below(static_cast<std::uint64_t>(attributes)));
  ex.language = lang;
  return ex;
}

// FNV-1a over the raw bytes of every group.
inline std::uint64_t hash_groups(const FactoredParams& p, const AttributeTable& t,
                                 bool include_lookup = true) {
  std::uint64_t h = 1469598103934665603ull;
  for_each_group(p, t, [&](const std::string& name, ConstGroupView g) {
    if (!include_lookup && name == "L") return;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, g.data() + i, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 1099511628211ull;
      }
    }
  });
  return h;
}

// |a - b| / max(|a|, |b|, floor): the floor keeps entries whose true value is
// at the level of finite-difference noise from dominating.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Direct evaluation of the model from its definition with explicit loops:
// R = T^x computed entry by entry from the three-way tensor
// T(w, k, d) = sum_f Wfv(f, w) Wfk(f, k) Wfd(f, d), then the log-bilinear
// prediction with R as the word representation matrix.
inline std::vector<double> brute_force_log_probs(const FactoredParams& p, const VectorXd& x,
                                                 const TrainingExample& ex) {
  const int V = p.vocab_size(ex.language);
  const MatrixXd& wfv = p.wfv[static_cast<std::size_t>(ex.language)];
  const int K = p.dims.K, F = p.dims.F, D = p.dims.D;
  std::vector<std::vector<double>> R(static_cast<std::size_t>(V), std::vector<double>(K, 0.0));
  for (int w = 0; w < V; ++w) {
    for (int k = 0; k < K; ++k) {
      double s = 0.0;
      for (int d = 0; d < D; ++d) {
        double t = 0.0;
        for (int f = 0; f < F; ++f) t += wfv(f, w) * p.wfk(f, k) * p.wfd(f, d);
        s += t * x[d];
      }
      R[static_cast<std::size_t>(w)][static_cast<std::size_t>(k)] = s;
    }
  }
  // Context words use the unconditioned folded embedding (Wfk)^T Wfv.
  std::vector<double> rhat(static_cast<std::size_t>(K), 0.0);
  for (std::size_t i = 0; i < ex.context.size(); ++i) {
    const int w = ex.context[i];
    std::vector<double> e(static_cast<std::size_t>(K), 0.0);
    for (int k = 0; k < K; ++k) {
      for (int f = 0; f < F; ++f) e[static_cast<std::size_t>(k)] += p.wfk(f, k) * wfv(f, w);
    }
    for (int r = 0; r < K; ++r) {
      for (int c = 0; c < K; ++c) {
        rhat[static_cast<std::size_t>(r)] += p.context[i](r, c) * e[static_cast<std::size_t>(c)];
      }
    }
  }
  std::vector<double> logits(static_cast<std::size_t>(V));
  double m = -1e300;
  for (int w = 0; w < V; ++w) {
    double s = p.bias[static_cast<std::size_t>(ex.language)][w];
    for (int k = 0; k < K; ++k) {
      s += R[static_cast<std::size_t>(w)][static_cast<std::size_t>(k)] *
           rhat[static_cast<std::size_t>(k)];
    }
    logits[static_cast<std::size_t>(w)] = s;
    m = std::max(m, s);
  }
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  for (double& l : logits) l = l - m - std::log(z);
  return logits;
}

}  // namespace atd::test
