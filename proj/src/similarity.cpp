#include "atd/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "atd/error.hpp"

namespace atd {

double cosine(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size()) throw UsageError("cosine of vectors with different sizes");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DataError("cosine with a zero vector");
  return a.dot(b) / (na * nb);
}

std::vector<Neighbor> rank_by_cosine(const MatrixXd& candidates, const VectorXd& query,
                                     int top_k, int exclude) {
  if (top_k < 0) throw UsageError("top_k must be non-negative");
  if (query.size() != candidates.cols()) throw UsageError("query width mismatch");
  const double qn = query.norm();
  if (qn == 0.0) throw DataError("query vector is zero");
  std::vector<Neighbor> out;
  bool any_nonzero = false;
  for (int w = 0; w < candidates.rows(); ++w) {
    if (w < kNumSpecial || w == exclude) continue;
    const double n = candidates.row(w).norm();
    if (n == 0.0) continue;
    any_nonzero = true;
    out.push_back({w, candidates.row(w).dot(query) / (n * qn)});
  }
  if (!any_nonzero) throw DataError("every candidate vector is zero");
  const auto k = std::min(out.size(), static_cast<std::size_t>(top_k));
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), out.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      return a.cosine != b.cosine ? a.cosine > b.cosine : a.word < b.word;
                    });
  out.resize(k);
  return out;
}

std::vector<Neighbor> conditional_neighbors(const FactoredParams& params, const VectorXd& x,
                                            int word, int top_k, int lang) {
  const MatrixXd t = conditioned_embedding(params, x, lang);
  if (word < 0 || word >= t.rows()) throw DataError("query word id out of range");
  return rank_by_cosine(t, t.row(word).transpose(), top_k, word);
}

std::vector<Neighbor> conditional_neighbors(const FactoredParams& params,
                                            const AttributeTable& table, int word,
                                            int attribute, int top_k, int lang) {
  return conditional_neighbors(params, attribute_vector(table, attribute), word, top_k, lang);
}

CommonUnique common_unique(const FactoredParams& params, const AttributeTable& table, int word,
                           int attr_a, int attr_b, int list_size, int report_size, int lang) {
  if (report_size < 0 || list_size < report_size) {
    throw UsageError("need 0 <= report size <= list size");
  }
  const auto a = conditional_neighbors(params, table, word, attr_a, list_size, lang);
  const auto b = conditional_neighbors(params, table, word, attr_b, list_size, lang);
  auto contains = [](const std::vector<Neighbor>& xs, int w) {
    return std::any_of(xs.begin(), xs.end(), [w](const Neighbor& n) { return n.word == w; });
  };
  CommonUnique out;
  const auto cap = static_cast<std::size_t>(report_size);
  for (const auto& n : a) {
    auto& dst = contains(b, n.word) ? out.common : out.unique_a;
    if (dst.size() < cap) dst.push_back(n);
  }
  for (const auto& n : b) {
    if (!contains(a, n.word) && out.unique_b.size() < cap) out.unique_b.push_back(n);
  }
  return out;
}

std::vector<Neighbor> crosslingual_neighbors(const FactoredParams& params,
                                             const AttributeTable& table, int word,
                                             int source_lang, int target_lang, int top_k) {
  const MatrixXd source = conditioned_embedding(params, attribute_vector(table, source_lang),
                                                source_lang);
  if (word < 0 || word >= source.rows()) throw DataError("query word id out of range");
  const VectorXd query = source.row(word).transpose();
  if (source_lang == target_lang) return rank_by_cosine(source, query, top_k, word);
  const MatrixXd target = conditioned_embedding(params, attribute_vector(table, target_lang),
                                                target_lang);
  return rank_by_cosine(target, query, top_k);
}

VectorXd collocation_repr(const FactoredParams& params, const AttributeTable& table,
                          std::span<const int> words, int attribute, int lang) {
  if (words.empty()) throw UsageError("collocation has no words");
  const VectorXd gate = params.wfd * attribute_vector(table, attribute);
  VectorXd sum = VectorXd::Zero(params.dims.K);
  for (int w : words) {
    if (w < 0 || w >= params.vocab_size(lang)) throw DataError("collocation word out of range");
    sum += conditioned_row(params, gate, lang, w);
  }
  const double n = sum.norm();
  if (n == 0.0) throw DataError("collocation representation is zero");
  return sum / n;
}

std::vector<Neighbor> neighbors_of_vector(const FactoredParams& params,
                                          const AttributeTable& table, const VectorXd& query,
                                          int attribute, int top_k, int lang) {
  return rank_by_cosine(conditioned_embedding(params, attribute_vector(table, attribute), lang),
                        query, top_k);
}

std::vector<Neighbor> rank_collocations(const FactoredParams& params,
                                        const AttributeTable& table, const VectorXd& query,
                                        std::span<const std::vector<int>> candidates,
                                        int attribute, int top_k, int lang) {
  if (query.norm() == 0.0) throw DataError("query vector is zero");
  std::vector<Neighbor> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const VectorXd r = collocation_repr(params, table, candidates[i], attribute, lang);
    out.push_back({static_cast<int>(i), cosine(r, query)});
  }
  std::stable_sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.cosine > b.cosine;
  });
  if (top_k >= 0 && out.size() > static_cast<std::size_t>(top_k)) {
    out.resize(static_cast<std::size_t>(top_k));
  }
  return out;
}

CorrelationMatrix attribute_correlation(const AttributeTable& table,
                                        std::span<const int> attributes, CorrelationKind kind) {
  if (attributes.size() < 2) throw UsageError("correlation needs at least two attributes");
  const auto n = static_cast<int>(attributes.size());
  std::vector<VectorXd> vs;
  for (int a : attributes) {
    VectorXd v = attribute_vector(table, a);
    if (kind == CorrelationKind::Pearson) v.array() -= v.mean();
    vs.push_back(std::move(v));
  }
  CorrelationMatrix out;
  out.values.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double ni = vs[static_cast<std::size_t>(i)].norm();
      const double nj = vs[static_cast<std::size_t>(j)].norm();
      double c = std::numeric_limits<double>::quiet_NaN();
      if (ni > 0.0 && nj > 0.0) {
        c = i == j ? 1.0
                   : vs[static_cast<std::size_t>(i)].dot(vs[static_cast<std::size_t>(j)]) /
                         (ni * nj);
      } else {
        out.undefined.emplace_back(i, j);
      }
      out.values(i, j) = c;
      out.values(j, i) = c;
    }
  }
  return out;
}

}  // namespace atd
