#pragma once

#include <span>
#include <utility>
#include <vector>

#include "atd/model.hpp"

namespace atd {

struct Neighbor {
  int word = 0;
  double cosine = 0.0;

  bool operator==(const Neighbor&) const = default;
};

// Throws DataError when either vector is zero.
double cosine(const VectorXd& a, const VectorXd& b);

// Rows of `candidates` ranked by cosine to `query`, highest first, ties by
// lower row. Special tokens, `exclude` and zero rows are skipped; a query or
// candidate set that is entirely zero is a DataError.
std::vector<Neighbor> rank_by_cosine(const MatrixXd& candidates, const VectorXd& query,
                                     int top_k, int exclude = -1);

std::vector<Neighbor> conditional_neighbors(const FactoredParams& params, const VectorXd& x,
                                            int word, int top_k, int lang = 0);
std::vector<Neighbor> conditional_neighbors(const FactoredParams& params,
                                            const AttributeTable& table, int word,
                                            int attribute, int top_k, int lang = 0);

struct CommonUnique {
  std::vector<Neighbor> common;    // cosines under attribute A
  std::vector<Neighbor> unique_a;
  std::vector<Neighbor> unique_b;
};

CommonUnique common_unique(const FactoredParams& params, const AttributeTable& table, int word,
                           int attr_a, int attr_b, int list_size = 15, int report_size = 3,
                           int lang = 0);

// Query row under the source language's vector, candidates under the target's.
// Language l is conditioned on attribute column l.
std::vector<Neighbor> crosslingual_neighbors(const FactoredParams& params,
                                             const AttributeTable& table, int word,
                                             int source_lang, int target_lang, int top_k);

// Unit-norm sum of the words' conditioned rows.
VectorXd collocation_repr(const FactoredParams& params, const AttributeTable& table,
                          std::span<const int> words, int attribute, int lang = 0);

// Single words nearest to an arbitrary query vector under `attribute`.
std::vector<Neighbor> neighbors_of_vector(const FactoredParams& params,
                                          const AttributeTable& table, const VectorXd& query,
                                          int attribute, int top_k, int lang = 0);

// Candidate collocations ranked by cosine of their representations to the
// query; Neighbor::word is the index into `candidates`.
std::vector<Neighbor> rank_collocations(const FactoredParams& params,
                                        const AttributeTable& table, const VectorXd& query,
                                        std::span<const std::vector<int>> candidates,
                                        int attribute, int top_k, int lang = 0);

enum class CorrelationKind { Pearson, Cosine };

struct CorrelationMatrix {
  MatrixXd values;  // NaN where undefined
  std::vector<std::pair<int, int>> undefined;  // (i, j) with i <= j
};

// Correlation between rectified attribute vectors.
CorrelationMatrix attribute_correlation(const AttributeTable& table,
                                        std::span<const int> attributes,
                                        CorrelationKind kind = CorrelationKind::Pearson);

}  // namespace atd
