#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "atd/corpus.hpp"
#include "atd/model.hpp"
#include "atd/trainer.hpp"

namespace atd {

// Languages double as attributes: language l is gated by attribute column l.

struct SentencePair {
  int lang_a = 0;
  int lang_b = 0;
  std::vector<int> a;  // sentence S in lang_a
  std::vector<int> b;  // its translation S' in lang_b
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;

  // Pairs with exactly this language direction.
  ParallelCorpus subset(int lang_a, int lang_b) const;
};

struct RawSentencePair {
  std::string lang_a, lang_b;
  std::vector<std::string> a, b;
};

// `<lang1>\t<lang2>\t<sent1>\t<sent2>` per line.
std::vector<RawSentencePair> read_parallel(std::istream& in);
std::vector<RawSentencePair> read_parallel_file(const std::string& path);

// Per-language vocabularies; the attribute registry mirrors the languages.
CorpusVocabulary build_parallel_vocabulary(std::span<const RawSentencePair> raw, int min_count,
                                           int max_size = 0);
ParallelCorpus encode_parallel(std::span<const RawSentencePair> raw, const CorpusVocabulary& cv);

struct RankingConfig {
  double margin = 1.0;  // alpha
  int contrastive = 5;  // k, resampled every epoch
  // Optimizer schedule; optim.weight_decay is lambda in lambda * ||theta||^2.
  TrainConfig optim;
  // When false, factors are split into equal contiguous blocks, one per
  // language, and Wfv_l is confined to block l. Languages then share no
  // factors-to-hidden or factors-to-attribute weights.
  bool share_factors = true;

  void validate() const;
};

// v(S) = sum_w T^l(w, :), before normalization.
VectorXd sentence_sum(const FactoredParams& params, const AttributeTable& table, int lang,
                      std::span<const int> words);

// v(S) scaled to unit norm. A zero sum is a DataError.
VectorXd sentence_repr(const FactoredParams& params, const AttributeTable& table, int lang,
                       std::span<const int> words);

// Sum of conditioned word vectors projected onto the unit ball.
VectorXd document_repr(const FactoredParams& params, const AttributeTable& table, int lang,
                       std::span<const int> words);

// ||theta||^2 over the groups the ranking objective touches: Wfk, Wfd, Wfv, L.
double ranking_param_norm2(const FactoredParams& params, const AttributeTable& table);

// sum_k max(0, alpha + ||v(S) - v(S')||^2 - ||v(S) - v(C_k)||^2) + lambda ||theta||^2
// with unit-norm sentence vectors. Contrastives are sentences in pair.lang_b.
double ranking_loss(const FactoredParams& params, const AttributeTable& table,
                    const SentencePair& pair, std::span<const std::vector<int>> contrastive,
                    double margin, double lambda);

// Adds the gradient of the hinge terms (without the lambda term) into `grads`
// and returns their sum.
double ranking_hinge_backward(const FactoredParams& params, const AttributeTable& table,
                              const SentencePair& pair,
                              std::span<const std::vector<int>> contrastive, double margin,
                              Gradients& grads);

// Zeroes the Wfv_l rows outside language l's factor block.
void confine_to_factor_blocks(FactoredParams& params);
void confine_to_factor_blocks(Gradients& grads, int factors);

// For each pair, up to k indices of other pairs with the same target language
// whose target sentence differs, drawn uniformly without replacement.
std::vector<std::vector<std::size_t>> sample_contrastive(const ParallelCorpus& corpus, int k,
                                                         std::uint64_t seed);

struct RankingEpoch {
  int epoch = 0;
  // (sum of hinge terms seen this epoch + lambda ||theta||^2 at its end) / N
  double mean_loss = 0.0;
  double lr = 0.0;
  double momentum = 0.0;
  double seconds = 0.0;
};

struct RankingReport {
  std::vector<RankingEpoch> epochs;
};

RankingReport train_ranking(FactoredParams& params, AttributeTable& table,
                            const ParallelCorpus& corpus, const RankingConfig& config,
                            const std::function<void(const RankingEpoch&)>& on_epoch = {});

// Precision@1 of retrieving each pair's b side among all b sides of `pairs`
// by cosine with its a side.
double retrieval_precision(const FactoredParams& params, const AttributeTable& table,
                           std::span<const SentencePair> pairs);

}  // namespace atd
