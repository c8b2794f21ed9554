#include "atd/crosslingual.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>

#include "atd/error.hpp"
#include "atd/random.hpp"

namespace atd {

ParallelCorpus ParallelCorpus::subset(int lang_a, int lang_b) const {
  ParallelCorpus out;
  for (const auto& p : pairs) {
    if (p.lang_a == lang_a && p.lang_b == lang_b) out.pairs.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

std::vector<RawSentencePair> read_parallel(std::istream& in) {
  std::vector<RawSentencePair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    const std::string where = "parallel line " + std::to_string(lineno);
    if (fields.size() != 4) throw DataError(where + ": need 4 tab-separated fields");
    RawSentencePair p{fields[0], fields[1], tokenize(fields[2]), tokenize(fields[3])};
    if (p.lang_a.empty() || p.lang_b.empty()) throw DataError(where + ": empty language code");
    if (p.a.empty() || p.b.empty()) throw DataError(where + ": empty sentence");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<RawSentencePair> read_parallel_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open parallel corpus " + path);
  return read_parallel(in);
}

CorpusVocabulary build_parallel_vocabulary(std::span<const RawSentencePair> raw, int min_count,
                                           int max_size) {
  if (raw.empty()) throw DataError("parallel corpus is empty");
  CorpusVocabulary cv;
  std::vector<std::vector<std::vector<std::string>>> by_lang;
  auto add = [&](const std::string& lang, const std::vector<std::string>& sent) {
    int id = cv.languages.add(lang);
    cv.attributes.add(lang);
    if (id == static_cast<int>(by_lang.size())) by_lang.emplace_back();
    by_lang[static_cast<std::size_t>(id)].push_back(sent);
  };
  for (const auto& p : raw) {
    add(p.lang_a, p.a);
    add(p.lang_b, p.b);
  }
  for (const auto& docs : by_lang) {
    cv.vocabularies.push_back(build_vocabulary(docs, min_count, max_size));
  }
  return cv;
}

ParallelCorpus encode_parallel(std::span<const RawSentencePair> raw, const CorpusVocabulary& cv) {
  ParallelCorpus out;
  for (const auto& r : raw) {
    SentencePair p;
    p.lang_a = cv.languages.id(r.lang_a);
    p.lang_b = cv.languages.id(r.lang_b);
    const auto& va = cv.vocabularies.at(static_cast<std::size_t>(p.lang_a));
    const auto& vb = cv.vocabularies.at(static_cast<std::size_t>(p.lang_b));
    for (const auto& w : r.a) p.a.push_back(va.id(w));
    for (const auto& w : r.b) p.b.push_back(vb.id(w));
    out.pairs.push_back(std::move(p));
  }
  return out;
}

void RankingConfig::validate() const {
  if (!(margin > 0.0)) throw UsageError("margin must be positive");
  if (contrastive < 1) throw UsageError("need at least one contrastive sentence");
  optim.validate();
}

// ---------------------------------------------------------------------------
// Representations

namespace {

// s = sum_w Wfv_l(:, w); v = Wfk^T (gate .* s).
VectorXd word_column_sum(const FactoredParams& p, int lang, std::span<const int> words) {
  const int V = p.vocab_size(lang);
  const auto& wfv = p.wfv[static_cast<std::size_t>(lang)];
  VectorXd s = VectorXd::Zero(p.dims.F);
  for (int w : words) {
    if (w < 0 || w >= V) throw UsageError("word id out of range");
    s += wfv.col(w);
  }
  return s;
}

struct SentenceState {
  VectorXd x;       // language vector
  VectorXd gate;    // Wfd x
  VectorXd sum;     // s
  VectorXd v;       // raw representation
  double norm = 0;
  VectorXd u;       // v / norm
};

SentenceState sentence_state(const FactoredParams& p, const AttributeTable& table, int lang,
                             std::span<const int> words) {
  if (words.empty()) throw UsageError("sentence is empty");
  SentenceState s;
  s.x = attribute_vector(table, lang);
  s.gate = p.wfd * s.x;
  s.sum = word_column_sum(p, lang, words);
  s.v = p.wfk.transpose() * s.gate.cwiseProduct(s.sum);
  s.norm = s.v.norm();
  if (!(s.norm > 0.0)) throw DataError("sentence representation is the zero vector");
  s.u = s.v / s.norm;
  return s;
}

// Backpropagates dL/du of a unit-norm sentence vector into the parameters.
void sentence_backward(const FactoredParams& p, const AttributeTable& table, int lang,
                       std::span<const int> words, const SentenceState& s, const VectorXd& du,
                       Gradients& g) {
  const VectorXd dv = (du - s.u * s.u.dot(du)) / s.norm;
  const VectorXd gated = s.gate.cwiseProduct(s.sum);
  g.wfk.noalias() += gated * dv.transpose();
  const VectorXd q = p.wfk * dv;
  const VectorXd dsum = q.cwiseProduct(s.gate);
  const VectorXd dgate = q.cwiseProduct(s.sum);
  auto& gwfv = g.wfv[static_cast<std::size_t>(lang)];
  for (int w : words) gwfv.col(w) += dsum;
  g.wfd.noalias() += dgate * s.x.transpose();
  VectorXd dx = p.wfd.transpose() * dgate;
  if (table.rectify) {
    for (Eigen::Index d = 0; d < dx.size(); ++d) {
      if (!(table.lookup(d, lang) > 0.0)) dx[d] = 0.0;
    }
  }
  g.lookup.col(lang) += dx;
}

}  // namespace

VectorXd sentence_sum(const FactoredParams& p, const AttributeTable& table, int lang,
                      std::span<const int> words) {
  if (words.empty()) throw UsageError("sentence is empty");
  const VectorXd gate = p.wfd * attribute_vector(table, lang);
  return p.wfk.transpose() * gate.cwiseProduct(word_column_sum(p, lang, words));
}

VectorXd sentence_repr(const FactoredParams& p, const AttributeTable& table, int lang,
                       std::span<const int> words) {
  return sentence_state(p, table, lang, words).u;
}

VectorXd document_repr(const FactoredParams& p, const AttributeTable& table, int lang,
                       std::span<const int> words) {
  if (words.empty()) throw UsageError("document is empty");
  VectorXd v = sentence_sum(p, table, lang, words);
  const double n = v.norm();
  if (n > 1.0) v /= n;
  return v;
}

double ranking_param_norm2(const FactoredParams& p, const AttributeTable& table) {
  double n = p.wfk.squaredNorm() + p.wfd.squaredNorm() + table.lookup.squaredNorm();
  for (const auto& m : p.wfv) n += m.squaredNorm();
  return n;
}

double ranking_loss(const FactoredParams& p, const AttributeTable& table,
                    const SentencePair& pair, std::span<const std::vector<int>> contrastive,
                    double margin, double lambda) {
  const VectorXd us = sentence_repr(p, table, pair.lang_a, pair.a);
  const VectorXd ut = sentence_repr(p, table, pair.lang_b, pair.b);
  const double pos = (us - ut).squaredNorm();
  double loss = 0.0;
  for (const auto& c : contrastive) {
    const VectorXd uc = sentence_repr(p, table, pair.lang_b, c);
    loss += std::max(0.0, margin + pos - (us - uc).squaredNorm());
  }
  return loss + lambda * ranking_param_norm2(p, table);
}

double ranking_hinge_backward(const FactoredParams& p, const AttributeTable& table,
                              const SentencePair& pair,
                              std::span<const std::vector<int>> contrastive, double margin,
                              Gradients& g) {
  const SentenceState s = sentence_state(p, table, pair.lang_a, pair.a);
  const SentenceState t = sentence_state(p, table, pair.lang_b, pair.b);
  const double pos = (s.u - t.u).squaredNorm();
  VectorXd du_s = VectorXd::Zero(s.u.size());
  VectorXd du_t = VectorXd::Zero(t.u.size());
  double loss = 0.0;
  for (const auto& c : contrastive) {
    const SentenceState cs = sentence_state(p, table, pair.lang_b, c);
    const double h = margin + pos - (s.u - cs.u).squaredNorm();
    if (h <= 0.0) continue;
    loss += h;
    du_s += 2.0 * (cs.u - t.u);
    du_t += 2.0 * (t.u - s.u);
    sentence_backward(p, table, pair.lang_b, c, cs, 2.0 * (s.u - cs.u), g);
  }
  if (loss > 0.0) {
    sentence_backward(p, table, pair.lang_a, pair.a, s, du_s, g);
    sentence_backward(p, table, pair.lang_b, pair.b, t, du_t, g);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training

namespace {

void zero_outside_block(std::vector<MatrixXd>& wfv, int factors) {
  const auto L = static_cast<int>(wfv.size());
  if (factors % L != 0) throw UsageError("F must be a multiple of the number of languages");
  const int block = factors / L;
  for (int l = 0; l < L; ++l) {
    auto& m = wfv[static_cast<std::size_t>(l)];
    for (int f = 0; f < factors; ++f) {
      if (f / block != l) m.row(f).setZero();
    }
  }
}

}  // namespace

void confine_to_factor_blocks(FactoredParams& params) {
  zero_outside_block(params.wfv, params.dims.F);
}

void confine_to_factor_blocks(Gradients& grads, int factors) {
  zero_outside_block(grads.wfv, factors);
}

std::vector<std::vector<std::size_t>> sample_contrastive(const ParallelCorpus& corpus, int k,
                                                         std::uint64_t seed) {
  if (k < 1) throw UsageError("need at least one contrastive sentence");
  std::map<int, std::vector<std::size_t>> by_target;
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    by_target[corpus.pairs[i].lang_b].push_back(i);
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> out(corpus.pairs.size());
  const auto ku = static_cast<std::size_t>(k);
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    const auto& pool = by_target[corpus.pairs[i].lang_b];
    auto valid = [&](std::size_t j) { return j != i && corpus.pairs[j].b != corpus.pairs[i].b; };
    auto& chosen = out[i];
    if (pool.size() <= 4 * ku) {
      std::vector<std::size_t> cand;
      for (std::size_t j : pool) {
        if (valid(j)) cand.push_back(j);
      }
      // Partial Fisher-Yates: the first k slots are a uniform sample.
      const std::size_t take = std::min(ku, cand.size());
      for (std::size_t t = 0; t < take; ++t) {
        std::size_t r = t + rng.below(cand.size() - t);
        std::swap(cand[t], cand[r]);
        chosen.push_back(cand[t]);
      }
    } else {
      std::size_t attempts = 0;
      while (chosen.size() < ku && attempts < 64 * ku) {
        ++attempts;
        std::size_t j = pool[rng.below(pool.size())];
        if (valid(j) && std::find(chosen.begin(), chosen.end(), j) == chosen.end()) {
          chosen.push_back(j);
        }
      }
    }
  }
  return out;
}

RankingReport train_ranking(FactoredParams& p, AttributeTable& table,
                            const ParallelCorpus& corpus, const RankingConfig& config,
                            const std::function<void(const RankingEpoch&)>& on_epoch) {
  config.validate();
  p.validate();
  if (corpus.pairs.size() < 2) throw DataError("ranking needs at least two sentence pairs");
  for (const auto& pair : corpus.pairs) {
    if (pair.a.empty() || pair.b.empty()) throw DataError("parallel pair with an empty side");
    if (std::max(pair.lang_a, pair.lang_b) >= table.size()) {
      throw UsageError("every language needs an attribute column");
    }
  }
  const auto& opt = config.optim;
  const double lambda = opt.weight_decay;

  if (!config.share_factors) confine_to_factor_blocks(p);

  RankingReport report;
  Gradients velocity = Gradients::zeros_like(p, table);
  Gradients grads = velocity;
  std::vector<std::size_t> order(corpus.pairs.size());
  std::vector<std::vector<int>> contrast;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const Schedule step = schedule(opt, epoch);
    const std::uint64_t epoch_seed = mix_seed(opt.seed, static_cast<std::uint64_t>(epoch));
    const auto sampled = sample_contrastive(corpus, config.contrastive, epoch_seed);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(epoch_seed, 1));
    rng.shuffle(std::span<std::size_t>(order));

    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(opt.batch_size));
      grads.set_zero();
      double hinge = 0.0;
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t i = order[b];
        contrast.clear();
        for (std::size_t j : sampled[i]) contrast.push_back(corpus.pairs[j].b);
        hinge += ranking_hinge_backward(p, table, corpus.pairs[i], contrast, config.margin, grads);
      }
      // The objective is sum_S hinge + lambda ||theta||^2; per batch we step on
      // its 1/N-scaled form, mean hinge + (lambda / N) ||theta||^2.
      grads *= 1.0 / static_cast<double>(end - begin);
      total += hinge;
      if (lambda > 0.0) {
        const double c = 2.0 * lambda / static_cast<double>(order.size());
        grads.wfk += c * p.wfk;
        grads.wfd += c * p.wfd;
        for (std::size_t l = 0; l < p.wfv.size(); ++l) grads.wfv[l] += c * p.wfv[l];
        grads.lookup += c * table.lookup;
      }
      if (!config.share_factors) confine_to_factor_blocks(grads, p.dims.F);
      apply_update(p, table, grads, velocity, step, 0.0, opt.grad_clip_norm);
    }
    RankingEpoch e;
    e.epoch = epoch;
    e.mean_loss = (total + lambda * ranking_param_norm2(p, table)) / static_cast<double>(order.size());
    e.lr = step.lr;
    e.momentum = step.momentum;
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return report;
}

double retrieval_precision(const FactoredParams& p, const AttributeTable& table,
                           std::span<const SentencePair> pairs) {
  if (pairs.empty()) throw UsageError("retrieval needs at least one pair");
  const auto n = static_cast<Eigen::Index>(pairs.size());
  MatrixXd src(p.dims.K, n), tgt(p.dims.K, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pair = pairs[static_cast<std::size_t>(i)];
    src.col(i) = sentence_repr(p, table, pair.lang_a, pair.a);
    tgt.col(i) = sentence_repr(p, table, pair.lang_b, pair.b);
  }
  const MatrixXd sims = src.transpose() * tgt;
  int correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < n; ++j) {
      if (sims(i, j) > sims(i, best)) best = j;
    }
    if (pairs[static_cast<std::size_t>(best)].b == pairs[static_cast<std::size_t>(i)].b) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace atd
