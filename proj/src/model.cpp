#include "atd/model.hpp"

#include <cmath>
#include <istream>
#include <sstream>
#include <thread>

#include "atd/error.hpp"
#include "atd/random.hpp"

namespace atd {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

void check_example(const FactoredParams& p, const TrainingExample& ex) {
  require(ex.language >= 0 && ex.language < p.num_languages(),
          "language id " + std::to_string(ex.language) + " out of range");
  require(static_cast<int>(ex.context.size()) == p.dims.context_size,
          "context has " + std::to_string(ex.context.size()) + " words, model expects " +
              std::to_string(p.dims.context_size));
  const int V = p.vocab_size(ex.language);
  require(ex.target >= 0 && ex.target < V, "target id out of range");
  for (int w : ex.context) require(w >= 0 && w < V, "context id out of range");
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter containers

FactoredParams FactoredParams::zeros(const ModelDims& dims, std::span<const int> vocab_sizes) {
  require(dims.K > 0 && dims.F > 0 && dims.D > 0 && dims.context_size > 0,
          "model dimensions must be positive");
  require(!vocab_sizes.empty(), "at least one language is required");
  FactoredParams p;
  p.dims = dims;
  p.wfk = MatrixXd::Zero(dims.F, dims.K);
  p.wfd = MatrixXd::Zero(dims.F, dims.D);
  for (int v : vocab_sizes) {
    require(v > 0, "vocabulary size must be positive");
    p.wfv.push_back(MatrixXd::Zero(dims.F, v));
    p.bias.push_back(VectorXd::Zero(v));
  }
  p.context.assign(static_cast<std::size_t>(dims.context_size), MatrixXd::Zero(dims.K, dims.K));
  return p;
}

int FactoredParams::vocab_size(int lang) const {
  require(lang >= 0 && lang < num_languages(), "language id out of range");
  return static_cast<int>(wfv[static_cast<std::size_t>(lang)].cols());
}

void FactoredParams::validate() const {
  const auto& d = dims;
  require(wfk.rows() == d.F && wfk.cols() == d.K, "Wfk must be F x K");
  require(wfd.rows() == d.F && wfd.cols() == d.D, "Wfd must be F x D");
  require(static_cast<int>(context.size()) == d.context_size, "need n-1 context matrices");
  for (const auto& c : context) require(c.rows() == d.K && c.cols() == d.K, "C must be K x K");
  require(wfv.size() == bias.size() && !wfv.empty(), "one Wfv and one bias per language");
  for (std::size_t l = 0; l < wfv.size(); ++l) {
    require(wfv[l].rows() == d.F, "Wfv must have F rows");
    require(bias[l].size() == wfv[l].cols(), "bias length must equal vocabulary size");
  }
}

AttributeTable AttributeTable::zeros(int D, int num_attributes, bool rectify) {
  require(D > 0 && num_attributes >= 0, "bad attribute table shape");
  return AttributeTable{MatrixXd::Zero(D, num_attributes), rectify};
}

VectorXd rectify_if(const VectorXd& raw, bool rectify) {
  return rectify ? VectorXd(raw.cwiseMax(0.0)) : raw;
}

VectorXd attribute_vector(const AttributeTable& table, int attribute) {
  require(attribute >= 0 && attribute < table.size(),
          "attribute id " + std::to_string(attribute) + " out of range");
  return rectify_if(table.lookup.col(attribute), table.rectify);
}

// ---------------------------------------------------------------------------
// Embeddings

MatrixXd folded_embedding(const FactoredParams& p, int lang) {
  p.vocab_size(lang);
  return p.wfk.transpose() * p.wfv[static_cast<std::size_t>(lang)];
}

MatrixXd conditioned_embedding(const FactoredParams& p, const VectorXd& x, int lang) {
  require(x.size() == p.dims.D, "attribute vector must have D entries");
  p.vocab_size(lang);
  const VectorXd gate = p.wfd * x;
  return p.wfv[static_cast<std::size_t>(lang)].transpose() * gate.asDiagonal() * p.wfk;
}

MatrixXd unconditioned_embedding(const FactoredParams& p, int lang) {
  p.vocab_size(lang);
  return p.wfv[static_cast<std::size_t>(lang)].transpose() * p.wfk;
}

VectorXd conditioned_row(const FactoredParams& p, const VectorXd& gate, int lang, int word) {
  require(word >= 0 && word < p.vocab_size(lang), "word id out of range");
  return p.wfk.transpose() * gate.cwiseProduct(p.wfv[static_cast<std::size_t>(lang)].col(word));
}

// ---------------------------------------------------------------------------
// Forward

VectorXd log_softmax(const VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

ForwardTrace forward(const FactoredParams& p, const VectorXd& x, const TrainingExample& ex) {
  check_example(p, ex);
  require(x.size() == p.dims.D, "attribute vector must have D entries");
  const auto& wfv = p.wfv[static_cast<std::size_t>(ex.language)];
  ForwardTrace t;
  t.rhat = VectorXd::Zero(p.dims.K);
  t.context_embeddings.reserve(ex.context.size());
  for (std::size_t i = 0; i < ex.context.size(); ++i) {
    t.context_embeddings.push_back(p.wfk.transpose() * wfv.col(ex.context[i]));
    t.rhat.noalias() += p.context[i] * t.context_embeddings.back();
  }
  t.hidden = p.wfk * t.rhat;
  t.gate = p.wfd * x;
  t.factors = t.hidden.cwiseProduct(t.gate);
  t.logits = wfv.transpose() * t.factors + p.bias[static_cast<std::size_t>(ex.language)];
  t.log_probs = log_softmax(t.logits);
  return t;
}

ForwardTrace forward(const FactoredParams& p, const AttributeTable& table,
                     const TrainingExample& ex) {
  return forward(p, attribute_vector(table, ex.attribute), ex);
}

double nll_loss(const FactoredParams& p, const AttributeTable& table,
                std::span<const TrainingExample> batch) {
  require(!batch.empty(), "nll_loss needs a non-empty batch");
  double total = 0.0;
  for (const auto& ex : batch) total -= forward(p, table, ex).log_probs[ex.target];
  return total / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------
// Gradients

Gradients Gradients::zeros_like(const FactoredParams& p, const AttributeTable& table) {
  Gradients g;
  g.wfk = MatrixXd::Zero(p.wfk.rows(), p.wfk.cols());
  g.wfd = MatrixXd::Zero(p.wfd.rows(), p.wfd.cols());
  for (const auto& m : p.wfv) g.wfv.push_back(MatrixXd::Zero(m.rows(), m.cols()));
  for (const auto& m : p.context) g.context.push_back(MatrixXd::Zero(m.rows(), m.cols()));
  for (const auto& b : p.bias) g.bias.push_back(VectorXd::Zero(b.size()));
  g.lookup = MatrixXd::Zero(table.lookup.rows(), table.lookup.cols());
  return g;
}

void Gradients::set_zero() {
  for_each_group(*this, [](const std::string&, GroupView m) { m.setZero(); });
}

Gradients& Gradients::operator+=(const Gradients& o) {
  wfk += o.wfk;
  wfd += o.wfd;
  for (std::size_t i = 0; i < wfv.size(); ++i) wfv[i] += o.wfv[i];
  for (std::size_t i = 0; i < context.size(); ++i) context[i] += o.context[i];
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += o.bias[i];
  lookup += o.lookup;
  return *this;
}

Gradients& Gradients::operator*=(double s) {
  for_each_group(*this, [s](const std::string&, GroupView m) { m *= s; });
  return *this;
}

double Gradients::squared_norm() const {
  double n = 0.0;
  for_each_group(*this, [&n](const std::string&, ConstGroupView m) { n += m.squaredNorm(); });
  return n;
}

namespace {

// Shared by the const and mutable visitors; `Owner` is FactoredParams or
// Gradients (possibly const), `lookup` the matching attribute matrix.
template <class Owner, class Lookup, class Fn>
void visit_groups(Owner& o, Lookup& lookup, Fn&& fn) {
  using View = std::conditional_t<std::is_const_v<Owner>, ConstGroupView, GroupView>;
  auto view = [](auto& m) { return View(m.data(), m.rows(), m.cols()); };
  fn("Wfk", view(o.wfk));
  fn("Wfd", view(o.wfd));
  for (std::size_t l = 0; l < o.wfv.size(); ++l) fn("Wfv[" + std::to_string(l) + "]", view(o.wfv[l]));
  for (std::size_t i = 0; i < o.context.size(); ++i) fn("C[" + std::to_string(i) + "]", view(o.context[i]));
  for (std::size_t l = 0; l < o.bias.size(); ++l) fn("b[" + std::to_string(l) + "]", view(o.bias[l]));
  fn("L", view(lookup));
}

}  // namespace

void for_each_group(const FactoredParams& p, const AttributeTable& table,
                    const std::function<void(const std::string&, ConstGroupView)>& fn) {
  visit_groups(p, table.lookup, fn);
}

void for_each_group(FactoredParams& p, AttributeTable& table,
                    const std::function<void(const std::string&, GroupView)>& fn) {
  visit_groups(p, table.lookup, fn);
}

void for_each_group(const Gradients& g,
                    const std::function<void(const std::string&, ConstGroupView)>& fn) {
  visit_groups(g, g.lookup, fn);
}

void for_each_group(Gradients& g, const std::function<void(const std::string&, GroupView)>& fn) {
  visit_groups(g, g.lookup, fn);
}

// ---------------------------------------------------------------------------
// Backward

namespace {

// Per-example backward pass. Accumulates (unscaled) gradients into `grads`
// when non-null, and the gradient of the raw attribute column into `d_raw`.
// The Wfv outer-product term is deferred: the factor vector and the logit
// gradient are written into columns of `factor_cols` / `dlogit_cols` so the
// caller can apply one matrix product per language.
double example_backward(const FactoredParams& p, const VectorXd& raw, bool rectify,
                        const TrainingExample& ex, Gradients* grads, VectorXd* d_raw,
                        Eigen::Ref<VectorXd> factor_col, Eigen::Ref<VectorXd> dlogit_col) {
  const VectorXd x = rectify_if(raw, rectify);
  const ForwardTrace t = forward(p, x, ex);
  const auto& wfv = p.wfv[static_cast<std::size_t>(ex.language)];
  const double loss = -t.log_probs[ex.target];

  VectorXd dlogits = t.log_probs.array().exp();
  dlogits[ex.target] -= 1.0;
  const VectorXd dfactors = wfv * dlogits;
  const VectorXd dhidden = dfactors.cwiseProduct(t.gate);
  const VectorXd dgate = dfactors.cwiseProduct(t.hidden);
  VectorXd dx = p.wfd.transpose() * dgate;
  if (rectify) {
    for (Eigen::Index d = 0; d < dx.size(); ++d) {
      if (!(raw[d] > 0.0)) dx[d] = 0.0;
    }
  }
  if (d_raw) *d_raw += dx;
  if (!grads) return loss;

  factor_col = t.factors;
  dlogit_col = dlogits;
  grads->bias[static_cast<std::size_t>(ex.language)] += dlogits;
  grads->wfd.noalias() += dgate * x.transpose();
  grads->lookup.col(ex.attribute) += dx;
  grads->wfk.noalias() += dhidden * t.rhat.transpose();
  const VectorXd drhat = p.wfk.transpose() * dhidden;
  auto& gwfv = grads->wfv[static_cast<std::size_t>(ex.language)];
  for (std::size_t i = 0; i < ex.context.size(); ++i) {
    const int w = ex.context[i];
    grads->context[i].noalias() += drhat * t.context_embeddings[i].transpose();
    const VectorXd demb = p.context[i].transpose() * drhat;
    grads->wfk.noalias() += wfv.col(w) * demb.transpose();
    gwfv.col(w).noalias() += p.wfk * demb;
  }
  return loss;
}

double chunk_backward(const FactoredParams& p, const AttributeTable& table,
                      std::span<const TrainingExample> batch, Gradients& grads) {
  const int L = p.num_languages();
  std::vector<std::vector<std::size_t>> by_lang(static_cast<std::size_t>(L));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    by_lang[static_cast<std::size_t>(batch[i].language)].push_back(i);
  }
  double total = 0.0;
  for (int l = 0; l < L; ++l) {
    const auto& idx = by_lang[static_cast<std::size_t>(l)];
    if (idx.empty()) continue;
    const auto n = static_cast<Eigen::Index>(idx.size());
    MatrixXd factor_cols(p.dims.F, n);
    MatrixXd dlogit_cols(p.vocab_size(l), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& ex = batch[idx[static_cast<std::size_t>(j)]];
      require(ex.attribute >= 0 && ex.attribute < table.size(), "attribute id out of range");
      total += example_backward(p, table.lookup.col(ex.attribute), table.rectify, ex, &grads,
                                nullptr, factor_cols.col(j), dlogit_cols.col(j));
    }
    grads.wfv[static_cast<std::size_t>(l)].noalias() += factor_cols * dlogit_cols.transpose();
  }
  return total;
}

}  // namespace

double backward(const FactoredParams& p, const AttributeTable& table,
                std::span<const TrainingExample> batch, Gradients& grads,
                const BackwardOptions& options) {
  require(!batch.empty(), "backward needs a non-empty batch");
  grads = Gradients::zeros_like(p, table);
  const std::size_t chunks =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, options.threads)), batch.size());
  double total = 0.0;
  if (chunks == 1) {
    total = chunk_backward(p, table, batch, grads);
  } else {
    std::vector<Gradients> partial(chunks, grads);
    std::vector<double> losses(chunks, 0.0);
    std::vector<std::exception_ptr> errors(chunks);
    {
      std::vector<std::jthread> workers;
      for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t begin = batch.size() * c / chunks;
        const std::size_t end = batch.size() * (c + 1) / chunks;
        workers.emplace_back([&, c, begin, end] {
          try {
            losses[c] = chunk_backward(p, table, batch.subspan(begin, end - begin), partial[c]);
          } catch (...) {
            errors[c] = std::current_exception();
          }
        });
      }
    }
    for (std::size_t c = 0; c < chunks; ++c) {
      if (errors[c]) std::rethrow_exception(errors[c]);
      grads += partial[c];
      total += losses[c];
    }
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  grads *= scale;
  return total * scale;
}

double attribute_loss_and_gradient(const FactoredParams& p, const VectorXd& raw, bool rectify,
                                   std::span<const TrainingExample> batch, VectorXd& grad) {
  require(!batch.empty(), "attribute inference needs a non-empty batch");
  require(raw.size() == p.dims.D, "attribute vector must have D entries");
  grad = VectorXd::Zero(p.dims.D);
  VectorXd unused_f(p.dims.F);
  double total = 0.0;
  for (const auto& ex : batch) {
    VectorXd unused_l(p.vocab_size(ex.language));
    total += example_backward(p, raw, rectify, ex, nullptr, &grad, unused_f, unused_l);
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  grad *= scale;
  return total * scale;
}

// ---------------------------------------------------------------------------
// Log-bilinear baseline

VectorXd lbl_forward(const MatrixXd& reps, std::span<const MatrixXd> context,
                     const VectorXd& bias, const TrainingExample& ex) {
  require(context.size() == ex.context.size(), "context length mismatch");
  require(bias.size() == reps.rows(), "bias length must equal vocabulary size");
  const Eigen::Index K = reps.cols();
  VectorXd rhat = VectorXd::Zero(K);
  for (std::size_t i = 0; i < context.size(); ++i) {
    require(context[i].rows() == K && context[i].cols() == K, "C must be K x K");
    const int w = ex.context[i];
    require(w >= 0 && w < reps.rows(), "context id out of range");
    rhat.noalias() += context[i] * reps.row(w).transpose();
  }
  return log_softmax(reps * rhat + bias);
}

// ---------------------------------------------------------------------------
// Initialization and import

void initialize(FactoredParams& p, AttributeTable& table, std::uint64_t seed,
                const InitConfig& config, std::span<const std::vector<double>> counts) {
  Rng rng(seed);
  const double s = config.weight_scale;
  auto fill = [&](MatrixXd& m, double lo, double hi) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(lo, hi);
  };
  fill(p.wfk, -s, s);
  fill(p.wfd, -s, s);
  for (auto& m : p.wfv) fill(m, -s, s);
  for (auto& m : p.context) fill(m, -s, s);
  fill(table.lookup, 0.0, config.attribute_scale);
  for (std::size_t l = 0; l < p.bias.size(); ++l) {
    auto& b = p.bias[l];
    if (!config.unigram_bias || l >= counts.size()) {
      b.setZero();
      continue;
    }
    const auto& c = counts[l];
    require(static_cast<Eigen::Index>(c.size()) == b.size(), "unigram counts size mismatch");
    double total = 0.0;
    for (double v : c) total += v + 1.0;
    for (Eigen::Index w = 0; w < b.size(); ++w) {
      b[w] = std::log((c[static_cast<std::size_t>(w)] + 1.0) / total);
    }
  }
}

std::vector<std::vector<double>> unigram_counts(const EncodedCorpus& corpus,
                                                std::span<const int> vocab_sizes) {
  std::vector<std::vector<double>> counts;
  for (int v : vocab_sizes) counts.emplace_back(static_cast<std::size_t>(v), 0.0);
  for (const auto& d : corpus.documents) {
    auto& c = counts.at(static_cast<std::size_t>(d.language));
    for (int w : d.words) c.at(static_cast<std::size_t>(w)) += 1.0;
  }
  return counts;
}

int import_embeddings(std::istream& in, const Vocabulary& vocab, FactoredParams& p, int lang) {
  const int K = p.dims.K;
  if (p.dims.F < K) throw UsageError("embedding import needs F >= K");
  auto& wfv = p.wfv.at(static_cast<std::size_t>(lang));
  if (wfv.cols() != vocab.size()) throw UsageError("vocabulary does not match Wfv");
  p.wfk.setZero();
  p.wfk.topRows(K).setIdentity();
  int found = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    VectorXd v(K);
    for (int k = 0; k < K; ++k) {
      if (!(ls >> v[k])) {
        throw DataError("embedding line " + std::to_string(lineno) + " has fewer than " +
                        std::to_string(K) + " values");
      }
    }
    auto id = vocab.find(normalize_token(word));
    if (!id) continue;
    wfv.col(*id).head(K) = v;
    ++found;
  }
  return found;
}

std::string first_non_finite(const FactoredParams& p, const AttributeTable& table) {
  std::string bad;
  for_each_group(p, table, [&bad](const std::string& name, ConstGroupView m) {
    if (bad.empty() && !m.allFinite()) bad = name;
  });
  return bad;
}

}  // namespace atd
