#include "atd/classify.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "atd/error.hpp"
#include "atd/random.hpp"

namespace atd {

using Triplet = Eigen::Triplet<double>;

TfidfFeatures tfidf_features(std::span<const std::vector<int>> docs, int vocab_size) {
  if (vocab_size < 1) throw UsageError("vocabulary size must be positive");
  std::vector<int> df(static_cast<std::size_t>(vocab_size), 0);
  std::vector<std::map<int, int>> tf(docs.size());
  TfidfFeatures out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (docs[d].empty()) out.empty_rows.push_back(static_cast<int>(d));
    for (int w : docs[d]) {
      if (w < 0 || w >= vocab_size) throw DataError("word id out of range in tf-idf input");
      if (tf[d][w]++ == 0) ++df[static_cast<std::size_t>(w)];
    }
  }
  const double n = static_cast<double>(docs.size());
  std::vector<Triplet> triplets;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (auto [w, count] : tf[d]) {
      const double idf = std::log(n / df[static_cast<std::size_t>(w)]);
      if (idf > 0.0) triplets.emplace_back(static_cast<int>(d), w, count * idf);
    }
  }
  out.features.resize(static_cast<Eigen::Index>(docs.size()), vocab_size);
  out.features.setFromTriplets(triplets.begin(), triplets.end());
  normalize_rows(out.features);
  return out;
}

void normalize_rows(FeatureMatrix& m) {
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    double s = 0.0;
    for (FeatureMatrix::InnerIterator it(m, r); it; ++it) s += it.value() * it.value();
    if (s == 0.0) continue;
    const double inv = 1.0 / std::sqrt(s);
    for (FeatureMatrix::InnerIterator it(m, r); it; ++it) it.valueRef() *= inv;
  }
}

FeatureMatrix to_features(const MatrixXd& dense) {
  FeatureMatrix out = dense.sparseView();
  out.makeCompressed();
  return out;
}

FeatureMatrix concat_features(std::span<const FeatureMatrix> blocks) {
  if (blocks.empty()) throw UsageError("no feature blocks to concatenate");
  const Eigen::Index rows = blocks.front().rows();
  Eigen::Index cols = 0;
  std::vector<Triplet> triplets;
  for (const FeatureMatrix& block : blocks) {
    if (block.rows() != rows) throw UsageError("feature blocks have different row counts");
    FeatureMatrix b = block;
    normalize_rows(b);
    for (Eigen::Index r = 0; r < b.outerSize(); ++r) {
      for (FeatureMatrix::InnerIterator it(b, r); it; ++it) {
        triplets.emplace_back(static_cast<int>(r), static_cast<int>(cols + it.col()), it.value());
      }
    }
    cols += b.cols();
  }
  FeatureMatrix out(rows, cols);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

MatrixXd document_vectors(const MatrixXd& embedding, std::span<const std::vector<int>> docs) {
  MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(docs.size()), embedding.cols());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (int w : docs[d]) {
      if (w < 0 || w >= embedding.rows()) throw DataError("word id out of range");
      out.row(static_cast<Eigen::Index>(d)) += embedding.row(w);
    }
    const double n = out.row(static_cast<Eigen::Index>(d)).norm();
    if (n > 0.0) out.row(static_cast<Eigen::Index>(d)) /= n;
  }
  return out;
}

MatrixXd embedding_features(const FactoredParams& params, const AttributeTable& table,
                            std::span<const Document> docs, bool conditioned) {
  std::map<std::pair<int, int>, MatrixXd> cache;
  MatrixXd out(static_cast<Eigen::Index>(docs.size()), params.dims.K);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const Document& doc = docs[d];
    const int attr = conditioned ? doc.attribute : -1;
    auto key = std::make_pair(attr, doc.language);
    auto it = cache.find(key);
    if (it == cache.end()) {
      MatrixXd e = conditioned
                       ? conditioned_embedding(params, attribute_vector(table, attr), doc.language)
                       : unconditioned_embedding(params, doc.language);
      it = cache.emplace(key, std::move(e)).first;
    }
    std::vector<int> words(doc.words.begin(), doc.words.end());
    out.row(static_cast<Eigen::Index>(d)) =
        document_vectors(it->second, std::span<const std::vector<int>>(&words, 1)).row(0);
  }
  return out;
}

int count_classes(std::span<const int> labels) {
  if (labels.empty()) throw UsageError("no labels");
  int lo = labels.front();
  int hi = labels.front();
  for (int y : labels) {
    if (y < 0) throw DataError("labels must be non-negative");
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  if (lo == hi) throw DataError("need at least two classes");
  return hi + 1;
}

namespace {

void check_inputs(const FeatureMatrix& x, std::span<const int> labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw UsageError("feature rows and labels differ in count");
  }
}

int argmax(const VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<int>(best);
}

}  // namespace

VectorXd LogisticModel::log_probs(const FeatureRow& x) const {
  return log_softmax(weights * x.transpose() + bias);
}

int LogisticModel::predict(const FeatureRow& x) const {
  return argmax(weights * x.transpose() + bias);
}

LogisticModel train_logistic(const FeatureMatrix& x, std::span<const int> labels,
                             const LogisticConfig& config) {
  check_inputs(x, labels);
  if (config.l2 < 0.0 || config.lr <= 0.0 || config.epochs < 0) {
    throw UsageError("need l2 >= 0, lr > 0 and epochs >= 0");
  }
  const int classes = count_classes(labels);
  LogisticModel m{MatrixXd::Zero(classes, x.cols()), VectorXd::Zero(classes)};
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  const double shrink = 1.0 / (1.0 + config.lr * config.l2);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const auto row = x.row(static_cast<Eigen::Index>(i));
      VectorXd g = m.log_probs(row).array().exp();
      g[labels[i]] -= 1.0;
      if (config.l2 > 0.0) m.weights *= shrink;
      for (FeatureMatrix::InnerIterator it(x, static_cast<Eigen::Index>(i)); it; ++it) {
        m.weights.col(it.col()) -= config.lr * it.value() * g;
      }
      m.bias -= config.lr * g;
    }
  }
  return m;
}

double logistic_objective(const LogisticModel& model, const FeatureMatrix& x,
                          std::span<const int> labels, double l2) {
  check_inputs(x, labels);
  double nll = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    nll -= model.log_probs(x.row(static_cast<Eigen::Index>(i)))[labels[i]];
  }
  return nll / static_cast<double>(labels.size()) + 0.5 * l2 * model.weights.squaredNorm();
}

void logistic_gradient(const LogisticModel& model, const FeatureMatrix& x,
                       std::span<const int> labels, double l2, MatrixXd& grad_weights,
                       VectorXd& grad_bias) {
  check_inputs(x, labels);
  grad_weights = MatrixXd::Zero(model.weights.rows(), model.weights.cols());
  grad_bias = VectorXd::Zero(model.bias.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = x.row(static_cast<Eigen::Index>(i));
    VectorXd g = model.log_probs(row).array().exp();
    g[labels[i]] -= 1.0;
    for (FeatureMatrix::InnerIterator it(x, static_cast<Eigen::Index>(i)); it; ++it) {
      grad_weights.col(it.col()) += it.value() * g;
    }
    grad_bias += g;
  }
  const double inv = 1.0 / static_cast<double>(labels.size());
  grad_weights = grad_weights * inv + l2 * model.weights;
  grad_bias *= inv;
}

VectorXd PerceptronModel::scores(const FeatureRow& x) const {
  return weights * x.transpose() + bias;
}

int PerceptronModel::predict(const FeatureRow& x) const { return argmax(scores(x)); }

PerceptronModel train_avg_perceptron(const FeatureMatrix& x, std::span<const int> labels,
                                     int epochs, std::uint64_t seed) {
  check_inputs(x, labels);
  if (epochs < 0) throw UsageError("epochs must be non-negative");
  const int classes = count_classes(labels);
  MatrixXd w = MatrixXd::Zero(classes, x.cols());
  VectorXd b = VectorXd::Zero(classes);
  // sum over updates of (step index before the update) * delta; the average
  // of the per-visit snapshots is then w - u / visits.
  MatrixXd uw = MatrixXd::Zero(classes, x.cols());
  VectorXd ub = VectorXd::Zero(classes);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  double visits = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const auto r = static_cast<Eigen::Index>(i);
      const int y = labels[i];
      const int pred = argmax(w * x.row(r).transpose() + b);
      if (pred != y) {
        for (FeatureMatrix::InnerIterator it(x, r); it; ++it) {
          w(y, it.col()) += it.value();
          w(pred, it.col()) -= it.value();
          uw(y, it.col()) += visits * it.value();
          uw(pred, it.col()) -= visits * it.value();
        }
        b[y] += 1.0;
        b[pred] -= 1.0;
        ub[y] += visits;
        ub[pred] -= visits;
      }
      visits += 1.0;
    }
  }
  if (visits == 0.0) return {w, b};
  return {w - uw / visits, b - ub / visits};
}

double accuracy(const std::function<int(const FeatureRow&)>& predict, const FeatureMatrix& x,
                std::span<const int> labels) {
  check_inputs(x, labels);
  if (labels.empty()) throw UsageError("no examples to score");
  std::size_t right = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predict(x.row(static_cast<Eigen::Index>(i))) == labels[i]) ++right;
  }
  return static_cast<double>(right) / static_cast<double>(labels.size());
}

FeatureMatrix select_rows(const FeatureMatrix& x, std::span<const int> rows) {
  std::vector<Triplet> triplets;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (FeatureMatrix::InnerIterator it(x, rows[k]); it; ++it) {
      triplets.emplace_back(static_cast<int>(k), static_cast<int>(it.col()), it.value());
    }
  }
  FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw UsageError("need at least two folds");
  if (n < static_cast<std::size_t>(folds)) throw DataError("fewer examples than folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<int> fold(n);
  for (std::size_t k = 0; k < n; ++k) fold[order[k]] = static_cast<int>(k % folds);
  return fold;
}

CrossValidation cross_validate(const FeatureMatrix& x, std::span<const int> labels, int folds,
                               std::uint64_t seed, const Trainer& trainer) {
  check_inputs(x, labels);
  const std::vector<int> fold = fold_assignment(labels.size(), folds, seed);
  CrossValidation out;
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train_rows, test_rows, train_y, test_y;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto& rows = fold[i] == f ? test_rows : train_rows;
      auto& ys = fold[i] == f ? test_y : train_y;
      rows.push_back(static_cast<int>(i));
      ys.push_back(labels[i]);
    }
    const auto predict = trainer(select_rows(x, train_rows), train_y);
    out.fold_accuracy.push_back(accuracy(predict, select_rows(x, test_rows), test_y));
  }
  out.mean = std::accumulate(out.fold_accuracy.begin(), out.fold_accuracy.end(), 0.0) / folds;
  return out;
}

void write_labeled_features(std::ostream& out, const FeatureMatrix& x,
                            std::span<const int> labels) {
  check_inputs(x, labels);
  auto old = out.precision(17);
  for (Eigen::Index r = 0; r < x.outerSize(); ++r) {
    out << labels[static_cast<std::size_t>(r)] << '\t';
    bool first = true;
    for (FeatureMatrix::InnerIterator it(x, r); it; ++it) {
      if (!first) out << ' ';
      out << it.col() << ':' << it.value();
      first = false;
    }
    out << '\n';
  }
  out.precision(old);
}

LabeledFeatures read_labeled_features(std::istream& in, int columns) {
  LabeledFeatures out;
  std::vector<Triplet> triplets;
  std::string line;
  int width = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = " on feature line " + std::to_string(lineno);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("missing tab" + where);
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(line.substr(0, tab), &used);
      if (used != tab) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("bad label" + where);
    }
    const int row = static_cast<int>(out.labels.size());
    out.labels.push_back(label);
    std::istringstream fields(line.substr(tab + 1));
    std::string field;
    while (fields >> field) {
      const auto colon = field.find(':');
      int idx = 0;
      double value = 0.0;
      try {
        if (colon == std::string::npos) throw std::invalid_argument("colon");
        std::size_t a = 0, b = 0;
        idx = std::stoi(field.substr(0, colon), &a);
        value = std::stod(field.substr(colon + 1), &b);
        if (a != colon || b != field.size() - colon - 1) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DataError("bad feature '" + field + "'" + where);
      }
      if (idx < 0) throw DataError("negative feature index" + where);
      if (columns > 0 && idx >= columns) throw DataError("feature index too large" + where);
      width = std::max(width, idx + 1);
      triplets.emplace_back(row, idx, value);
    }
  }
  out.features.resize(static_cast<Eigen::Index>(out.labels.size()), std::max(columns, width));
  out.features.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

}  // namespace atd
