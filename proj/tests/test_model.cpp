#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "atd/error.hpp"
#include "atd/model.hpp"
#include "support.hpp"

using namespace atd;
using atd::test::random_model;

namespace {

ModelDims tiny_dims() { return {3, 4, 2, 2}; }

}  // namespace

TEST(AttributeVector, RectifiesNegativeEntries) {
  AttributeTable t = AttributeTable::zeros(3, 1);
  t.lookup.col(0) << -1, 2, 0;
  EXPECT_EQ(attribute_vector(t, 0), (VectorXd(3) << 0, 2, 0).finished());
  t.rectify = false;
  EXPECT_EQ(attribute_vector(t, 0), (VectorXd(3) << -1, 2, 0).finished());
  EXPECT_THROW(attribute_vector(t, 1), UsageError);
}

TEST(AttributeVector, AllNegativeColumnLeavesBiasOnlyLogits) {
  auto m = random_model(tiny_dims(), {7}, 2, 3);
  m.table.lookup.col(1).setConstant(-0.5);
  TrainingExample ex{{4, 5}, 6, 1, 0};
  const auto tr = forward(m.params, m.table, ex);
  for (int w = 0; w < 7; ++w) EXPECT_DOUBLE_EQ(tr.logits[w], m.params.bias[0][w]);
}

TEST(FoldedEmbedding, MatchesTripleLoop) {
  auto m = random_model({3, 5, 2, 1}, {6}, 1, 11);
  const MatrixXd e = folded_embedding(m.params);
  for (int k = 0; k < 3; ++k) {
    for (int v = 0; v < 6; ++v) {
      double s = 0.0;
      for (int f = 0; f < 5; ++f) s += m.params.wfk(f, k) * m.params.wfv[0](f, v);
      EXPECT_NEAR(e(k, v), s, 1e-14);
    }
  }
}

TEST(FoldedEmbedding, IdentityAndZeroCases) {
  auto m = random_model({4, 4, 2, 1}, {5}, 1, 2);
  m.params.wfk.setIdentity();
  EXPECT_TRUE(folded_embedding(m.params).isApprox(m.params.wfv[0], 0.0));
  m.params.wfv[0].setZero();
  EXPECT_TRUE(folded_embedding(m.params).isZero(0.0));
}

TEST(ConditionedEmbedding, MatchesTensorContraction) {
  auto m = random_model({3, 4, 2, 1}, {6}, 1, 5);
  VectorXd x(2);
  x << 0.7, -0.2;
  const MatrixXd t = conditioned_embedding(m.params, x);
  for (int w = 0; w < 6; ++w) {
    for (int k = 0; k < 3; ++k) {
      double s = 0.0;
      for (int f = 0; f < 4; ++f) {
        double g = 0.0;
        for (int d = 0; d < 2; ++d) g += m.params.wfd(f, d) * x[d];
        s += m.params.wfv[0](f, w) * g * m.params.wfk(f, k);
      }
      EXPECT_NEAR(t(w, k), s, 1e-14);
    }
  }
}

TEST(ConditionedEmbedding, OnesGateGivesUnconditionedAndZeroGateGivesZero) {
  auto m = random_model({3, 4, 1, 1}, {6}, 1, 5);
  m.params.wfd.setOnes();
  VectorXd one = VectorXd::Ones(1);
  EXPECT_TRUE(conditioned_embedding(m.params, one).isApprox(unconditioned_embedding(m.params)));
  EXPECT_TRUE(conditioned_embedding(m.params, VectorXd::Zero(1)).isZero(0.0));
}

TEST(ConditionedEmbedding, LinearInAttributeVector) {
  auto m = random_model({3, 4, 2, 1}, {6}, 1, 9);
  VectorXd x(2), y(2);
  x << 0.3, -1.1;
  y << 2.0, 0.4;
  const MatrixXd lhs = conditioned_embedding(m.params, 1.5 * x - 0.25 * y);
  const MatrixXd rhs =
      1.5 * conditioned_embedding(m.params, x) - 0.25 * conditioned_embedding(m.params, y);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ConditionedRow, MatchesMatrixRow) {
  auto m = random_model({3, 4, 2, 1}, {6}, 1, 4);
  VectorXd x(2);
  x << 0.5, 0.9;
  const MatrixXd t = conditioned_embedding(m.params, x);
  for (int w = 0; w < 6; ++w) {
    EXPECT_LT((conditioned_row(m.params, m.params.wfd * x, 0, w) - t.row(w).transpose())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-13);
  }
}

TEST(Forward, ZeroModelIsUniform) {
  auto p = FactoredParams::zeros(tiny_dims(), std::vector<int>{10});
  auto t = AttributeTable::zeros(2, 1);
  const auto tr = forward(p, t, TrainingExample{{0, 1}, 2, 0, 0});
  for (int w = 0; w < 10; ++w) EXPECT_NEAR(std::exp(tr.log_probs[w]), 0.1, 1e-15);
  std::vector<TrainingExample> batch{{{0, 1}, 2, 0, 0}};
  EXPECT_NEAR(nll_loss(p, t, batch), std::log(10.0), 1e-12);
}

TEST(Forward, LargeBiasPicksWord) {
  auto p = FactoredParams::zeros(tiny_dims(), std::vector<int>{5});
  auto t = AttributeTable::zeros(2, 1);
  p.bias[0].setConstant(-1e3);
  p.bias[0][3] = 1e3;
  const auto tr = forward(p, t, TrainingExample{{0, 1}, 3, 0, 0});
  EXPECT_NEAR(tr.log_probs[3], 0.0, 1e-12);
  std::vector<TrainingExample> batch{{{0, 1}, 3, 0, 0}};
  EXPECT_NEAR(nll_loss(p, t, batch), 0.0, 1e-12);
}

TEST(Forward, MatchesUnfactoredOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_model({3, 4, 2, 2}, {7}, 3, 100 + trial);
    const auto ex = test::random_example(rng, m.params, 3);
    const auto tr = forward(m.params, m.table, ex);
    const auto oracle =
        test::brute_force_log_probs(m.params, attribute_vector(m.table, ex.attribute), ex);
    for (int w = 0; w < 7; ++w) EXPECT_NEAR(tr.log_probs[w], oracle[static_cast<std::size_t>(w)], 1e-12);
    EXPECT_NEAR(tr.log_probs.array().exp().sum(), 1.0, 1e-9);
  }
}

TEST(Forward, RejectsBadExamples) {
  auto m = random_model(tiny_dims(), {7}, 2, 3);
  EXPECT_THROW(forward(m.params, m.table, TrainingExample{{0}, 1, 0, 0}), UsageError);
  EXPECT_THROW(forward(m.params, m.table, TrainingExample{{0, 9}, 1, 0, 0}), UsageError);
  EXPECT_THROW(forward(m.params, m.table, TrainingExample{{0, 1}, 1, 5, 0}), UsageError);
  std::vector<TrainingExample> empty;
  EXPECT_THROW(nll_loss(m.params, m.table, empty), UsageError);
}

TEST(Forward, PermutingVocabularyPermutesLogProbs) {
  auto m = random_model(tiny_dims(), {6}, 1, 8);
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};  // new id of old word w is perm[w]
  auto q = m;
  for (int w = 0; w < 6; ++w) {
    q.params.wfv[0].col(perm[w]) = m.params.wfv[0].col(w);
    q.params.bias[0][perm[w]] = m.params.bias[0][w];
  }
  TrainingExample ex{{1, 4}, 2, 0, 0};
  TrainingExample pex{{perm[1], perm[4]}, perm[2], 0, 0};
  const auto a = forward(m.params, m.table, ex).log_probs;
  const auto b = forward(q.params, q.table, pex).log_probs;
  for (int w = 0; w < 6; ++w) EXPECT_NEAR(a[w], b[perm[w]], 1e-12);
}

TEST(Lbl, ZeroParamsUniformAndLoopOracle) {
  MatrixXd R = MatrixXd::Zero(5, 3);
  std::vector<MatrixXd> C{MatrixXd::Zero(3, 3)};
  VectorXd b = VectorXd::Zero(5);
  TrainingExample ex{{2}, 1, 0, 0};
  EXPECT_NEAR(std::exp(lbl_forward(R, C, b, ex)[4]), 0.2, 1e-15);

  Rng rng(3);
  for (int i = 0; i < R.size(); ++i) R.data()[i] = rng.uniform(-1, 1);
  for (int i = 0; i < 9; ++i) C[0].data()[i] = rng.uniform(-1, 1);
  for (int i = 0; i < 5; ++i) b[i] = rng.uniform(-1, 1);
  const VectorXd lp = lbl_forward(R, C, b, ex);
  std::vector<double> logits(5);
  for (int w = 0; w < 5; ++w) {
    double s = b[w];
    for (int r = 0; r < 3; ++r) {
      double rh = 0.0;
      for (int c = 0; c < 3; ++c) rh += C[0](r, c) * R(2, c);
      s += rh * R(w, r);
    }
    logits[static_cast<std::size_t>(w)] = s;
  }
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  for (int w = 0; w < 5; ++w) EXPECT_NEAR(lp[w], logits[static_cast<std::size_t>(w)] - std::log(z), 1e-12);
}

TEST(Lbl, FactoredReductionWithIdentityFactors) {
  auto m = random_model({3, 3, 1, 2}, {6}, 1, 21);
  m.params.wfk.setIdentity();
  m.params.wfd.setOnes();
  m.table.lookup.setOnes();
  TrainingExample ex{{1, 5}, 0, 0, 0};
  const VectorXd a = forward(m.params, m.table, ex).log_probs;
  const VectorXd b = lbl_forward(m.params.wfv[0].transpose(), m.params.context, m.params.bias[0], ex);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

namespace {

double max_gradient_error(test::Tiny& m, std::span<const TrainingExample> batch,
                          std::string* worst = nullptr) {
  Gradients g = Gradients::zeros_like(m.params, m.table);
  backward(m.params, m.table, batch, g);
  std::vector<ConstGroupView> grads;
  for_each_group(g, [&](const std::string&, ConstGroupView v) { grads.push_back(v); });
  double max_err = 0.0;
  std::size_t gi = 0;
  const double eps = 1e-5;
  for_each_group(m.params, m.table, [&](const std::string& name, GroupView theta) {
    const auto& an = grads[gi++];
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double keep = theta.data()[i];
      theta.data()[i] = keep + eps;
      const double up = nll_loss(m.params, m.table, batch);
      theta.data()[i] = keep - eps;
      const double down = nll_loss(m.params, m.table, batch);
      theta.data()[i] = keep;
      const double err = test::relative_error(an.data()[i], (up - down) / (2 * eps));
      if (err > max_err) {
        max_err = err;
        if (worst) *worst = name;
      }
    }
  });
  return max_err;
}

}  // namespace

TEST(Backward, MatchesFiniteDifferences) {
  auto m = random_model({4, 5, 3, 2}, {9, 6}, 3, 31);
  Rng rng(4);
  std::vector<TrainingExample> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(test::random_example(rng, m.params, 3, i % 2));
  std::string worst;
  EXPECT_LT(max_gradient_error(m, batch, &worst), 1e-4) << worst;
}

TEST(Backward, ThreadedMatchesSerial) {
  auto m = random_model({4, 5, 3, 2}, {9}, 3, 32);
  Rng rng(5);
  std::vector<TrainingExample> batch;
  for (int i = 0; i < 23; ++i) batch.push_back(test::random_example(rng, m.params, 3));
  Gradients a = Gradients::zeros_like(m.params, m.table), b = a;
  const double la = backward(m.params, m.table, batch, a, {1});
  const double lb = backward(m.params, m.table, batch, b, {4});
  EXPECT_NEAR(la, lb, 1e-12);
  a *= -1.0;
  a += b;
  EXPECT_LT(a.squared_norm(), 1e-24);
  Gradients c = Gradients::zeros_like(m.params, m.table);
  backward(m.params, m.table, batch, c, {4});
  c *= -1.0;
  c += b;
  EXPECT_EQ(c.squared_norm(), 0.0);
}

TEST(Backward, AbsentAttributeAndDeadRectifierGetZeroGradient) {
  auto m = random_model({3, 4, 3, 2}, {7}, 3, 41);
  m.table.lookup(1, 0) = -0.4;
  std::vector<TrainingExample> batch{{{1, 2}, 3, 0, 0}, {{4, 0}, 5, 2, 0}};
  Gradients g = Gradients::zeros_like(m.params, m.table);
  backward(m.params, m.table, batch, g);
  EXPECT_TRUE(g.lookup.col(1).isZero(0.0));
  EXPECT_EQ(g.lookup(1, 0), 0.0);
  EXPECT_NE(g.lookup(0, 0), 0.0);
}

TEST(AttributeGradient, MatchesFiniteDifferences) {
  auto m = random_model({3, 4, 3, 2}, {7}, 1, 43);
  Rng rng(6);
  std::vector<TrainingExample> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(test::random_example(rng, m.params, 1));
  VectorXd raw(3);
  raw << 0.4, -0.3, 0.8;
  VectorXd g;
  attribute_loss_and_gradient(m.params, raw, true, batch, g);
  for (int d = 0; d < 3; ++d) {
    VectorXd up = raw, down = raw, unused;
    up[d] += 1e-5;
    down[d] -= 1e-5;
    const double n = (attribute_loss_and_gradient(m.params, up, true, batch, unused) -
                      attribute_loss_and_gradient(m.params, down, true, batch, unused)) /
                     2e-5;
    EXPECT_LT(test::relative_error(g[d], n), 1e-4);
  }
  EXPECT_EQ(g[1], 0.0);
}

TEST(Initialize, DeterministicAndUnigramBias) {
  auto p = FactoredParams::zeros(tiny_dims(), std::vector<int>{4});
  auto t = AttributeTable::zeros(2, 3);
  std::vector<std::vector<double>> counts{{0, 1, 2, 5}};
  initialize(p, t, 7, {}, counts);
  auto q = FactoredParams::zeros(tiny_dims(), std::vector<int>{4});
  auto u = AttributeTable::zeros(2, 3);
  initialize(q, u, 7, {}, counts);
  EXPECT_EQ(test::hash_groups(p, t), test::hash_groups(q, u));
  EXPECT_NEAR(p.bias[0][3], std::log(6.0 / 12.0), 1e-15);
  EXPECT_GE(t.lookup.minCoeff(), 0.0);
  EXPECT_LE(p.wfk.cwiseAbs().maxCoeff(), 0.2);
}

TEST(ImportEmbeddings, FillsLeadingFactors) {
  Vocabulary v;
  v.add("cat");
  v.add("dog");
  auto p = FactoredParams::zeros({2, 3, 1, 1}, std::vector<int>{v.size()});
  std::istringstream in("cat 0.5 -1\nfish 1 1\ndog 2 3\n");
  EXPECT_EQ(import_embeddings(in, v, p), 2);
  const MatrixXd e = folded_embedding(p);
  EXPECT_DOUBLE_EQ(e(0, *v.find("cat")), 0.5);
  EXPECT_DOUBLE_EQ(e(1, *v.find("dog")), 3.0);
  std::istringstream bad("cat 1\n");
  EXPECT_THROW(import_embeddings(bad, v, p), DataError);
}

TEST(Gradients, SquaredNormAndScaling) {
  auto m = random_model(tiny_dims(), {5}, 2, 1);
  Gradients g = Gradients::zeros_like(m.params, m.table);
  g.wfk.setConstant(1.0);
  g.lookup.setConstant(2.0);
  EXPECT_DOUBLE_EQ(g.squared_norm(), 12.0 + 4.0 * 4);
  g *= 0.5;
  EXPECT_DOUBLE_EQ(g.squared_norm(), 3.0 + 4.0);
  EXPECT_TRUE(first_non_finite(m.params, m.table).empty());
  m.params.context[1](0, 0) = std::nan("");
  EXPECT_EQ(first_non_finite(m.params, m.table), "C[1]");
}
