#include <gtest/gtest.h>

#include <cmath>

#include "atd/error.hpp"
#include "atd/similarity.hpp"
#include "support.hpp"

using namespace atd;

TEST(Cosine, SymmetricAndRejectsZero) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    VectorXd a(5), b(5);
    for (int k = 0; k < 5; ++k) {
      a[k] = rng.uniform(-1, 1);
      b[k] = rng.uniform(-1, 1);
    }
    EXPECT_NEAR(cosine(a, b), cosine(b, a), 1e-12);
    EXPECT_NEAR(cosine(a, a), 1.0, 1e-12);
  }
  EXPECT_THROW(cosine(VectorXd::Zero(2), VectorXd::Ones(2)), DataError);
}

TEST(RankByCosine, ExcludesSpecialsQueryAndBreaksTies) {
  MatrixXd c(7, 2);
  c << 1, 0, 1, 0, 1, 0,  // specials
      1, 0,               // 3 query
      0, 1,               // 4
      2, 0,               // 5 ties with 6
      3, 0;               // 6
  const auto r = rank_by_cosine(c, c.row(3).transpose(), 10, 3);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].word, 5);
  EXPECT_EQ(r[1].word, 6);
  EXPECT_EQ(r[2].word, 4);
  const auto with_self = rank_by_cosine(c, c.row(3).transpose(), 1);
  EXPECT_EQ(with_self[0].word, 3);
  EXPECT_DOUBLE_EQ(with_self[0].cosine, 1.0);
  MatrixXd zeros = MatrixXd::Zero(5, 2);
  EXPECT_THROW(rank_by_cosine(zeros, VectorXd::Ones(2), 3), DataError);
}

TEST(ConditionalNeighbors, MatchesBruteForceRanking) {
  auto m = test::random_model({3, 4, 2, 1}, {12}, 2, 3);
  const auto ns = conditional_neighbors(m.params, m.table, 5, 1, 4);
  const MatrixXd t = conditioned_embedding(m.params, attribute_vector(m.table, 1));
  std::vector<std::pair<double, int>> all;
  for (int w = kNumSpecial; w < 12; ++w) {
    if (w == 5) continue;
    double dot = 0, na = 0, nb = 0;
    for (int k = 0; k < 3; ++k) {
      dot += t(5, k) * t(w, k);
      na += t(5, k) * t(5, k);
      nb += t(w, k) * t(w, k);
    }
    all.push_back({-dot / std::sqrt(na * nb), w});
  }
  std::sort(all.begin(), all.end());
  ASSERT_EQ(ns.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(ns[static_cast<std::size_t>(i)].word, all[static_cast<std::size_t>(i)].second);
    EXPECT_NEAR(ns[static_cast<std::size_t>(i)].cosine, -all[static_cast<std::size_t>(i)].first, 1e-12);
  }
  EXPECT_THROW(conditional_neighbors(m.params, m.table, 40, 0, 3), DataError);
}

TEST(ConditionalNeighbors, IdenticalAttributesGiveIdenticalLists) {
  auto m = test::random_model({3, 4, 2, 1}, {12}, 2, 3);
  m.table.lookup.col(1) = m.table.lookup.col(0);
  EXPECT_EQ(conditional_neighbors(m.params, m.table, 4, 0, 6),
            conditional_neighbors(m.params, m.table, 4, 1, 6));
}

TEST(CommonUnique, SameAttributeAndShape) {
  auto m = test::random_model({3, 4, 2, 1}, {30}, 2, 7);
  m.table.lookup = m.table.lookup.cwiseAbs();
  const auto same = common_unique(m.params, m.table, 4, 0, 0, 15, 3);
  EXPECT_TRUE(same.unique_a.empty());
  EXPECT_TRUE(same.unique_b.empty());
  const auto top = conditional_neighbors(m.params, m.table, 4, 0, 3);
  EXPECT_EQ(same.common, top);
  const auto cu = common_unique(m.params, m.table, 4, 0, 1, 15, 3);
  EXPECT_LE(cu.common.size(), 3u);
  EXPECT_LE(cu.unique_a.size(), 3u);
  EXPECT_THROW(common_unique(m.params, m.table, 4, 0, 1, 2, 3), UsageError);
}

TEST(CommonUnique, DisjointListsShareNothing) {
  // K = 2: under attribute 0 the gate kills factor 1, under attribute 1 factor 0.
  test::Tiny m{FactoredParams::zeros({2, 2, 2, 1}, std::vector<int>{9}), AttributeTable::zeros(2, 2)};
  m.params.wfk.setIdentity();
  m.params.wfd.setIdentity();
  m.table.lookup.setIdentity();
  // query word 3 is (1, 1); words 4..5 align with factor 0, 6..8 with factor 1.
  m.params.wfv[0].col(3) << 1, 1;
  m.params.wfv[0].col(4) << 1, 0;
  m.params.wfv[0].col(5) << 1, 0;
  m.params.wfv[0].col(6) << 0.01, 1;
  m.params.wfv[0].col(7) << 0.01, 1;
  m.params.wfv[0].col(8) << 0.01, 1;
  const auto cu = common_unique(m.params, m.table, 3, 0, 1, 2, 2);
  EXPECT_TRUE(cu.common.empty());
  EXPECT_EQ(cu.unique_a.size(), 2u);
  EXPECT_EQ(cu.unique_b.size(), 2u);
}

TEST(CrosslingualNeighbors, SameLanguageReducesAndZeroTargetFails) {
  auto m = test::random_model({3, 4, 2, 1}, {10, 10}, 2, 9);
  EXPECT_EQ(crosslingual_neighbors(m.params, m.table, 4, 0, 0, 5),
            conditional_neighbors(m.params, m.table, 4, 0, 5, 0));
  EXPECT_EQ(crosslingual_neighbors(m.params, m.table, 4, 0, 1, 5).size(), 5u);
  m.table.lookup.col(1).setConstant(-1.0);
  EXPECT_THROW(crosslingual_neighbors(m.params, m.table, 4, 0, 1, 5), DataError);
}

TEST(Collocation, UnitNormSumAndOracle) {
  auto m = test::random_model({3, 4, 2, 1}, {10}, 2, 11);
  const std::vector<int> one{5}, twice{5, 5}, pair{5, 7};
  const VectorXd gate = m.params.wfd * attribute_vector(m.table, 1);
  EXPECT_LT((collocation_repr(m.params, m.table, one, 1) -
             conditioned_row(m.params, gate, 0, 5).normalized())
                .norm(),
            1e-12);
  EXPECT_LT((collocation_repr(m.params, m.table, twice, 1) - collocation_repr(m.params, m.table, one, 1))
                .norm(),
            1e-12);
  const MatrixXd t = conditioned_embedding(m.params, attribute_vector(m.table, 1));
  VectorXd s(3);
  for (int k = 0; k < 3; ++k) s[k] = t(5, k) + t(7, k);
  s /= std::sqrt(s.squaredNorm());
  EXPECT_LT((collocation_repr(m.params, m.table, pair, 1) - s).norm(), 1e-12);
  const std::vector<int> none;
  EXPECT_THROW(collocation_repr(m.params, m.table, none, 1), UsageError);

  const std::vector<std::vector<int>> cands{{5, 7}, {3}, {4, 6}};
  const auto ranked = rank_collocations(m.params, m.table, s, cands, 1, 3);
  EXPECT_EQ(ranked[0].word, 0);
  EXPECT_NEAR(ranked[0].cosine, 1.0, 1e-12);
}

TEST(AttributeCorrelation, PearsonAndCosine) {
  AttributeTable t = AttributeTable::zeros(4, 3, false);
  t.lookup.col(0) << 1, 2, 3, 4;
  t.lookup.col(1) = -t.lookup.col(0);
  t.lookup.col(2).setConstant(5.0);
  const std::vector<int> ids{0, 1, 2};
  const auto c = attribute_correlation(t, ids);
  EXPECT_DOUBLE_EQ(c.values(0, 0), 1.0);
  EXPECT_NEAR(c.values(0, 1), -1.0, 1e-15);
  EXPECT_TRUE(std::isnan(c.values(0, 2)));
  EXPECT_FALSE(c.undefined.empty());
  const auto cos = attribute_correlation(t, ids, CorrelationKind::Cosine);
  EXPECT_NEAR(cos.values(0, 2), 10.0 / std::sqrt(30.0) / 2.0, 1e-12);
  const std::vector<int> single{0};
  EXPECT_THROW(attribute_correlation(t, single), UsageError);
}

TEST(AttributeCorrelation, MatchesDirectFormula) {
  AttributeTable t = AttributeTable::zeros(100, 2, false);
  Rng rng(3);
  for (int i = 0; i < t.lookup.size(); ++i) t.lookup.data()[i] = rng.uniform(-1, 1);
  double ma = 0, mb = 0;
  for (int d = 0; d < 100; ++d) {
    ma += t.lookup(d, 0) / 100;
    mb += t.lookup(d, 1) / 100;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (int d = 0; d < 100; ++d) {
    sab += (t.lookup(d, 0) - ma) * (t.lookup(d, 1) - mb);
    saa += (t.lookup(d, 0) - ma) * (t.lookup(d, 0) - ma);
    sbb += (t.lookup(d, 1) - mb) * (t.lookup(d, 1) - mb);
  }
  const std::vector<int> ids{0, 1};
  const auto c = attribute_correlation(t, ids);
  EXPECT_NEAR(c.values(0, 1), sab / std::sqrt(saa * sbb), 1e-12);
  EXPECT_EQ(c.values(0, 1), c.values(1, 0));
}
