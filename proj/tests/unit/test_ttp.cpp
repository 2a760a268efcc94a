#include <gtest/gtest.h>

#include <cmath>

#include "gratis/error.hpp"
#include "gratis/ttp.hpp"
#include "test_util.hpp"

using namespace gratis;
using namespace gratis::ttp;
using gratis::testing::rand_adjacency;
using gratis::testing::rand_tensor;

TEST(AdjacencyProb, ZeroScoresGiveQuarter) {
  const auto p = adjacency_prob_from_scores(Tensor::zeros({2, 2}));
  for (double x : p.data()) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(AdjacencyProb, FactorsAreStochastic) {
  Rng rng(61);
  const auto xh = rand_tensor({4, 4}, rng, -3, 3);
  const auto rows = sum(softmax(xh, 1), 1), cols = sum(softmax(xh, 0), 0);
  for (double x : rows.data()) EXPECT_NEAR(x, 1.0, 1e-12);
  for (double x : cols.data()) EXPECT_NEAR(x, 1.0, 1e-12);
}

TEST(AdjacencyProb, MatchesScalarOracle) {
  Rng rng(62);
  const auto xh = rand_tensor({3, 3}, rng, -2, 2);
  const auto p = adjacency_prob_from_scores(xh);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double zr = 0, zc = 0;
      for (std::size_t t = 0; t < 3; ++t) {
        zr += std::exp(xh.at(i, t));
        zc += std::exp(xh.at(t, j));
      }
      EXPECT_NEAR(p.at(i, j), std::exp(xh.at(i, j)) / zr * std::exp(xh.at(i, j)) / zc, 1e-12);
    }
}

TEST(AdjacencyProb, CubeProjectionAndRange) {
  Rng rng(63);
  const auto x = rand_tensor({4, 4, 3}, rng);
  const TtpGraphParams params{.h = rand_tensor({3, 1}, rng), .theta = 0.5};
  const auto xh = project_context(x, params.h);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0;
      for (std::size_t d = 0; d < 3; ++d) s += x.at(i, j, d) * params.h.at(d, 0);
      EXPECT_NEAR(xh.at(i, j), s, 1e-14);
    }
  const auto p = adjacency_prob(x, params);
  const auto r = softmax(xh, 1), c = softmax(xh, 0);
  for (std::size_t e = 0; e < 16; ++e) {
    EXPECT_GT(p.data()[e], 0.0);
    EXPECT_LE(p.data()[e], 1.0);
    EXPECT_LE(p.data()[e], r.data()[e]);
    EXPECT_LE(p.data()[e], c.data()[e]);
  }
}

TEST(ThresholdUnion, ThetaOneKeepsBasic) {
  Rng rng(64);
  const auto p = adjacency_prob_from_scores(rand_tensor({5, 5}, rng));
  auto a = rand_adjacency(5, 0.4, rng);
  EXPECT_EQ(threshold_union(p, a, 1.0).to_vector(), a.to_vector());
}

TEST(ThresholdUnion, ThetaZeroIsFull) {
  const auto p = adjacency_prob_from_scores(Tensor::zeros({3, 3}));
  EXPECT_EQ(threshold_union(p, Tensor::zeros({3, 3}), 0.0).to_vector(),
            (std::vector<double>{0, 1, 1, 1, 0, 1, 1, 1, 0}));
}

TEST(ThresholdUnion, UniformQuarterAboveThreshold) {
  const auto p = adjacency_prob_from_scores(Tensor::zeros({2, 2}));
  EXPECT_EQ(threshold_union(p, Tensor::zeros({2, 2}), 0.2).to_vector(), (std::vector<double>{0, 1, 1, 0}));
}

TEST(ThresholdUnion, DiagonalBasicEntryCleared) {
  const auto p = Tensor::full({2, 2}, 0.9);
  auto a = Tensor::from({2, 2}, {1, 0, 0, 0});
  EXPECT_EQ(threshold_union(p, a, 0.95).to_vector(), (std::vector<double>{0, 0, 0, 0}));
}

TEST(ThresholdUnion, SupersetAndMonotoneFuzz) {
  Rng rng(65);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 7;
    const auto p = adjacency_prob_from_scores(rand_tensor({n, n}, rng, -4, 4));
    const auto a = rand_adjacency(n, u(rng), rng);
    double t1 = u(rng), t2 = u(rng);
    if (t1 > t2) std::swap(t1, t2);
    const auto lo = threshold_union(p, a, t1), hi = threshold_union(p, a, t2);
    for (std::size_t e = 0; e < n * n; ++e) {
      EXPECT_GE(lo.data()[e], a.data()[e]);
      EXPECT_GE(hi.data()[e], a.data()[e]);
      EXPECT_GE(lo.data()[e], hi.data()[e]);
    }
  }
}

TEST(KnnVertex, SaturatesToFull) {
  Rng rng(66);
  EXPECT_EQ(knn_vertex_adjacency(rand_tensor({3, 2}, rng), 2).to_vector(),
            (std::vector<double>{0, 1, 1, 1, 0, 1, 1, 1, 0}));
}

TEST(KnnVertex, TiesGoToSmallerIndex) {
  // vertex 0 sees 1, 2, 3 at equal distance
  const auto v = Tensor::from({4, 1}, {0, 1, 1, 1});
  const auto a = knn_vertex_adjacency(v, 2);
  EXPECT_EQ(a.at(0, 1), 1.0);
  EXPECT_EQ(a.at(0, 2), 1.0);
  EXPECT_EQ(a.at(0, 3), 0.0);
  // vertex 3 has duplicates 1 and 2 at distance 0
  EXPECT_EQ(a.at(3, 1), 1.0);
  EXPECT_EQ(a.at(3, 2), 1.0);
  for (std::size_t i = 0; i < 4; ++i) {
    double deg = 0;
    for (std::size_t j = 0; j < 4; ++j) deg += a.at(i, j);
    EXPECT_EQ(deg, 2.0);
  }
}

TEST(KnnVertex, LinePoints) {
  const auto a = knn_vertex_adjacency(Tensor::from({4, 1}, {0, 1, 10, 11}), 1);
  EXPECT_EQ(a.to_vector(), (std::vector<double>{0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0}));
}

TEST(KnnVertex, ScaleInvariant) {
  Rng rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = rand_tensor({6, 3}, rng);
    const std::size_t c = 1 + trial % 5;
    EXPECT_EQ(knn_vertex_adjacency(v, c).to_vector(), knn_vertex_adjacency(scale(v, 3.7), c).to_vector());
  }
}

TEST(KnnVertex, OutOfRangeCThrows) {
  EXPECT_THROW(knn_vertex_adjacency(Tensor::zeros({3, 2}), 3), ContractError);
  EXPECT_THROW(knn_vertex_adjacency(Tensor::zeros({3, 2}), 0), ContractError);
}

TEST(Union, IdentityAndIdempotence) {
  Rng rng(68);
  const auto a = rand_adjacency(5, 0.5, rng), b = rand_adjacency(5, 0.5, rng);
  EXPECT_EQ(union_adjacency(a, a).to_vector(), a.to_vector());
  EXPECT_EQ(union_adjacency(a, Tensor::zeros({5, 5})).to_vector(), a.to_vector());
  const auto u = union_adjacency(a, b);
  for (std::size_t e = 0; e < 25; ++e) EXPECT_EQ(u.data()[e], std::max(a.data()[e], b.data()[e]));
}

TEST(Union, ComplementaryPatternsGiveFull) {
  Rng rng(69);
  auto a = rand_adjacency(4, 0.5, rng), b = Tensor::zeros({4, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j) b.mutable_data()[i * 4 + j] = 1.0 - a.at(i, j);
  EXPECT_EQ(union_adjacency(a, b).to_vector(), (std::vector<double>{0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0}));
}

TEST(TtpParams, ThetaOutOfRangeRejected) {
  ParameterStore store;
  Rng rng(70);
  EXPECT_THROW(make_graph_params(store, "ttp", 3, 1.5, rng), ConfigError);
}
