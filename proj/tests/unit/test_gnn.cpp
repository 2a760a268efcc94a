#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gratis/error.hpp"
#include "gratis/gnn.hpp"
#include "gratis/gradcheck.hpp"
#include "oracles.hpp"

using namespace gratis;
using namespace gratis::gnn;
using gratis::testing::max_abs_diff;
using namespace gratis::testing;


TEST(GatedLayer, PathGraphMatchesScalarOracle) {
  Rng rng(91);
  for (bool residual : {false, true})
    for (std::size_t edge_dim : {1u, 3u}) {
      auto g = make_state(3, 3, edge_dim, both_ways({{0, 1}, {1, 2}}), rng);
      const auto p = rand_gated(3, edge_dim, rng);
      const auto out = gated_layer(g, p, residual);
      const auto want = gated_oracle(g, p, residual);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.vertices.at(i, c), want.v[i][c], 1e-12);
      for (std::size_t e = 0; e < 4; ++e)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.edge_features.at(e, c), want.e[e][c], 1e-12);
      EXPECT_EQ(out.edge_dim, 3u);
    }
}

TEST(GatedLayer, EdgeWeightsScaleGates) {
  Rng rng(92);
  auto g = make_state(4, 3, 3, both_ways({{0, 1}, {1, 2}, {2, 3}, {0, 3}}), rng);
  g.edge_weights = rand_tensor({g.edges.size()}, rng, 0.1, 1.0);
  const auto p = rand_gated(3, 3, rng);
  const auto out = gated_layer(g, p, false);
  const auto want = gated_oracle(g, p, false);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.vertices.at(i, c), want.v[i][c], 1e-12);
}

TEST(GatedLayer, NoEdgesGivesSelfTerm) {
  Rng rng(93);
  auto g = make_state(3, 2, 1, {}, rng);
  const auto p = rand_gated(2, 1, rng);
  const auto out = gated_layer(g, p, false);
  const auto want = relu(matmul(g.vertices, p.u));
  EXPECT_EQ(out.vertices.to_vector(), want.to_vector());
  EXPECT_TRUE(out.edges.empty());
}

TEST(GatLayer, StarAttentionMatchesScalarOracle) {
  Rng rng(94);
  for (std::size_t edge_dim : {1u, 3u}) {
    auto g = make_state(4, 3, edge_dim, both_ways({{0, 1}, {0, 2}, {0, 3}}), rng);
    const auto p = rand_gat(3, edge_dim, rng);
    const auto alpha = gat_attention(g, p);
    const auto want = gat_alpha_oracle(g, p);
    for (std::size_t e = 0; e < g.edges.size(); ++e) EXPECT_NEAR(alpha.data()[e], want[e], 1e-12);
    for (bool residual : {false, true}) {
      const auto out = gat_layer(g, p, residual);
      const auto wv = gat_oracle(g, p, residual);
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.vertices.at(i, c), wv[i][c], 1e-12);
      EXPECT_EQ(out.edge_features.to_vector(), g.edge_features.to_vector());
    }
  }
}

TEST(GatLayer, WeightedLogitsMatchOracle) {
  Rng rng(95);
  auto g = make_state(4, 3, 3, both_ways({{0, 1}, {0, 2}, {0, 3}, {1, 2}}), rng);
  g.edge_weights = rand_tensor({g.edges.size()}, rng, 0.1, 1.0);
  const auto p = rand_gat(3, 3, rng);
  const auto alpha = gat_attention(g, p);
  const auto want = gat_alpha_oracle(g, p);
  for (std::size_t e = 0; e < g.edges.size(); ++e) EXPECT_NEAR(alpha.data()[e], want[e], 1e-12);
}

TEST(GatLayer, SingleNeighbourGetsWeightOne) {
  Rng rng(96);
  auto g = make_state(3, 2, 1, {{0, 1}, {1, 2}, {2, 0}}, rng);
  const auto alpha = gat_attention(g, rand_gat(2, 1, rng));
  for (double a : alpha.data()) EXPECT_DOUBLE_EQ(a, 1.0);
}

TEST(GatLayer, IdenticalNeighboursGiveUniformWeights) {
  Rng rng(97);
  auto g = make_state(4, 2, 1, {{0, 1}, {0, 2}, {0, 3}}, rng);
  const auto row = rand_tensor({1, 2}, rng);
  g.vertices = concat({rand_tensor({1, 2}, rng), row, row, row}, 0);
  g.edge_features = Tensor::full({3, 1}, 0.7);
  const auto alpha = gat_attention(g, rand_gat(2, 1, rng));
  for (double a : alpha.data()) EXPECT_NEAR(a, 1.0 / 3.0, 1e-15);
}

TEST(GatLayer, IsolatedVertexFallsBackToSelf) {
  Rng rng(98);
  auto g = make_state(3, 2, 1, {{0, 1}}, rng);
  const auto p = rand_gat(2, 1, rng);
  const auto out = gat_layer(g, p, false);
  const auto z = matmul(g.vertices, p.w_vert);
  for (std::size_t i : {1u, 2u})
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(out.vertices.at(i, c), std::max(0.0, z.at(i, c)));
  auto empty = make_state(3, 2, 1, {}, rng);
  const auto out2 = gat_layer(empty, p, false);
  EXPECT_EQ(out2.vertices.to_vector(), relu(matmul(empty.vertices, p.w_vert)).to_vector());
}

TEST(GatLayer, AttentionRowsSumToOne) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + trial % 5;
    const auto a = gratis::testing::rand_adjacency(n, 0.5, rng);
    std::vector<EdgeKey> keys;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (a.at(i, j) != 0.0) keys.push_back({i, j});
    if (keys.empty()) continue;
    auto g = make_state(n, 3, 3, keys, rng);
    const auto alpha = gat_attention(g, rand_gat(3, 3, rng));
    std::vector<double> rows(n, 0.0);
    for (std::size_t e = 0; e < keys.size(); ++e) rows[g.edges[e].i] += alpha.data()[e];
    for (std::size_t i = 0; i < n; ++i)
      if (rows[i] != 0.0) {
        EXPECT_NEAR(rows[i], 1.0, 1e-12);
      }
  }
}

class Predictor : public ::testing::TestWithParam<LayerKind> {};

TEST_P(Predictor, MaskingInvariantDepthsOneToThree) {
  Rng rng(100);
  const auto kind = GetParam();
  for (std::size_t depth = 1; depth <= 3; ++depth)
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 8, k = 3;
      const auto a = gratis::testing::rand_adjacency(n, 0.18, rng);
      std::vector<EdgeKey> keys;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (a.at(i, j) != 0.0) keys.push_back({i, j});
      if (keys.empty()) continue;
      auto g = make_state(n, k, 3, keys, rng);
      const auto layers = rand_layers(kind, depth, k, 3, rng);
      const auto base = apply_layers(g, layers, true);
      const std::size_t i = trial % n;
      const auto hood = neighbourhood(g.edges, i, depth);
      auto h = g;
      h.vertices = g.vertices.detach();
      h.edge_features = g.edge_features.detach();
      for (std::size_t u = 0; u < n; ++u)
        if (!hood.contains(u))
          for (std::size_t c = 0; c < k; ++c) h.vertices.mutable_data()[u * k + c] += 10.0 + double(c);
      for (std::size_t e = 0; e < h.edges.size(); ++e)
        if (!hood.contains(h.edges[e].i))
          for (std::size_t c = 0; c < 3; ++c) h.edge_features.mutable_data()[e * 3 + c] -= 5.0;
      const auto moved = apply_layers(h, layers, true);
      for (std::size_t c = 0; c < k; ++c) EXPECT_EQ(moved.vertices.at(i, c), base.vertices.at(i, c));
    }
}

TEST_P(Predictor, PermutationEquivariant) {
  Rng rng(101);
  const auto kind = GetParam();
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 6, k = 3;
    auto sample = gratis::testing::rand_sample(n, k, rng, 0.4, 3);
    const auto perm = gratis::testing::rand_perm(n, rng);
    const auto layers = rand_layers(kind, 2, k, 3, rng);
    const auto out = apply_layers(state_from_sample(sample), layers, true);
    const auto outp = apply_layers(state_from_sample(permute(sample, perm)), layers, true);
    EXPECT_LT(max_abs_diff(outp.vertices, gratis::testing::permute_rows(out.vertices, perm)), 1e-10);
    // edge rows follow the relabelled keys
    for (std::size_t e = 0; e < out.edges.size(); ++e) {
      const EdgeKey pk{perm[out.edges[e].i], perm[out.edges[e].j]};
      const auto it = std::lower_bound(outp.edges.begin(), outp.edges.end(), pk);
      ASSERT_TRUE(it != outp.edges.end() && *it == pk);
      const std::size_t f = std::size_t(it - outp.edges.begin());
      for (std::size_t c = 0; c < out.edge_dim; ++c)
        EXPECT_NEAR(outp.edge_features.at(f, c), out.edge_features.at(e, c), 1e-10);
    }
  }
}

TEST_P(Predictor, StackEqualsSequentialComposition) {
  Rng rng(102);
  const auto kind = GetParam();
  auto g = make_state(5, 3, 1, both_ways({{0, 1}, {1, 2}, {3, 4}, {0, 4}}), rng);
  const auto layers = rand_layers(kind, 3, 3, 1, rng);
  const auto stacked = apply_layers(g, layers, true);
  GraphState s = g;
  for (const auto& l : layers) s = kind == LayerKind::Gated ? gated_layer(s, l.gated, true) : gat_layer(s, l.gat, true);
  EXPECT_EQ(stacked.vertices.to_vector(), s.vertices.to_vector());
}

TEST_P(Predictor, GradientThroughTwoLayersAndHead) {
  Rng rng(103);
  const auto kind = GetParam();
  const std::size_t n = 5, k = 3;
  auto g = make_state(n, k, 3, both_ways({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 2}}), rng);
  g.edge_weights = rand_tensor({g.edges.size()}, rng, 0.2, 1.0);
  ParameterStore store;
  const auto layers = make_layers(store, "gnn", kind, 2, k, 3, rng);
  const HeadConfig cfg{.task = TaskKind::VertexClass, .link_mode = LinkMode::Vertices, .hidden = 6, .classes = 3};
  const auto head = make_head(store, "head", cfg, k, k, rng);
  std::vector<Parameter> params(store.all().begin(), store.all().end());
  params.push_back({"vertices", g.vertices});
  params.push_back({"edges", g.edge_features});
  params.push_back({"weights", g.edge_weights});
  for (auto& p : params) p.value.set_requires_grad(true);
  const auto w = rand_tensor({n, 3}, rng);
  const auto r = grad_check([&] { return sum(mul(readout(apply_layers(g, layers, true), {}, head, cfg).logits, w)); },
                            params);
  EXPECT_FALSE(r.has_nan());
  EXPECT_LE(r.max_rel_error(), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Kinds, Predictor, ::testing::Values(LayerKind::Gated, LayerKind::Gat),
                         [](const auto& info) { return info.param == LayerKind::Gated ? "Gated" : "Gat"; });

TEST(Readout, GraphClassSingleVertexIsMlpOfVertex) {
  Rng rng(104);
  ParameterStore store;
  const HeadConfig cfg{.task = TaskKind::GraphClass, .link_mode = LinkMode::Vertices, .hidden = 4, .classes = 2};
  const auto head = make_head(store, "head", cfg, 3, 1, rng);
  auto g = make_state(1, 3, 1, {}, rng);
  EXPECT_EQ(readout(g, {}, head, cfg).logits.to_vector(), mlp(g.vertices, head).to_vector());
}

TEST(Readout, LinkVerticesModeIsOrderSensitive) {
  Rng rng(105);
  ParameterStore store;
  const HeadConfig cfg{.task = TaskKind::LinkClass, .link_mode = LinkMode::Vertices, .hidden = 4, .classes = 4};
  const auto head = make_head(store, "head", cfg, 3, 1, rng);
  auto g = make_state(3, 3, 1, both_ways({{0, 1}}), rng);
  const std::vector<EdgeKey> q{{0, 1}, {1, 0}};
  const auto l = readout(g, q, head, cfg).logits;
  double diff = 0;
  for (std::size_t c = 0; c < 4; ++c) diff += std::abs(l.at(0, c) - l.at(1, c));
  EXPECT_GT(diff, 1e-9);
}

TEST(Readout, EdgeModesAndMissingEdges) {
  Rng rng(106);
  for (auto mode : {LinkMode::Edge, LinkMode::VerticesPlusEdge})
    for (std::size_t edim : {1u, 3u}) {
      ParameterStore store;
      const HeadConfig cfg{.task = TaskKind::LinkClass, .link_mode = mode, .hidden = 4, .classes = 4};
      const auto head = make_head(store, "head", cfg, 3, edim, rng);
      EXPECT_EQ(head.edge_lift.defined(), edim == 1);
      auto g = make_state(3, 3, edim, both_ways({{0, 1}}), rng);
      const std::vector<EdgeKey> q{{0, 1}, {0, 2}};
      const auto r = readout(g, q, head, cfg);
      EXPECT_EQ(r.logits.shape(), (Shape{2, 4}));
      ASSERT_EQ(r.missing_edges.size(), 1u);
      EXPECT_EQ(r.missing_edges[0], (EdgeKey{0, 2}));
      if (mode == LinkMode::Edge) {
        // a zero edge row gives the MLP's response to the zero vector
        const auto zero = mlp(Tensor::zeros({1, 3}), head);
        for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(r.logits.at(1, c), zero.at(0, c), 1e-15);
      }
    }
}

TEST(Readout, CooccurClassIndex) {
  EXPECT_EQ(cooccur_class(false, false), 0u);
  EXPECT_EQ(cooccur_class(false, true), 1u);
  EXPECT_EQ(cooccur_class(true, false), 2u);
  EXPECT_EQ(cooccur_class(true, true), 3u);
}

TEST(GnnConfig, ParseNames) {
  EXPECT_EQ(parse_layer_kind("gat"), LayerKind::Gat);
  EXPECT_THROW(parse_layer_kind("gcn"), ConfigError);
  EXPECT_EQ(parse_link_mode("vertices_edge"), LinkMode::VerticesPlusEdge);
  EXPECT_THROW(parse_link_mode("both"), ConfigError);
}

TEST(GnnState, DimensionMismatchThrows) {
  Rng rng(107);
  auto g = make_state(3, 3, 2, both_ways({{0, 1}}), rng);
  EXPECT_THROW(gated_layer(g, rand_gated(3, 1, rng), true), DimensionError);
  EXPECT_THROW(gat_layer(g, rand_gat(4, 2, rng), true), DimensionError);
}
