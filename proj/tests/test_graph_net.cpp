#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "tvg/errors.hpp"
#include "tvg/graph_net.hpp"

using namespace tvg;
using tvgtest::finite_difference_check;

TEST_CASE("single node graph is one self-loop") {
  const EdgeList g = build_adjacency(1, 4, 2);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0] == std::pair<int, int>(0, 0));
}

TEST_CASE("radius covering all distances yields the complete graph") {
  const EdgeList g = build_adjacency(5, 4, 2);
  CHECK(g.edges.size() == 25);  // all ordered pairs including self-loops
}

TEST_CASE("diffusive tiers match the hand-enumerated pattern") {
  const EdgeList g = build_adjacency(16, 2, 2);
  std::vector<int> right;
  for (int j : g.neighbors[0]) right.push_back(j);
  CHECK(right == std::vector<int>{0, 1, 2, 4, 8});
}

TEST_CASE("adjacency is symmetric with self-loops for many configurations") {
  Rng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const int t = rng.uniform_int(1, 40);
    const int radius = rng.uniform_int(1, 10);
    const int stride = rng.uniform_int(2, 5);
    const EdgeList g = build_adjacency(t, radius, stride);
    std::set<std::pair<int, int>> edges(g.edges.begin(), g.edges.end());
    for (int i = 0; i < t; ++i) CHECK(edges.count({i, i}) == 1);
    for (const auto& [i, j] : g.edges) CHECK(edges.count({j, i}) == 1);
  }
}

TEST_CASE("joint clue covers the three hand cases") {
  const std::vector<double> a{1.0, 2.0, 0.0};
  {
    const EdgeClue c = joint_clue(a, a, 0, 4);
    CHECK(c.temporal_distance == 4);
    CHECK(c.relevance == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.joint == doctest::Approx(0.0).epsilon(1e-12));
  }
  {
    const std::vector<double> b{-2.0, 1.0, 0.0};  // orthogonal to a
    const EdgeClue c = joint_clue(a, b, 1, 4);
    CHECK(c.relevance == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(c.joint == doctest::Approx(3.0).epsilon(1e-12));
  }
  {
    const std::vector<double> b{-1.0, -2.0, 0.0};  // opposite
    const EdgeClue c = joint_clue(a, b, 3, 1);
    CHECK(c.relevance == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(c.joint == doctest::Approx(4.0).epsilon(1e-12));
  }
}

TEST_CASE("joint clue is invariant to positive rescaling") {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> vi(6), vj(6);
    for (double& v : vi) v = rng.uniform(-2.0, 2.0);
    for (double& v : vj) v = rng.uniform(-2.0, 2.0);
    const double c = rng.uniform(0.01, 50.0);
    std::vector<double> vi_s(vi), vj_s(vj);
    for (double& v : vi_s) v *= c;
    for (double& v : vj_s) v *= c;
    const EdgeClue base = joint_clue(vi, vj, 2, 9);
    const EdgeClue scaled = joint_clue(vi_s, vj_s, 2, 9);
    CHECK(std::abs(base.relevance - scaled.relevance) < 1e-12);
    CHECK(std::abs(base.joint - scaled.joint) < 1e-11);
  }
}

TEST_CASE("gaussian filter hits the pinned values") {
  GraphConfig cfg;
  cfg.gamma = 10.0;
  cfg.num_kernels = 50;
  cfg.kernel_step = 0.1;
  const std::vector<double> at_zero = gaussian_filter(0.0, cfg);
  CHECK(at_zero[0] == 1.0);
  const std::vector<double> at_bias = gaussian_filter(7 * 0.1, cfg);
  CHECK(at_bias[7] == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> near = gaussian_filter(0.1, cfg);
  CHECK(std::abs(near[0] - std::exp(-0.1)) < 1e-12);
}

TEST_CASE("gaussian filter components live in (0,1] with the peak at the nearest bias") {
  GraphConfig cfg;
  cfg.gamma = 10.0;
  cfg.num_kernels = 50;
  cfg.kernel_step = 0.1;
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const double d = rng.uniform(0.0, 6.0);
    const std::vector<double> f = gaussian_filter(d, cfg);
    int best = 0;
    for (int k = 0; k < cfg.num_kernels; ++k) {
      CHECK(f[k] > 0.0);
      CHECK(f[k] <= 1.0);
      if (f[k] > f[best]) best = k;
    }
    // nearest bias to d (by absolute distance)
    int nearest = 0;
    for (int k = 1; k < cfg.num_kernels; ++k) {
      if (std::abs(d - k * cfg.kernel_step) < std::abs(d - nearest * cfg.kernel_step)) nearest = k;
    }
    CHECK(std::abs(f[best] - f[nearest]) < 1e-15);  // ties share the maximum
  }
}

TEST_CASE("gaussian filter is symmetric about each bias") {
  GraphConfig cfg;
  cfg.gamma = 10.0;
  cfg.num_kernels = 20;
  cfg.kernel_step = 0.1;
  for (int k = 1; k < cfg.num_kernels; ++k) {
    const double z = k * cfg.kernel_step;
    for (double delta : {0.01, 0.05, 0.099}) {
      const double lhs = gaussian_filter(z + delta, cfg)[k];
      const double rhs = gaussian_filter(z - delta, cfg)[k];
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
}

namespace {

GraphConfig small_cfg(Aggregator agg = Aggregator::temporal_gaussian) {
  GraphConfig cfg;
  cfg.num_layers = 2;
  cfg.gamma = 10.0;
  cfg.num_kernels = 10;
  cfg.kernel_step = 0.1;
  cfg.dense_radius = 8;
  cfg.stride_base = 2;
  cfg.aggregator = agg;
  return cfg;
}

// Plain-double Eq.3 layer over a complete graph: relu(sum_j FFN1(filter(d_ij))
// .* FFN0(v_j)).
Tensor dense_reference_layer(const Tensor& states, const Tensor& w0, const Tensor& b0,
                             const Tensor& w1, const Tensor& b1, const GraphConfig& cfg) {
  const int t = states.rows(), d = states.cols();
  Tensor f0(Shape{t, d});
  for (int r = 0; r < t; ++r) {
    for (int o = 0; o < d; ++o) {
      double acc = b0[o];
      for (int c = 0; c < d; ++c) acc += states.at(r, c) * w0.at(o, c);
      f0.at(r, o) = acc;
    }
  }
  Tensor out(Shape{t, d});
  for (int i = 0; i < t; ++i) {
    std::vector<double> sum(d, 0.0);
    for (int j = 0; j < t; ++j) {
      std::vector<double> vi(d), vj(d);
      for (int c = 0; c < d; ++c) {
        vi[c] = states.at(i, c);
        vj[c] = states.at(j, c);
      }
      const double clue = (i == j) ? 0.0 : joint_clue(vi, vj, i, j).joint;
      const std::vector<double> filt = gaussian_filter(clue, cfg);
      for (int o = 0; o < d; ++o) {
        double gate = b1[o];
        for (int k = 0; k < cfg.num_kernels; ++k) gate += filt[k] * w1.at(o, k);
        sum[o] += gate * f0.at(j, o);
      }
    }
    for (int o = 0; o < d; ++o) out.at(i, o) = std::max(0.0, sum[o]);
  }
  return out;
}

}  // namespace

TEST_CASE("single-node layer reduces to the self-loop message") {
  GraphConfig cfg = small_cfg();
  Rng rng(7);
  GraphNet net(cfg, 4, rng);
  Rng data(8);
  const Tensor state = Tensor::uniform(Shape{1, 4}, -1.0, 1.0, data);
  const EdgeList g = build_adjacency(1, cfg.dense_radius, cfg.stride_base);
  Var out = net.layer_forward(0, Var::constant(state), Var::constant(state), g);

  const auto params = net.parameters();  // layer0: w0 b0 w1 b1, layer1: ...
  const Tensor ref = dense_reference_layer(state, params[0].value(), params[1].value(),
                                           params[2].value(), params[3].value(), cfg);
  for (int c = 0; c < 4; ++c) CHECK(out.value().at(0, c) == doctest::Approx(ref.at(0, c)).epsilon(1e-12));
}

TEST_CASE("zero node transform gives an all-zero layer output") {
  GraphConfig cfg = small_cfg();
  Rng rng(9);
  GraphNet net(cfg, 6, rng);
  auto params = net.parameters();
  params[0].mutable_value().fill(0.0);  // w0
  params[1].mutable_value().fill(0.0);  // b0
  Rng data(10);
  const Tensor state = Tensor::uniform(Shape{5, 6}, -1.0, 1.0, data);
  const EdgeList g = build_adjacency(5, cfg.dense_radius, cfg.stride_base);
  Var out = net.layer_forward(0, Var::constant(state), Var::constant(state), g);
  for (int i = 0; i < out.value().numel(); ++i) CHECK(out.value()[i] == 0.0);
}

TEST_CASE("complete-graph layer matches the dense brute-force oracle") {
  GraphConfig cfg = small_cfg();
  Rng rng(11);
  GraphNet net(cfg, 5, rng);
  Rng data(12);
  const Tensor state = Tensor::uniform(Shape{4, 5}, -1.0, 1.0, data);
  const EdgeList g = build_adjacency(4, cfg.dense_radius, cfg.stride_base);  // complete at T=4
  CHECK(g.edges.size() == 16);
  Var out = net.layer_forward(0, Var::constant(state), Var::constant(state), g);

  const auto params = net.parameters();
  const Tensor ref = dense_reference_layer(state, params[0].value(), params[1].value(),
                                           params[2].value(), params[3].value(), cfg);
  double worst = 0.0;
  for (int i = 0; i < ref.numel(); ++i) worst = std::max(worst, std::abs(out.value()[i] - ref[i]));
  CHECK(worst < 1e-10);
}

TEST_CASE("inverse-distance variant with identical features is an unweighted sum") {
  GraphConfig cfg = small_cfg(Aggregator::inverse_distance);
  cfg.num_layers = 1;
  Rng rng(13);
  GraphNet net(cfg, 4, rng);
  // identical rows: every pairwise cosine is 1, so every d_ij is 0
  Tensor state(Shape{3, 4});
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) state.at(r, c) = 0.3 * (c + 1);
  }
  const EdgeList g = build_adjacency(3, cfg.dense_radius, cfg.stride_base);
  Var out = net.layer_forward(0, Var::constant(state), Var::constant(state), g);

  const auto params = net.parameters();
  const Tensor& w0 = params[0].value();
  const Tensor& b0 = params[1].value();
  // unweighted sum of FFN0 over all three (identical) rows
  for (int o = 0; o < 4; ++o) {
    double f0 = b0[o];
    for (int c = 0; c < 4; ++c) f0 += state.at(0, c) * w0.at(o, c);
    const double expected = std::max(0.0, 3.0 * f0);
    for (int i = 0; i < 3; ++i) {
      CHECK(out.value().at(i, o) == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("gcn variant reproduces the two-node hand computation") {
  GraphConfig cfg = small_cfg(Aggregator::gcn);
  cfg.num_layers = 1;
  cfg.dense_radius = 1;
  Rng rng(14);
  GraphNet net(cfg, 3, rng);
  Rng data(15);
  const Tensor state = Tensor::uniform(Shape{2, 3}, -1.0, 1.0, data);
  const EdgeList g = build_adjacency(2, 1, 2);  // path with self-loops: degrees (2, 2)
  Var out = net.layer_forward(0, Var::constant(state), Var::constant(state), g);

  const auto params = net.parameters();
  const Tensor& w0 = params[0].value();
  const Tensor& b0 = params[1].value();
  Tensor f0(Shape{2, 3});
  for (int r = 0; r < 2; ++r) {
    for (int o = 0; o < 3; ++o) {
      double acc = b0[o];
      for (int c = 0; c < 3; ++c) acc += state.at(r, c) * w0.at(o, c);
      f0.at(r, o) = acc;
    }
  }
  for (int i = 0; i < 2; ++i) {
    for (int o = 0; o < 3; ++o) {
      const double expected = std::max(0.0, 0.5 * f0.at(0, o) + 0.5 * f0.at(1, o));
      CHECK(out.value().at(i, o) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("gat attention normalizes over each neighborhood") {
  GraphConfig cfg = small_cfg(Aggregator::gat);
  cfg.num_layers = 1;
  Rng rng(16);
  GraphNet net(cfg, 4, rng);
  // Constant FFN0 output c: node output relu(sum_j alpha_ij * c) equals c
  // exactly iff the attention weights sum to 1.
  auto params = net.parameters();
  params[0].mutable_value().fill(0.0);                    // w0
  for (int i = 0; i < 4; ++i) params[1].mutable_value()[i] = 1.0;  // b0 = ones
  Rng data(17);
  const Tensor state = Tensor::uniform(Shape{6, 4}, -1.0, 1.0, data);
  const EdgeList g = build_adjacency(6, 2, 2);
  Var out = net.layer_forward(0, Var::constant(state), Var::constant(state), g);
  for (int i = 0; i < out.value().numel(); ++i) {
    CHECK(std::abs(out.value()[i] - 1.0) < 1e-9);
  }
}

TEST_CASE("unknown aggregator tag is rejected") {
  CHECK_THROWS_AS(parse_aggregator("transformer"), ConfigError);
}

TEST_CASE("one-layer forward equals a single layer call") {
  GraphConfig cfg = small_cfg();
  cfg.num_layers = 1;
  Rng rng(18);
  GraphNet net(cfg, 5, rng);
  Rng data(19);
  const Tensor state = Tensor::uniform(Shape{6, 5}, -1.0, 1.0, data);
  Var full = net.forward(Var::constant(state));
  const EdgeList g = build_adjacency(6, cfg.dense_radius, cfg.stride_base);
  Var layer = net.layer_forward(0, Var::constant(state), Var::constant(state), g);
  for (int i = 0; i < full.value().numel(); ++i) CHECK(full.value()[i] == layer.value()[i]);
}

TEST_CASE("forward keeps shape and stays finite at T=16 d=32") {
  GraphConfig cfg = small_cfg();
  Rng rng(20);
  GraphNet net(cfg, 32, rng);
  Rng data(21);
  const Tensor state = Tensor::uniform(Shape{16, 32}, -1.0, 1.0, data);
  Var out = net.forward(Var::constant(state));
  CHECK(out.rows() == 16);
  CHECK(out.cols() == 32);
  for (int i = 0; i < out.value().numel(); ++i) CHECK(std::isfinite(out.value()[i]));
}

TEST_CASE("two-layer forward equals the manual composition with refreshed clues") {
  GraphConfig cfg = small_cfg();
  Rng rng(22);
  GraphNet net(cfg, 4, rng);
  Rng data(23);
  const Tensor state = Tensor::uniform(Shape{5, 4}, -1.0, 1.0, data);
  Var full = net.forward(Var::constant(state));
  const EdgeList g = build_adjacency(5, cfg.dense_radius, cfg.stride_base);
  Var first = net.layer_forward(0, Var::constant(state), Var::constant(state), g);
  Var second = net.layer_forward(1, first, first, g);
  for (int i = 0; i < full.value().numel(); ++i) CHECK(full.value()[i] == second.value()[i]);
}

TEST_CASE("frozen-clue switch reuses layer-0 states for relevance") {
  GraphConfig cfg = small_cfg();
  cfg.refresh_clues_each_layer = false;
  Rng rng(24);
  GraphNet net(cfg, 4, rng);
  Rng data(25);
  const Tensor state = Tensor::uniform(Shape{5, 4}, -1.0, 1.0, data);
  Var full = net.forward(Var::constant(state));
  const EdgeList g = build_adjacency(5, cfg.dense_radius, cfg.stride_base);
  Var initial = Var::constant(state);
  Var first = net.layer_forward(0, initial, initial, g);
  Var second = net.layer_forward(1, first, initial, g);
  for (int i = 0; i < full.value().numel(); ++i) CHECK(full.value()[i] == second.value()[i]);
}

TEST_CASE("gradients flow through two graph layers within tolerance") {
  GraphConfig cfg = small_cfg();
  Rng rng(26);
  GraphNet net(cfg, 8, rng);
  Var state = Var::parameter(Tensor::uniform(Shape{6, 8}, -1.0, 1.0, rng));
  std::vector<Var> params = net.parameters();
  params.push_back(state);
  const Var probe = Var::constant(Tensor::uniform(Shape{6, 8}, -1.0, 1.0, rng));
  const double err = finite_difference_check(
      params, [&] { return sum_all(mul(net.forward(state), probe)); }, 1e-5, 20, &rng);
  CHECK(err < 1e-4);
}

TEST_CASE("variant layers admit gradient checks too") {
  for (Aggregator agg : {Aggregator::gcn, Aggregator::gat, Aggregator::inverse_distance,
                         Aggregator::mlp_filter}) {
    GraphConfig cfg = small_cfg(agg);
    cfg.num_layers = 1;
    Rng rng(30 + static_cast<int>(agg));
    GraphNet net(cfg, 5, rng);
    Var state = Var::parameter(Tensor::uniform(Shape{4, 5}, -1.0, 1.0, rng));
    std::vector<Var> params = net.parameters();
    params.push_back(state);
    const Var probe = Var::constant(Tensor::uniform(Shape{4, 5}, -1.0, 1.0, rng));
    const double err = finite_difference_check(
        params, [&] { return sum_all(mul(net.forward(state), probe)); }, 1e-5, 15, &rng);
    CHECK(err < 1e-4);
  }
}
