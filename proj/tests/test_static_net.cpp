#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "tvg/errors.hpp"
#include "tvg/static_net.hpp"

using namespace tvg;
using tvgtest::finite_difference_check;

namespace {

// Plain-loop layer norm used by the straight-line oracle below.
std::vector<std::vector<double>> ln_rows(const std::vector<std::vector<double>>& x,
                                         const Tensor& gain, const Tensor& bias, double eps) {
  std::vector<std::vector<double>> out(x.size(), std::vector<double>(x[0].size()));
  for (std::size_t r = 0; r < x.size(); ++r) {
    const int d = static_cast<int>(x[r].size());
    double mu = 0.0;
    for (double v : x[r]) mu += v;
    mu /= d;
    double var = 0.0;
    for (double v : x[r]) var += (v - mu) * (v - mu);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int c = 0; c < d; ++c) out[r][c] = gain[c] * (x[r][c] - mu) * inv + bias[c];
  }
  return out;
}

std::vector<std::vector<double>> to_rows(const Tensor& t) {
  std::vector<std::vector<double>> out(t.rows(), std::vector<double>(t.cols()));
  for (int r = 0; r < t.rows(); ++r) {
    for (int c = 0; c < t.cols(); ++c) out[r][c] = t.at(r, c);
  }
  return out;
}

}  // namespace

TEST_CASE("positional encoding matches its closed form") {
  const Tensor pe = positional_encoding(3, 4);
  // position 0: sin terms are 0, cos terms are 1
  CHECK(pe.at(0, 0) == 0.0);
  CHECK(pe.at(0, 1) == 1.0);
  CHECK(pe.at(0, 2) == 0.0);
  CHECK(pe.at(0, 3) == 1.0);
  // position 1, first pair: sin(1), cos(1)
  CHECK(pe.at(1, 0) == doctest::Approx(0.8414709848).epsilon(1e-9));
  CHECK(pe.at(1, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-9));
  // second pair uses rate 10000^(2/4)
  CHECK(pe.at(1, 2) == doctest::Approx(std::sin(1.0 / 100.0)).epsilon(1e-9));
  CHECK_THROWS_AS(positional_encoding(3, 5), ConfigError);
}

TEST_CASE("mlp_block with zeroed linear weights outputs zeros") {
  StaticConfig cfg;
  cfg.dim = 8;
  cfg.num_blocks = 1;
  Rng rng(5);
  StaticNet net(cfg, rng);
  for (Var& p : net.parameters()) {
    if (p.value().rank() == 2 && p.value().rows() == cfg.dim) p.mutable_value().fill(0.0);
  }
  Rng data_rng(6);
  Var x = Var::constant(Tensor::uniform(Shape{5, 8}, -2.0, 2.0, data_rng));
  Var y = net.mlp_block(0, x);
  for (int i = 0; i < y.value().numel(); ++i) CHECK(y.value()[i] == 0.0);
}

TEST_CASE("mlp_block with identity linears equals relu of layer norm") {
  StaticConfig cfg;
  cfg.dim = 6;
  cfg.num_blocks = 1;
  Rng rng(7);
  StaticNet net(cfg, rng);
  for (Var& p : net.parameters()) {
    if (p.value().rank() == 2 && p.value().rows() == cfg.dim) {
      p.mutable_value().fill(0.0);
      for (int i = 0; i < cfg.dim; ++i) p.mutable_value().at(i, i) = 1.0;
    }
  }
  Rng data_rng(8);
  const Tensor x = Tensor::uniform(Shape{4, 6}, -2.0, 2.0, data_rng);
  Var y = net.mlp_block(0, Var::constant(x));

  const Tensor unit_gain = Tensor::full(Shape{1, 6}, 1.0);
  const Tensor zero_bias = Tensor::zeros(Shape{1, 6});
  const auto normed = ln_rows(to_rows(x), unit_gain, zero_bias, cfg.ln_epsilon);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 6; ++c) {
      const double expected = std::max(0.0, normed[r][c]);
      CHECK(y.value().at(r, c) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("mlp_block gradient matches finite differences") {
  StaticConfig cfg;
  cfg.dim = 6;
  cfg.num_blocks = 1;
  Rng rng(9);
  StaticNet net(cfg, rng);
  Var x = Var::parameter(Tensor::uniform(Shape{3, 6}, -1.0, 1.0, rng));
  std::vector<Var> params = net.parameters();
  params.push_back(x);
  const Var probe = Var::constant(Tensor::uniform(Shape{3, 6}, -1.0, 1.0, rng));
  const double err = finite_difference_check(
      params, [&] { return sum_all(mul(net.mlp_block(0, x), probe)); });
  CHECK(err < 1e-4);
}

TEST_CASE("forward produces the contracted shapes") {
  StaticConfig cfg;
  cfg.dim = 16;
  Rng rng(10);
  StaticNet net(cfg, rng);
  Var fv = Var::constant(Tensor::uniform(Shape{8, 16}, -1.0, 1.0, rng));
  Var fq = Var::constant(Tensor::uniform(Shape{3, 16}, -1.0, 1.0, rng));
  auto [v_out, q_out] = net.forward(fv, fq);
  CHECK(v_out.rows() == 8);
  CHECK(v_out.cols() == 16);
  CHECK(q_out.rows() == 3);
  CHECK(q_out.cols() == 16);
  for (int i = 0; i < v_out.value().numel(); ++i) CHECK(std::isfinite(v_out.value()[i]));
}

TEST_CASE("forward rejects zero queries") {
  StaticConfig cfg;
  cfg.dim = 8;
  Rng rng(11);
  StaticNet net(cfg, rng);
  Var fv = Var::constant(Tensor::uniform(Shape{4, 8}, -1.0, 1.0, rng));
  // A zero-row tensor cannot exist, so the thinnest violation is a width
  // mismatch posing as a query matrix.
  CHECK_THROWS_AS(net.forward(fv, Var::constant(Tensor::zeros(Shape{1, 4}))), DimensionError);
}

TEST_CASE("single query slice matches the same rows of a larger run") {
  // Row-local contract: the video slice of the output cannot depend on which
  // query rows ride along, once positional rows are pinned.
  StaticConfig cfg;
  cfg.dim = 12;
  Rng rng(12);
  StaticNet net(cfg, rng);
  Rng data(13);
  const Tensor video = Tensor::uniform(Shape{6, 12}, -1.0, 1.0, data);
  const Tensor queries = Tensor::uniform(Shape{3, 12}, -1.0, 1.0, data);

  auto [v_full, q_full] = net.forward(Var::constant(video), Var::constant(queries));

  Tensor one_query(Shape{1, 12});
  for (int c = 0; c < 12; ++c) one_query.at(0, c) = queries.at(0, c);
  const Tensor pe_full = positional_encoding(6 + 3, 12);
  Tensor pe_single(Shape{7, 12});
  for (int r = 0; r < 7; ++r) {
    for (int c = 0; c < 12; ++c) pe_single.at(r, c) = pe_full.at(r, c);
  }
  auto [v_one, q_one] = net.forward(Var::constant(video), Var::constant(one_query), &pe_single);

  for (int i = 0; i < v_full.value().numel(); ++i) {
    CHECK(v_one.value()[i] == v_full.value()[i]);
  }
  for (int c = 0; c < 12; ++c) CHECK(q_one.value().at(0, c) == q_full.value().at(0, c));
}

TEST_CASE("forward equals a straight-line re-composition") {
  StaticConfig cfg;
  cfg.dim = 10;
  cfg.num_blocks = 2;
  Rng rng(14);
  StaticNet net(cfg, rng);
  Rng data(15);
  const Tensor video = Tensor::uniform(Shape{5, 10}, -1.0, 1.0, data);
  const Tensor queries = Tensor::uniform(Shape{2, 10}, -1.0, 1.0, data);
  auto [v_out, q_out] = net.forward(Var::constant(video), Var::constant(queries));

  // Independent recomputation with plain loops. Parameter order: ln0 gain,
  // ln0 bias, then per block {ln_in g/b, w1, b1, w2, b2, ln_out g/b}.
  const std::vector<Var> params = net.parameters();
  const int t = 5, m = 2, d = 10;
  std::vector<std::vector<double>> joint(t + m, std::vector<double>(d));
  for (int r = 0; r < t; ++r) {
    for (int c = 0; c < d; ++c) joint[r][c] = video.at(r, c);
  }
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < d; ++c) joint[t + r][c] = queries.at(r, c);
  }
  const Tensor pe = positional_encoding(t + m, d);
  const auto normed0 = ln_rows(joint, params[0].value(), params[1].value(), cfg.ln_epsilon);
  std::vector<std::vector<double>> mixed(t + m, std::vector<double>(d));
  for (int r = 0; r < t + m; ++r) {
    for (int c = 0; c < d; ++c) mixed[r][c] = joint[r][c] + normed0[r][c] + pe.at(r, c);
  }
  for (int block = 0; block < cfg.num_blocks; ++block) {
    const int base = 2 + block * 8;
    const Tensor& ln_in_g = params[base + 0].value();
    const Tensor& ln_in_b = params[base + 1].value();
    const Tensor& w1 = params[base + 2].value();
    const Tensor& b1 = params[base + 3].value();
    const Tensor& w2 = params[base + 4].value();
    const Tensor& b2 = params[base + 5].value();
    const Tensor& ln_out_g = params[base + 6].value();
    const Tensor& ln_out_b = params[base + 7].value();

    const auto pre = ln_rows(mixed, ln_in_g, ln_in_b, cfg.ln_epsilon);
    std::vector<std::vector<double>> hidden(t + m, std::vector<double>(d));
    for (int r = 0; r < t + m; ++r) {
      for (int o = 0; o < d; ++o) {
        double acc = b1[o];
        for (int c = 0; c < d; ++c) acc += pre[r][c] * w1.at(o, c);
        hidden[r][o] = std::max(0.0, acc);
      }
    }
    std::vector<std::vector<double>> block_out(t + m, std::vector<double>(d));
    for (int r = 0; r < t + m; ++r) {
      for (int o = 0; o < d; ++o) {
        double acc = b2[o];
        for (int c = 0; c < d; ++c) acc += hidden[r][c] * w2.at(o, c);
        block_out[r][o] = mixed[r][o] + acc;  // residual
      }
    }
    mixed = ln_rows(block_out, ln_out_g, ln_out_b, cfg.ln_epsilon);
  }

  double worst = 0.0;
  for (int r = 0; r < t; ++r) {
    for (int c = 0; c < d; ++c) worst = std::max(worst, std::abs(v_out.value().at(r, c) - mixed[r][c]));
  }
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < d; ++c) {
      worst = std::max(worst, std::abs(q_out.value().at(r, c) - mixed[t + r][c]));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("query permutation leaves video rows identical and permutes query rows") {
  StaticConfig cfg;
  cfg.dim = 8;
  Rng rng(16);
  StaticNet net(cfg, rng);
  Rng data(17);
  const Tensor video = Tensor::uniform(Shape{4, 8}, -1.0, 1.0, data);
  const Tensor queries = Tensor::uniform(Shape{3, 8}, -1.0, 1.0, data);
  const std::vector<int> perm{2, 0, 1};

  Tensor permuted(Shape{3, 8});
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 8; ++c) permuted.at(r, c) = queries.at(perm[r], c);
  }
  const Tensor pe = positional_encoding(4 + 3, 8);
  Tensor pe_perm = pe;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 8; ++c) pe_perm.at(4 + r, c) = pe.at(4 + perm[r], c);
  }

  auto [v_base, q_base] = net.forward(Var::constant(video), Var::constant(queries));
  auto [v_perm, q_perm] = net.forward(Var::constant(video), Var::constant(permuted), &pe_perm);

  for (int i = 0; i < v_base.value().numel(); ++i) {
    CHECK(v_perm.value()[i] == v_base.value()[i]);
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 8; ++c) {
      CHECK(q_perm.value().at(r, c) == q_base.value().at(perm[r], c));
    }
  }
}

TEST_CASE("num_blocks zero reduces to the mixed sequence slices") {
  StaticConfig cfg;
  cfg.dim = 8;
  cfg.num_blocks = 0;
  Rng rng(18);
  StaticNet net(cfg, rng);
  Rng data(19);
  const Tensor video = Tensor::uniform(Shape{3, 8}, -1.0, 1.0, data);
  const Tensor queries = Tensor::uniform(Shape{2, 8}, -1.0, 1.0, data);
  auto [v_out, q_out] = net.forward(Var::constant(video), Var::constant(queries));

  std::vector<std::vector<double>> joint(5, std::vector<double>(8));
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 8; ++c) joint[r][c] = video.at(r, c);
  }
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 8; ++c) joint[3 + r][c] = queries.at(r, c);
  }
  const Tensor pe = positional_encoding(5, 8);
  const auto params = net.parameters();
  const auto normed = ln_rows(joint, params[0].value(), params[1].value(), cfg.ln_epsilon);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 8; ++c) {
      CHECK(v_out.value().at(r, c) ==
            doctest::Approx(joint[r][c] + normed[r][c] + pe.at(r, c)).epsilon(1e-14));
    }
  }
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 8; ++c) {
      CHECK(q_out.value().at(r, c) ==
            doctest::Approx(joint[3 + r][c] + normed[3 + r][c] + pe.at(3 + r, c)).epsilon(1e-14));
    }
  }
}

TEST_CASE("full static forward matches finite differences") {
  StaticConfig cfg;
  cfg.dim = 6;
  Rng rng(20);
  StaticNet net(cfg, rng);
  Var fv = Var::parameter(Tensor::uniform(Shape{4, 6}, -1.0, 1.0, rng));
  Var fq = Var::parameter(Tensor::uniform(Shape{2, 6}, -1.0, 1.0, rng));
  std::vector<Var> params = net.parameters();
  params.push_back(fv);
  params.push_back(fq);
  const Var probe_v = Var::constant(Tensor::uniform(Shape{4, 6}, -1.0, 1.0, rng));
  const Var probe_q = Var::constant(Tensor::uniform(Shape{2, 6}, -1.0, 1.0, rng));
  const double err = finite_difference_check(params, [&] {
    auto [v, q] = net.forward(fv, fq);
    return add(sum_all(mul(v, probe_v)), sum_all(mul(q, probe_q)));
  });
  CHECK(err < 1e-4);
}
