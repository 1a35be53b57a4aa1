#include "tvg/static_net.hpp"

#include <cmath>
#include <string>

#include "tvg/errors.hpp"

namespace tvg {

void StaticConfig::validate() const {
  if (dim <= 0) throw ConfigError("static: dim must be positive");
  if (dim % 2 != 0) throw ConfigError("static: dim must be even for positional encoding");
  if (num_blocks < 0) throw ConfigError("static: num_blocks must be >= 0");
  if (!(ln_epsilon > 0.0)) throw ConfigError("static: ln_epsilon must be > 0");
}

Tensor positional_encoding(int n, int d) {
  if (n <= 0) throw ConfigError("positional_encoding: n must be positive");
  if (d <= 0 || d % 2 != 0) throw ConfigError("positional_encoding: d must be positive and even");
  Tensor pe(Shape{n, d});
  for (int p = 0; p < n; ++p) {
    for (int i = 0; i < d / 2; ++i) {
      const double rate = std::pow(10000.0, 2.0 * i / d);
      pe.at(p, 2 * i) = std::sin(p / rate);
      pe.at(p, 2 * i + 1) = std::cos(p / rate);
    }
  }
  return pe;
}

StaticNet::StaticNet(const StaticConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.dim;
  ln0_gain_ = Var::parameter(Tensor::full(Shape{1, d}, 1.0));
  ln0_bias_ = Var::parameter(Tensor::zeros(Shape{1, d}));
  blocks_.resize(cfg_.num_blocks);
  for (Block& b : blocks_) {
    b.ln_in_gain = Var::parameter(Tensor::full(Shape{1, d}, 1.0));
    b.ln_in_bias = Var::parameter(Tensor::zeros(Shape{1, d}));
    b.w1 = Var::parameter(Tensor::xavier(Shape{d, d}, d, d, rng));
    b.b1 = Var::parameter(Tensor::zeros(Shape{1, d}));
    b.w2 = Var::parameter(Tensor::xavier(Shape{d, d}, d, d, rng));
    b.b2 = Var::parameter(Tensor::zeros(Shape{1, d}));
    b.ln_out_gain = Var::parameter(Tensor::full(Shape{1, d}, 1.0));
    b.ln_out_bias = Var::parameter(Tensor::zeros(Shape{1, d}));
  }
}

Var StaticNet::mlp_block(int block, const Var& x) const {
  if (block < 0 || block >= static_cast<int>(blocks_.size())) {
    throw ContractError("static: block index out of range");
  }
  if (x.cols() != cfg_.dim) {
    throw DimensionError("mlp_block: input width " + std::to_string(x.cols()) + " vs dim " +
                         std::to_string(cfg_.dim));
  }
  const Block& b = blocks_[block];
  Var h = layer_norm(x, b.ln_in_gain, b.ln_in_bias, cfg_.ln_epsilon);
  h = linear(h, b.w1, b.b1);
  h = relu(h);
  return linear(h, b.w2, b.b2);
}

std::pair<Var, Var> StaticNet::forward(const Var& video, const Var& query,
                                       const Tensor* positional_override) const {
  if (video.cols() != cfg_.dim || query.cols() != cfg_.dim) {
    throw DimensionError("static: inputs must be projected to width " + std::to_string(cfg_.dim));
  }
  const int t = video.rows();
  const int m = query.rows();
  if (m < 1) throw ContractError("static: at least one query row required");

  Var joint = concat_rows({video, query});
  Var pos = Var::constant(positional_override != nullptr ? *positional_override
                                                         : positional_encoding(t + m, cfg_.dim));
  Var mixed = add(add(joint, layer_norm(joint, ln0_gain_, ln0_bias_, cfg_.ln_epsilon)), pos);
  for (int i = 0; i < cfg_.num_blocks; ++i) {
    const Block& b = blocks_[i];
    mixed = layer_norm(add(mixed, mlp_block(i, mixed)), b.ln_out_gain, b.ln_out_bias,
                       cfg_.ln_epsilon);
  }
  return {slice_rows(mixed, 0, t), slice_rows(mixed, t, t + m)};
}

std::vector<Var> StaticNet::parameters() const {
  std::vector<Var> out{ln0_gain_, ln0_bias_};
  for (const Block& b : blocks_) {
    out.insert(out.end(), {b.ln_in_gain, b.ln_in_bias, b.w1, b.b1, b.w2, b.b2, b.ln_out_gain,
                           b.ln_out_bias});
  }
  return out;
}

}  // namespace tvg
