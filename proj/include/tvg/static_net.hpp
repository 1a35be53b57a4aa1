#ifndef TVG_STATIC_NET_HPP
#define TVG_STATIC_NET_HPP

#include <utility>
#include <vector>

#include "tvg/autodiff.hpp"
#include "tvg/rng.hpp"

namespace tvg {

struct StaticConfig {
  int dim = 64;        // common feature width after input projection
  int num_blocks = 2;  // residual MLP blocks; 0 is a test hook that skips them
  double ln_epsilon = 1e-5;

  void validate() const;
};

// Sinusoidal positional matrix [n x d]; throws ConfigError for odd d.
Tensor positional_encoding(int n, int d);

// Joint residual-MLP interaction over the concatenated video+query sequence.
// Video rows occupy positions [0, T), query rows [T, T+M); both sides share
// one positional index space.
class StaticNet {
 public:
  StaticNet(const StaticConfig& cfg, Rng& rng);

  // One block: layer_norm -> linear -> relu -> linear, width preserved.
  Var mlp_block(int block, const Var& x) const;

  // Full fused pass over projected features. Returns (video rows, query rows).
  // positional_override replaces the computed sinusoidal matrix; tests use it
  // to move positional rows together with permuted query rows.
  std::pair<Var, Var> forward(const Var& video, const Var& query,
                              const Tensor* positional_override = nullptr) const;

  std::vector<Var> parameters() const;
  const StaticConfig& config() const { return cfg_; }

 private:
  struct Block {
    Var ln_in_gain, ln_in_bias;
    Var w1, b1, w2, b2;
    Var ln_out_gain, ln_out_bias;
  };

  StaticConfig cfg_;
  Var ln0_gain_, ln0_bias_;  // the additive LayerNorm on the raw joint sequence
  std::vector<Block> blocks_;
};

}  // namespace tvg

#endif  // TVG_STATIC_NET_HPP
