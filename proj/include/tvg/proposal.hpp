#ifndef TVG_PROPOSAL_HPP
#define TVG_PROPOSAL_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tvg/autodiff.hpp"
#include "tvg/rng.hpp"

namespace tvg {

enum class Fusion { content_only, boundary_add, boundary_concat };
enum class Pooling { maxpool, conv };

Fusion parse_fusion(const std::string& name);
std::string fusion_name(Fusion f);
Pooling parse_pooling(const std::string& name);
std::string pooling_name(Pooling p);

struct ProposalConfig {
  Fusion fusion = Fusion::boundary_add;
  Pooling pooling = Pooling::maxpool;
  int conv_layers = 2;
  int kernel_size = 3;
  int hidden = 64;        // encoder channel width
  int conv1d_kernel = 3;  // span convolution width for conv pooling

  void validate() const;
};

// All candidate spans (i, j) with 0 <= i <= j < num_clips, row-major.
std::vector<std::pair<int, int>> enumerate_moments(int num_clips);

// Upper-triangular validity mask over the flattened T*T grid.
std::vector<std::uint8_t> valid_mask(int num_clips);

// Builds and encodes the T x T proposal feature map from clip node states.
// Cells are stored as rows of a [T*T, channels] matrix in row-major (i, j)
// order; rows at invalid cells (i > j) are exactly zero.
class ProposalNet {
 public:
  ProposalNet(const ProposalConfig& cfg, int dim, Rng& rng);

  // Span feature for clips [i, j]: pooled content, optionally fused with the
  // boundary rows. Width is dim, or 2*dim under concat fusion.
  Var moment_feature(const Var& states, int i, int j) const;

  // Fills every valid cell (projecting concat fusion back to dim).
  Var populate(const Var& states) const;

  // Stack of same-padded 2-D convolutions with ReLU after each layer and
  // invalid cells re-zeroed after each layer.
  Var encode(const Var& map_rows, int num_clips) const;

  int encoded_dim() const { return cfg_.hidden; }
  std::vector<Var> parameters() const;
  const ProposalConfig& config() const { return cfg_; }

 private:
  ProposalConfig cfg_;
  int dim_;
  Var concat_w_, concat_b_;  // 2d -> d projection for concat fusion
  Var span_w_, span_b_;      // conv pooling kernel
  std::vector<Var> conv_w_, conv_b_;
};

}  // namespace tvg

#endif  // TVG_PROPOSAL_HPP
