#ifndef TVG_GRAPH_NET_HPP
#define TVG_GRAPH_NET_HPP

#include <string>
#include <utility>
#include <vector>

#include "tvg/autodiff.hpp"
#include "tvg/rng.hpp"

namespace tvg {

enum class Aggregator {
  temporal_gaussian,  // multi-kernel Gaussian filter over the joint clue
  gcn,                // symmetric degree normalization
  gat,                // single-head additive attention over neighborhoods
  inverse_distance,   // scalar 1/(d+1) weighting
  mlp_filter,         // learned affine expansion of the clue instead of kernels
};

Aggregator parse_aggregator(const std::string& name);
std::string aggregator_name(Aggregator a);

struct GraphConfig {
  int num_layers = 2;
  double gamma = 10.0;
  int num_kernels = 50;
  double kernel_step = 0.1;  // kernel biases sit at k * kernel_step, k = 0..h-1
  int dense_radius = 2;      // scales with clip count; 8 suits T = 64 grids
  int stride_base = 2;
  Aggregator aggregator = Aggregator::temporal_gaussian;
  // Test hook: when false, edge clues are computed once from the layer-0
  // states instead of being refreshed from each layer's input.
  bool refresh_clues_each_layer = true;

  void validate() const;
};

// Sparse symmetric clip graph with self-loops. neighbors[i] is sorted.
struct EdgeList {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;  // every ordered pair (i, j), j in N(i)
  std::vector<std::vector<int>> neighbors;
};

// Diffusive connectivity: dense for |i-j| <= dense_radius; beyond that a
// distance D lying in the geometric tier [s^k, s^(k+1)) with s^k > dense_radius
// is kept only when s^k divides D. Always symmetric, always self-looped.
EdgeList build_adjacency(int num_nodes, int dense_radius, int stride_base);

struct EdgeClue {
  int temporal_distance = 0;  // |j - i|
  double relevance = 0.0;     // cosine of the two node vectors (0 for zero rows)
  double joint = 0.0;         // (1 - relevance) * distance
};

EdgeClue joint_clue(const std::vector<double>& vi, const std::vector<double>& vj, int i, int j);

// Multi-kernel Gaussian expansion exp(-gamma * (d - z_k)^2) for each bias.
std::vector<double> gaussian_filter(double joint_clue, const GraphConfig& cfg);

// Stacked filtering graph convolution over clip node states.
class GraphNet {
 public:
  GraphNet(const GraphConfig& cfg, int dim, Rng& rng);

  // One message-passing layer. clue_states supplies the rows used for edge
  // relevance; the regular path passes `states` for both.
  Var layer_forward(int layer, const Var& states, const Var& clue_states,
                    const EdgeList& graph) const;

  // All layers over a fresh adjacency for states.rows() nodes.
  Var forward(const Var& states) const;

  std::vector<Var> parameters() const;
  const GraphConfig& config() const { return cfg_; }

 private:
  struct Layer {
    Var w0, b0;            // node transform, d -> d
    Var w1, b1;            // filter transform, h -> d
    Var wm, bm;            // mlp_filter clue expansion, 1 -> h
    Var att_src, att_dst;  // gat attention vectors, [1, d]
  };

  Var edge_joint_clue(const Var& clue_states, int i, int j) const;

  GraphConfig cfg_;
  int dim_;
  std::vector<Layer> layers_;
};

}  // namespace tvg

#endif  // TVG_GRAPH_NET_HPP
