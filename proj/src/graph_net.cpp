#include "tvg/graph_net.hpp"

#include <algorithm>
#include <cmath>

#include "tvg/errors.hpp"

namespace tvg {

Aggregator parse_aggregator(const std::string& name) {
  if (name == "tgf") return Aggregator::temporal_gaussian;
  if (name == "gcn") return Aggregator::gcn;
  if (name == "gat") return Aggregator::gat;
  if (name == "d" || name == "inv_distance") return Aggregator::inverse_distance;
  if (name == "mlp") return Aggregator::mlp_filter;
  throw ConfigError("graph: unknown aggregator '" + name + "'");
}

std::string aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::temporal_gaussian: return "tgf";
    case Aggregator::gcn: return "gcn";
    case Aggregator::gat: return "gat";
    case Aggregator::inverse_distance: return "d";
    case Aggregator::mlp_filter: return "mlp";
  }
  throw ConfigError("graph: unknown aggregator tag");
}

void GraphConfig::validate() const {
  if (num_layers < 1) throw ConfigError("graph: num_layers must be >= 1");
  if (!(gamma > 0.0)) throw ConfigError("graph: gamma must be > 0");
  if (num_kernels < 1) throw ConfigError("graph: num_kernels must be >= 1");
  if (!(kernel_step > 0.0)) throw ConfigError("graph: kernel_step must be > 0");
  if (dense_radius < 1) throw ConfigError("graph: dense_radius must be >= 1");
  if (stride_base < 2) throw ConfigError("graph: stride_base must be >= 2");
}

namespace {

bool distance_connected(int dist, int dense_radius, int stride_base) {
  if (dist <= dense_radius) return true;
  // Walk up tiers [s^k, s^(k+1)); the first tier starts above dense_radius.
  long long tier = 1;
  while (tier <= dense_radius) tier *= stride_base;
  while (tier <= dist) {
    if (dist < tier * stride_base) return dist % tier == 0;
    tier *= stride_base;
  }
  return false;
}

}  // namespace

EdgeList build_adjacency(int num_nodes, int dense_radius, int stride_base) {
  if (num_nodes < 1) throw ContractError("graph: num_nodes must be >= 1");
  if (dense_radius < 1) throw ContractError("graph: dense_radius must be >= 1");
  if (stride_base < 2) throw ContractError("graph: stride_base must be >= 2");
  EdgeList g;
  g.num_nodes = num_nodes;
  g.neighbors.resize(num_nodes);
  for (int i = 0; i < num_nodes; ++i) {
    for (int j = 0; j < num_nodes; ++j) {
      if (i == j || distance_connected(std::abs(i - j), dense_radius, stride_base)) {
        g.neighbors[i].push_back(j);
        g.edges.emplace_back(i, j);
      }
    }
  }
  return g;
}

EdgeClue joint_clue(const std::vector<double>& vi, const std::vector<double>& vj, int i, int j) {
  if (vi.size() != vj.size()) throw DimensionError("joint_clue: vector size mismatch");
  EdgeClue clue;
  clue.temporal_distance = std::abs(j - i);
  double dot = 0.0, ni = 0.0, nj = 0.0;
  for (std::size_t k = 0; k < vi.size(); ++k) {
    dot += vi[k] * vj[k];
    ni += vi[k] * vi[k];
    nj += vj[k] * vj[k];
  }
  clue.relevance = (ni > 0.0 && nj > 0.0) ? dot / std::sqrt(ni * nj) : 0.0;
  clue.joint = (1.0 - clue.relevance) * clue.temporal_distance;
  return clue;
}

std::vector<double> gaussian_filter(double joint_clue, const GraphConfig& cfg) {
  if (joint_clue < 0.0) throw ContractError("gaussian_filter: clue must be >= 0");
  std::vector<double> out(cfg.num_kernels);
  for (int k = 0; k < cfg.num_kernels; ++k) {
    const double diff = joint_clue - k * cfg.kernel_step;
    out[k] = std::exp(-cfg.gamma * diff * diff);
  }
  return out;
}

GraphNet::GraphNet(const GraphConfig& cfg, int dim, Rng& rng) : cfg_(cfg), dim_(dim) {
  cfg_.validate();
  if (dim_ <= 0) throw ConfigError("graph: dim must be positive");
  const int h = cfg_.num_kernels;
  layers_.resize(cfg_.num_layers);
  for (Layer& layer : layers_) {
    layer.w0 = Var::parameter(Tensor::xavier(Shape{dim_, dim_}, dim_, dim_, rng));
    layer.b0 = Var::parameter(Tensor::zeros(Shape{1, dim_}));
    switch (cfg_.aggregator) {
      case Aggregator::temporal_gaussian:
        layer.w1 = Var::parameter(Tensor::xavier(Shape{dim_, h}, h, dim_, rng));
        layer.b1 = Var::parameter(Tensor::zeros(Shape{1, dim_}));
        break;
      case Aggregator::mlp_filter:
        layer.w1 = Var::parameter(Tensor::xavier(Shape{dim_, h}, h, dim_, rng));
        layer.b1 = Var::parameter(Tensor::zeros(Shape{1, dim_}));
        layer.wm = Var::parameter(Tensor::xavier(Shape{h, 1}, 1, h, rng));
        layer.bm = Var::parameter(Tensor::zeros(Shape{1, h}));
        break;
      case Aggregator::gat:
        layer.att_src = Var::parameter(Tensor::xavier(Shape{1, dim_}, dim_, 1, rng));
        layer.att_dst = Var::parameter(Tensor::xavier(Shape{1, dim_}, dim_, 1, rng));
        break;
      case Aggregator::gcn:
      case Aggregator::inverse_distance:
        break;
    }
  }
}

// Joint clue d_ij = (1 - cos) * |j - i| as a [1,1] tape node. Self-loops are
// exactly zero regardless of relevance.
Var GraphNet::edge_joint_clue(const Var& clue_states, int i, int j) const {
  const double dist = std::abs(j - i);
  if (i == j) return Var::constant(Tensor::scalar(0.0));
  Var cos_ij = cosine_similarity_rows(slice_rows(clue_states, i, i + 1),
                                      slice_rows(clue_states, j, j + 1));
  return affine(cos_ij, -dist, dist);
}

Var GraphNet::layer_forward(int layer, const Var& states, const Var& clue_states,
                            const EdgeList& graph) const {
  if (layer < 0 || layer >= static_cast<int>(layers_.size())) {
    throw ContractError("graph: layer index out of range");
  }
  if (states.cols() != dim_) {
    throw DimensionError("graph: state width " + std::to_string(states.cols()) + " vs dim " +
                         std::to_string(dim_));
  }
  if (states.rows() != graph.num_nodes) {
    throw DimensionError("graph: state rows do not match graph nodes");
  }
  const Layer& p = layers_[layer];
  const int t = graph.num_nodes;
  const int h = cfg_.num_kernels;

  Var transformed = linear(states, p.w0, p.b0);
  std::vector<Var> node_rows(t);
  for (int j = 0; j < t; ++j) node_rows[j] = slice_rows(transformed, j, j + 1);

  // Kernel biases as a constant row, shared across edges.
  Tensor biases(Shape{1, h});
  for (int k = 0; k < h; ++k) biases[k] = k * cfg_.kernel_step;
  const Var bias_row = Var::constant(biases);
  const Var ones_row = Var::constant(Tensor::full(Shape{1, h}, 1.0));

  std::vector<int> degree(t);
  for (int i = 0; i < t; ++i) degree[i] = static_cast<int>(graph.neighbors[i].size());

  // GAT per-node raw attention logits come from shared projections.
  Var att_src_scores, att_dst_scores;
  if (cfg_.aggregator == Aggregator::gat) {
    att_src_scores = matmul_nt(transformed, p.att_src);  // [t,1]
    att_dst_scores = matmul_nt(transformed, p.att_dst);
  }

  std::vector<Var> out_rows;
  out_rows.reserve(t);
  for (int i = 0; i < t; ++i) {
    const std::vector<int>& nbrs = graph.neighbors[i];

    Var gat_alpha;  // [1, |N(i)|]
    if (cfg_.aggregator == Aggregator::gat) {
      std::vector<Var> logits;
      logits.reserve(nbrs.size());
      for (int j : nbrs) {
        logits.push_back(leaky_relu(add(slice_rows(att_src_scores, i, i + 1),
                                        slice_rows(att_dst_scores, j, j + 1)),
                                    0.2));
      }
      gat_alpha = vexp(log_softmax_rows(concat_cols(logits)));
    }

    Var acc;
    for (std::size_t n = 0; n < nbrs.size(); ++n) {
      const int j = nbrs[n];
      Var msg;
      switch (cfg_.aggregator) {
        case Aggregator::temporal_gaussian: {
          Var clue = edge_joint_clue(clue_states, i, j);
          Var spread = matmul(clue, ones_row);             // [1,h]
          Var diff = sub(spread, bias_row);
          Var filt = vexp(affine(mul(diff, diff), -cfg_.gamma, 0.0));
          msg = mul(linear(filt, p.w1, p.b1), node_rows[j]);
          break;
        }
        case Aggregator::mlp_filter: {
          Var clue = edge_joint_clue(clue_states, i, j);
          Var filt = linear(clue, p.wm, p.bm);             // learned 1 -> h expansion
          msg = mul(linear(filt, p.w1, p.b1), node_rows[j]);
          break;
        }
        case Aggregator::inverse_distance: {
          Var clue = edge_joint_clue(clue_states, i, j);
          Var weight = reciprocal(affine(clue, 1.0, 1.0));  // 1 / (d + 1)
          msg = matmul(weight, node_rows[j]);
          break;
        }
        case Aggregator::gcn: {
          const double weight = 1.0 / std::sqrt(static_cast<double>(degree[i]) * degree[j]);
          msg = affine(node_rows[j], weight, 0.0);
          break;
        }
        case Aggregator::gat: {
          Var alpha = select_per_row(gat_alpha, {static_cast<int>(n)});
          msg = matmul(alpha, node_rows[j]);
          break;
        }
      }
      acc = acc.defined() ? add(acc, msg) : msg;
    }
    out_rows.push_back(relu(acc));
  }
  return concat_rows(out_rows);
}

Var GraphNet::forward(const Var& states) const {
  const EdgeList graph = build_adjacency(states.rows(), cfg_.dense_radius, cfg_.stride_base);
  Var current = states;
  const Var initial = states;
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const Var& clue_source = cfg_.refresh_clues_each_layer ? current : initial;
    current = layer_forward(l, current, clue_source, graph);
  }
  return current;
}

std::vector<Var> GraphNet::parameters() const {
  std::vector<Var> out;
  for (const Layer& layer : layers_) {
    for (const Var& v : {layer.w0, layer.b0, layer.w1, layer.b1, layer.wm, layer.bm,
                         layer.att_src, layer.att_dst}) {
      if (v.defined()) out.push_back(v);
    }
  }
  return out;
}

}  // namespace tvg
