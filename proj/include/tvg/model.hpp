#ifndef TVG_MODEL_HPP
#define TVG_MODEL_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tvg/graph_net.hpp"
#include "tvg/matcher.hpp"
#include "tvg/proposal.hpp"
#include "tvg/static_net.hpp"

namespace tvg {

struct ModelConfig {
  int video_dim = 16;
  int query_dim = 16;
  int dim = 64;        // shared width after input projection
  int align_dim = 64;  // cross-modal embedding width
  bool static_on = true;
  bool dynamic_on = true;
  StaticConfig static_cfg;
  GraphConfig graph;
  ProposalConfig proposal;
  LossConfig loss;
  std::uint64_t seed = 7;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// Full grounding pipeline: input projections, optional static fusion,
// optional temporal graph, 2-D proposal map, cross-modal scoring.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  struct Forward {
    Var score_rows;  // [T*T, M] cosine scores (zero rows off-triangle)
    Var moment_emb;  // [T*T, align]
    Var query_emb;   // [M, align]
    int num_clips = 0;
    int num_queries = 0;
  };

  Forward forward(const Tensor& clip_features, const Tensor& query_features) const;

  ScoreMap score_map(const Forward& fwd) const;

  const ModelConfig& config() const { return cfg_; }
  std::vector<std::pair<std::string, Var>> named_parameters() const;
  std::vector<Var> parameters() const;
  // Parameters of the modules the configuration actually routes through;
  // this is what an optimizer should drive.
  std::vector<Var> trainable_parameters() const;
  int parameter_count() const;

  // Checkpoint: magic "TVC1", version, seed, config JSON, then every named
  // parameter as f64 little-endian. Bit-exact round trip.
  void save(const std::string& path) const;
  static Model load(const std::string& path);

 private:
  ModelConfig cfg_;
  Var proj_video_w_, proj_video_b_;
  Var proj_query_w_, proj_query_b_;
  std::unique_ptr<StaticNet> static_net_;
  std::unique_ptr<GraphNet> graph_net_;
  std::unique_ptr<ProposalNet> proposal_net_;
  std::unique_ptr<Matcher> matcher_;
};

}  // namespace tvg

#endif  // TVG_MODEL_HPP
