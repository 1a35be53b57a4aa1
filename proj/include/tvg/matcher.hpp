#ifndef TVG_MATCHER_HPP
#define TVG_MATCHER_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include "tvg/autodiff.hpp"
#include "tvg/metrics.hpp"
#include "tvg/rng.hpp"

namespace tvg {

struct LossConfig {
  double iou_scale_min = 0.5;  // raw IoU at or below this scales to 0
  double iou_scale_max = 1.0;  // raw IoU at this scales to 1
  double temperature = 0.1;
  double weight_iou = 1.0;
  double weight_contrastive = 1.0;
  double bce_epsilon = 1e-6;

  void validate() const;
};

// Value-side cosine score grid for ranking. scores[cell * num_queries + m];
// invalid cells carry -infinity so they can never win a ranking.
struct ScoreMap {
  int num_clips = 0;
  int num_queries = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> valid;  // per cell

  static constexpr double kInvalid = -std::numeric_limits<double>::infinity();
  double at(int i, int j, int m) const {
    return scores[(static_cast<std::size_t>(i) * num_clips + j) * num_queries + m];
  }
};

// Scaled ground-truth IoU grid, same layout as ScoreMap (zeros off-triangle).
struct IoUTargetMap {
  int num_clips = 0;
  int num_queries = 0;
  std::vector<double> raw;
  std::vector<double> scaled;

  double raw_at(int i, int j, int m) const {
    return raw[(static_cast<std::size_t>(i) * num_clips + j) * num_queries + m];
  }
  double scaled_at(int i, int j, int m) const {
    return scaled[(static_cast<std::size_t>(i) * num_clips + j) * num_queries + m];
  }
};

IoUTargetMap gt_iou_map(const std::vector<Interval>& targets, int num_clips, double duration,
                        const LossConfig& cfg);

// Cross-modal projection heads: a per-cell affine map (the 1x1 convolution
// over the 2-D map) on the moment side and an affine map on the query side,
// both followed by row-wise L2 normalization so that a plain dot product is
// the cosine.
class Matcher {
 public:
  Matcher(int moment_dim, int query_dim, int align_dim, Rng& rng);

  Var moment_embed(const Var& map_rows) const;  // [T*T, align], unit or zero rows
  Var query_embed(const Var& queries) const;    // [M, align], unit rows
  Var score_rows(const Var& moment_emb, const Var& query_emb) const;  // [T*T, M]

  ScoreMap make_score_map(const Var& scores, int num_clips) const;

  std::vector<Var> parameters() const;
  int align_dim() const { return align_dim_; }

 private:
  int align_dim_;
  Var moment_w_, moment_b_;
  Var query_w_, query_b_;
};

// Mean binary cross-entropy between cosine scores mapped into (0,1) and the
// scaled IoU targets, over valid cells and all queries.
Var iou_loss(const Var& score_rows, const IoUTargetMap& targets, const LossConfig& cfg);

// Symmetric InfoNCE over in-batch (query, positive-moment) pairs, averaged
// over the 2B log terms. Requires at least two pairs.
Var contrastive_loss(const Var& query_vectors, const Var& moment_vectors, const LossConfig& cfg);

}  // namespace tvg

#endif  // TVG_MATCHER_HPP
