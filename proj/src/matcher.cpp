#include "tvg/matcher.hpp"

#include <cmath>
#include <numeric>

#include "tvg/errors.hpp"
#include "tvg/proposal.hpp"

namespace tvg {

void LossConfig::validate() const {
  if (!(0.0 <= iou_scale_min && iou_scale_min < iou_scale_max && iou_scale_max <= 1.0)) {
    throw ConfigError("loss: need 0 <= iou_scale_min < iou_scale_max <= 1");
  }
  if (!(temperature > 0.0)) throw ConfigError("loss: temperature must be > 0");
  if (!(bce_epsilon > 0.0 && bce_epsilon < 0.5)) {
    throw ConfigError("loss: bce_epsilon must be in (0, 0.5)");
  }
}

IoUTargetMap gt_iou_map(const std::vector<Interval>& targets, int num_clips, double duration,
                        const LossConfig& cfg) {
  cfg.validate();
  if (num_clips < 1) throw ContractError("gt_iou_map: num_clips must be >= 1");
  if (!(duration > 0.0)) throw ContractError("gt_iou_map: duration must be > 0");
  const int m = static_cast<int>(targets.size());
  if (m < 1) throw ContractError("gt_iou_map: at least one target required");
  for (const Interval& t : targets) {
    if (!(t.start < t.end)) throw DataError("gt_iou_map: degenerate target interval");
    if (t.start < 0.0 || t.end > duration + 1e-9) {
      throw DataError("gt_iou_map: target outside video duration");
    }
  }
  IoUTargetMap map;
  map.num_clips = num_clips;
  map.num_queries = m;
  map.raw.assign(static_cast<std::size_t>(num_clips) * num_clips * m, 0.0);
  map.scaled.assign(map.raw.size(), 0.0);
  const double scale_span = cfg.iou_scale_max - cfg.iou_scale_min;
  for (int i = 0; i < num_clips; ++i) {
    for (int j = i; j < num_clips; ++j) {
      const Interval span = span_to_seconds(i, j, num_clips, duration);
      for (int q = 0; q < m; ++q) {
        const double raw = temporal_iou(span, targets[q]);
        const double scaled =
            std::min(1.0, std::max(0.0, (raw - cfg.iou_scale_min) / scale_span));
        const std::size_t idx = (static_cast<std::size_t>(i) * num_clips + j) * m + q;
        map.raw[idx] = raw;
        map.scaled[idx] = scaled;
      }
    }
  }
  return map;
}

Matcher::Matcher(int moment_dim, int query_dim, int align_dim, Rng& rng)
    : align_dim_(align_dim) {
  if (moment_dim <= 0 || query_dim <= 0 || align_dim <= 0) {
    throw ConfigError("matcher: dimensions must be positive");
  }
  moment_w_ = Var::parameter(Tensor::xavier(Shape{align_dim, moment_dim}, moment_dim, align_dim, rng));
  moment_b_ = Var::parameter(Tensor::zeros(Shape{1, align_dim}));
  query_w_ = Var::parameter(Tensor::xavier(Shape{align_dim, query_dim}, query_dim, align_dim, rng));
  query_b_ = Var::parameter(Tensor::zeros(Shape{1, align_dim}));
}

Var Matcher::moment_embed(const Var& map_rows) const {
  return l2_normalize_rows(linear(map_rows, moment_w_, moment_b_));
}

Var Matcher::query_embed(const Var& queries) const {
  return l2_normalize_rows(linear(queries, query_w_, query_b_));
}

Var Matcher::score_rows(const Var& moment_emb, const Var& query_emb) const {
  return matmul_nt(moment_emb, query_emb);
}

std::vector<Var> Matcher::parameters() const {
  return {moment_w_, moment_b_, query_w_, query_b_};
}

ScoreMap Matcher::make_score_map(const Var& scores, int num_clips) const {
  const int m = scores.cols();
  if (scores.rows() != num_clips * num_clips) {
    throw DimensionError("matcher: score rows must cover the full grid");
  }
  ScoreMap map;
  map.num_clips = num_clips;
  map.num_queries = m;
  map.valid = valid_mask(num_clips);
  map.scores.assign(static_cast<std::size_t>(num_clips) * num_clips * m, ScoreMap::kInvalid);
  for (int cell = 0; cell < num_clips * num_clips; ++cell) {
    if (!map.valid[cell]) continue;
    for (int q = 0; q < m; ++q) {
      map.scores[static_cast<std::size_t>(cell) * m + q] = scores.value().at(cell, q);
    }
  }
  return map;
}

Var iou_loss(const Var& score_rows, const IoUTargetMap& targets, const LossConfig& cfg) {
  cfg.validate();
  const int cells = targets.num_clips * targets.num_clips;
  const int m = targets.num_queries;
  if (score_rows.rows() != cells || score_rows.cols() != m) {
    throw DimensionError("iou_loss: score grid does not match target grid");
  }

  Tensor target(Shape{cells, m});
  Tensor target_complement(Shape{cells, m});
  Tensor mask(Shape{cells, m});
  const std::vector<std::uint8_t> valid = valid_mask(targets.num_clips);
  int num_valid = 0;
  for (int cell = 0; cell < cells; ++cell) {
    if (!valid[cell]) continue;
    ++num_valid;
    for (int q = 0; q < m; ++q) {
      const double tv = targets.scaled[static_cast<std::size_t>(cell) * m + q];
      target.at(cell, q) = tv;
      target_complement.at(cell, q) = 1.0 - tv;
      mask.at(cell, q) = 1.0;
    }
  }

  // Cosine score -> probability in (0,1); the clamp keeps both logs finite.
  Var y = clamp(affine(score_rows, 0.5, 0.5), cfg.bce_epsilon, 1.0 - cfg.bce_epsilon);
  Var term = add(mul(Var::constant(target), vlog(y)),
                 mul(Var::constant(target_complement), vlog(affine(y, -1.0, 1.0))));
  Var masked = mul(term, Var::constant(mask));
  return affine(sum_all(masked), -1.0 / (static_cast<double>(num_valid) * m), 0.0);
}

Var contrastive_loss(const Var& query_vectors, const Var& moment_vectors, const LossConfig& cfg) {
  cfg.validate();
  const int batch = query_vectors.rows();
  if (moment_vectors.rows() != batch) {
    throw DimensionError("contrastive_loss: pair count mismatch");
  }
  if (batch < 2) throw ContractError("contrastive_loss: need at least 2 pairs for negatives");

  Var qn = l2_normalize_rows(query_vectors);
  Var mn = l2_normalize_rows(moment_vectors);
  std::vector<int> diagonal(batch);
  std::iota(diagonal.begin(), diagonal.end(), 0);

  Var q_to_m = log_softmax_rows(affine(matmul_nt(qn, mn), 1.0 / cfg.temperature, 0.0));
  Var m_to_q = log_softmax_rows(affine(matmul_nt(mn, qn), 1.0 / cfg.temperature, 0.0));
  Var positives = add(sum_all(select_per_row(q_to_m, diagonal)),
                      sum_all(select_per_row(m_to_q, diagonal)));
  return affine(positives, -1.0 / (2.0 * batch), 0.0);
}

}  // namespace tvg
