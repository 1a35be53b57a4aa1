#include "tvg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tvg/errors.hpp"

namespace tvg {

double temporal_iou(const Interval& a, const Interval& b) {
  if (!(a.start < a.end) || !(b.start < b.end)) {
    throw ContractError("temporal_iou: degenerate interval");
  }
  const double inter = std::min(a.end, b.end) - std::max(a.start, b.start);
  if (inter <= 0.0) return 0.0;
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

namespace {

bool ranked_before(const ScoredInterval& a, const ScoredInterval& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.interval.start != b.interval.start) return a.interval.start < b.interval.start;
  return (a.interval.end - a.interval.start) < (b.interval.end - b.interval.start);
}

}  // namespace

std::vector<ScoredInterval> nms(std::vector<ScoredInterval> candidates, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ContractError("nms: threshold must be in (0, 1]");
  }
  std::stable_sort(candidates.begin(), candidates.end(), ranked_before);
  std::vector<ScoredInterval> kept;
  for (const ScoredInterval& cand : candidates) {
    bool suppressed = false;
    for (const ScoredInterval& k : kept) {
      if (temporal_iou(cand.interval, k.interval) > threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

double MetricReport::recall_at(int top_k, double iou_threshold) const {
  for (std::size_t h = 0; h < kRecallTopK.size(); ++h) {
    for (std::size_t u = 0; u < kRecallIouThresholds.size(); ++u) {
      if (kRecallTopK[h] == top_k && kRecallIouThresholds[u] == iou_threshold) {
        return recall[h][u];
      }
    }
  }
  throw ContractError("metrics: (top_k, iou_threshold) not in the report grid");
}

std::string MetricReport::to_text() const {
  std::ostringstream out;
  for (std::size_t h = 0; h < kRecallTopK.size(); ++h) {
    for (std::size_t u = 0; u < kRecallIouThresholds.size(); ++u) {
      char line[64];
      std::snprintf(line, sizeof(line), "recall@%d_iou@%.1f=%.4f\n", kRecallTopK[h],
                    kRecallIouThresholds[u], recall[h][u]);
      out << line;
    }
  }
  char tail[64];
  std::snprintf(tail, sizeof(tail), "mean_iou=%.4f\n", mean_iou);
  out << tail;
  out << "num_queries=" << num_queries << "\n";
  return out.str();
}

MetricReport evaluate(const std::vector<std::vector<ScoredInterval>>& predictions,
                      const std::vector<Interval>& ground_truth) {
  if (predictions.size() != ground_truth.size()) {
    throw ContractError("evaluate: prediction/ground-truth count mismatch");
  }
  const int n = static_cast<int>(predictions.size());
  MetricReport report;
  report.num_queries = n;
  if (n == 0) return report;

  double iou_sum = 0.0;
  std::array<std::array<int, 4>, 2> hits{};
  for (int q = 0; q < n; ++q) {
    const auto& preds = predictions[q];
    if (preds.empty()) {
      throw ContractError("evaluate: no prediction for query " + std::to_string(q));
    }
    iou_sum += temporal_iou(preds.front().interval, ground_truth[q]);
    for (std::size_t h = 0; h < kRecallTopK.size(); ++h) {
      const int top = std::min<int>(kRecallTopK[h], static_cast<int>(preds.size()));
      double best = 0.0;
      for (int r = 0; r < top; ++r) {
        best = std::max(best, temporal_iou(preds[r].interval, ground_truth[q]));
      }
      for (std::size_t u = 0; u < kRecallIouThresholds.size(); ++u) {
        if (best >= kRecallIouThresholds[u]) ++hits[h][u];
      }
    }
  }
  for (std::size_t h = 0; h < kRecallTopK.size(); ++h) {
    for (std::size_t u = 0; u < kRecallIouThresholds.size(); ++u) {
      report.recall[h][u] = 100.0 * hits[h][u] / n;
    }
  }
  report.mean_iou = 100.0 * iou_sum / n;
  return report;
}

Interval span_to_seconds(int i, int j, int num_clips, double duration) {
  if (i < 0 || j < i || j >= num_clips) throw ContractError("span_to_seconds: bad span");
  const double delta = duration / num_clips;
  return Interval{i * delta, (j + 1) * delta};
}

std::pair<int, int> seconds_to_span(const Interval& target, int num_clips, double duration) {
  if (!(target.start < target.end)) throw ContractError("seconds_to_span: degenerate interval");
  const double delta = duration / num_clips;
  int i = static_cast<int>(std::floor(target.start / delta + 1e-9));
  int j = static_cast<int>(std::ceil(target.end / delta - 1e-9)) - 1;
  i = std::clamp(i, 0, num_clips - 1);
  j = std::clamp(j, i, num_clips - 1);
  return {i, j};
}

}  // namespace tvg
