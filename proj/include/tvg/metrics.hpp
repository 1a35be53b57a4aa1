#ifndef TVG_METRICS_HPP
#define TVG_METRICS_HPP

#include <array>
#include <string>
#include <vector>

namespace tvg {

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

// |a n b| / |a u b| for closed intervals; throws ContractError when an
// interval is degenerate (start >= end).
double temporal_iou(const Interval& a, const Interval& b);

struct ScoredInterval {
  Interval interval;
  double score = 0.0;
};

// Greedy suppression: repeatedly keep the best remaining candidate and drop
// everything with IoU strictly above `threshold` against it. Ordering ties
// break by higher score, then earlier start, then shorter interval. The
// result is sorted by that same ordering.
std::vector<ScoredInterval> nms(std::vector<ScoredInterval> candidates, double threshold);

inline constexpr std::array<int, 2> kRecallTopK{1, 5};
inline constexpr std::array<double, 4> kRecallIouThresholds{0.1, 0.3, 0.5, 0.7};

struct MetricReport {
  // recall[h][u] = percentage of queries whose top-(kRecallTopK[h]) contains a
  // prediction with IoU >= kRecallIouThresholds[u].
  std::array<std::array<double, 4>, 2> recall{};
  double mean_iou = 0.0;  // percentage
  int num_queries = 0;

  double recall_at(int top_k, double iou_threshold) const;
  std::string to_text() const;  // key=value lines
};

// One ranked prediction list per query, one ground-truth interval per query.
MetricReport evaluate(const std::vector<std::vector<ScoredInterval>>& predictions,
                      const std::vector<Interval>& ground_truth);

// Seconds covered by the inclusive clip span [i, j] on a uniform grid.
Interval span_to_seconds(int i, int j, int num_clips, double duration);

// Clip span whose grid-aligned extent matches the target interval.
std::pair<int, int> seconds_to_span(const Interval& target, int num_clips, double duration);

}  // namespace tvg

#endif  // TVG_METRICS_HPP
