#ifndef TVG_SYNTH_HPP
#define TVG_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tvg/metrics.hpp"
#include "tvg/tensor.hpp"

namespace tvg {

struct SynthConfig {
  int num_videos = 64;
  int clips_per_video = 16;
  int video_dim = 16;  // raw clip feature width
  int query_dim = 16;  // raw query feature width
  int min_events = 2;  // events per video == queries per video
  int max_events = 4;
  double noise_sigma = 0.3;        // per-coordinate clip noise
  double query_noise_sigma = 0.1;  // per-coordinate query noise
  int prototype_dim = 16;
  double clip_seconds = 1.0;
  // When true, query features pass through a fixed random affine map so the
  // two modalities live in different coordinate systems.
  bool modality_gap = true;
  std::uint64_t seed = 1;

  void validate() const;
};

struct QueryAnnotation {
  std::vector<double> feature;  // [query_dim]
  Interval target;              // seconds within [0, duration]
};

struct GroundingSample {
  std::string video_id;
  double duration = 0.0;
  Tensor clip_features;  // [clips x video_dim]
  std::vector<QueryAnnotation> queries;
};

using Corpus = std::vector<GroundingSample>;

// Latent-event corpus: each video is a contiguous partition of event spans,
// each span emits clips around a unit prototype direction, and each query is
// that prototype seen through the (optional) modality map. Deterministic in
// (config, seed); per-video streams are derived, not sequential.
Corpus generate(const SynthConfig& cfg);

struct CorpusStats {
  std::vector<int> queries_per_video;      // index = query count
  std::vector<double> start_fractions;     // normalized histogram over [0,1]
  std::vector<double> end_fractions;
  int total_queries = 0;

  std::string to_text() const;
};

CorpusStats corpus_stats(const Corpus& corpus, int bins = 10);

// Monte-Carlo floor: R@1,IoU@threshold (percent) of a uniformly random valid
// proposal against targets drawn uniformly from the corpus.
double chance_baseline_recall(const Corpus& corpus, double iou_threshold, int draws,
                              std::uint64_t seed);

}  // namespace tvg

#endif  // TVG_SYNTH_HPP
