#include "tvg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tvg/errors.hpp"
#include "tvg/rng.hpp"

namespace tvg {

void SynthConfig::validate() const {
  if (num_videos < 0) throw ConfigError("synth: num_videos must be >= 0");
  if (clips_per_video < 1) throw ConfigError("synth: clips_per_video must be >= 1");
  if (video_dim < 1 || query_dim < 1 || prototype_dim < 1) {
    throw ConfigError("synth: feature dims must be >= 1");
  }
  if (min_events < 1 || max_events < min_events) {
    throw ConfigError("synth: need 1 <= min_events <= max_events");
  }
  if (max_events > clips_per_video) {
    throw ConfigError("synth: more events than clips");
  }
  if (noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
  if (query_noise_sigma < 0.0) throw ConfigError("synth: query_noise_sigma must be >= 0");
  if (!(clip_seconds > 0.0)) throw ConfigError("synth: clip_seconds must be > 0");
}

namespace {

// Fixed per-corpus affine lift; rows scaled so outputs stay O(1) in norm.
struct AffineMap {
  Tensor weight;  // [out x in]
  std::vector<double> bias;
  bool identity = false;

  std::vector<double> apply(const std::vector<double>& x) const {
    if (identity) return x;
    std::vector<double> out(weight.rows(), 0.0);
    for (int r = 0; r < weight.rows(); ++r) {
      double acc = bias[r];
      for (int c = 0; c < weight.cols(); ++c) acc += weight.at(r, c) * x[c];
      out[r] = acc;
    }
    return out;
  }
};

AffineMap make_map(int out_dim, int in_dim, bool force_random, Rng& rng) {
  AffineMap map;
  if (out_dim == in_dim && !force_random) {
    map.identity = true;
    return map;
  }
  map.weight = Tensor::normal(Shape{out_dim, in_dim}, 0.0, 1.0 / std::sqrt(in_dim), rng);
  map.bias.assign(out_dim, 0.0);
  for (double& b : map.bias) b = rng.normal(0.0, 0.05);
  return map;
}

// Unit Gaussian direction: isotropic draw normalized to the unit sphere.
// noise_sigma is therefore calibrated against unit-norm event signatures.
std::vector<double> event_prototype(int dim, Rng& rng) {
  std::vector<double> p(dim);
  double norm2 = 0.0;
  for (double& v : p) {
    v = rng.normal();
    norm2 += v * v;
  }
  const double norm = std::sqrt(norm2);
  if (norm > 0.0) {
    for (double& v : p) v /= norm;
  } else {
    p[0] = 1.0;
  }
  return p;
}

}  // namespace

Corpus generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng corpus_rng(cfg.seed);
  const AffineMap video_map =
      make_map(cfg.video_dim, cfg.prototype_dim, false, corpus_rng);
  const AffineMap query_map =
      make_map(cfg.query_dim, cfg.prototype_dim, cfg.modality_gap, corpus_rng);

  const int t = cfg.clips_per_video;
  const double duration = t * cfg.clip_seconds;

  Corpus corpus;
  corpus.reserve(cfg.num_videos);
  for (int v = 0; v < cfg.num_videos; ++v) {
    Rng rng(Rng::mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(v)));
    GroundingSample sample;
    char id[16];
    std::snprintf(id, sizeof(id), "v%04d", v);
    sample.video_id = id;
    sample.duration = duration;

    const int events = std::min(rng.uniform_int(cfg.min_events, cfg.max_events), t);

    // Distinct clip-boundary cuts partition the timeline into event spans.
    // The squared draw skews boundaries toward the video start, giving the
    // corpus the kind of positional prior real grounding data carries (short
    // early moments, longer late ones).
    std::vector<int> cuts{0, t};
    while (static_cast<int>(cuts.size()) < events + 1) {
      const double u = rng.uniform();
      const int c = 1 + static_cast<int>(u * u * (t - 1));
      if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());

    std::vector<std::vector<double>> prototypes;
    prototypes.reserve(events);
    for (int e = 0; e < events; ++e) prototypes.push_back(event_prototype(cfg.prototype_dim, rng));

    sample.clip_features = Tensor(Shape{t, cfg.video_dim});
    for (int e = 0; e < events; ++e) {
      const std::vector<double> lifted = video_map.apply(prototypes[e]);
      for (int clip = cuts[e]; clip < cuts[e + 1]; ++clip) {
        for (int c = 0; c < cfg.video_dim; ++c) {
          sample.clip_features.at(clip, c) = lifted[c] + cfg.noise_sigma * rng.normal();
        }
      }
    }

    for (int e = 0; e < events; ++e) {
      QueryAnnotation q;
      q.feature = query_map.apply(prototypes[e]);
      for (double& f : q.feature) f += cfg.query_noise_sigma * rng.normal();
      q.target = Interval{cuts[e] * cfg.clip_seconds, cuts[e + 1] * cfg.clip_seconds};
      sample.queries.push_back(std::move(q));
    }
    corpus.push_back(std::move(sample));
  }
  return corpus;
}

std::string CorpusStats::to_text() const {
  std::ostringstream out;
  out << "queries_per_video\n";
  for (std::size_t k = 0; k < queries_per_video.size(); ++k) {
    if (queries_per_video[k] > 0) out << "  " << k << ": " << queries_per_video[k] << "\n";
  }
  auto emit = [&out](const char* name, const std::vector<double>& hist) {
    out << name << "\n";
    for (std::size_t b = 0; b < hist.size(); ++b) {
      out << "  [" << static_cast<double>(b) / hist.size() << ", "
          << static_cast<double>(b + 1) / hist.size() << "): " << hist[b] << "\n";
    }
  };
  emit("target_start_fraction", start_fractions);
  emit("target_end_fraction", end_fractions);
  out << "total_queries " << total_queries << "\n";
  return out.str();
}

CorpusStats corpus_stats(const Corpus& corpus, int bins) {
  if (bins < 1) throw ContractError("corpus_stats: bins must be >= 1");
  CorpusStats stats;
  stats.start_fractions.assign(bins, 0.0);
  stats.end_fractions.assign(bins, 0.0);
  for (const GroundingSample& sample : corpus) {
    const std::size_t m = sample.queries.size();
    if (stats.queries_per_video.size() <= m) stats.queries_per_video.resize(m + 1, 0);
    ++stats.queries_per_video[m];
    for (const QueryAnnotation& q : sample.queries) {
      ++stats.total_queries;
      const auto bin = [&](double seconds) {
        const double frac = seconds / sample.duration;
        return std::min(bins - 1, std::max(0, static_cast<int>(frac * bins)));
      };
      stats.start_fractions[bin(q.target.start)] += 1.0;
      stats.end_fractions[bin(q.target.end)] += 1.0;
    }
  }
  if (stats.total_queries > 0) {
    for (double& v : stats.start_fractions) v /= stats.total_queries;
    for (double& v : stats.end_fractions) v /= stats.total_queries;
  }
  return stats;
}

double chance_baseline_recall(const Corpus& corpus, double iou_threshold, int draws,
                              std::uint64_t seed) {
  if (draws < 1) throw ContractError("chance_baseline: draws must be >= 1");
  std::vector<std::pair<const GroundingSample*, const QueryAnnotation*>> queries;
  for (const GroundingSample& sample : corpus) {
    for (const QueryAnnotation& q : sample.queries) queries.emplace_back(&sample, &q);
  }
  if (queries.empty()) throw ContractError("chance_baseline: empty corpus");

  Rng rng(seed);
  int hits = 0;
  for (int d = 0; d < draws; ++d) {
    const auto& [sample, query] = queries[rng.uniform_int(0, static_cast<int>(queries.size()) - 1)];
    const int t = sample->clip_features.rows();
    // Uniform over the T(T+1)/2 valid spans.
    int cell = rng.uniform_int(0, t * (t + 1) / 2 - 1);
    int i = 0;
    while (cell >= t - i) {
      cell -= t - i;
      ++i;
    }
    const int j = i + cell;
    const Interval proposal = span_to_seconds(i, j, t, sample->duration);
    if (temporal_iou(proposal, query->target) >= iou_threshold) ++hits;
  }
  return 100.0 * hits / draws;
}

}  // namespace tvg
