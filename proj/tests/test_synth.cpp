#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tvg/errors.hpp"
#include "tvg/metrics.hpp"
#include "tvg/synth.hpp"
#include "tvg/vft_io.hpp"

using namespace tvg;
namespace fs = std::filesystem;

namespace {

SynthConfig tiny_config() {
  SynthConfig cfg;
  cfg.num_videos = 12;
  cfg.clips_per_video = 8;
  cfg.video_dim = 10;
  cfg.query_dim = 10;
  cfg.prototype_dim = 10;
  cfg.min_events = 2;
  cfg.max_events = 3;
  cfg.noise_sigma = 0.2;
  cfg.seed = 5;
  return cfg;
}

fs::path temp_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("generation is a pure function of config and seed") {
  const SynthConfig cfg = tiny_config();
  const Corpus a = generate(cfg);
  const Corpus b = generate(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t v = 0; v < a.size(); ++v) {
    CHECK(a[v].video_id == b[v].video_id);
    CHECK(a[v].duration == b[v].duration);
    for (int i = 0; i < a[v].clip_features.numel(); ++i) {
      CHECK(a[v].clip_features[i] == b[v].clip_features[i]);
    }
    REQUIRE(a[v].queries.size() == b[v].queries.size());
    for (std::size_t q = 0; q < a[v].queries.size(); ++q) {
      CHECK(a[v].queries[q].target.start == b[v].queries[q].target.start);
      CHECK(a[v].queries[q].target.end == b[v].queries[q].target.end);
      CHECK(a[v].queries[q].feature == b[v].queries[q].feature);
    }
  }
  SynthConfig other = cfg;
  other.seed = 6;
  const Corpus c = generate(other);
  bool any_diff = false;
  for (int i = 0; i < a[0].clip_features.numel() && !any_diff; ++i) {
    any_diff = a[0].clip_features[i] != c[0].clip_features[i];
  }
  CHECK(any_diff);
}

TEST_CASE("every generated target is inside the video and non-degenerate") {
  SynthConfig cfg = tiny_config();
  cfg.num_videos = 50;
  for (const GroundingSample& s : generate(cfg)) {
    CHECK(!s.queries.empty());
    for (const QueryAnnotation& q : s.queries) {
      CHECK(q.target.start >= 0.0);
      CHECK(q.target.start < q.target.end);
      CHECK(q.target.end <= s.duration);
    }
  }
}

TEST_CASE("noiseless matched-width corpus grounds perfectly via nearest prototype") {
  SynthConfig cfg = tiny_config();
  cfg.noise_sigma = 0.0;
  cfg.query_noise_sigma = 0.0;
  cfg.modality_gap = false;
  cfg.num_videos = 20;
  const Corpus corpus = generate(cfg);

  std::vector<std::vector<ScoredInterval>> predictions;
  std::vector<Interval> ground_truth;
  for (const GroundingSample& s : corpus) {
    const int t = s.clip_features.rows();
    for (const QueryAnnotation& q : s.queries) {
      // Query features equal their span's clip features exactly.
      bool found_exact = false;
      for (int clip = 0; clip < t && !found_exact; ++clip) {
        bool equal = true;
        for (int c = 0; c < cfg.video_dim; ++c) {
          if (s.clip_features.at(clip, c) != q.feature[c]) {
            equal = false;
            break;
          }
        }
        found_exact = equal;
      }
      CHECK(found_exact);

      // Oracle grounder: the contiguous run of clips matching the query.
      int best_i = -1, best_j = -1;
      for (int clip = 0; clip < t; ++clip) {
        double dot = 0.0, nc = 0.0, nq = 0.0;
        for (int c = 0; c < cfg.video_dim; ++c) {
          dot += s.clip_features.at(clip, c) * q.feature[c];
          nc += s.clip_features.at(clip, c) * s.clip_features.at(clip, c);
          nq += q.feature[c] * q.feature[c];
        }
        const bool match = dot / std::sqrt(nc * nq) > 1.0 - 1e-9;
        if (match) {
          if (best_i < 0) best_i = clip;
          best_j = clip;
        }
      }
      REQUIRE(best_i >= 0);
      predictions.push_back({{span_to_seconds(best_i, best_j, t, s.duration), 1.0}});
      ground_truth.push_back(q.target);
    }
  }
  const MetricReport report = evaluate(predictions, ground_truth);
  CHECK(report.recall_at(1, 0.7) == 100.0);
}

TEST_CASE("chance baseline is deterministic and small for T=16") {
  SynthConfig cfg = tiny_config();
  cfg.clips_per_video = 16;
  cfg.num_videos = 32;
  const Corpus corpus = generate(cfg);
  const double a = chance_baseline_recall(corpus, 0.5, 100000, 9);
  const double b = chance_baseline_recall(corpus, 0.5, 100000, 9);
  CHECK(a == b);
  CHECK(a > 0.0);
  CHECK(a < 30.0);
}

TEST_CASE("feature files round-trip through the VFT1 format") {
  const fs::path dir = temp_dir("tvg_vft_test");
  {
    FeatureMatrix m;
    m.rows = 1;
    m.cols = 1;
    m.values = {0.5};
    const std::string path = (dir / "one.vft").string();
    write_features(path, m);
    CHECK(fs::file_size(path) == 16);
    const FeatureMatrix back = read_features(path);
    CHECK(back.rows == 1);
    CHECK(back.cols == 1);
    CHECK(back.values[0] == 0.5);
  }
  {
    FeatureMatrix empty;
    empty.rows = 0;
    empty.cols = 7;
    const std::string path = (dir / "empty.vft").string();
    write_features(path, empty);
    CHECK(fs::file_size(path) == 12);
    const FeatureMatrix back = read_features(path);
    CHECK(back.rows == 0);
    CHECK(back.cols == 7);
    CHECK(back.values.empty());
  }
  {
    Rng rng(11);
    const Tensor big = Tensor::uniform(Shape{64, 500}, -100.0, 100.0, rng);
    const std::string path = (dir / "big.vft").string();
    write_features(path, big);
    const FeatureMatrix back = read_features(path);
    REQUIRE(back.rows == 64);
    REQUIRE(back.cols == 500);
    for (int i = 0; i < big.numel(); ++i) {
      CHECK(back.values[i] == static_cast<double>(static_cast<float>(big[i])));
    }
  }
}

TEST_CASE("malformed feature files report the byte offset") {
  const fs::path dir = temp_dir("tvg_vft_bad");
  {
    std::ofstream out(dir / "bad_magic.vft", std::ios::binary);
    out << "XFT1";
  }
  try {
    read_features((dir / "bad_magic.vft").string());
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
  }
  {
    std::ofstream out(dir / "trunc.vft", std::ios::binary);
    out << "VFT1";
    const unsigned char rows[4] = {2, 0, 0, 0};
    const unsigned char cols[4] = {3, 0, 0, 0};
    out.write(reinterpret_cast<const char*>(rows), 4);
    out.write(reinterpret_cast<const char*>(cols), 4);
    const unsigned char one_value[4] = {0, 0, 0, 0};
    out.write(reinterpret_cast<const char*>(one_value), 4);
  }
  try {
    read_features((dir / "trunc.vft").string());
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
}

TEST_CASE("annotations accept valid entries and reject inverted timestamps") {
  const fs::path dir = temp_dir("tvg_ann_test");
  {
    std::ofstream out(dir / "annotations.json");
    out << R"({"videos": {"vid_a": {"duration": 10.0, "timestamps": [[0.0, 10.0]],
               "queries": ["q.vft"], "clip_features": "c.vft"}}})";
  }
  const auto entries = parse_annotations((dir / "annotations.json").string());
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].video_id == "vid_a");
  CHECK(entries[0].timestamps[0].end == 10.0);

  {
    std::ofstream out(dir / "bad.json");
    out << R"({"videos": {"vid_b": {"duration": 10.0, "timestamps": [[0.0, 2.0], [5.0, 3.0]],
               "queries": ["a.vft", "b.vft"]}}})";
  }
  try {
    parse_annotations((dir / "bad.json").string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("vid_b") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);  // offending index
  }
}

TEST_CASE("a written corpus parses back to an identical index and features") {
  SynthConfig cfg = tiny_config();
  cfg.num_videos = 100;
  const Corpus corpus = generate(cfg);
  const fs::path dir = temp_dir("tvg_corpus_roundtrip");
  write_corpus(corpus, dir.string());
  const Corpus back = read_corpus(dir.string());
  REQUIRE(back.size() == corpus.size());
  for (std::size_t v = 0; v < corpus.size(); ++v) {
    CHECK(back[v].video_id == corpus[v].video_id);
    CHECK(back[v].duration == corpus[v].duration);
    REQUIRE(back[v].queries.size() == corpus[v].queries.size());
    for (std::size_t q = 0; q < corpus[v].queries.size(); ++q) {
      CHECK(back[v].queries[q].target.start == corpus[v].queries[q].target.start);
      CHECK(back[v].queries[q].target.end == corpus[v].queries[q].target.end);
      // features round to 32-bit on disk
      for (std::size_t c = 0; c < corpus[v].queries[q].feature.size(); ++c) {
        CHECK(back[v].queries[q].feature[c] ==
              static_cast<double>(static_cast<float>(corpus[v].queries[q].feature[c])));
      }
    }
  }
}

TEST_CASE("corpus statistics cover degenerate and typical corpora") {
  {
    SynthConfig cfg = tiny_config();
    cfg.min_events = 1;
    cfg.max_events = 1;
    const CorpusStats stats = corpus_stats(generate(cfg));
    REQUIRE(stats.queries_per_video.size() == 2);
    CHECK(stats.queries_per_video[1] == cfg.num_videos);
  }
  {
    const CorpusStats stats = corpus_stats(Corpus{});
    CHECK(stats.total_queries == 0);
    CHECK(stats.queries_per_video.empty());
  }
  {
    // Two independently seeded corpora from one config give close histograms.
    SynthConfig cfg = tiny_config();
    cfg.num_videos = 2000;
    SynthConfig cfg2 = cfg;
    cfg2.seed = 77;
    const CorpusStats a = corpus_stats(generate(cfg));
    const CorpusStats b = corpus_stats(generate(cfg2));
    double chi2 = 0.0;
    for (std::size_t i = 0; i < a.start_fractions.size(); ++i) {
      const double denom = a.start_fractions[i] + b.start_fractions[i];
      if (denom > 0.0) {
        const double diff = a.start_fractions[i] - b.start_fractions[i];
        chi2 += diff * diff / denom;
      }
    }
    CHECK(chi2 < 0.1);
  }
}
