#include "tvg/vft_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "tvg/errors.hpp"

namespace tvg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'V', 'F', 'T', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

std::uint32_t get_u32(std::istream& in, const std::string& path, std::size_t offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) {
    throw FormatError(path + ": truncated at byte offset " + std::to_string(offset));
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

FeatureMatrix FeatureMatrix::from_tensor(const Tensor& t) {
  FeatureMatrix m;
  m.rows = t.rows();
  m.cols = t.cols();
  m.values.assign(t.data(), t.data() + t.numel());
  return m;
}

Tensor FeatureMatrix::to_tensor() const {
  if (rows < 1 || cols < 1) throw ContractError("feature matrix: empty matrix has no tensor form");
  Tensor t(Shape{rows, cols});
  std::copy(values.begin(), values.end(), t.data());
  return t;
}

void write_features(const std::string& path, const FeatureMatrix& matrix) {
  if (matrix.rows < 0 || matrix.cols < 0 ||
      matrix.values.size() != static_cast<std::size_t>(matrix.rows) * matrix.cols) {
    throw ContractError("write_features: inconsistent matrix");
  }
  for (double v : matrix.values) {
    if (!std::isfinite(v)) throw NumericError("write_features: non-finite value");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_features: cannot open " + path);
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(matrix.rows));
  put_u32(out, static_cast<std::uint32_t>(matrix.cols));
  for (double v : matrix.values) put_f32(out, static_cast<float>(v));
  if (!out) throw IoError("write_features: write failed for " + path);
}

void write_features(const std::string& path, const Tensor& matrix) {
  write_features(path, FeatureMatrix::from_tensor(matrix));
}

FeatureMatrix read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_features: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path + ": bad magic at byte offset 0");
  }
  FeatureMatrix m;
  m.rows = static_cast<int>(get_u32(in, path, 4));
  m.cols = static_cast<int>(get_u32(in, path, 8));
  const std::size_t count = static_cast<std::size_t>(m.rows) * m.cols;
  m.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32(in, path, 12 + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    m.values[i] = static_cast<double>(f);
  }
  return m;
}

std::vector<AnnotationEntry> parse_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("parse_annotations: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw FormatError(path + ": invalid annotation JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("videos") || !doc["videos"].is_object()) {
    throw FormatError(path + ": missing 'videos' object");
  }

  std::vector<AnnotationEntry> entries;
  for (const auto& [video_id, body] : doc["videos"].items()) {
    AnnotationEntry e;
    e.video_id = video_id;
    if (!body.contains("duration") || !body["duration"].is_number()) {
      throw FormatError(path + ": video " + video_id + " lacks numeric duration");
    }
    e.duration = body["duration"].get<double>();
    if (!(e.duration > 0.0)) {
      throw DataError(path + ": video " + video_id + " has non-positive duration");
    }
    if (!body.contains("timestamps") || !body["timestamps"].is_array()) {
      throw FormatError(path + ": video " + video_id + " lacks timestamps array");
    }
    int index = 0;
    for (const auto& ts : body["timestamps"]) {
      if (!ts.is_array() || ts.size() != 2 || !ts[0].is_number() || !ts[1].is_number()) {
        throw FormatError(path + ": video " + video_id + " timestamp " + std::to_string(index) +
                          " is not a [start, end] pair");
      }
      const double s = ts[0].get<double>();
      const double t = ts[1].get<double>();
      if (!(s < t)) {
        throw DataError(path + ": video " + video_id + " timestamp " + std::to_string(index) +
                        " is inverted or degenerate");
      }
      if (s < 0.0 || t > e.duration + 1e-9) {
        throw DataError(path + ": video " + video_id + " timestamp " + std::to_string(index) +
                        " lies outside [0, duration]");
      }
      e.timestamps.push_back(Interval{s, t});
      ++index;
    }
    if (body.contains("queries")) {
      for (const auto& q : body["queries"]) e.query_refs.push_back(q.get<std::string>());
    }
    if (e.query_refs.size() != e.timestamps.size()) {
      throw DataError(path + ": video " + video_id + " has " + std::to_string(e.query_refs.size()) +
                      " queries for " + std::to_string(e.timestamps.size()) + " timestamps");
    }
    if (e.timestamps.empty()) {
      throw DataError(path + ": video " + video_id + " has no queries");
    }
    e.clip_ref = body.value("clip_features", video_id + ".vft");
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_corpus(const Corpus& corpus, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("write_corpus: cannot create " + dir);

  json videos = json::object();
  for (const GroundingSample& sample : corpus) {
    write_features((fs::path(dir) / (sample.video_id + ".vft")).string(), sample.clip_features);
    json ts = json::array();
    json refs = json::array();
    for (std::size_t q = 0; q < sample.queries.size(); ++q) {
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "_q%02zu.vft", q);
      const std::string ref = sample.video_id + suffix;
      FeatureMatrix qm;
      qm.rows = 1;
      qm.cols = static_cast<int>(sample.queries[q].feature.size());
      qm.values = sample.queries[q].feature;
      write_features((fs::path(dir) / ref).string(), qm);
      ts.push_back({sample.queries[q].target.start, sample.queries[q].target.end});
      refs.push_back(ref);
    }
    videos[sample.video_id] = {{"duration", sample.duration},
                               {"timestamps", ts},
                               {"queries", refs},
                               {"clip_features", sample.video_id + ".vft"}};
  }
  json doc = {{"videos", videos}};
  std::ofstream out(fs::path(dir) / "annotations.json");
  if (!out) throw IoError("write_corpus: cannot write annotations in " + dir);
  out << doc.dump(2) << "\n";
}

Corpus read_corpus(const std::string& dir) {
  const std::vector<AnnotationEntry> entries =
      parse_annotations((fs::path(dir) / "annotations.json").string());
  Corpus corpus;
  corpus.reserve(entries.size());
  for (const AnnotationEntry& e : entries) {
    GroundingSample sample;
    sample.video_id = e.video_id;
    sample.duration = e.duration;
    sample.clip_features = read_features((fs::path(dir) / e.clip_ref).string()).to_tensor();
    for (std::size_t q = 0; q < e.query_refs.size(); ++q) {
      const FeatureMatrix fm = read_features((fs::path(dir) / e.query_refs[q]).string());
      if (fm.rows != 1) {
        throw DataError("read_corpus: query feature " + e.query_refs[q] + " must have one row");
      }
      QueryAnnotation qa;
      qa.feature = fm.values;
      qa.target = e.timestamps[q];
      sample.queries.push_back(std::move(qa));
    }
    corpus.push_back(std::move(sample));
  }
  return corpus;
}

}  // namespace tvg
