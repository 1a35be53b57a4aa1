#ifndef TVG_VFT_IO_HPP
#define TVG_VFT_IO_HPP

#include <string>
#include <vector>

#include "tvg/metrics.hpp"
#include "tvg/synth.hpp"
#include "tvg/tensor.hpp"

namespace tvg {

// On-disk matrix for the "VFT1" feature format. Zero rows are legal here
// (header-only file), unlike Tensor.
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major

  static FeatureMatrix from_tensor(const Tensor& t);
  Tensor to_tensor() const;  // throws ContractError on zero rows/cols
};

// Layout: magic "VFT1", u32-LE rows, u32-LE cols, rows*cols f32-LE row-major.
// Values round to 32-bit on write; read inverts the file exactly.
void write_features(const std::string& path, const FeatureMatrix& matrix);
void write_features(const std::string& path, const Tensor& matrix);
FeatureMatrix read_features(const std::string& path);

// Annotation index entry: everything about a video except the feature data.
struct AnnotationEntry {
  std::string video_id;
  double duration = 0.0;
  std::vector<Interval> timestamps;
  std::vector<std::string> query_refs;  // feature file names relative to the corpus dir
  std::string clip_ref;
};

// JSON annotation file: {"videos": {id: {duration, timestamps, clip_features,
// queries}}}. Rejects inverted or out-of-range timestamps naming the video
// and query index.
std::vector<AnnotationEntry> parse_annotations(const std::string& path);

void write_corpus(const Corpus& corpus, const std::string& dir);
Corpus read_corpus(const std::string& dir);

}  // namespace tvg

#endif  // TVG_VFT_IO_HPP
