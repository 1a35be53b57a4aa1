#ifndef TVG_RUN_CONFIG_HPP
#define TVG_RUN_CONFIG_HPP

#include <string>

#include "tvg/model.hpp"
#include "tvg/synth.hpp"
#include "tvg/trainer.hpp"

namespace tvg {

// Everything a run needs, serializable as one JSON document with "synth",
// "model" and "train" sections. Command-line flags override file values;
// the effective config is echoed into the output directory.
struct RunConfig {
  SynthConfig synth;
  ModelConfig model;
  TrainConfig train;
  double nms_threshold = 0.5;

  // Model raw-feature widths follow the corpus widths.
  void sync_dims();

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace tvg

#endif  // TVG_RUN_CONFIG_HPP
