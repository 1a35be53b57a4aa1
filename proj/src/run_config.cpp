#include "tvg/run_config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tvg/errors.hpp"

namespace tvg {

using nlohmann::json;

void RunConfig::sync_dims() {
  model.video_dim = synth.video_dim;
  model.query_dim = synth.query_dim;
  model.static_cfg.dim = model.dim;
}

std::string RunConfig::to_json() const {
  json doc;
  doc["synth"] = {{"num_videos", synth.num_videos},
                  {"clips_per_video", synth.clips_per_video},
                  {"video_dim", synth.video_dim},
                  {"query_dim", synth.query_dim},
                  {"min_events", synth.min_events},
                  {"max_events", synth.max_events},
                  {"noise_sigma", synth.noise_sigma},
                  {"query_noise_sigma", synth.query_noise_sigma},
                  {"prototype_dim", synth.prototype_dim},
                  {"clip_seconds", synth.clip_seconds},
                  {"modality_gap", synth.modality_gap},
                  {"seed", synth.seed}};
  doc["model"] = json::parse(model.to_json());
  doc["train"] = {{"mode", train_mode_name(train.mode)},
                  {"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"weight_decay", train.weight_decay},
                  {"shuffle_seed", train.shuffle_seed}};
  doc["nms_threshold"] = nms_threshold;
  return doc.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("run config: invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  if (doc.contains("synth")) {
    const json& s = doc["synth"];
    cfg.synth.num_videos = s.value("num_videos", cfg.synth.num_videos);
    cfg.synth.clips_per_video = s.value("clips_per_video", cfg.synth.clips_per_video);
    cfg.synth.video_dim = s.value("video_dim", cfg.synth.video_dim);
    cfg.synth.query_dim = s.value("query_dim", cfg.synth.query_dim);
    cfg.synth.min_events = s.value("min_events", cfg.synth.min_events);
    cfg.synth.max_events = s.value("max_events", cfg.synth.max_events);
    cfg.synth.noise_sigma = s.value("noise_sigma", cfg.synth.noise_sigma);
    cfg.synth.query_noise_sigma = s.value("query_noise_sigma", cfg.synth.query_noise_sigma);
    cfg.synth.prototype_dim = s.value("prototype_dim", cfg.synth.prototype_dim);
    cfg.synth.clip_seconds = s.value("clip_seconds", cfg.synth.clip_seconds);
    cfg.synth.modality_gap = s.value("modality_gap", cfg.synth.modality_gap);
    cfg.synth.seed = s.value("seed", cfg.synth.seed);
  }
  if (doc.contains("model")) {
    cfg.model = ModelConfig::from_json(doc["model"].dump());
  }
  if (doc.contains("train")) {
    const json& t = doc["train"];
    if (t.contains("mode")) cfg.train.mode = parse_train_mode(t["mode"]);
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
    cfg.train.shuffle_seed = t.value("shuffle_seed", cfg.train.shuffle_seed);
  }
  cfg.nms_threshold = doc.value("nms_threshold", cfg.nms_threshold);
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("run config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("run config: cannot write " + path);
  out << to_json() << "\n";
}

}  // namespace tvg
