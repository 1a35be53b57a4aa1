#ifndef TVG_TRAINER_HPP
#define TVG_TRAINER_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tvg/model.hpp"
#include "tvg/optim.hpp"
#include "tvg/synth.hpp"

namespace tvg {

enum class TrainMode { single_query, multi_query };

TrainMode parse_train_mode(const std::string& name);
std::string train_mode_name(TrainMode m);

struct TrainConfig {
  TrainMode mode = TrainMode::multi_query;
  int epochs = 15;
  int batch_size = 8;
  double learning_rate = 8e-4;
  double weight_decay = 1e-4;
  std::uint64_t shuffle_seed = 7;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  std::optional<MetricReport> validation;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  double final_loss = 0.0;
};

// Optimizes L = w_iou * BCE(scaled IoU) + w_contra * InfoNCE over the corpus.
// multi_query feeds all of a video's queries jointly; single_query feeds one
// (video, query) pair per sample. Batches with a single pair skip the
// contrastive term (it needs negatives).
TrainResult train(Model& model, const Corpus& corpus, const Corpus* validation,
                  const TrainConfig& cfg, std::ostream* log);

// Always single-query: each query is scored on its own forward pass, ranked
// over valid proposals, filtered by NMS at `nms_threshold`, then scored
// against its ground truth.
MetricReport evaluate_model(const Model& model, const Corpus& corpus,
                            double nms_threshold = 0.5);

// Ranked post-NMS predictions for one (video, query) pair.
std::vector<ScoredInterval> predict(const Model& model, const GroundingSample& sample,
                                    int query_index, double nms_threshold = 0.5);

struct AblateRow {
  bool static_on = false;
  bool dynamic_on = false;
  MetricReport report;
  double final_loss = 0.0;
};

// Trains and evaluates the 2x2 static/dynamic grid under one seed.
std::vector<AblateRow> ablate(const ModelConfig& base, const Corpus& corpus,
                              const Corpus& eval_corpus, const TrainConfig& tcfg,
                              std::ostream* log);

}  // namespace tvg

#endif  // TVG_TRAINER_HPP
