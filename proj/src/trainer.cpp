#include "tvg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "tvg/errors.hpp"
#include "tvg/rng.hpp"

namespace tvg {

TrainMode parse_train_mode(const std::string& name) {
  if (name == "single_query" || name == "single") return TrainMode::single_query;
  if (name == "multi_query" || name == "multi") return TrainMode::multi_query;
  throw ConfigError("train: unknown mode '" + name + "'");
}

std::string train_mode_name(TrainMode m) {
  return m == TrainMode::single_query ? "single_query" : "multi_query";
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
}

namespace {

struct SampleRef {
  const GroundingSample* sample;
  int query_index;  // -1: all queries at once
};

Tensor query_matrix(const GroundingSample& sample, int query_index) {
  const int d = static_cast<int>(sample.queries.front().feature.size());
  if (query_index >= 0) {
    Tensor q(Shape{1, d});
    std::copy(sample.queries[query_index].feature.begin(),
              sample.queries[query_index].feature.end(), q.data());
    return q;
  }
  Tensor q(Shape{static_cast<int>(sample.queries.size()), d});
  for (std::size_t i = 0; i < sample.queries.size(); ++i) {
    std::copy(sample.queries[i].feature.begin(), sample.queries[i].feature.end(),
              q.data() + i * d);
  }
  return q;
}

std::vector<Interval> sample_targets(const GroundingSample& sample, int query_index) {
  if (query_index >= 0) return {sample.queries[query_index].target};
  std::vector<Interval> out;
  out.reserve(sample.queries.size());
  for (const QueryAnnotation& q : sample.queries) out.push_back(q.target);
  return out;
}

}  // namespace

TrainResult train(Model& model, const Corpus& corpus, const Corpus* validation,
                  const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (corpus.empty()) throw ContractError("train: empty corpus");
  const LossConfig& loss_cfg = model.config().loss;

  std::vector<SampleRef> samples;
  for (const GroundingSample& s : corpus) {
    if (cfg.mode == TrainMode::multi_query) {
      samples.push_back({&s, -1});
    } else {
      for (std::size_t q = 0; q < s.queries.size(); ++q) {
        samples.push_back({&s, static_cast<int>(q)});
      }
    }
  }

  AdamW::Options opts;
  opts.learning_rate = cfg.learning_rate;
  opts.weight_decay = cfg.weight_decay;
  AdamW optimizer(model.trainable_parameters(), opts);

  Rng shuffle_rng(cfg.shuffle_seed);
  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fisher-Yates with our own rng keeps the order reproducible.
    for (int i = static_cast<int>(samples.size()) - 1; i > 0; --i) {
      std::swap(samples[i], samples[shuffle_rng.uniform_int(0, i)]);
    }

    double loss_sum = 0.0;
    int batch_count = 0;
    for (std::size_t start = 0; start < samples.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(samples.size(), start + cfg.batch_size);

      Var iou_total;
      std::vector<Var> pos_queries, pos_moments;
      int sample_count = 0;
      for (std::size_t s = start; s < stop; ++s) {
        const SampleRef& ref = samples[s];
        const GroundingSample& gs = *ref.sample;
        const int t = gs.clip_features.rows();

        Model::Forward fwd = model.forward(gs.clip_features, query_matrix(gs, ref.query_index));
        const std::vector<Interval> targets = sample_targets(gs, ref.query_index);
        const IoUTargetMap iou_map = gt_iou_map(targets, t, gs.duration, loss_cfg);
        Var sample_loss = iou_loss(fwd.score_rows, iou_map, loss_cfg);
        iou_total = iou_total.defined() ? add(iou_total, sample_loss) : sample_loss;
        ++sample_count;

        for (std::size_t q = 0; q < targets.size(); ++q) {
          const auto [gi, gj] = seconds_to_span(targets[q], t, gs.duration);
          const int cell = gi * t + gj;
          pos_moments.push_back(slice_rows(fwd.moment_emb, cell, cell + 1));
          pos_queries.push_back(
              slice_rows(fwd.query_emb, static_cast<int>(q), static_cast<int>(q) + 1));
        }
      }

      Var total = affine(iou_total, loss_cfg.weight_iou / sample_count, 0.0);
      if (pos_queries.size() >= 2) {
        Var contra =
            contrastive_loss(concat_rows(pos_queries), concat_rows(pos_moments), loss_cfg);
        total = add(total, affine(contra, loss_cfg.weight_contrastive, 0.0));
      }

      const double loss_value = total.value()[0];
      if (!std::isfinite(loss_value)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(batch_count + 1));
      }
      backward(total);
      optimizer.step();
      optimizer.zero_grad();
      loss_sum += loss_value;
      ++batch_count;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = loss_sum / batch_count;
    if (validation != nullptr) entry.validation = evaluate_model(model, *validation);
    if (log != nullptr) {
      *log << "epoch=" << epoch << " loss=" << entry.mean_loss;
      if (entry.validation) {
        *log << " val_r1_iou0.5=" << entry.validation->recall_at(1, 0.5)
             << " val_miou=" << entry.validation->mean_iou;
      }
      *log << "\n";
    }
    result.epochs.push_back(std::move(entry));
  }
  result.final_loss = result.epochs.back().mean_loss;
  return result;
}

std::vector<ScoredInterval> predict(const Model& model, const GroundingSample& sample,
                                    int query_index, double nms_threshold) {
  const int t = sample.clip_features.rows();
  Model::Forward fwd = model.forward(sample.clip_features, query_matrix(sample, query_index));
  const ScoreMap scores = model.score_map(fwd);

  std::vector<ScoredInterval> candidates;
  candidates.reserve(static_cast<std::size_t>(t) * (t + 1) / 2);
  for (int i = 0; i < t; ++i) {
    for (int j = i; j < t; ++j) {
      candidates.push_back(
          {span_to_seconds(i, j, t, sample.duration), scores.at(i, j, 0)});
    }
  }
  return nms(std::move(candidates), nms_threshold);
}

MetricReport evaluate_model(const Model& model, const Corpus& corpus, double nms_threshold) {
  std::vector<std::vector<ScoredInterval>> predictions;
  std::vector<Interval> ground_truth;
  for (const GroundingSample& sample : corpus) {
    for (std::size_t q = 0; q < sample.queries.size(); ++q) {
      predictions.push_back(predict(model, sample, static_cast<int>(q), nms_threshold));
      ground_truth.push_back(sample.queries[q].target);
    }
  }
  return evaluate(predictions, ground_truth);
}

std::vector<AblateRow> ablate(const ModelConfig& base, const Corpus& corpus,
                              const Corpus& eval_corpus, const TrainConfig& tcfg,
                              std::ostream* log) {
  const bool toggles[4][2] = {{false, false}, {true, false}, {false, true}, {true, true}};
  std::vector<AblateRow> rows;
  for (const auto& toggle : toggles) {
    ModelConfig cfg = base;
    cfg.static_on = toggle[0];
    cfg.dynamic_on = toggle[1];
    Model model(cfg);
    if (log != nullptr) {
      *log << "ablate static=" << (cfg.static_on ? "on" : "off")
           << " dynamic=" << (cfg.dynamic_on ? "on" : "off") << "\n";
    }
    const TrainResult tr = train(model, corpus, nullptr, tcfg, nullptr);
    AblateRow row;
    row.static_on = cfg.static_on;
    row.dynamic_on = cfg.dynamic_on;
    row.final_loss = tr.final_loss;
    row.report = evaluate_model(model, eval_corpus);
    if (log != nullptr) {
      *log << "  r1_iou0.5=" << row.report.recall_at(1, 0.5) << " miou=" << row.report.mean_iou
           << " final_loss=" << row.final_loss << "\n";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace tvg
