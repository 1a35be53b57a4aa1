// tvg — synthetic temporal grounding lab.
//
// Subcommands:
//   gen     write a synthetic grounding corpus (VFT1 features + annotations)
//   train   optimize the grounding model on a corpus
//   eval    score a checkpoint on a corpus (always single-query)
//   ablate  train/evaluate the 2x2 static/dynamic grid (optionally aggregator variants)
//   stats   corpus histograms
//
// A JSON config file supplies defaults; explicit flags override it. The
// effective configuration is echoed into the output directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tvg/errors.hpp"
#include "tvg/run_config.hpp"
#include "tvg/trainer.hpp"
#include "tvg/vft_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitData = 4;
constexpr int kExitFormat = 5;
constexpr int kExitIo = 6;
constexpr int kExitNumeric = 7;
constexpr int kExitInternal = 8;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw tvg::IoError("cannot create output directory " + dir);
}

json report_to_json(const tvg::MetricReport& report) {
  json out;
  for (std::size_t h = 0; h < tvg::kRecallTopK.size(); ++h) {
    for (std::size_t u = 0; u < tvg::kRecallIouThresholds.size(); ++u) {
      char key[48];
      std::snprintf(key, sizeof(key), "recall@%d_iou@%.1f", tvg::kRecallTopK[h],
                    tvg::kRecallIouThresholds[u]);
      out[key] = report.recall[h][u];
    }
  }
  out["mean_iou"] = report.mean_iou;
  out["num_queries"] = report.num_queries;
  return out;
}

void write_report(const tvg::MetricReport& report, const std::string& out_dir) {
  std::ofstream text(fs::path(out_dir) / "metrics.txt");
  text << report.to_text();
  std::ofstream machine(fs::path(out_dir) / "results.json");
  machine << report_to_json(report).dump(2) << "\n";
}

void add_train_flags(CLI::App* cmd, tvg::RunConfig& cfg, std::string& mode, std::string& aggregator,
                     std::string& fusion, std::string& pooling, int& static_flag,
                     int& dynamic_flag) {
  cmd->add_option("--mode", mode, "training mode: single_query or multi_query");
  cmd->add_option("--epochs", cfg.train.epochs, "training epochs");
  cmd->add_option("--batch", cfg.train.batch_size, "batch size (samples per step)");
  cmd->add_option("--lr", cfg.train.learning_rate, "AdamW learning rate");
  cmd->add_option("--weight-decay", cfg.train.weight_decay, "AdamW decoupled weight decay");
  cmd->add_option("--shuffle-seed", cfg.train.shuffle_seed, "epoch shuffle seed");
  cmd->add_option("--model-seed", cfg.model.seed, "parameter init seed");
  cmd->add_option("--static", static_flag, "static fusion module on/off (1/0)");
  cmd->add_option("--dynamic", dynamic_flag, "temporal graph module on/off (1/0)");
  cmd->add_option("--aggregator", aggregator, "graph aggregator: tgf|gcn|gat|d|mlp");
  cmd->add_option("--fusion", fusion, "proposal fusion: content|add|concat");
  cmd->add_option("--pooling", pooling, "proposal pooling: maxpool|conv");
  cmd->add_option("--gamma", cfg.model.graph.gamma, "Gaussian filter coefficient");
  cmd->add_option("--kernels", cfg.model.graph.num_kernels, "Gaussian kernel count");
  cmd->add_option("--kernel-step", cfg.model.graph.kernel_step, "Gaussian bias step");
  cmd->add_option("--dense-radius", cfg.model.graph.dense_radius, "dense adjacency radius");
  cmd->add_option("--stride-base", cfg.model.graph.stride_base, "skip-tier stride base");
  cmd->add_option("--graph-layers", cfg.model.graph.num_layers, "graph layers");
  cmd->add_option("--blocks", cfg.model.static_cfg.num_blocks, "static residual blocks");
  cmd->add_option("--dim", cfg.model.dim, "shared feature width");
  cmd->add_option("--align-dim", cfg.model.align_dim, "cross-modal embedding width");
  cmd->add_option("--hidden", cfg.model.proposal.hidden, "proposal encoder channels");
  cmd->add_option("--conv-layers", cfg.model.proposal.conv_layers, "proposal encoder depth");
  cmd->add_option("--conv-kernel", cfg.model.proposal.kernel_size, "proposal encoder kernel");
  cmd->add_option("--temperature", cfg.model.loss.temperature, "contrastive temperature");
  cmd->add_option("--nms", cfg.nms_threshold, "NMS IoU threshold");
}

void apply_train_flags(tvg::RunConfig& cfg, const std::string& mode, const std::string& aggregator,
                       const std::string& fusion, const std::string& pooling, int static_flag,
                       int dynamic_flag) {
  if (!mode.empty()) cfg.train.mode = tvg::parse_train_mode(mode);
  if (!aggregator.empty()) cfg.model.graph.aggregator = tvg::parse_aggregator(aggregator);
  if (!fusion.empty()) cfg.model.proposal.fusion = tvg::parse_fusion(fusion);
  if (!pooling.empty()) cfg.model.proposal.pooling = tvg::parse_pooling(pooling);
  if (static_flag >= 0) cfg.model.static_on = static_flag != 0;
  if (dynamic_flag >= 0) cfg.model.dynamic_on = dynamic_flag != 0;
}

int run(int argc, char** argv) {
  CLI::App app{"synthetic temporal grounding lab"};
  app.require_subcommand(1);

  // The config file is loaded before flag binding so that flags passed on
  // the command line override file values.
  tvg::RunConfig cfg;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      cfg = tvg::RunConfig::from_file(argv[i + 1]);
      break;
    }
  }
  std::string config_path, data_dir, out_dir, val_dir, eval_data_dir, checkpoint_path;
  std::string mode, aggregator, fusion, pooling;
  int static_flag = -1, dynamic_flag = -1;
  bool with_variants = false;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic grounding corpus");
  gen->add_option("--config", config_path, "JSON config file");
  gen->add_option("--out", out_dir, "output corpus directory")->required();
  gen->add_option("--videos", cfg.synth.num_videos, "number of videos");
  gen->add_option("--clips", cfg.synth.clips_per_video, "clips per video");
  gen->add_option("--video-dim", cfg.synth.video_dim, "raw clip feature width");
  gen->add_option("--query-dim", cfg.synth.query_dim, "raw query feature width");
  gen->add_option("--min-events", cfg.synth.min_events, "min events (= queries) per video");
  gen->add_option("--max-events", cfg.synth.max_events, "max events per video");
  gen->add_option("--noise", cfg.synth.noise_sigma, "clip feature noise sigma");
  gen->add_option("--query-noise", cfg.synth.query_noise_sigma, "query feature noise sigma");
  gen->add_option("--prototype-dim", cfg.synth.prototype_dim, "latent prototype width");
  gen->add_option("--clip-seconds", cfg.synth.clip_seconds, "seconds per clip");
  gen->add_option("--modality-gap", cfg.synth.modality_gap,
                  "pass query features through a fixed random affine map");
  gen->add_option("--seed", cfg.synth.seed, "corpus seed");

  CLI::App* train_cmd = app.add_subcommand("train", "train the grounding model");
  train_cmd->add_option("--config", config_path, "JSON config file");
  train_cmd->add_option("--data", data_dir, "training corpus directory")->required();
  train_cmd->add_option("--val-data", val_dir, "validation corpus directory");
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  add_train_flags(train_cmd, cfg, mode, aggregator, fusion, pooling, static_flag, dynamic_flag);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (single-query)");
  eval_cmd->add_option("--config", config_path, "JSON config file");
  eval_cmd->add_option("--data", data_dir, "evaluation corpus directory")->required();
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--out", out_dir, "output directory")->required();
  eval_cmd->add_option("--nms", cfg.nms_threshold, "NMS IoU threshold");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "run the static/dynamic ablation grid");
  ablate_cmd->add_option("--config", config_path, "JSON config file");
  ablate_cmd->add_option("--data", data_dir, "training corpus directory")->required();
  ablate_cmd->add_option("--eval-data", eval_data_dir, "held-out corpus (defaults to --data)");
  ablate_cmd->add_option("--out", out_dir, "output directory")->required();
  ablate_cmd->add_flag("--variants", with_variants, "also run graph aggregator variants");
  add_train_flags(ablate_cmd, cfg, mode, aggregator, fusion, pooling, static_flag, dynamic_flag);

  CLI::App* stats_cmd = app.add_subcommand("stats", "corpus statistics");
  stats_cmd->add_option("--data", data_dir, "corpus directory")->required();
  stats_cmd->add_option("--out", out_dir, "optional output directory");

  CLI11_PARSE(app, argc, argv);
  apply_train_flags(cfg, mode, aggregator, fusion, pooling, static_flag, dynamic_flag);

  if (gen->parsed()) {
    ensure_dir(out_dir);
    const tvg::Corpus corpus = tvg::generate(cfg.synth);
    tvg::write_corpus(corpus, out_dir);
    cfg.sync_dims();
    cfg.save((fs::path(out_dir) / "config.json").string());
    std::cout << "wrote " << corpus.size() << " videos to " << out_dir << "\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    ensure_dir(out_dir);
    const tvg::Corpus corpus = tvg::read_corpus(data_dir);
    if (corpus.empty()) throw tvg::DataError("training corpus is empty");
    tvg::Corpus val;
    if (!val_dir.empty()) val = tvg::read_corpus(val_dir);

    cfg.synth.video_dim = corpus.front().clip_features.cols();
    cfg.synth.query_dim = static_cast<int>(corpus.front().queries.front().feature.size());
    cfg.sync_dims();
    cfg.save((fs::path(out_dir) / "config.json").string());

    tvg::Model model(cfg.model);
    std::ofstream log(fs::path(out_dir) / "train_log.txt");
    const tvg::TrainResult result =
        tvg::train(model, corpus, val.empty() ? nullptr : &val, cfg.train, &log);
    const std::string ckpt = (fs::path(out_dir) / "checkpoint.tvc").string();
    model.save(ckpt);
    std::cout << "final_loss=" << result.final_loss << "\ncheckpoint=" << ckpt << "\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    ensure_dir(out_dir);
    const tvg::Corpus corpus = tvg::read_corpus(data_dir);
    const tvg::Model model = tvg::Model::load(checkpoint_path);
    const tvg::MetricReport report = tvg::evaluate_model(model, corpus, cfg.nms_threshold);
    write_report(report, out_dir);
    std::cout << report.to_text();
    return 0;
  }

  if (ablate_cmd->parsed()) {
    ensure_dir(out_dir);
    const tvg::Corpus corpus = tvg::read_corpus(data_dir);
    const tvg::Corpus eval_corpus =
        eval_data_dir.empty() ? corpus : tvg::read_corpus(eval_data_dir);
    cfg.synth.video_dim = corpus.front().clip_features.cols();
    cfg.synth.query_dim = static_cast<int>(corpus.front().queries.front().feature.size());
    cfg.sync_dims();
    cfg.save((fs::path(out_dir) / "config.json").string());

    std::ofstream log(fs::path(out_dir) / "ablate_log.txt");
    const auto rows = tvg::ablate(cfg.model, corpus, eval_corpus, cfg.train, &log);
    json table = json::array();
    std::ostringstream text;
    text << "static dynamic r1_iou0.5 miou final_loss\n";
    for (const auto& row : rows) {
      text << (row.static_on ? "on " : "off") << "    " << (row.dynamic_on ? "on " : "off")
           << "     " << row.report.recall_at(1, 0.5) << "    " << row.report.mean_iou << "  "
           << row.final_loss << "\n";
      json entry = {{"static", row.static_on},
                    {"dynamic", row.dynamic_on},
                    {"final_loss", row.final_loss},
                    {"metrics", report_to_json(row.report)}};
      table.push_back(entry);
    }

    if (with_variants) {
      for (const char* name : {"gcn", "gat", "d", "mlp"}) {
        tvg::ModelConfig vc = cfg.model;
        vc.static_on = true;
        vc.dynamic_on = true;
        vc.graph.aggregator = tvg::parse_aggregator(name);
        tvg::Model model(vc);
        tvg::train(model, corpus, nullptr, cfg.train, nullptr);
        const tvg::MetricReport report = tvg::evaluate_model(model, eval_corpus);
        text << "variant " << name << " r1_iou0.5=" << report.recall_at(1, 0.5)
             << " miou=" << report.mean_iou << "\n";
        table.push_back({{"variant", name}, {"metrics", report_to_json(report)}});
      }
    }

    std::ofstream(fs::path(out_dir) / "ablation.txt") << text.str();
    std::ofstream(fs::path(out_dir) / "ablation.json") << table.dump(2) << "\n";
    std::cout << text.str();
    return 0;
  }

  if (stats_cmd->parsed()) {
    const tvg::Corpus corpus = tvg::read_corpus(data_dir);
    const tvg::CorpusStats stats = tvg::corpus_stats(corpus);
    std::cout << stats.to_text();
    if (!out_dir.empty()) {
      ensure_dir(out_dir);
      std::ofstream(fs::path(out_dir) / "stats.txt") << stats.to_text();
    }
    return 0;
  }

  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const tvg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const tvg::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const tvg::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const tvg::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const tvg::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const tvg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return kExitInternal;
  }
}
