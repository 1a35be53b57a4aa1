#include "tvg/model.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "tvg/errors.hpp"

namespace tvg {

using nlohmann::json;

void ModelConfig::validate() const {
  if (video_dim < 1 || query_dim < 1) throw ConfigError("model: raw feature dims must be >= 1");
  if (dim < 2 || dim % 2 != 0) throw ConfigError("model: dim must be even and >= 2");
  if (align_dim < 1) throw ConfigError("model: align_dim must be >= 1");
  if (static_cfg.dim != dim) throw ConfigError("model: static_cfg.dim must equal dim");
  static_cfg.validate();
  graph.validate();
  proposal.validate();
  loss.validate();
}

std::string ModelConfig::to_json() const {
  json doc;
  doc["video_dim"] = video_dim;
  doc["query_dim"] = query_dim;
  doc["dim"] = dim;
  doc["align_dim"] = align_dim;
  doc["static_on"] = static_on;
  doc["dynamic_on"] = dynamic_on;
  doc["static"] = {{"num_blocks", static_cfg.num_blocks}, {"ln_epsilon", static_cfg.ln_epsilon}};
  doc["graph"] = {{"num_layers", graph.num_layers},
                  {"gamma", graph.gamma},
                  {"num_kernels", graph.num_kernels},
                  {"kernel_step", graph.kernel_step},
                  {"dense_radius", graph.dense_radius},
                  {"stride_base", graph.stride_base},
                  {"aggregator", aggregator_name(graph.aggregator)},
                  {"refresh_clues_each_layer", graph.refresh_clues_each_layer}};
  doc["proposal"] = {{"fusion", fusion_name(proposal.fusion)},
                     {"pooling", pooling_name(proposal.pooling)},
                     {"conv_layers", proposal.conv_layers},
                     {"kernel_size", proposal.kernel_size},
                     {"hidden", proposal.hidden},
                     {"conv1d_kernel", proposal.conv1d_kernel}};
  doc["loss"] = {{"iou_scale_min", loss.iou_scale_min},
                 {"iou_scale_max", loss.iou_scale_max},
                 {"temperature", loss.temperature},
                 {"weight_iou", loss.weight_iou},
                 {"weight_contrastive", loss.weight_contrastive},
                 {"bce_epsilon", loss.bce_epsilon}};
  doc["seed"] = seed;
  return doc.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model config: invalid JSON: ") + e.what());
  }
  ModelConfig cfg;
  cfg.video_dim = doc.value("video_dim", cfg.video_dim);
  cfg.query_dim = doc.value("query_dim", cfg.query_dim);
  cfg.dim = doc.value("dim", cfg.dim);
  cfg.align_dim = doc.value("align_dim", cfg.align_dim);
  cfg.static_on = doc.value("static_on", cfg.static_on);
  cfg.dynamic_on = doc.value("dynamic_on", cfg.dynamic_on);
  if (doc.contains("static")) {
    const json& s = doc["static"];
    cfg.static_cfg.num_blocks = s.value("num_blocks", cfg.static_cfg.num_blocks);
    cfg.static_cfg.ln_epsilon = s.value("ln_epsilon", cfg.static_cfg.ln_epsilon);
  }
  if (doc.contains("graph")) {
    const json& g = doc["graph"];
    cfg.graph.num_layers = g.value("num_layers", cfg.graph.num_layers);
    cfg.graph.gamma = g.value("gamma", cfg.graph.gamma);
    cfg.graph.num_kernels = g.value("num_kernels", cfg.graph.num_kernels);
    cfg.graph.kernel_step = g.value("kernel_step", cfg.graph.kernel_step);
    cfg.graph.dense_radius = g.value("dense_radius", cfg.graph.dense_radius);
    cfg.graph.stride_base = g.value("stride_base", cfg.graph.stride_base);
    if (g.contains("aggregator")) cfg.graph.aggregator = parse_aggregator(g["aggregator"]);
    cfg.graph.refresh_clues_each_layer =
        g.value("refresh_clues_each_layer", cfg.graph.refresh_clues_each_layer);
  }
  if (doc.contains("proposal")) {
    const json& p = doc["proposal"];
    if (p.contains("fusion")) cfg.proposal.fusion = parse_fusion(p["fusion"]);
    if (p.contains("pooling")) cfg.proposal.pooling = parse_pooling(p["pooling"]);
    cfg.proposal.conv_layers = p.value("conv_layers", cfg.proposal.conv_layers);
    cfg.proposal.kernel_size = p.value("kernel_size", cfg.proposal.kernel_size);
    cfg.proposal.hidden = p.value("hidden", cfg.proposal.hidden);
    cfg.proposal.conv1d_kernel = p.value("conv1d_kernel", cfg.proposal.conv1d_kernel);
  }
  if (doc.contains("loss")) {
    const json& l = doc["loss"];
    cfg.loss.iou_scale_min = l.value("iou_scale_min", cfg.loss.iou_scale_min);
    cfg.loss.iou_scale_max = l.value("iou_scale_max", cfg.loss.iou_scale_max);
    cfg.loss.temperature = l.value("temperature", cfg.loss.temperature);
    cfg.loss.weight_iou = l.value("weight_iou", cfg.loss.weight_iou);
    cfg.loss.weight_contrastive = l.value("weight_contrastive", cfg.loss.weight_contrastive);
    cfg.loss.bce_epsilon = l.value("bce_epsilon", cfg.loss.bce_epsilon);
  }
  cfg.seed = doc.value("seed", cfg.seed);
  return cfg;
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.static_cfg.dim = cfg_.dim;
  cfg_.validate();
  Rng rng(cfg_.seed);
  proj_video_w_ =
      Var::parameter(Tensor::xavier(Shape{cfg_.dim, cfg_.video_dim}, cfg_.video_dim, cfg_.dim, rng));
  proj_video_b_ = Var::parameter(Tensor::zeros(Shape{1, cfg_.dim}));
  proj_query_w_ =
      Var::parameter(Tensor::xavier(Shape{cfg_.dim, cfg_.query_dim}, cfg_.query_dim, cfg_.dim, rng));
  proj_query_b_ = Var::parameter(Tensor::zeros(Shape{1, cfg_.dim}));
  static_net_ = std::make_unique<StaticNet>(cfg_.static_cfg, rng);
  graph_net_ = std::make_unique<GraphNet>(cfg_.graph, cfg_.dim, rng);
  proposal_net_ = std::make_unique<ProposalNet>(cfg_.proposal, cfg_.dim, rng);
  matcher_ = std::make_unique<Matcher>(proposal_net_->encoded_dim(), cfg_.dim, cfg_.align_dim, rng);
}

Model::Forward Model::forward(const Tensor& clip_features, const Tensor& query_features) const {
  if (clip_features.cols() != cfg_.video_dim) {
    throw DimensionError("model: clip feature width " + std::to_string(clip_features.cols()) +
                         " vs configured " + std::to_string(cfg_.video_dim));
  }
  if (query_features.cols() != cfg_.query_dim) {
    throw DimensionError("model: query feature width " + std::to_string(query_features.cols()) +
                         " vs configured " + std::to_string(cfg_.query_dim));
  }
  Forward out;
  out.num_clips = clip_features.rows();
  out.num_queries = query_features.rows();

  Var video = linear(Var::constant(clip_features), proj_video_w_, proj_video_b_);
  Var query = linear(Var::constant(query_features), proj_query_w_, proj_query_b_);

  if (cfg_.static_on) {
    auto [fv, fq] = static_net_->forward(video, query);
    video = fv;
    query = fq;
  }
  if (cfg_.dynamic_on) {
    video = graph_net_->forward(video);
  }

  Var map_rows = proposal_net_->populate(video);
  Var encoded = proposal_net_->encode(map_rows, out.num_clips);
  out.moment_emb = matcher_->moment_embed(encoded);
  out.query_emb = matcher_->query_embed(query);
  out.score_rows = matcher_->score_rows(out.moment_emb, out.query_emb);
  return out;
}

ScoreMap Model::score_map(const Forward& fwd) const {
  return matcher_->make_score_map(fwd.score_rows, fwd.num_clips);
}

std::vector<std::pair<std::string, Var>> Model::named_parameters() const {
  std::vector<std::pair<std::string, Var>> named;
  named.emplace_back("proj.video.w", proj_video_w_);
  named.emplace_back("proj.video.b", proj_video_b_);
  named.emplace_back("proj.query.w", proj_query_w_);
  named.emplace_back("proj.query.b", proj_query_b_);
  int idx = 0;
  for (const Var& v : static_net_->parameters()) {
    named.emplace_back("static.p" + std::to_string(idx++), v);
  }
  idx = 0;
  for (const Var& v : graph_net_->parameters()) {
    named.emplace_back("graph.p" + std::to_string(idx++), v);
  }
  idx = 0;
  for (const Var& v : proposal_net_->parameters()) {
    named.emplace_back("proposal.p" + std::to_string(idx++), v);
  }
  idx = 0;
  for (const Var& v : matcher_->parameters()) {
    named.emplace_back("matcher.p" + std::to_string(idx++), v);
  }
  return named;
}

std::vector<Var> Model::parameters() const {
  std::vector<Var> out;
  for (auto& [name, v] : named_parameters()) out.push_back(v);
  return out;
}

std::vector<Var> Model::trainable_parameters() const {
  std::vector<Var> out{proj_video_w_, proj_video_b_, proj_query_w_, proj_query_b_};
  if (cfg_.static_on) {
    for (const Var& v : static_net_->parameters()) out.push_back(v);
  }
  if (cfg_.dynamic_on) {
    for (const Var& v : graph_net_->parameters()) out.push_back(v);
  }
  for (const Var& v : proposal_net_->parameters()) out.push_back(v);
  for (const Var& v : matcher_->parameters()) out.push_back(v);
  return out;
}

int Model::parameter_count() const {
  int total = 0;
  for (const Var& v : parameters()) total += v.value().numel();
  return total;
}

namespace {

constexpr char kCheckpointMagic[4] = {'T', 'V', 'C', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw FormatError(path + ": truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  const std::uint64_t lo = get_u32(in, path);
  const std::uint64_t hi = get_u32(in, path);
  return lo | (hi << 32);
}

}  // namespace

void Model::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  out.write(kCheckpointMagic, 4);
  put_u32(out, 1);  // version
  put_u64(out, cfg_.seed);
  const std::string config = cfg_.to_json();
  put_u32(out, static_cast<std::uint32_t>(config.size()));
  out.write(config.data(), static_cast<std::streamsize>(config.size()));

  const auto named = named_parameters();
  put_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, var] : named) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Tensor& t = var.value();
    put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int extent : t.shape()) put_u32(out, static_cast<std::uint32_t>(extent));
    for (int i = 0; i < t.numel(); ++i) {
      std::uint64_t bits;
      const double v = t[i];
      std::memcpy(&bits, &v, 8);
      put_u64(out, bits);
    }
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

Model Model::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError(path + ": bad checkpoint magic");
  }
  const std::uint32_t version = get_u32(in, path);
  if (version != 1) throw FormatError(path + ": unsupported checkpoint version");
  const std::uint64_t seed = get_u64(in, path);
  const std::uint32_t config_len = get_u32(in, path);
  std::string config(config_len, '\0');
  in.read(config.data(), config_len);
  if (in.gcount() != static_cast<std::streamsize>(config_len)) {
    throw FormatError(path + ": truncated checkpoint config");
  }
  ModelConfig cfg = ModelConfig::from_json(config);
  cfg.seed = seed;
  Model model(cfg);

  auto named = model.named_parameters();
  const std::uint32_t count = get_u32(in, path);
  if (count != named.size()) {
    throw DataError(path + ": checkpoint holds " + std::to_string(count) + " parameters, model has " +
                    std::to_string(named.size()));
  }
  for (auto& [name, var] : named) {
    const std::uint32_t name_len = get_u32(in, path);
    std::string stored(name_len, '\0');
    in.read(stored.data(), name_len);
    if (stored != name) {
      throw DataError(path + ": parameter order mismatch, expected " + name + " got " + stored);
    }
    const std::uint32_t rank = get_u32(in, path);
    Shape shape(rank);
    for (std::uint32_t r = 0; r < rank; ++r) shape[r] = static_cast<int>(get_u32(in, path));
    if (shape != var.value().shape()) {
      throw DataError(path + ": shape mismatch for " + name);
    }
    Tensor& t = var.mutable_value();
    for (int i = 0; i < t.numel(); ++i) {
      const std::uint64_t bits = get_u64(in, path);
      double v;
      std::memcpy(&v, &bits, 8);
      t[i] = v;
    }
  }
  return model;
}

}  // namespace tvg
