#include "tvg/proposal.hpp"

#include "tvg/errors.hpp"

namespace tvg {

Fusion parse_fusion(const std::string& name) {
  if (name == "content") return Fusion::content_only;
  if (name == "add") return Fusion::boundary_add;
  if (name == "concat") return Fusion::boundary_concat;
  throw ConfigError("proposal: unknown fusion '" + name + "'");
}

std::string fusion_name(Fusion f) {
  switch (f) {
    case Fusion::content_only: return "content";
    case Fusion::boundary_add: return "add";
    case Fusion::boundary_concat: return "concat";
  }
  throw ConfigError("proposal: unknown fusion tag");
}

Pooling parse_pooling(const std::string& name) {
  if (name == "maxpool") return Pooling::maxpool;
  if (name == "conv") return Pooling::conv;
  throw ConfigError("proposal: unknown pooling '" + name + "'");
}

std::string pooling_name(Pooling p) {
  return p == Pooling::maxpool ? "maxpool" : "conv";
}

void ProposalConfig::validate() const {
  if (conv_layers < 1) throw ConfigError("proposal: conv_layers must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("proposal: kernel_size must be odd");
  }
  if (hidden < 1) throw ConfigError("proposal: hidden must be >= 1");
  if (conv1d_kernel < 1 || conv1d_kernel % 2 == 0) {
    throw ConfigError("proposal: conv1d_kernel must be odd");
  }
}

std::vector<std::pair<int, int>> enumerate_moments(int num_clips) {
  if (num_clips < 1) throw ContractError("proposal: num_clips must be >= 1");
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(num_clips) * (num_clips + 1) / 2);
  for (int i = 0; i < num_clips; ++i) {
    for (int j = i; j < num_clips; ++j) out.emplace_back(i, j);
  }
  return out;
}

std::vector<std::uint8_t> valid_mask(int num_clips) {
  if (num_clips < 1) throw ContractError("proposal: num_clips must be >= 1");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(num_clips) * num_clips, 0);
  for (int i = 0; i < num_clips; ++i) {
    for (int j = i; j < num_clips; ++j) mask[i * num_clips + j] = 1;
  }
  return mask;
}

ProposalNet::ProposalNet(const ProposalConfig& cfg, int dim, Rng& rng) : cfg_(cfg), dim_(dim) {
  cfg_.validate();
  if (dim_ <= 0) throw ConfigError("proposal: dim must be positive");
  if (cfg_.fusion == Fusion::boundary_concat) {
    concat_w_ = Var::parameter(Tensor::xavier(Shape{dim_, 2 * dim_}, 2 * dim_, dim_, rng));
    concat_b_ = Var::parameter(Tensor::zeros(Shape{1, dim_}));
  }
  if (cfg_.pooling == Pooling::conv) {
    span_w_ = Var::parameter(Tensor::xavier(Shape{dim_, dim_, 1, cfg_.conv1d_kernel},
                                            dim_ * cfg_.conv1d_kernel, dim_, rng));
    span_b_ = Var::parameter(Tensor::zeros(Shape{1, dim_}));
  }
  int in_ch = dim_;
  for (int l = 0; l < cfg_.conv_layers; ++l) {
    conv_w_.push_back(Var::parameter(
        Tensor::xavier(Shape{cfg_.hidden, in_ch, cfg_.kernel_size, cfg_.kernel_size},
                       in_ch * cfg_.kernel_size * cfg_.kernel_size, cfg_.hidden, rng)));
    conv_b_.push_back(Var::parameter(Tensor::zeros(Shape{1, cfg_.hidden})));
    in_ch = cfg_.hidden;
  }
}

Var ProposalNet::moment_feature(const Var& states, int i, int j) const {
  if (i > j) throw ContractError("proposal: span start exceeds end");
  if (i < 0 || j >= states.rows()) throw ContractError("proposal: span out of range");
  Var span = slice_rows(states, i, j + 1);

  Var content;
  if (cfg_.pooling == Pooling::maxpool) {
    content = max_over_axis(span, 0);
  } else {
    // Length-preserving 1-D convolution along the span, then mean.
    Var seq = rows_to_image(span, 1, j - i + 1);  // [d, 1, len]
    Var conved = image_to_rows(conv2d(seq, span_w_, span_b_));
    content = mean_over_axis(conved, 0);
  }

  switch (cfg_.fusion) {
    case Fusion::content_only:
      return content;
    case Fusion::boundary_add:
      return add(add(content, slice_rows(states, i, i + 1)), slice_rows(states, j, j + 1));
    case Fusion::boundary_concat:
      return concat_cols(
          {content, add(slice_rows(states, i, i + 1), slice_rows(states, j, j + 1))});
  }
  throw ConfigError("proposal: unknown fusion tag");
}

Var ProposalNet::populate(const Var& states) const {
  const int t = states.rows();
  const Var zero_row = Var::constant(Tensor::zeros(Shape{1, dim_}));
  std::vector<Var> rows;
  rows.reserve(static_cast<std::size_t>(t) * t);
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < t; ++j) {
      if (i > j) {
        rows.push_back(zero_row);
        continue;
      }
      Var feature = moment_feature(states, i, j);
      if (cfg_.fusion == Fusion::boundary_concat) {
        feature = linear(feature, concat_w_, concat_b_);
      }
      rows.push_back(feature);
    }
  }
  return concat_rows(rows);
}

Var ProposalNet::encode(const Var& map_rows, int num_clips) const {
  if (map_rows.rows() != num_clips * num_clips) {
    throw DimensionError("proposal: map rows must cover the full grid");
  }
  const std::vector<std::uint8_t> mask = valid_mask(num_clips);
  Var image = rows_to_image(map_rows, num_clips, num_clips);
  for (std::size_t l = 0; l < conv_w_.size(); ++l) {
    image = relu(conv2d(image, conv_w_[l], conv_b_[l]));
    // Re-zero the lower triangle so padding and bias never leak into it.
    const int ch = image.value().channels();
    Tensor mask_image(Shape{ch, num_clips, num_clips});
    for (int c = 0; c < ch; ++c) {
      for (int y = 0; y < num_clips; ++y) {
        for (int x = 0; x < num_clips; ++x) {
          mask_image.at(c, y, x) = mask[y * num_clips + x] ? 1.0 : 0.0;
        }
      }
    }
    image = mul(image, Var::constant(mask_image));
  }
  return image_to_rows(image);
}

std::vector<Var> ProposalNet::parameters() const {
  std::vector<Var> out;
  for (const Var& v : {concat_w_, concat_b_, span_w_, span_b_}) {
    if (v.defined()) out.push_back(v);
  }
  for (std::size_t l = 0; l < conv_w_.size(); ++l) {
    out.push_back(conv_w_[l]);
    out.push_back(conv_b_[l]);
  }
  return out;
}

}  // namespace tvg
