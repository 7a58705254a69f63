#pragma once

// Partial-convolution UNet generator and the fixed random-weight feature
// extractor used by the perceptual and style losses.

#include <map>

#include "sainet/conv.hpp"

namespace sainet {

struct UNetConfig {
  int depth = 4;
  int base_channels = 32;
  int input_channels = 8;
  int output_channels = 3;
  int growth = 2;
  int max_channels = 256;
  double leaky_slope = 0.2;
  std::uint64_t seed = 0;
  bool partial = true;  // false builds the plain-convolution twin

  int channels_at(int level) const {
    long long c = base_channels;
    for (int i = 0; i < level; ++i) c = std::min<long long>(c * growth, max_channels);
    return static_cast<int>(std::min<long long>(c, max_channels));
  }

  void validate() const {
    require(depth >= 1, "unet depth must be >= 1");
    require(base_channels >= 4, "unet base_channels must be >= 4");
    require(input_channels >= 1 && output_channels >= 1, "unet channel counts must be positive");
    require(growth >= 1, "unet growth must be >= 1");
    require(max_channels >= base_channels, "unet max_channels must be >= base_channels");
  }

  bool operator==(const UNetConfig&) const = default;
};

struct ConvLayer {
  std::string name;
  Tensor weight;  // [Cout,Cin,k,k]
  Tensor bias;    // [Cout]
  int stride = 1;
  int padding = 0;
};

namespace detail {

/// Kaiming-uniform (fan-in) for a leaky-relu stack with negative slope `a`.
inline ConvLayer make_conv_layer(std::string name, int cin, int cout, int k, int stride, int padding, double a,
                                 Rng& rng, bool trainable) {
  const std::size_t fan_in = static_cast<std::size_t>(cin) * k * k;
  const double bound = std::sqrt(6.0 / ((1.0 + a * a) * static_cast<double>(fan_in)));
  std::vector<double> w(static_cast<std::size_t>(cout) * fan_in);
  for (double& v : w) v = rng.uniform(-bound, bound);
  ConvLayer layer;
  layer.name = std::move(name);
  layer.weight = Tensor::from_data({static_cast<std::size_t>(cout), static_cast<std::size_t>(cin),
                                    static_cast<std::size_t>(k), static_cast<std::size_t>(k)},
                                   std::move(w), trainable);
  layer.bias = Tensor::zeros({static_cast<std::size_t>(cout)}, trainable);
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

/// Elementwise max of two binary masks (same shape), kept out of the graph.
inline Tensor mask_max(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mask union shape mismatch");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a[i], b[i]);
  return Tensor::from_data(a.shape(), std::move(out));
}

}  // namespace detail

/// UNet: encoder of stride-2 partial convolutions with mask propagation,
/// decoder of nearest upsampling + skip concatenation + partial convolution,
/// and a 1x1 head over [decoder features, raw input] squashed by a sigmoid.
class UNet {
 public:
  explicit UNet(UNetConfig config) : config_(std::move(config)) {
    config_.validate();
    Rng rng(config_.seed);
    const double a = config_.leaky_slope;
    encoders_.push_back(detail::make_conv_layer("enc0", config_.input_channels, config_.channels_at(0), 3, 1, 1, a,
                                                rng, true));
    for (int l = 1; l <= config_.depth; ++l)
      encoders_.push_back(detail::make_conv_layer("enc" + std::to_string(l), config_.channels_at(l - 1),
                                                  config_.channels_at(l), 3, 2, 1, a, rng, true));
    for (int l = config_.depth - 1; l >= 0; --l)
      decoders_.push_back(detail::make_conv_layer("dec" + std::to_string(l),
                                                  config_.channels_at(l + 1) + config_.channels_at(l),
                                                  config_.channels_at(l), 3, 1, 1, a, rng, true));
    head_ = detail::make_conv_layer("head", config_.channels_at(0) + config_.input_channels,
                                    config_.output_channels, 1, 1, 0, 1.0, rng, true);
  }

  const UNetConfig& config() const { return config_; }

  /// Same weights (copied), plain convolutions everywhere.
  UNet plain_twin() const {
    UNetConfig cfg = config_;
    cfg.partial = false;
    UNet twin(cfg);
    auto dst = twin.parameters();
    const auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i)
      std::copy(src[i].data().begin(), src[i].data().end(), dst[i].mutable_data().begin());
    return twin;
  }

  /// inputs [N,Cin,H,W], validity [N,1,H,W] binary -> [N,Cout,H,W] in (0,1).
  Tensor forward(const Tensor& inputs, const Tensor& validity) const {
    require(inputs.rank() == 4 && inputs.dim(1) == static_cast<std::size_t>(config_.input_channels),
            "unet input must be [N," + std::to_string(config_.input_channels) + ",H,W], got " +
                shape_str(inputs.shape()));
    require(validity.rank() == 4 && validity.dim(0) == inputs.dim(0) && validity.dim(1) == 1 &&
                validity.dim(2) == inputs.dim(2) && validity.dim(3) == inputs.dim(3),
            "unet validity mask must be [N,1,H,W] matching the input");
    const std::size_t factor = std::size_t{1} << config_.depth;
    require(inputs.dim(2) % factor == 0 && inputs.dim(3) % factor == 0,
            "unet input spatial size " + std::to_string(inputs.dim(2)) + "x" + std::to_string(inputs.dim(3)) +
                " is not divisible by 2^depth = " + std::to_string(factor));

    std::vector<Tensor> feats, masks;
    Tensor x = inputs, m = validity;
    for (const auto& layer : encoders_) {
      std::tie(x, m) = apply(layer, x, m);
      feats.push_back(x);
      masks.push_back(m);
    }
    for (std::size_t i = 0; i < decoders_.size(); ++i) {
      const std::size_t skip = static_cast<std::size_t>(config_.depth) - 1 - i;
      Tensor up = upsample_nearest_2x(x);
      Tensor up_mask = upsample_nearest_2x(m);
      x = concat_channels({up, feats[skip]});
      m = detail::mask_max(up_mask, masks[skip]);
      std::tie(x, m) = apply(decoders_[i], x, m);
    }
    Tensor head_in = concat_channels({x, inputs});
    return sigmoid(conv2d(head_in, head_.weight, head_.bias, head_.stride, head_.padding));
  }

  /// Trainable tensors in a fixed order (encoders, decoders, head; weight then bias).
  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (const auto* layer : layers()) {
      out.push_back(layer->weight);
      out.push_back(layer->bias);
    }
    return out;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    for (const auto* layer : layers()) {
      out.push_back(layer->name + ".weight");
      out.push_back(layer->name + ".bias");
    }
    return out;
  }

 private:
  std::vector<const ConvLayer*> layers() const {
    std::vector<const ConvLayer*> out;
    for (const auto& l : encoders_) out.push_back(&l);
    for (const auto& l : decoders_) out.push_back(&l);
    out.push_back(&head_);
    return out;
  }

  std::pair<Tensor, Tensor> apply(const ConvLayer& layer, const Tensor& x, const Tensor& m) const {
    if (config_.partial) {
      auto r = partial_conv2d(x, m, layer.weight, layer.bias, layer.stride, layer.padding);
      return {leaky_relu(r.output, config_.leaky_slope), r.updated_mask};
    }
    Tensor y = conv2d(x, layer.weight, layer.bias, layer.stride, layer.padding);
    // the plain twin still tracks mask geometry so decoders line up
    const std::size_t h = y.dim(2), w = y.dim(3);
    return {leaky_relu(y, config_.leaky_slope), Tensor::full({x.dim(0), 1, h, w}, 1.0)};
  }

  UNetConfig config_;
  std::vector<ConvLayer> encoders_;
  std::vector<ConvLayer> decoders_;
  ConvLayer head_;
};

/// I = C*cc_left + (1 - C)*output. C and S are [N,1,H,W] and must not overlap.
inline Tensor composite(const Tensor& output, const Tensor& cc_left, const Tensor& context, const Tensor& synthesis) {
  require(output.shape() == cc_left.shape(), "composite: output and cc_left shapes differ");
  require(context.shape() == synthesis.shape() && context.rank() == 4 && context.dim(1) == 1 &&
              context.dim(0) == output.dim(0) && context.dim(2) == output.dim(2) && context.dim(3) == output.dim(3),
          "composite: masks must be [N,1,H,W] matching the output");
  for (std::size_t i = 0; i < context.numel(); ++i)
    require(!(context[i] != 0.0 && synthesis[i] != 0.0), "composite: context and synthesis masks overlap");
  return add(mul(context, cc_left), mul(one_minus(context), output));
}

struct FeatureExtractorConfig {
  std::vector<int> channels{16, 32, 64, 64};
  int input_channels = 3;
  std::uint64_t seed = 7;
};

/// Fixed conv+ReLU stack; stage 0 keeps resolution, every later stage halves it.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureExtractorConfig config = {}) : config_(std::move(config)) {
    require(config_.channels.size() >= 2, "feature extractor needs at least two stages");
    Rng rng(config_.seed);
    int cin = config_.input_channels;
    for (std::size_t p = 0; p < config_.channels.size(); ++p) {
      // relu gain
      stages_.push_back(detail::make_conv_layer("fe" + std::to_string(p), cin, config_.channels[p], 3,
                                                p == 0 ? 1 : 2, 1, 0.0, rng, false));
      cin = config_.channels[p];
    }
  }

  /// Single stage returning the image itself (used to pin the loss formulas).
  static FeatureExtractor identity() {
    FeatureExtractor fe(FeatureExtractorConfig{{1, 1}, 3, 0});
    fe.stages_.clear();
    fe.identity_ = true;
    return fe;
  }

  std::size_t stage_count() const { return identity_ ? 1 : stages_.size(); }

  std::vector<Tensor> extract(const Tensor& image) const {
    require(image.rank() == 4, "extract_features expects [N,C,H,W], got " + shape_str(image.shape()));
    if (identity_) return {image};
    require(image.dim(1) == static_cast<std::size_t>(config_.input_channels),
            "extract_features expects " + std::to_string(config_.input_channels) + " channels");
    const std::size_t factor = std::size_t{1} << (stages_.size() - 1);
    require(image.dim(2) >= factor && image.dim(3) >= factor && image.dim(2) % factor == 0 &&
                image.dim(3) % factor == 0,
            "image " + std::to_string(image.dim(2)) + "x" + std::to_string(image.dim(3)) + " too small for " +
                std::to_string(stages_.size()) + " feature stages");
    std::vector<Tensor> out;
    Tensor x = image;
    for (const auto& s : stages_) {
      x = relu(conv2d(x, s.weight, s.bias, s.stride, s.padding));
      out.push_back(x);
    }
    return out;
  }

 private:
  FeatureExtractorConfig config_;
  std::vector<ConvLayer> stages_;
  bool identity_ = false;
};

inline std::vector<Tensor> extract_features(const FeatureExtractor& fe, const Tensor& image) {
  return fe.extract(image);
}

}  // namespace sainet
