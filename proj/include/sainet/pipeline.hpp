#pragma once

// Batching, training loop with checkpoints, inference and evaluation.

#include <ostream>

#include "sainet/checkpoint.hpp"

namespace sainet {

inline constexpr int kNetworkInputChannels = 8;

struct Batch {
  Tensor inputs;     // [N,8,H,W]: cc_left, edges, cc_right_warped, stereo support
  Tensor validity;   // [N,1,H,W]: C | support (C only without stereo inputs)
  Tensor cc_left;    // [N,3,H,W]
  Tensor context;    // [N,1,H,W]
  Tensor synthesis;  // [N,1,H,W]
  Tensor region;     // C | S
  Tensor left_gt;    // [N,3,H,W]
  Tensor right_gt;   // [N,3,H,W], undefined when a sample lacks it
  std::vector<DisparityMap> disparity;
};

inline Batch make_batch(const std::vector<const TrainingSample*>& samples, bool stereo_inputs) {
  require(!samples.empty(), "empty batch");
  std::vector<ImageBuffer> cc, edges, right, lgt, rgt;
  std::vector<Mask> support, ctx, syn, valid, region;
  bool have_right = true;
  for (const auto* s : samples) {
    require(s->cc_left.channels == 3, "training samples must be RGB");
    cc.push_back(s->cc_left);
    edges.push_back(s->edges);
    const Mask sup = stereo_inputs ? s->stereo_support : Mask(s->cc_left.height, s->cc_left.width, 0);
    right.push_back(stereo_inputs ? s->cc_right_warped : ImageBuffer(s->cc_left.height, s->cc_left.width, 3, 0.0));
    support.push_back(sup);
    ctx.push_back(s->context_mask);
    syn.push_back(s->synthesis_mask);
    valid.push_back(mask_union(s->context_mask, sup));
    region.push_back(mask_union(s->context_mask, s->synthesis_mask));
    lgt.push_back(s->left_gt);
    have_right = have_right && !s->right_gt.empty();
    if (have_right) rgt.push_back(s->right_gt);
  }
  Batch b;
  b.cc_left = images_to_tensor(cc);
  const Tensor sup_t = masks_to_tensor(support);
  b.inputs = concat_channels({b.cc_left, images_to_tensor(edges), images_to_tensor(right), sup_t});
  b.validity = masks_to_tensor(valid);
  b.context = masks_to_tensor(ctx);
  b.synthesis = masks_to_tensor(syn);
  b.region = masks_to_tensor(region);
  b.left_gt = images_to_tensor(lgt);
  if (have_right) b.right_gt = images_to_tensor(rgt);
  for (const auto* s : samples) b.disparity.push_back(s->scene_disparity);
  return b;
}

struct ForwardPass {
  Tensor output;
  Tensor inpainted;
  LossComponents parts;
  Tensor total;
};

inline UNetConfig network_config(const RunConfig& cfg) {
  UNetConfig u = cfg.unet;
  u.input_channels = kNetworkInputChannels;
  u.output_channels = 3;
  u.seed = derive_seed(cfg.seed, cfg.unet.seed);
  return u;
}

inline FeatureExtractor make_feature_extractor(const RunConfig& cfg) {
  FeatureExtractorConfig f;
  f.seed = cfg.feature_seed;
  return FeatureExtractor(f);
}

/// Forward pass plus all six loss terms. Reconstruction terms see the raw
/// output; perceptual and style see both images restricted to C | S; TV and
/// the stereo term see the composite.
inline ForwardPass forward_losses(const UNet& model, const FeatureExtractor& fe, const Batch& b,
                                  const RunConfig& cfg) {
  ForwardPass f;
  f.output = model.forward(b.inputs, b.validity);
  f.inpainted = composite(f.output, b.cc_left, b.context, b.synthesis);
  const auto rec = reconstruction_losses(f.output, b.left_gt, b.synthesis, b.context);
  f.parts.synthesis = rec.synthesis;
  f.parts.context = rec.context;
  const Tensor masked_i = mul(f.inpainted, b.region);
  const Tensor masked_gt = mul(b.left_gt, b.region);
  f.parts.perceptual = perceptual_loss(fe, masked_i, masked_gt);
  f.parts.style = style_loss(fe, masked_i, masked_gt);
  f.parts.tv = tv_loss(f.inpainted, b.synthesis);
  if (cfg.weights.disparity > 0.0 && b.right_gt.defined())
    f.parts.disparity = disparity_loss(f.inpainted, b.right_gt, b.synthesis, b.disparity, cfg.disparity_loss);
  else
    f.parts.disparity = Tensor::scalar(0.0);
  f.total = total_loss(f.parts, cfg.weights);
  return f;
}

struct StepLog {
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  std::array<double, 6> components{};
  double total = 0.0;
};

inline std::string train_log_header() {
  std::string h = "epoch\tstep";
  for (const auto& n : loss_component_names()) h += "\t" + n;
  return h + "\ttotal";
}

inline std::string format_step(const StepLog& s) {
  std::string line = std::to_string(s.epoch) + "\t" + std::to_string(s.step);
  for (double c : s.components) line += "\t" + format_double(c);
  return line + "\t" + format_double(s.total);
}

namespace detail {
inline void round_to_f32(std::span<double> v) {
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}
inline void round_to_f32(std::vector<double>& v) { round_to_f32(std::span<double>(v)); }
}  // namespace detail

/// Owns the model, the fixed feature extractor and the optimizer state.
/// Parameters and Adam moments are kept at f32 precision after every step,
/// which is also what the checkpoint stores, so resuming is exact.
class Trainer {
 public:
  explicit Trainer(RunConfig cfg)
      : cfg_(std::move(cfg)), model_(network_config(cfg_)), fe_(make_feature_extractor(cfg_)) {
    cfg_.validate();
    params_ = model_.parameters();
    for (auto& p : params_) detail::round_to_f32(p.mutable_data());
    adam_.lr = cfg_.learning_rate;
    adam_.beta1 = cfg_.adam_beta1;
    adam_.beta2 = cfg_.adam_beta2;
    adam_.epsilon = cfg_.adam_epsilon;
  }

  static Trainer from_checkpoint(const Checkpoint& ck) {
    Trainer t(parse_config(ck.config_text, "checkpoint config"));
    t.restore(ck);
    return t;
  }

  const RunConfig& config() const { return cfg_; }
  const UNet& model() const { return model_; }
  const FeatureExtractor& features() const { return fe_; }
  std::uint64_t epoch() const { return epoch_; }
  std::uint64_t step() const { return step_; }
  const AdamState& adam() const { return adam_; }

  /// Per-epoch shuffle from (seed, epoch); batches are consecutive slices.
  std::vector<std::size_t> epoch_order(std::size_t n) const {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg_.seed ^ 0x5348554646ull, epoch_));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(i) - 1))]);
    return order;
  }

  StepLog train_step(const std::vector<const TrainingSample*>& batch) {
    const Batch b = make_batch(batch, cfg_.stereo_inputs);
    zero_grads(params_);
    ForwardPass f = forward_losses(model_, fe_, b, cfg_);
    StepLog log;
    log.epoch = epoch_;
    log.step = step_;
    const auto parts = f.parts.as_vector();
    for (std::size_t i = 0; i < 6; ++i) log.components[i] = parts[i].item();
    log.total = f.total.item();
    if (!std::isfinite(log.total))
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch_) + " step " +
                         std::to_string(step_));
    backward(f.total);
    adam_step(params_, adam_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      detail::round_to_f32(params_[i].mutable_data());
      detail::round_to_f32(adam_.first_moment[i]);
      detail::round_to_f32(adam_.second_moment[i]);
    }
    zero_grads(params_);
    ++step_;
    return log;
  }

  std::vector<StepLog> train_epoch(const std::vector<TrainingSample>& set, std::ostream* log = nullptr) {
    require(!set.empty(), "training set is empty");
    const auto order = epoch_order(set.size());
    std::vector<StepLog> out;
    const auto bs = static_cast<std::size_t>(cfg_.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<const TrainingSample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) batch.push_back(&set[order[i]]);
      out.push_back(train_step(batch));
      if (log) *log << format_step(out.back()) << '\n' << std::flush;
    }
    ++epoch_;
    return out;
  }

  Checkpoint checkpoint() const {
    Checkpoint ck;
    ck.config_text = serialize_config(cfg_);
    ck.epoch = epoch_;
    ck.global_step = step_;
    ck.names = model_.parameter_names();
    for (const auto& p : params_) {
      ck.shapes.push_back(p.shape());
      ck.blobs.emplace_back(p.data().begin(), p.data().end());
    }
    ck.adam = adam_;
    return ck;
  }

 private:
  void restore(const Checkpoint& ck) {
    const auto names = model_.parameter_names();
    if (ck.names.size() != names.size())
      throw DataError("checkpoint has " + std::to_string(ck.names.size()) + " parameter blobs, model expects " +
                      std::to_string(names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (ck.names[i] != names[i])
        throw DataError("checkpoint blob " + std::to_string(i) + " is '" + ck.names[i] + "', expected '" + names[i] +
                        "'");
      if (ck.shapes[i] != params_[i].shape())
        throw DataError("checkpoint blob '" + names[i] + "' has shape " + shape_str(ck.shapes[i]) +
                        ", model expects " + shape_str(params_[i].shape()));
      auto dst = params_[i].mutable_data();
      std::copy(ck.blobs[i].begin(), ck.blobs[i].end(), dst.begin());
    }
    if (!ck.adam.first_moment.empty() && ck.adam.first_moment.size() != params_.size())
      throw DataError("checkpoint optimizer state does not match the parameter list");
    adam_ = ck.adam;
    epoch_ = ck.epoch;
    step_ = ck.global_step;
  }

  RunConfig cfg_;
  UNet model_;
  FeatureExtractor fe_;
  std::vector<Tensor> params_;
  AdamState adam_;
  std::uint64_t epoch_ = 0;
  std::uint64_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Inference and evaluation
// ---------------------------------------------------------------------------

/// Composited result for one sample: context copied, everything else predicted.
inline ImageBuffer inpaint(const UNet& model, const TrainingSample& sample, bool stereo_inputs) {
  NoGradGuard guard;
  const Batch b = make_batch({&sample}, stereo_inputs);
  const Tensor out = model.forward(b.inputs, b.validity);
  return tensor_to_image(composite(out, b.cc_left, b.context, b.synthesis));
}

using Predictor = std::function<ImageBuffer(const TrainingSample&)>;

struct EvalOptions {
  EvalScope scope = EvalScope::full;
  BlockMatchParams blockmatch;
  DispEConfig dispe;
  SsimParams ssim;
};

inline SampleMetrics evaluate_sample(const TrainingSample& s, const ImageBuffer& result, const FeatureExtractor& fe,
                                     const EvalOptions& opt) {
  if (s.left_gt.empty()) throw DataError(s.id + ": sample has no ground truth");
  require(result.same_shape(s.left_gt), s.id + ": result and ground truth shapes differ");
  SampleMetrics m;
  m.id = s.id;
  ImageBuffer scoped = result;  // result with non-scope pixels replaced by ground truth
  if (opt.scope == EvalScope::full) {
    m.psnr = psnr(result, s.left_gt);
    m.ssim = ssim(result, s.left_gt, opt.ssim);
    m.l1 = l1_region(result, s.left_gt, Mask(result.height, result.width, 1));
  } else {
    m.psnr = psnr_masked(result, s.left_gt, s.synthesis_mask);
    m.ssim = ssim_region(result, s.left_gt, s.synthesis_mask, opt.ssim);
    m.l1 = l1_region(result, s.left_gt, s.synthesis_mask);
    for (int y = 0; y < result.height; ++y)
      for (int x = 0; x < result.width; ++x)
        if (!s.synthesis_mask.at(y, x))
          for (int c = 0; c < result.channels; ++c) scoped.at(y, x, c) = s.left_gt.at(y, x, c);
  }
  {
    NoGradGuard guard;
    m.feature_distance = perceptual_loss(fe, image_to_tensor(scoped), image_to_tensor(s.left_gt)).item();
  }
  if (s.gt_disparity && !s.right_gt.empty()) {
    StereoSample pair{result, s.right_gt, std::nullopt, s.id};
    const auto est = estimate_disparity_blockmatch(pair, opt.blockmatch);
    DisparityMap gt = *s.gt_disparity;
    if (opt.scope == EvalScope::synthesis)
      for (std::size_t i = 0; i < gt.valid.size(); ++i) gt.valid[i] = gt.valid[i] && s.synthesis_mask.data[i];
    const auto r = disp_e_detailed(est.map, gt, opt.dispe);
    if (r.evaluated > 0) {
      m.disp_e = r.percent;
      m.has_disp_e = true;
    }
  }
  return m;
}

inline EvalReport evaluate_inpainting(const Predictor& predict, const std::vector<TrainingSample>& samples,
                                      const FeatureExtractor& fe, const EvalOptions& opt) {
  EvalReport report;
  report.scope = opt.scope;
  report.samples.resize(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    report.samples[i] = evaluate_sample(samples[i], predict(samples[i]), fe, opt);
  });
  report.finalize();
  return report;
}

inline EvalReport evaluate_inpainting(const Trainer& trainer, const std::vector<TrainingSample>& samples,
                                      const EvalOptions& opt) {
  const bool stereo = trainer.config().stereo_inputs;
  return evaluate_inpainting([&](const TrainingSample& s) { return inpaint(trainer.model(), s, stereo); }, samples,
                             trainer.features(), opt);
}

}  // namespace sainet
