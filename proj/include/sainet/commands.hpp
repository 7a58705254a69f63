#pragma once

// The five batch commands behind the command-line tool. Each takes a run
// config and reports progress through a message sink.

#include <iostream>

#include "sainet/pipeline.hpp"

namespace sainet {

using MessageSink = std::function<void(const std::string&)>;

inline MessageSink stderr_sink() {
  return [](const std::string& m) { std::cerr << m << '\n'; };
}

/// Applies thread settings from the config (deterministic mode pins one thread).
inline void apply_runtime(const RunConfig& cfg) {
  if (cfg.deterministic)
    set_thread_count(1);
  else
    set_thread_count(cfg.threads > 0 ? cfg.threads : 0);
}

inline BankBuildReport cmd_maskbank(const RunConfig& cfg, const MessageSink& say = stderr_sink()) {
  apply_runtime(cfg);
  const auto data = load_all(cfg.dataset());
  for (const auto& e : data.errors) say("warning: " + e);
  if (data.samples.empty()) throw DataError("no input images under '" + cfg.dataset_root + "'");
  std::vector<BankSource> sources(data.samples.size());
  parallel_for(data.samples.size(), [&](std::size_t i) {
    const auto& s = data.samples[i];
    sources[i].id = s.id;
    if (data.labels[i]) {
      sources[i].labels = data.labels[i];
    } else if (s.gt_disparity) {
      sources[i].depth = s.gt_disparity;
    } else {
      sources[i].depth = estimate_disparity_blockmatch(s, cfg.blockmatch).map;
    }
  });
  auto report = build_bank(std::move(sources), cfg.mask);
  for (const auto& w : report.warnings) say("warning: " + w);
  save_bank(report.bank, cfg.bank_dir);
  say("mask bank: " + std::to_string(report.bank.size()) + " entries -> " + cfg.bank_dir);
  return report;
}

inline GeneratedDataset cmd_datagen(const RunConfig& cfg, const MessageSink& say = stderr_sink()) {
  apply_runtime(cfg);
  const auto data = load_all(cfg.dataset());
  for (const auto& e : data.errors) say("warning: " + e);
  if (data.samples.empty()) throw DataError("no input images under '" + cfg.dataset_root + "'");
  const MaskBank bank = cfg.square_masks ? MaskBank{} : load_bank(cfg.bank_dir);
  auto generated = generate_dataset(data.samples, bank, cfg.sample_count, cfg.seed, cfg.datagen_params());
  for (const auto& w : generated.warnings) say("warning: " + w);
  save_training_set(generated.samples, cfg.train_dir);
  say("training set: " + std::to_string(generated.samples.size()) + " samples -> " + cfg.train_dir);
  return generated;
}

inline std::filesystem::path last_checkpoint_path(const RunConfig& cfg) {
  return std::filesystem::path(cfg.run_dir) / "last.ckpt";
}

inline std::filesystem::path epoch_checkpoint_path(const RunConfig& cfg, std::uint64_t epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%04llu.ckpt", static_cast<unsigned long long>(epoch));
  return std::filesystem::path(cfg.run_dir) / name;
}

/// Trains until cfg.epochs. With `resume`, continues from cfg.checkpoint (or
/// run_dir/last.ckpt when that is empty). A non-finite loss aborts with
/// NumericError; the last completed epoch's checkpoint stays on disk.
inline std::vector<StepLog> cmd_train(const RunConfig& cfg, bool resume, const MessageSink& say = stderr_sink()) {
  apply_runtime(cfg);
  cfg.validate();
  const auto set = load_training_set(cfg.train_dir, cfg.canny);
  for (const auto& n : set.notices) say("notice: " + n);
  std::filesystem::create_directories(cfg.run_dir);

  std::optional<Trainer> trainer;
  if (resume) {
    const std::filesystem::path from = cfg.checkpoint.empty() ? last_checkpoint_path(cfg) : std::filesystem::path(cfg.checkpoint);
    trainer.emplace(Trainer::from_checkpoint(read_checkpoint(from)));
    say("resuming from " + from.string() + " at epoch " + std::to_string(trainer->epoch()));
  } else {
    trainer.emplace(cfg);
    write_checkpoint(trainer->checkpoint(), epoch_checkpoint_path(cfg, 0));
  }

  const auto log_path = std::filesystem::path(cfg.run_dir) / "train_log.tsv";
  const bool fresh_log = !resume || !std::filesystem::exists(log_path);
  std::ofstream log(log_path, fresh_log ? std::ios::trunc : std::ios::app);
  if (!log) throw DataError("cannot write " + log_path.string());
  if (fresh_log) log << train_log_header() << '\n';

  std::vector<StepLog> steps;
  while (trainer->epoch() < static_cast<std::uint64_t>(cfg.epochs)) {
    auto epoch_steps = trainer->train_epoch(set.samples, &log);
    double mean = 0.0;
    for (const auto& s : epoch_steps) mean += s.total;
    mean /= static_cast<double>(epoch_steps.size());
    steps.insert(steps.end(), epoch_steps.begin(), epoch_steps.end());
    const auto ck = trainer->checkpoint();
    write_checkpoint(ck, epoch_checkpoint_path(cfg, trainer->epoch()));
    write_checkpoint(ck, last_checkpoint_path(cfg));
    say("epoch " + std::to_string(trainer->epoch()) + " mean total loss " + format_double(mean));
  }
  return steps;
}

namespace detail {

inline Trainer trainer_for_inference(const RunConfig& cfg) {
  const std::filesystem::path ck = cfg.checkpoint.empty() ? last_checkpoint_path(cfg) : std::filesystem::path(cfg.checkpoint);
  return Trainer::from_checkpoint(read_checkpoint(ck));
}

inline void check_sample_size(const Trainer& t, const TrainingSample& s) {
  const int f = 1 << t.model().config().depth;
  if (s.cc_left.height % f != 0 || s.cc_left.width % f != 0)
    throw DataError(s.id + ": sample size " + std::to_string(s.cc_left.height) + "x" +
                    std::to_string(s.cc_left.width) + " is not divisible by 2^depth = " + std::to_string(f) +
                    " of the checkpoint model");
}

/// input | output | ground truth | |diff| side by side.
inline ImageBuffer side_by_side(const TrainingSample& s, const ImageBuffer& out) {
  const int h = out.height, w = out.width;
  ImageBuffer strip(h, 4 * w, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        strip.at(y, x, c) = s.cc_left.at(y, x, c);
        strip.at(y, w + x, c) = out.at(y, x, c);
        strip.at(y, 2 * w + x, c) = s.left_gt.at(y, x, c);
        strip.at(y, 3 * w + x, c) = std::abs(out.at(y, x, c) - s.left_gt.at(y, x, c));
      }
  return strip;
}

}  // namespace detail

/// Writes output_dir/<id>.png (composited, 8-bit) for every sample in test_dir.
inline std::vector<std::filesystem::path> cmd_infer(const RunConfig& cfg, const MessageSink& say = stderr_sink()) {
  apply_runtime(cfg);
  const Trainer trainer = detail::trainer_for_inference(cfg);
  const auto set = load_training_set(cfg.test_dir, trainer.config().canny);
  for (const auto& n : set.notices) say("notice: " + n);
  std::filesystem::create_directories(cfg.output_dir);
  std::vector<std::filesystem::path> written(set.samples.size());
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const auto& s = set.samples[i];
    detail::check_sample_size(trainer, s);
    const ImageBuffer out = inpaint(trainer.model(), s, trainer.config().stereo_inputs);
    written[i] = std::filesystem::path(cfg.output_dir) / (s.id + ".png");
    write_png(out, written[i]);
  }
  say("inference: " + std::to_string(written.size()) + " images -> " + cfg.output_dir);
  return written;
}

/// Writes report.txt, summary.json and per-sample side-by-side images to output_dir.
inline EvalReport cmd_eval(const RunConfig& cfg, const MessageSink& say = stderr_sink()) {
  apply_runtime(cfg);
  const Trainer trainer = detail::trainer_for_inference(cfg);
  const auto set = load_training_set(cfg.test_dir, trainer.config().canny);
  for (const auto& n : set.notices) say("notice: " + n);
  for (const auto& s : set.samples) detail::check_sample_size(trainer, s);
  EvalOptions opt;
  opt.scope = parse_scope(cfg.scope);
  opt.blockmatch = cfg.blockmatch;
  opt.dispe = cfg.dispe;
  const EvalReport report = evaluate_inpainting(trainer, set.samples, opt);
  const std::filesystem::path dir(cfg.output_dir);
  write_report(report, dir);
  std::filesystem::create_directories(dir / "images");
  for (const auto& s : set.samples)
    write_png(detail::side_by_side(s, inpaint(trainer.model(), s, trainer.config().stereo_inputs)),
              dir / "images" / (s.id + ".png"));
  say("evaluation (" + to_string(report.scope) + "): mean PSNR " + format_double(report.mean_psnr) + ", mean SSIM " +
      format_double(report.mean_ssim));
  return report;
}

}  // namespace sainet
