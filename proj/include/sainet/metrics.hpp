#pragma once

// Disparity error rate, region-restricted PSNR/SSIM and the evaluation report.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "sainet/imageproc.hpp"

namespace sainet {

struct DispEConfig {
  double p1 = 3.0;   // absolute error threshold, px
  double p2 = 0.05;  // relative error threshold
  bool operator==(const DispEConfig&) const = default;
};

struct DispEResult {
  double percent = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;  // invalid or non-positive ground truth
};

/// Percentage of pixels with |est - gt| > p1 AND |est - gt| / gt > p2, over
/// pixels whose ground truth is valid and positive.
inline DispEResult disp_e_detailed(const DisparityMap& est, const DisparityMap& gt, const DispEConfig& cfg = {}) {
  require(est.height == gt.height && est.width == gt.width, "disp_e: map sizes differ");
  require(cfg.p1 > 0.0 && cfg.p2 > 0.0, "disp_e: thresholds must be positive");
  DispEResult r;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    const double g = gt.values[i];
    if (!gt.valid[i] || !(g > 0.0)) {
      ++r.excluded;
      continue;
    }
    ++r.evaluated;
    const double err = std::abs(est.values[i] - g);
    if (err > cfg.p1 && err / g > cfg.p2) ++bad;
  }
  r.percent = r.evaluated ? 100.0 * static_cast<double>(bad) / static_cast<double>(r.evaluated) : 0.0;
  return r;
}

inline double disp_e(const DisparityMap& est, const DisparityMap& gt, const DispEConfig& cfg = {}) {
  return disp_e_detailed(est, gt, cfg).percent;
}

enum class EvalScope { full, synthesis };

inline std::string to_string(EvalScope s) { return s == EvalScope::full ? "full" : "synthesis"; }

inline EvalScope parse_scope(const std::string& s) {
  if (s == "full") return EvalScope::full;
  if (s == "synthesis" || s == "synthesis_only") return EvalScope::synthesis;
  throw ContractViolation("unknown scope '" + s + "' (expected full or synthesis)");
}

struct BoundingBox {
  int y0 = 0, x0 = 0, height = 0, width = 0;
};

/// Bounding box of `region`, grown symmetrically to at least min_size per
/// side and shifted to stay inside the frame.
inline BoundingBox region_box(const Mask& region, int min_size) {
  require(region.any(), "region_box of empty region");
  require(region.height >= min_size && region.width >= min_size, "region_box: image smaller than the window");
  int y0 = region.height, y1 = -1, x0 = region.width, x1 = -1;
  for (int y = 0; y < region.height; ++y)
    for (int x = 0; x < region.width; ++x)
      if (region.at(y, x)) {
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
      }
  auto grow = [min_size](int lo, int hi, int limit) {
    int len = hi - lo + 1;
    if (len < min_size) {
      lo -= (min_size - len) / 2;
      len = min_size;
    }
    lo = std::clamp(lo, 0, limit - len);
    return std::pair{lo, len};
  };
  const auto [by, bh] = grow(y0, y1, region.height);
  const auto [bx, bw] = grow(x0, x1, region.width);
  return {by, bx, bh, bw};
}

/// SSIM over the bounding box of S with every non-S pixel set to ground truth
/// in both images.
inline double ssim_region(const ImageBuffer& result, const ImageBuffer& gt, const Mask& region,
                          const SsimParams& params = {}) {
  require(result.same_shape(gt), "ssim_region: image shapes differ");
  const auto box = region_box(region, params.window);
  ImageBuffer a = gt.crop(box.y0, box.x0, box.height, box.width);
  const ImageBuffer b = a;
  for (int y = 0; y < box.height; ++y)
    for (int x = 0; x < box.width; ++x)
      if (region.at(box.y0 + y, box.x0 + x))
        for (int c = 0; c < a.channels; ++c) a.at(y, x, c) = result.at(box.y0 + y, box.x0 + x, c);
  return ssim(a, b, params);
}

/// Mean absolute error over the pixels of `region` (all channels).
inline double l1_region(const ImageBuffer& a, const ImageBuffer& b, const Mask& region) {
  require(a.same_shape(b), "l1_region: image shapes differ");
  double total = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (!region.at(y, x)) continue;
      for (int c = 0; c < a.channels; ++c, ++n) total += std::abs(a.at(y, x, c) - b.at(y, x, c));
    }
  return n ? total / static_cast<double>(n) : 0.0;
}

struct SampleMetrics {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  double l1 = 0.0;
  double disp_e = 0.0;
  bool has_disp_e = false;
  double feature_distance = 0.0;
};

struct EvalReport {
  EvalScope scope = EvalScope::full;
  std::vector<SampleMetrics> samples;  // ordered by id
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_l1 = 0.0;
  double mean_disp_e = 0.0;
  std::size_t disp_e_count = 0;
  double mean_feature_distance = 0.0;

  void finalize() {
    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    mean_psnr = mean_ssim = mean_l1 = mean_disp_e = mean_feature_distance = 0.0;
    disp_e_count = 0;
    for (const auto& s : samples) {
      mean_psnr += s.psnr;
      mean_ssim += s.ssim;
      mean_l1 += s.l1;
      mean_feature_distance += s.feature_distance;
      if (s.has_disp_e) {
        mean_disp_e += s.disp_e;
        ++disp_e_count;
      }
    }
    if (!samples.empty()) {
      const double n = static_cast<double>(samples.size());
      mean_psnr /= n;
      mean_ssim /= n;
      mean_l1 /= n;
      mean_feature_distance /= n;
    }
    if (disp_e_count) mean_disp_e /= static_cast<double>(disp_e_count);
  }
};

inline constexpr const char* kFeatureDistanceLabel = "feature-dist (random features, not comparable to LPIPS)";

namespace detail {
inline std::string fmt_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline nlohmann::json json_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}
}  // namespace detail

/// report.txt: one record per sample and an aggregate block. summary.json: aggregates.
inline void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream txt(dir / "report.txt");
  if (!txt) throw DataError("cannot write " + (dir / "report.txt").string());
  txt << "# scope\t" << to_string(report.scope) << "\n";
  txt << "id\tpsnr\tssim\tl1\tdisp_e\t" << kFeatureDistanceLabel << "\n";
  for (const auto& s : report.samples)
    txt << s.id << '\t' << detail::fmt_metric(s.psnr) << '\t' << detail::fmt_metric(s.ssim) << '\t'
        << detail::fmt_metric(s.l1) << '\t' << (s.has_disp_e ? detail::fmt_metric(s.disp_e) : "na") << '\t'
        << detail::fmt_metric(s.feature_distance) << "\n";
  txt << "# aggregate\n";
  txt << "samples\t" << report.samples.size() << "\n";
  txt << "mean_psnr\t" << detail::fmt_metric(report.mean_psnr) << "\n";
  txt << "mean_ssim\t" << detail::fmt_metric(report.mean_ssim) << "\n";
  txt << "mean_l1\t" << detail::fmt_metric(report.mean_l1) << "\n";
  txt << "mean_disp_e\t" << (report.disp_e_count ? detail::fmt_metric(report.mean_disp_e) : "na") << "\n";
  txt << "mean_feature_dist\t" << detail::fmt_metric(report.mean_feature_distance) << "\n";

  nlohmann::ordered_json j;
  j["scope"] = to_string(report.scope);
  j["samples"] = report.samples.size();
  j["mean_psnr"] = detail::json_metric(report.mean_psnr);
  j["mean_ssim"] = report.mean_ssim;
  j["mean_l1"] = report.mean_l1;
  j["mean_disp_e"] = report.disp_e_count ? nlohmann::ordered_json(report.mean_disp_e) : nlohmann::ordered_json();
  j["disp_e_samples"] = report.disp_e_count;
  j["mean_feature_dist"] = report.mean_feature_distance;
  j["feature_dist_label"] = kFeatureDistanceLabel;
  std::ofstream js(dir / "summary.json");
  if (!js) throw DataError("cannot write " + (dir / "summary.json").string());
  js << j.dump(2) << "\n";
}

}  // namespace sainet
