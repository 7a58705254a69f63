#pragma once

// Rectified stereo pairs and a winner-take-all SAD block matcher used as the
// disparity estimator for data generation and evaluation.

#include <limits>
#include <optional>
#include <string>

#include "sainet/image.hpp"

namespace sainet {

struct StereoSample {
  ImageBuffer left;
  ImageBuffer right;
  std::optional<DisparityMap> gt_disparity;
  std::string id;
};

struct BlockMatchParams {
  int max_disparity = -1;  // <= 0 means width / 4
  int block = 9;
  int lr_tolerance = 1;
  double min_variance = 1e-5;  // below this the input counts as textureless
  bool operator==(const BlockMatchParams&) const = default;
};

struct BlockMatchResult {
  DisparityMap map;
  bool low_confidence = false;
  double valid_fraction = 0.0;
};

namespace detail {

/// Box sum of `cost` over a (2r+1)^2 window with replicated borders.
inline void box_filter(const std::vector<double>& cost, int h, int w, int r, std::vector<double>& out) {
  std::vector<double> tmp(cost.size());
  for (int y = 0; y < h; ++y) {
    const double* row = cost.data() + static_cast<std::size_t>(y) * w;
    double acc = 0.0;
    for (int i = -r; i <= r; ++i) acc += row[std::clamp(i, 0, w - 1)];
    for (int x = 0; x < w; ++x) {
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
      acc += row[std::clamp(x + r + 1, 0, w - 1)] - row[std::clamp(x - r, 0, w - 1)];
    }
  }
  out.assign(cost.size(), 0.0);
  for (int x = 0; x < w; ++x) {
    double acc = 0.0;
    for (int i = -r; i <= r; ++i) acc += tmp[static_cast<std::size_t>(std::clamp(i, 0, h - 1)) * w + x];
    for (int y = 0; y < h; ++y) {
      out[static_cast<std::size_t>(y) * w + x] = acc;
      acc += tmp[static_cast<std::size_t>(std::clamp(y + r + 1, 0, h - 1)) * w + x] -
             tmp[static_cast<std::size_t>(std::clamp(y - r, 0, h - 1)) * w + x];
    }
  }
}

/// WTA disparity for every pixel of `ref`, matching against `other` at
/// x + sign * d (sign = -1 for left-referenced, +1 for right-referenced).
inline std::vector<int> wta_disparity(const ImageBuffer& ref, const ImageBuffer& other, int max_d, int r,
                                      int sign) {
  const int h = ref.height, w = ref.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<int> arg(n, 0);
  std::vector<double> cost(n), agg;
  for (int d = 0; d <= max_d; ++d) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        cost[static_cast<std::size_t>(y) * w + x] =
            std::abs(ref.at(y, x) - other.at(y, std::clamp(x + sign * d, 0, w - 1)));
    box_filter(cost, h, w, r, agg);
    for (std::size_t i = 0; i < n; ++i) {
      const int x = static_cast<int>(i % static_cast<std::size_t>(w));
      const int xm = x + sign * d;
      if (xm < 0 || xm >= w) continue;  // match would leave the frame
      if (agg[i] < best[i]) {
        best[i] = agg[i];
        arg[i] = d;
      }
    }
  }
  return arg;
}

}  // namespace detail

/// Left-referenced SAD block matching on luma with a left-right
/// consistency check that fills the validity map.
inline BlockMatchResult estimate_disparity_blockmatch(const StereoSample& sample, const BlockMatchParams& params = {}) {
  require(sample.left.height == sample.right.height && sample.left.width == sample.right.width,
          "stereo pair dimensions differ");
  require(params.block >= 1 && params.block % 2 == 1, "block size must be odd");
  const int w = sample.left.width, h = sample.left.height;
  const int max_d = params.max_disparity > 0 ? params.max_disparity : std::max(1, w / 4);
  require(max_d < w, "max_disparity must be smaller than the image width");
  const ImageBuffer left = sample.left.to_gray(), right = sample.right.to_gray();
  const int r = params.block / 2;

  const auto dl = detail::wta_disparity(left, right, max_d, r, -1);
  const auto dr = detail::wta_disparity(right, left, max_d, r, +1);

  BlockMatchResult result;
  result.map = DisparityMap(h, w, 0.0);
  std::size_t valid = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const int d = dl[i];
      result.map.values[i] = d;
      const int xr = x - d;
      const bool ok = xr >= 0 && std::abs(d - dr[static_cast<std::size_t>(y) * w + xr]) <= params.lr_tolerance;
      result.map.valid[i] = ok ? 1 : 0;
      valid += ok;
    }
  result.valid_fraction = static_cast<double>(valid) / static_cast<double>(left.pixels());

  double mean = 0.0, sq = 0.0;
  for (double v : left.data) mean += v;
  mean /= static_cast<double>(left.data.size());
  for (double v : left.data) sq += (v - mean) * (v - mean);
  const double variance = sq / static_cast<double>(left.data.size());
  result.low_confidence = variance < params.min_variance || result.valid_fraction < 0.5;
  return result;
}

}  // namespace sainet
