#pragma once

// Classical image operations: Canny edges, disparity warping, patch
// extraction and the PSNR / SSIM reference metrics.

#include <deque>
#include <limits>

#include "sainet/image.hpp"

namespace sainet {

// ---------------------------------------------------------------------------
// Canny
// ---------------------------------------------------------------------------

struct CannyParams {
  double low_threshold = 0.1;
  double high_threshold = 0.2;
  double sigma = 1.0;
  bool operator==(const CannyParams&) const = default;
};

namespace detail {

inline std::vector<double> gaussian_kernel_1d(double sigma, int radius) {
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  return k;
}

/// Separable Gaussian blur of a single-channel image, replicated borders.
inline ImageBuffer gaussian_blur(const ImageBuffer& gray, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const auto k = gaussian_kernel_1d(sigma, radius);
  const int h = gray.height, w = gray.width;
  ImageBuffer tmp(h, w, 1), out(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * gray.at(y, std::clamp(x + i, 0, w - 1));
      tmp.at(y, x) = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(std::clamp(y + i, 0, h - 1), x);
      out.at(y, x) = acc;
    }
  return out;
}

}  // namespace detail

/// Binary single-channel edge map (0/1): blur, Sobel, non-maximum
/// suppression, hysteresis. Gradient magnitudes are Sobel responses divided
/// by 4, so a unit step on [0,1] data has magnitude about 1 before blurring.
inline ImageBuffer canny(const ImageBuffer& image, const CannyParams& params = {}) {
  require(params.low_threshold > 0.0 && params.low_threshold < params.high_threshold,
          "canny thresholds must satisfy 0 < low < high");
  require(params.sigma > 0.0, "canny sigma must be positive");
  const ImageBuffer blurred = detail::gaussian_blur(image.to_gray(), params.sigma);
  const int h = blurred.height, w = blurred.width;
  auto px = [&](int y, int x) { return blurred.at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); };

  std::vector<double> mag(static_cast<std::size_t>(h) * w), gxs(mag.size()), gys(mag.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = (px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y, x - 1) + px(y + 1, x - 1));
      const double gy = (px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y - 1, x) + px(y - 1, x + 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gxs[i] = gx / 4.0;
      gys[i] = gy / 4.0;
      mag[i] = std::hypot(gxs[i], gys[i]);
    }

  auto mag_at = [&](int y, int x) {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
    return mag[static_cast<std::size_t>(y) * w + x];
  };

  // Ties along the gradient direction resolve to the earlier pixel; the
  // tolerance absorbs rounding differences between mirror-symmetric inputs.
  constexpr double kTieTolerance = 1e-9;
  const double tan22 = 0.41421356237309503;
  std::vector<unsigned char> state(mag.size(), 0);  // 0 none, 1 weak, 2 strong
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double m = mag[i];
      if (m < params.low_threshold) continue;
      const double ax = std::abs(gxs[i]), ay = std::abs(gys[i]);
      int dy = 0, dx = 0;
      if (ay <= tan22 * ax) {
        dx = 1;
      } else if (ax <= tan22 * ay) {
        dy = 1;
      } else {
        dy = 1;
        dx = (gxs[i] * gys[i] > 0.0) ? 1 : -1;
      }
      const double before = mag_at(y - dy, x - dx);
      const double after = mag_at(y + dy, x + dx);
      if (m > before + kTieTolerance && m >= after - kTieTolerance)
        state[i] = m >= params.high_threshold ? 2 : 1;
    }

  ImageBuffer edges(h, w, 1, 0.0);
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (state[static_cast<std::size_t>(y) * w + x] == 2) {
        edges.at(y, x) = 1.0;
        queue.emplace_back(y, x);
      }
  while (!queue.empty()) {
    const auto [y, x] = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (state[j] == 1 && edges.at(ny, nx) == 0.0) {
          edges.at(ny, nx) = 1.0;
          queue.emplace_back(ny, nx);
        }
      }
  }
  return edges;
}

// ---------------------------------------------------------------------------
// Disparity warping
// ---------------------------------------------------------------------------

enum class WarpDirection { left_to_right, right_to_left };

struct WarpResult {
  ImageBuffer image;
  Mask valid;
};

namespace detail {

/// Horizontal bilinear sample; integer positions are returned exactly.
inline bool sample_row(const ImageBuffer& src, int y, double xs, int c, double& value) {
  if (!(xs >= 0.0) || xs > static_cast<double>(src.width - 1)) return false;
  const double x0f = std::floor(xs);
  const int x0 = static_cast<int>(x0f);
  const double f = xs - x0f;
  if (f == 0.0) {
    value = src.at(y, x0, c);
  } else {
    value = (1.0 - f) * src.at(y, x0, c) + f * src.at(y, x0 + 1, c);
  }
  return true;
}

inline double warp_offset(WarpDirection direction, double d) {
  return direction == WarpDirection::right_to_left ? -d : d;
}

}  // namespace detail

/// Resamples `image` into the other view of a rectified pair. Left pixel x
/// corresponds to right pixel x - d. right_to_left: out(x) = src(x - d(x));
/// left_to_right: out(x) = src(x + d(x)), reading d at the output pixel
/// (exact for fronto-parallel layers). Samples falling outside the frame or
/// on invalid disparity are zero and marked invalid.
inline WarpResult warp_by_disparity(const ImageBuffer& image, const DisparityMap& disparity,
                                    WarpDirection direction) {
  require(image.height == disparity.height && image.width == disparity.width,
          "warp_by_disparity: image and disparity sizes differ");
  WarpResult result{ImageBuffer(image.height, image.width, image.channels, 0.0),
                    Mask(image.height, image.width, 0)};
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      if (!disparity.is_valid(y, x)) continue;
      const double xs = x + detail::warp_offset(direction, disparity.at(y, x));
      double v = 0.0;
      bool ok = true;
      for (int c = 0; c < image.channels && ok; ++c) {
        ok = detail::sample_row(image, y, xs, c, v);
        if (ok) result.image.at(y, x, c) = v;
      }
      if (ok) result.valid.at(y, x) = 1;
    }
  return result;
}

/// Nearest-neighbour version for binary masks.
inline WarpResult warp_mask(const Mask& mask, const DisparityMap& disparity, WarpDirection direction) {
  require(mask.height == disparity.height && mask.width == disparity.width,
          "warp_mask: mask and disparity sizes differ");
  WarpResult result{ImageBuffer(mask.height, mask.width, 1, 0.0), Mask(mask.height, mask.width, 0)};
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (!disparity.is_valid(y, x)) continue;
      const double xs = x + detail::warp_offset(direction, disparity.at(y, x));
      const long xi = std::lround(xs);
      if (xi < 0 || xi >= mask.width) continue;
      result.valid.at(y, x) = 1;
      result.image.at(y, x) = mask.at(y, static_cast<int>(xi)) ? 1.0 : 0.0;
    }
  return result;
}

// ---------------------------------------------------------------------------
// Patches
// ---------------------------------------------------------------------------

struct Patch {
  Tensor values;                        // [size, size, channels]
  std::vector<unsigned char> in_frame;  // size*size flags, 0 where zero-filled
};

inline Patch extract_patch(const ImageBuffer& image, int cx, int cy, int size) {
  require(size >= 1 && size % 2 == 1, "patch size must be odd and >= 1");
  const int r = size / 2, c = image.channels;
  std::vector<double> values(static_cast<std::size_t>(size) * size * c, 0.0);
  std::vector<unsigned char> flags(static_cast<std::size_t>(size) * size, 0);
  for (int v = 0; v < size; ++v)
    for (int u = 0; u < size; ++u) {
      const int y = cy - r + v, x = cx - r + u;
      if (!image.contains(y, x)) continue;
      flags[static_cast<std::size_t>(v) * size + u] = 1;
      for (int ch = 0; ch < c; ++ch)
        values[(static_cast<std::size_t>(v) * size + u) * c + ch] = image.at(y, x, ch);
    }
  return {Tensor::from_data({static_cast<std::size_t>(size), static_cast<std::size_t>(size),
                             static_cast<std::size_t>(c)},
                            std::move(values)),
          std::move(flags)};
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

inline double psnr_from_mse(double mse) {
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / mse);
}

/// PSNR in dB with peak 1.0; identical inputs give +infinity.
inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  require(a.same_shape(b), "psnr: image shapes differ");
  require(!a.empty(), "psnr of empty image");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    se += d * d;
  }
  return psnr_from_mse(se / static_cast<double>(a.data.size()));
}

/// PSNR restricted to pixels where `region` is set (all channels).
inline double psnr_masked(const ImageBuffer& a, const ImageBuffer& b, const Mask& region) {
  require(a.same_shape(b), "psnr: image shapes differ");
  require(region.height == a.height && region.width == a.width, "psnr: region size mismatch");
  double se = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (!region.at(y, x)) continue;
      for (int c = 0; c < a.channels; ++c) {
        const double d = a.at(y, x, c) - b.at(y, x, c);
        se += d * d;
        ++n;
      }
    }
  require(n > 0, "psnr: empty region");
  return psnr_from_mse(se / static_cast<double>(n));
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over all fully-inside windows, averaged over channels.
inline double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params = {}) {
  require(a.same_shape(b), "ssim: image shapes differ");
  require(params.window % 2 == 1, "ssim window must be odd");
  require(a.height >= params.window && a.width >= params.window,
          "ssim: image smaller than the " + std::to_string(params.window) + "px window");
  const int r = params.window / 2;
  const auto g1 = detail::gaussian_kernel_1d(params.sigma, r);
  const double c1 = params.k1 * params.k1, c2 = params.k2 * params.k2;
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int y = r; y < a.height - r; ++y)
      for (int x = r; x < a.width - r; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int v = -r; v <= r; ++v)
          for (int u = -r; u <= r; ++u) {
            const double wgt = g1[v + r] * g1[u + r];
            const double pa = a.at(y + v, x + u, c), pb = b.at(y + v, x + u, c);
            ma += wgt * pa;
            mb += wgt * pb;
            saa += wgt * pa * pa;
            sbb += wgt * pb * pb;
            sab += wgt * pa * pb;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return total / static_cast<double>(count);
}

}  // namespace sainet
