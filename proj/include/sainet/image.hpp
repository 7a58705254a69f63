#pragma once

#include <string>
#include <vector>

#include "sainet/tensor.hpp"

namespace sainet {

/// Row-major interleaved image with values in [0,1]; 1 or 3 channels.
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  ImageBuffer() = default;
  ImageBuffer(int h, int w, int c, double fill = 0.0) : height(h), width(w), channels(c) {
    require(h > 0 && w > 0, "image dimensions must be positive");
    require(c == 1 || c == 3, "image channels must be 1 or 3");
    data.assign(static_cast<std::size_t>(h) * w * c, fill);
  }

  bool empty() const { return data.empty(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t index(int y, int x, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double at(int y, int x, int c = 0) const { return data[index(y, x, c)]; }
  double& at(int y, int x, int c = 0) { return data[index(y, x, c)]; }
  bool contains(int y, int x) const { return y >= 0 && y < height && x >= 0 && x < width; }
  bool same_shape(const ImageBuffer& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  void clamp() {
    for (double& v : data) v = std::clamp(v, 0.0, 1.0);
  }

  /// Luma for 3-channel images (Rec. 601 weights), copy otherwise.
  ImageBuffer to_gray() const {
    if (channels == 1) return *this;
    ImageBuffer out(height, width, 1);
    for (std::size_t i = 0; i < pixels(); ++i)
      out.data[i] = 0.299 * data[3 * i] + 0.587 * data[3 * i + 1] + 0.114 * data[3 * i + 2];
    return out;
  }

  ImageBuffer crop(int y0, int x0, int h, int w) const {
    require(y0 >= 0 && x0 >= 0 && y0 + h <= height && x0 + w <= width,
            "crop window outside image");
    ImageBuffer out(h, w, channels);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < channels; ++c) out.at(y, x, c) = at(y0 + y, x0 + x, c);
    return out;
  }

  bool operator==(const ImageBuffer&) const = default;
};

/// Binary per-pixel map (values 0/1).
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<unsigned char> data;

  Mask() = default;
  Mask(int h, int w, unsigned char fill = 0) : height(h), width(w) {
    require(h > 0 && w > 0, "mask dimensions must be positive");
    data.assign(static_cast<std::size_t>(h) * w, fill);
  }

  std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * width + x; }
  unsigned char at(int y, int x) const { return data[index(y, x)]; }
  unsigned char& at(int y, int x) { return data[index(y, x)]; }
  bool get(int y, int x) const {
    return y >= 0 && y < height && x >= 0 && x < width && data[index(y, x)] != 0;
  }
  bool contains(int y, int x) const { return y >= 0 && y < height && x >= 0 && x < width; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
  }
  bool any() const { return count() > 0; }

  Mask crop(int y0, int x0, int h, int w) const {
    Mask out(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(y, x) = get(y0 + y, x0 + x) ? 1 : 0;
    return out;
  }

  bool operator==(const Mask&) const = default;
};

inline Mask mask_union(const Mask& a, const Mask& b) {
  require(a.height == b.height && a.width == b.width, "mask_union size mismatch");
  Mask out(a.height, a.width);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = (a.data[i] || b.data[i]) ? 1 : 0;
  return out;
}

inline bool masks_disjoint(const Mask& a, const Mask& b) {
  require(a.height == b.height && a.width == b.width, "mask size mismatch");
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] && b.data[i]) return false;
  return true;
}

/// image * mask (broadcast over channels).
inline ImageBuffer apply_mask(const ImageBuffer& image, const Mask& mask) {
  require(image.height == mask.height && image.width == mask.width, "apply_mask size mismatch");
  ImageBuffer out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (!mask.at(y, x))
        for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = 0.0;
  return out;
}

/// Left-referenced horizontal disparity in pixels with per-pixel validity.
struct DisparityMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;
  std::vector<unsigned char> valid;

  DisparityMap() = default;
  DisparityMap(int h, int w, double fill = 0.0) : height(h), width(w) {
    require(h > 0 && w > 0, "disparity map dimensions must be positive");
    values.assign(static_cast<std::size_t>(h) * w, fill);
    valid.assign(values.size(), 1);
  }

  bool empty() const { return values.empty(); }
  std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * width + x; }
  double at(int y, int x) const { return values[index(y, x)]; }
  double& at(int y, int x) { return values[index(y, x)]; }
  bool is_valid(int y, int x) const { return valid[index(y, x)] != 0; }

  DisparityMap crop(int y0, int x0, int h, int w) const {
    require(y0 >= 0 && x0 >= 0 && y0 + h <= height && x0 + w <= width,
            "disparity crop outside map");
    DisparityMap out(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        out.at(y, x) = at(y0 + y, x0 + x);
        out.valid[out.index(y, x)] = valid[index(y0 + y, x0 + x)];
      }
    return out;
  }

  bool operator==(const DisparityMap&) const = default;
};

// ---------------------------------------------------------------------------
// Tensor bridges ([N,C,H,W] planar layout)
// ---------------------------------------------------------------------------

inline Tensor images_to_tensor(const std::vector<ImageBuffer>& images) {
  require(!images.empty(), "images_to_tensor of empty batch");
  const auto& f = images.front();
  const std::size_t h = f.height, w = f.width, c = f.channels;
  std::vector<double> data(images.size() * c * h * w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    require(images[n].same_shape(f), "images_to_tensor: inconsistent image shapes");
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          data[((n * c + ch) * h + y) * w + x] =
              images[n].data[(y * w + x) * c + ch];
  }
  return Tensor::from_data({images.size(), c, h, w}, std::move(data));
}

inline Tensor image_to_tensor(const ImageBuffer& image) { return images_to_tensor({image}); }

inline Tensor masks_to_tensor(const std::vector<Mask>& masks) {
  require(!masks.empty(), "masks_to_tensor of empty batch");
  const std::size_t h = masks.front().height, w = masks.front().width;
  std::vector<double> data;
  data.reserve(masks.size() * h * w);
  for (const auto& m : masks) {
    require(static_cast<std::size_t>(m.height) == h && static_cast<std::size_t>(m.width) == w,
            "masks_to_tensor: inconsistent mask shapes");
    for (auto v : m.data) data.push_back(v ? 1.0 : 0.0);
  }
  return Tensor::from_data({masks.size(), 1, h, w}, std::move(data));
}

inline Tensor mask_to_tensor(const Mask& mask) { return masks_to_tensor({mask}); }

/// Sample n of an [N,C,H,W] tensor as an image, clamped to [0,1].
inline ImageBuffer tensor_to_image(const Tensor& t, std::size_t n = 0) {
  require(t.rank() == 4 && n < t.dim(0), "tensor_to_image expects [N,C,H,W]");
  const int c = static_cast<int>(t.dim(1)), h = static_cast<int>(t.dim(2)), w = static_cast<int>(t.dim(3));
  ImageBuffer out(h, w, c);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(y, x, ch) = t[((n * c + ch) * h + y) * w + x];
  out.clamp();
  return out;
}

inline Mask tensor_to_mask(const Tensor& t, std::size_t n = 0) {
  require(t.rank() == 4 && t.dim(1) == 1 && n < t.dim(0), "tensor_to_mask expects [N,1,H,W]");
  const int h = static_cast<int>(t.dim(2)), w = static_cast<int>(t.dim(3));
  Mask out(h, w);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = t[n * out.data.size() + i] > 0.5 ? 1 : 0;
  return out;
}

}  // namespace sainet
