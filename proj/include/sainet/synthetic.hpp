#pragma once

// Procedural rectified stereo scenes: fronto-parallel textured layers at
// integer disparities, rendered consistently into both views with exact
// ground-truth disparity and object labels.

#include <cstdio>

#include "sainet/maskbank.hpp"
#include "sainet/stereo.hpp"

namespace sainet {

struct LayerTexture {
  double base[3] = {0.5, 0.5, 0.5};
  struct Wave {
    double fx = 0.0, fy = 0.0, phase = 0.0;
    double amp[3] = {0.0, 0.0, 0.0};
  };
  Wave waves[3];
  double noise_amp = 0.1;
  int noise_scale = 3;
  std::uint64_t noise_seed = 0;

  double lattice(long long u, long long v, int c) const {
    const auto h = mix_seed(noise_seed ^ mix_seed(static_cast<std::uint64_t>(u) * 0x9E3779B1ull +
                                                  static_cast<std::uint64_t>(v) * 0x85EBCA77ull +
                                                  static_cast<std::uint64_t>(c)));
    return static_cast<double>(h >> 11) * 0x1.0p-53 - 0.5;
  }

  /// Texture value at layer coordinates (u, v) for channel c.
  double sample(int u, int v, int c) const {
    double value = base[c];
    for (const auto& w : waves) value += w.amp[c] * std::sin(6.283185307179586 * (w.fx * u + w.fy * v) + w.phase);
    const double fu = static_cast<double>(u) / noise_scale, fv = static_cast<double>(v) / noise_scale;
    const long long u0 = static_cast<long long>(std::floor(fu)), v0 = static_cast<long long>(std::floor(fv));
    const double tu = fu - static_cast<double>(u0), tv = fv - static_cast<double>(v0);
    const double n = (1 - tu) * (1 - tv) * lattice(u0, v0, c) + tu * (1 - tv) * lattice(u0 + 1, v0, c) +
                     (1 - tu) * tv * lattice(u0, v0 + 1, c) + tu * tv * lattice(u0 + 1, v0 + 1, c);
    value += noise_amp * n;
    return std::clamp(value, 0.0, 1.0);
  }

  static LayerTexture random(Rng& rng) {
    LayerTexture t;
    for (double& b : t.base) b = rng.uniform(0.25, 0.75);
    for (auto& w : t.waves) {
      const double period = rng.uniform(5.0, 16.0);
      const double angle = rng.uniform(0.0, 3.141592653589793);
      w.fx = std::cos(angle) / period;
      w.fy = std::sin(angle) / period;
      w.phase = rng.uniform(0.0, 6.283185307179586);
      for (double& a : w.amp) a = rng.uniform(0.03, 0.12);
    }
    t.noise_amp = rng.uniform(0.15, 0.3);
    t.noise_scale = static_cast<int>(rng.uniform_int(2, 4));
    t.noise_seed = rng.next_u64();
    return t;
  }
};

struct SceneLayer {
  enum class Kind { background, rectangle, ellipse };
  Kind kind = Kind::background;
  int disparity = 0;
  double cx = 0, cy = 0, rx = 0, ry = 0;  // left-view geometry
  LayerTexture texture;

  bool covers(int x, int y) const {
    switch (kind) {
      case Kind::background:
        return true;
      case Kind::rectangle:
        return std::abs(x - cx) <= rx && std::abs(y - cy) <= ry;
      case Kind::ellipse: {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
      }
    }
    return false;
  }
};

struct SyntheticSceneParams {
  int height = 64;
  int width = 64;
  int min_objects = 1;
  int max_objects = 2;
  int background_disparity_min = 1;
  int background_disparity_max = 4;
  int object_disparity_min = 8;
  int object_disparity_max = 14;
  double min_object_extent = 0.15;  // half-size as a fraction of the width
  double max_object_extent = 0.3;
};

struct SyntheticScene {
  StereoSample sample;
  LabelMap labels;  // left-view object index (0 = background)
  std::vector<SceneLayer> layers;
};

/// Renders a scene. Layer i with disparity d shows texture(u = x_left, v = y)
/// at left pixel x_left and at right pixel x_left - d; the visible layer is
/// the one with the largest disparity covering the pixel.
inline SyntheticScene render_layers(const std::vector<SceneLayer>& layers, int height, int width, std::string id) {
  SyntheticScene scene;
  scene.layers = layers;
  scene.sample.id = std::move(id);
  scene.sample.left = ImageBuffer(height, width, 3);
  scene.sample.right = ImageBuffer(height, width, 3);
  DisparityMap gt(height, width, 0.0);
  scene.labels = LabelMap(height, width);

  std::vector<std::size_t> order(layers.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return layers[a].disparity > layers[b].disparity; });

  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      for (std::size_t li : order) {
        if (!layers[li].covers(x, y)) continue;
        for (int c = 0; c < 3; ++c) scene.sample.left.at(y, x, c) = layers[li].texture.sample(x, y, c);
        gt.at(y, x) = layers[li].disparity;
        scene.labels.at(y, x) = static_cast<int>(li);
        break;
      }
      for (std::size_t li : order) {
        const int xl = x + layers[li].disparity;
        if (!layers[li].covers(xl, y)) continue;
        for (int c = 0; c < 3; ++c) scene.sample.right.at(y, x, c) = layers[li].texture.sample(xl, y, c);
        break;
      }
    }
  scene.sample.gt_disparity = std::move(gt);
  return scene;
}

inline SyntheticScene make_synthetic_scene(const SyntheticSceneParams& params, std::uint64_t seed,
                                           std::string id) {
  require(params.height > 0 && params.width > 0, "scene size must be positive");
  require(params.min_objects >= 0 && params.max_objects >= params.min_objects, "bad object count range");
  Rng rng(seed);
  std::vector<SceneLayer> layers;
  SceneLayer bg;
  bg.kind = SceneLayer::Kind::background;
  bg.disparity = static_cast<int>(rng.uniform_int(params.background_disparity_min, params.background_disparity_max));
  bg.texture = LayerTexture::random(rng);
  layers.push_back(bg);

  const int objects = static_cast<int>(rng.uniform_int(params.min_objects, params.max_objects));
  for (int i = 0; i < objects; ++i) {
    SceneLayer obj;
    obj.kind = rng.uniform() < 0.5 ? SceneLayer::Kind::rectangle : SceneLayer::Kind::ellipse;
    obj.disparity = static_cast<int>(rng.uniform_int(params.object_disparity_min, params.object_disparity_max));
    obj.rx = rng.uniform(params.min_object_extent, params.max_object_extent) * params.width;
    obj.ry = rng.uniform(params.min_object_extent, params.max_object_extent) * params.height;
    obj.cx = rng.uniform(0.2, 0.8) * params.width;
    obj.cy = rng.uniform(0.2, 0.8) * params.height;
    obj.texture = LayerTexture::random(rng);
    layers.push_back(obj);
  }
  return render_layers(layers, params.height, params.width, std::move(id));
}

/// `count` scenes with ids scene_0000, scene_0001, ... and derived seeds.
inline std::vector<SyntheticScene> make_synthetic_set(const SyntheticSceneParams& params, std::size_t count,
                                                      std::uint64_t seed) {
  std::vector<SyntheticScene> scenes(count);
  parallel_for(count, [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%04zu", i);
    scenes[i] = make_synthetic_scene(params, derive_seed(seed, i), id);
  });
  return scenes;
}

}  // namespace sainet
