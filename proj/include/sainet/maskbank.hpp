#pragma once

// Geometrically valid occlusion masks: find depth discontinuities (or object
// outlines), then grow a context band into the background side and a
// synthesis band into the foreground side of each one.

#include <algorithm>
#include <compare>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sainet/image.hpp"

namespace sainet {

struct Pixel {
  int x = 0;
  int y = 0;
  auto operator<=>(const Pixel&) const = default;
};

/// Raster order (row-major).
inline bool raster_less(const Pixel& a, const Pixel& b) {
  return a.y != b.y ? a.y < b.y : a.x < b.x;
}

struct DiscontinuityChain {
  std::vector<Pixel> pixels;             // nearer-side boundary pixels, raster order
  std::vector<Pixel> background_pixels;  // farther 4-neighbours across the jump
  double foreground_level = 0.0;         // smallest disparity on the chain
  Pixel anchor;                          // first chain pixel in raster order
};

/// Per-pixel integer object labels (0 = no object).
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(int h, int w) : height(h), width(w), labels(static_cast<std::size_t>(h) * w, 0) {}
  int at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  int& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
};

struct MaskPair {
  Mask context;
  Mask synthesis;
  Pixel anchor;
  std::string source_id;

  /// Tight crop around context | synthesis; the anchor moves with it.
  MaskPair cropped() const {
    int y0 = context.height, x0 = context.width, y1 = -1, x1 = -1;
    for (int y = 0; y < context.height; ++y)
      for (int x = 0; x < context.width; ++x)
        if (context.at(y, x) || synthesis.at(y, x)) {
          y0 = std::min(y0, y);
          x0 = std::min(x0, x);
          y1 = std::max(y1, y);
          x1 = std::max(x1, x);
        }
    require(y1 >= 0, "cannot crop an empty mask pair");
    MaskPair out;
    out.context = context.crop(y0, x0, y1 - y0 + 1, x1 - x0 + 1);
    out.synthesis = synthesis.crop(y0, x0, y1 - y0 + 1, x1 - x0 + 1);
    out.anchor = {anchor.x - x0, anchor.y - y0};
    out.source_id = source_id;
    return out;
  }

  bool operator==(const MaskPair&) const = default;
};

struct MaskBank {
  std::vector<MaskPair> entries;
  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

/// Result of growing one chain; `pair` is empty when the chain had to be skipped.
struct PropagationResult {
  std::optional<MaskPair> pair;
  std::string warning;
};

struct MaskBankParams {
  double threshold = 3.0;
  int context_width = 20;
  int synthesis_width = 20;
  std::size_t min_synthesis_pixels = 1;
  bool operator==(const MaskBankParams&) const = default;

  /// Band widths scaled from the 256px defaults to another crop size.
  static MaskBankParams for_crop(int crop_size) {
    MaskBankParams p;
    const int w = std::max(1, static_cast<int>(std::lround(20.0 * crop_size / 256.0)));
    p.context_width = w;
    p.synthesis_width = w;
    return p;
  }
};

namespace detail {

constexpr int kDx4[4] = {1, -1, 0, 0};
constexpr int kDy4[4] = {0, 0, 1, -1};

/// 8-connected components of `marked`, each returned in raster order and
/// the list ordered by its first pixel.
inline std::vector<std::vector<Pixel>> components8(const Mask& marked) {
  std::vector<std::vector<Pixel>> out;
  Mask seen(marked.height, marked.width, 0);
  for (int y = 0; y < marked.height; ++y)
    for (int x = 0; x < marked.width; ++x) {
      if (!marked.at(y, x) || seen.at(y, x)) continue;
      std::vector<Pixel> comp;
      std::vector<Pixel> stack{{x, y}};
      seen.at(y, x) = 1;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        comp.push_back(p);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = p.y + dy, nx = p.x + dx;
            if (marked.get(ny, nx) && !seen.at(ny, nx)) {
              seen.at(ny, nx) = 1;
              stack.push_back({nx, ny});
            }
          }
      }
      std::sort(comp.begin(), comp.end(), raster_less);
      out.push_back(std::move(comp));
    }
  return out;
}

/// Geodesic 8-connected dilation of `seed` inside `allowed`, `iterations` times.
inline Mask dilate_within(const Mask& seed, const Mask& allowed, int iterations) {
  Mask current = seed;
  for (int it = 0; it < iterations; ++it) {
    Mask next = current;
    for (int y = 0; y < current.height; ++y)
      for (int x = 0; x < current.width; ++x) {
        if (current.at(y, x) || !allowed.at(y, x)) continue;
        bool touch = false;
        for (int dy = -1; dy <= 1 && !touch; ++dy)
          for (int dx = -1; dx <= 1 && !touch; ++dx) touch = current.get(y + dy, x + dx);
        if (touch) next.at(y, x) = 1;
      }
    current = std::move(next);
  }
  return current;
}

inline std::vector<Pixel> background_neighbours(const std::vector<Pixel>& chain, const Mask& background) {
  Mask marked(background.height, background.width, 0);
  for (const auto& p : chain)
    for (int k = 0; k < 4; ++k) {
      const int ny = p.y + kDy4[k], nx = p.x + kDx4[k];
      if (background.get(ny, nx)) marked.at(ny, nx) = 1;
    }
  std::vector<Pixel> out;
  for (int y = 0; y < marked.height; ++y)
    for (int x = 0; x < marked.width; ++x)
      if (marked.at(y, x)) out.push_back({x, y});
  return out;
}

}  // namespace detail

/// Nearer-side pixels of every 4-neighbour disparity jump larger than
/// `threshold`, grouped into 8-connected chains.
inline std::vector<DiscontinuityChain> find_discontinuities(const DisparityMap& depth, double threshold) {
  require(threshold > 0.0, "discontinuity threshold must be positive");
  Mask marked(depth.height, depth.width, 0);
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.is_valid(y, x)) continue;
      for (int k = 0; k < 4; ++k) {
        const int ny = y + detail::kDy4[k], nx = x + detail::kDx4[k];
        if (ny < 0 || ny >= depth.height || nx < 0 || nx >= depth.width || !depth.is_valid(ny, nx)) continue;
        if (depth.at(y, x) - depth.at(ny, nx) > threshold) {
          marked.at(y, x) = 1;
          break;
        }
      }
    }
  std::vector<DiscontinuityChain> chains;
  for (auto& comp : detail::components8(marked)) {
    DiscontinuityChain chain;
    chain.foreground_level = std::numeric_limits<double>::infinity();
    for (const auto& p : comp) chain.foreground_level = std::min(chain.foreground_level, depth.at(p.y, p.x));
    chain.anchor = comp.front();
    chain.pixels = std::move(comp);
    chains.push_back(std::move(chain));
  }
  for (auto& chain : chains) {
    Mask background(depth.height, depth.width, 0);
    for (int y = 0; y < depth.height; ++y)
      for (int x = 0; x < depth.width; ++x)
        background.at(y, x) = depth.is_valid(y, x) && depth.at(y, x) <= chain.foreground_level - threshold;
    chain.background_pixels = detail::background_neighbours(chain.pixels, background);
  }
  return chains;
}

/// Grows bands from `chain`: synthesis stays in `foreground`, context in
/// `background`. A width of w yields a w-pixel band on each side.
inline PropagationResult propagate_regions(const DiscontinuityChain& chain, const Mask& foreground,
                                           const Mask& background, int context_width, int synthesis_width,
                                           const std::string& source_id = {}) {
  require(context_width >= 1 && synthesis_width >= 1, "band widths must be >= 1");
  require(!chain.pixels.empty(), "empty discontinuity chain");
  Mask seed(foreground.height, foreground.width, 0);
  for (const auto& p : chain.pixels) seed.at(p.y, p.x) = 1;

  Mask synthesis = detail::dilate_within(seed, foreground, synthesis_width - 1);

  Mask allowed = background;
  for (const auto& p : chain.pixels) allowed.at(p.y, p.x) = 1;
  Mask grown = detail::dilate_within(seed, allowed, context_width);
  Mask context(foreground.height, foreground.width, 0);
  for (std::size_t i = 0; i < grown.data.size(); ++i)
    context.data[i] = grown.data[i] && background.data[i] && !synthesis.data[i];

  PropagationResult result;
  if (!context.any()) {
    result.warning = "chain at (" + std::to_string(chain.anchor.x) + "," + std::to_string(chain.anchor.y) +
                     ") has no background side; skipped";
    return result;
  }
  result.pair = MaskPair{std::move(context), std::move(synthesis), chain.anchor, source_id};
  return result;
}

/// Depth-driven variant: the foreground side is everything within
/// `threshold` of (or nearer than) the chain's own disparity.
inline PropagationResult propagate_regions(const DiscontinuityChain& chain, const DisparityMap& depth,
                                           int context_width, int synthesis_width, double threshold = 3.0,
                                           const std::string& source_id = {}) {
  Mask foreground(depth.height, depth.width, 0), background(depth.height, depth.width, 0);
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.is_valid(y, x)) continue;
      const bool near = depth.at(y, x) > chain.foreground_level - threshold;
      foreground.at(y, x) = near;
      background.at(y, x) = !near;
    }
  return propagate_regions(chain, foreground, background, context_width, synthesis_width, source_id);
}

/// Outline chains of labelled objects: object pixels with a 4-neighbour
/// outside the object (the canvas border does not count).
inline std::vector<std::pair<int, DiscontinuityChain>> find_object_outlines(const LabelMap& labels) {
  std::vector<int> ids;
  for (int v : labels.labels)
    if (v != 0) ids.push_back(v);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<std::pair<int, DiscontinuityChain>> out;
  for (int id : ids) {
    Mask marked(labels.height, labels.width, 0), outside(labels.height, labels.width, 0);
    for (int y = 0; y < labels.height; ++y)
      for (int x = 0; x < labels.width; ++x) {
        outside.at(y, x) = labels.at(y, x) != id;
        if (labels.at(y, x) != id) continue;
        for (int k = 0; k < 4; ++k) {
          const int ny = y + detail::kDy4[k], nx = x + detail::kDx4[k];
          if (ny >= 0 && ny < labels.height && nx >= 0 && nx < labels.width && labels.at(ny, nx) != id) {
            marked.at(y, x) = 1;
            break;
          }
        }
      }
    if (!marked.any()) continue;
    DiscontinuityChain chain;
    for (int y = 0; y < labels.height && chain.pixels.empty(); ++y)
      for (int x = 0; x < labels.width; ++x)
        if (marked.at(y, x)) {
          chain.anchor = {x, y};
          break;
        }
    for (int y = 0; y < labels.height; ++y)
      for (int x = 0; x < labels.width; ++x)
        if (marked.at(y, x)) chain.pixels.push_back({x, y});
    chain.background_pixels = detail::background_neighbours(chain.pixels, outside);
    chain.foreground_level = static_cast<double>(id);
    out.emplace_back(id, std::move(chain));
  }
  return out;
}

/// One source image for the bank: a disparity/depth map or object labels.
struct BankSource {
  std::string id;
  std::optional<DisparityMap> depth;
  std::optional<LabelMap> labels;
};

struct BankBuildReport {
  MaskBank bank;
  std::vector<std::string> warnings;
};

/// Builds a bank with one (cropped) mask pair per detected object. Sources
/// are processed in id order so the result is deterministic.
inline BankBuildReport build_bank(std::vector<BankSource> sources, const MaskBankParams& params) {
  if (sources.empty()) throw DataError("no input images");
  std::sort(sources.begin(), sources.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<BankBuildReport> per_source(sources.size());
  parallel_for(sources.size(), [&](std::size_t i) {
    const auto& src = sources[i];
    auto& rep = per_source[i];
    auto accept = [&](PropagationResult res) {
      if (!res.pair) {
        rep.warnings.push_back(src.id + ": " + res.warning);
        return;
      }
      if (res.pair->synthesis.count() < params.min_synthesis_pixels) return;
      rep.bank.entries.push_back(res.pair->cropped());
    };
    if (src.labels) {
      const auto& lm = *src.labels;
      for (auto& [id, chain] : find_object_outlines(lm)) {
        Mask fg(lm.height, lm.width, 0), bg(lm.height, lm.width, 0);
        for (int y = 0; y < lm.height; ++y)
          for (int x = 0; x < lm.width; ++x) {
            fg.at(y, x) = lm.at(y, x) == id;
            bg.at(y, x) = lm.at(y, x) != id;
          }
        accept(propagate_regions(chain, fg, bg, params.context_width, params.synthesis_width, src.id));
      }
    } else if (src.depth) {
      for (const auto& chain : find_discontinuities(*src.depth, params.threshold))
        accept(propagate_regions(chain, *src.depth, params.context_width, params.synthesis_width,
                                 params.threshold, src.id));
    } else {
      rep.warnings.push_back(src.id + ": no depth or labels; skipped");
    }
  });
  BankBuildReport report;
  for (auto& rep : per_source) {
    for (auto& e : rep.bank.entries) report.bank.entries.push_back(std::move(e));
    for (auto& w : rep.warnings) report.warnings.push_back(std::move(w));
  }
  if (report.bank.empty()) throw DataError("mask bank is empty: no objects found in any input");
  return report;
}

}  // namespace sainet
