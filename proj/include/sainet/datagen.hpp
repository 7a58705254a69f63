#pragma once

// Stereo-aware training samples: a mask pair from the bank is pasted as a
// virtual fronto-parallel occluder onto a rectified pair. The occluder sits at
// the largest estimated scene disparity under its synthesis region, and its
// context is reprojected into the right view to harvest stereo evidence.

#include <cstdio>

#include "sainet/imageproc.hpp"
#include "sainet/maskbank.hpp"
#include "sainet/stereo.hpp"

namespace sainet {

struct TrainingSample {
  std::string id;
  std::string scene_id;
  std::size_t mask_index = 0;
  std::uint64_t seed = 0;

  ImageBuffer cc_left;          // left crop under C
  ImageBuffer cs_left;          // left crop under S (ground truth of the hole)
  ImageBuffer edges;            // Canny(cc_left + cs_left), 1 channel
  ImageBuffer cc_right_warped;  // right-view context resampled into the left frame
  Mask stereo_support;          // where cc_right_warped carries data
  Mask context_mask;
  Mask synthesis_mask;
  ImageBuffer left_gt;          // full left crop
  ImageBuffer right_gt;         // right crop at the same origin
  DisparityMap scene_disparity; // estimated left disparity, cropped
  std::optional<DisparityMap> gt_disparity;  // ground truth crop when the scene has one
  double object_disparity = 0.0;
  Pixel crop_origin;
  Pixel mask_origin;            // top-left of the mask box inside the crop

  /// Network validity: context plus stereo support.
  Mask validity() const { return mask_union(context_mask, stereo_support); }

  bool operator==(const TrainingSample&) const = default;
};

struct DatagenParams {
  int crop_size = 256;
  int max_retries = 10;
  int occluder_margin = 0;  // extra disparity added to max(DS_L)
  bool square_masks = false;
  CannyParams canny;
  BlockMatchParams blockmatch{.max_disparity = -1, .block = 9, .lr_tolerance = 1, .min_variance = 1e-5};
};

/// Raised when a draw cannot produce a usable sample (e.g. no valid disparity under S).
class SampleSkipped : public DataError {
 public:
  using DataError::DataError;
};

namespace detail {

/// Square protocol: crop/2 context square with a centred crop/4 hole.
inline MaskPair square_mask_pair(int crop_size) {
  const int outer = std::max(3, crop_size / 2), inner = std::max(1, crop_size / 4);
  MaskPair pair;
  pair.context = Mask(outer, outer, 1);
  pair.synthesis = Mask(outer, outer, 0);
  const int off = (outer - inner) / 2;
  for (int y = off; y < off + inner; ++y)
    for (int x = off; x < off + inner; ++x) {
      pair.synthesis.at(y, x) = 1;
      pair.context.at(y, x) = 0;
    }
  pair.anchor = {off, off};
  pair.source_id = "square";
  return pair;
}

}  // namespace detail

/// One sample from `scene` using its precomputed left disparity estimate.
inline TrainingSample generate_sample(const StereoSample& scene, const DisparityMap& estimated, const MaskBank& bank,
                                      std::uint64_t rng_seed, const DatagenParams& params) {
  const int crop = params.crop_size;
  const int W = scene.left.width, H = scene.left.height;
  require(crop >= 1 && crop <= W && crop <= H, "crop does not fit inside the images");
  require(scene.right.height == H && scene.right.width == W, "stereo pair dimensions differ");
  require(estimated.height == H && estimated.width == W, "disparity estimate size mismatch");
  require(params.square_masks || !bank.empty(), "mask bank is empty");

  Rng rng(rng_seed);
  const MaskPair square = params.square_masks ? detail::square_mask_pair(crop) : MaskPair{};
  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    const std::size_t index =
        params.square_masks ? 0 : static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(bank.size()) - 1));
    const MaskPair& pair = params.square_masks ? square : bank.entries[index];
    const int ph = pair.context.height, pw = pair.context.width;
    const int ox = static_cast<int>(rng.uniform_int(0, W - crop));
    const int oy = static_cast<int>(rng.uniform_int(0, H - crop));
    if (ph > crop || pw > crop) continue;
    int mx, my;
    if (params.square_masks) {
      mx = static_cast<int>(rng.uniform_int(0, crop - pw));
      my = static_cast<int>(rng.uniform_int(0, crop - ph));
    } else {
      mx = static_cast<int>(rng.uniform_int(0, crop - 1)) - pw / 2;
      my = static_cast<int>(rng.uniform_int(0, crop - 1)) - ph / 2;
    }

    Mask context(crop, crop, 0), synthesis(crop, crop, 0);
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x) {
        const int cy = my + y, cx = mx + x;
        if (!context.contains(cy, cx)) continue;
        context.at(cy, cx) = pair.context.at(y, x);
        synthesis.at(cy, cx) = pair.synthesis.at(y, x);
      }
    if (!context.any() || !synthesis.any()) continue;

    // DS_L and disp = max(DS_L)
    double disp = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < crop; ++y)
      for (int x = 0; x < crop; ++x)
        if (synthesis.at(y, x) && estimated.is_valid(oy + y, ox + x))
          disp = std::max(disp, estimated.at(oy + y, ox + x));
    if (!std::isfinite(disp))
      throw SampleSkipped(scene.id + ": no valid disparity under the synthesis mask");
    disp += params.occluder_margin;

    TrainingSample s;
    s.scene_id = scene.id;
    s.mask_index = index;
    s.seed = rng_seed;
    s.left_gt = scene.left.crop(oy, ox, crop, crop);
    s.right_gt = scene.right.crop(oy, ox, crop, crop);
    s.scene_disparity = estimated.crop(oy, ox, crop, crop);
    if (scene.gt_disparity) s.gt_disparity = scene.gt_disparity->crop(oy, ox, crop, crop);
    s.context_mask = context;
    s.synthesis_mask = synthesis;
    s.cc_left = apply_mask(s.left_gt, context);
    s.cs_left = apply_mask(s.left_gt, synthesis);
    ImageBuffer visible = s.cc_left;
    for (std::size_t i = 0; i < visible.data.size(); ++i) visible.data[i] += s.cs_left.data[i];
    s.edges = canny(visible, params.canny);
    s.object_disparity = disp;
    s.crop_origin = {ox, oy};
    s.mask_origin = {mx, my};

    // C reprojected into the right view sits at x - disp; a left pixel with
    // scene disparity d reads the right view at x - d.
    s.cc_right_warped = ImageBuffer(crop, crop, scene.right.channels, 0.0);
    s.stereo_support = Mask(crop, crop, 0);
    for (int y = 0; y < crop; ++y)
      for (int x = 0; x < crop; ++x) {
        const int gy = oy + y, gx = ox + x;
        if (!estimated.is_valid(gy, gx)) continue;
        const double xr = gx - estimated.at(gy, gx);
        const long cxl = std::lround(xr + disp) - ox;  // context-mask column in crop coordinates
        if (!context.get(y, static_cast<int>(cxl))) continue;
        bool ok = true;
        for (int c = 0; c < scene.right.channels && ok; ++c) {
          double v = 0.0;
          ok = detail::sample_row(scene.right, gy, xr, c, v);
          if (ok) s.cc_right_warped.at(y, x, c) = v;
        }
        if (ok) s.stereo_support.at(y, x) = 1;
      }
    return s;
  }
  throw DataError(scene.id + ": could not place a mask inside the " + std::to_string(crop) + "px crop after " +
                  std::to_string(params.max_retries) + " attempts");
}

struct GeneratedDataset {
  std::vector<TrainingSample> samples;
  std::vector<std::string> warnings;
};

/// `count` samples cycling over `scenes`; sample i draws from derive_seed(seed, i).
inline GeneratedDataset generate_dataset(const std::vector<StereoSample>& scenes, const MaskBank& bank,
                                         std::size_t count, std::uint64_t seed, const DatagenParams& params) {
  require(count >= 1, "sample count must be >= 1");
  if (scenes.empty()) throw DataError("no input images");
  std::vector<DisparityMap> estimates(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    estimates[i] = estimate_disparity_blockmatch(scenes[i], params.blockmatch).map;
  });

  std::vector<std::optional<TrainingSample>> slots(count);
  std::vector<std::string> slot_warnings(count);
  parallel_for(count, [&](std::size_t i) {
    const std::size_t scene = i % scenes.size();
    const std::uint64_t base = derive_seed(seed, i);
    for (int attempt = 0; attempt < params.max_retries; ++attempt) {
      try {
        auto s = generate_sample(scenes[scene], estimates[scene], bank,
                                 attempt == 0 ? base : derive_seed(base, static_cast<std::uint64_t>(attempt)), params);
        char id[32];
        std::snprintf(id, sizeof(id), "%06zu", i);
        s.id = id;
        slots[i] = std::move(s);
        return;
      } catch (const DataError& e) {
        slot_warnings[i] = e.what();
      }
    }
  });

  GeneratedDataset out;
  for (std::size_t i = 0; i < count; ++i) {
    if (slots[i]) {
      out.samples.push_back(std::move(*slots[i]));
    } else {
      out.warnings.push_back("sample " + std::to_string(i) + " skipped: " + slot_warnings[i]);
    }
  }
  if (out.samples.empty()) throw DataError("every sample exhausted its retries");
  return out;
}

}  // namespace sainet
