#pragma once

// Training objectives: stereo NCC consistency, masked L1 reconstruction,
// feature-space perceptual and style terms, masked total variation.

#include "sainet/imageproc.hpp"
#include "sainet/network.hpp"

namespace sainet {

struct LossWeights {
  double synthesis = 6.0;
  double context = 1.0;
  double perceptual = 0.05;
  double style = 120.0;
  double tv = 0.1;
  double disparity = 0.1;

  std::vector<double> as_vector() const { return {synthesis, context, perceptual, style, tv, disparity}; }
  void validate() const {
    for (double w : as_vector()) require(w >= 0.0 && std::isfinite(w), "loss weights must be finite and >= 0");
  }
  bool operator==(const LossWeights&) const = default;
};

struct DisparityLossConfig {
  int patch_size = 7;
  int stride = 1;  // every stride-th synthesis pixel in raster order
  bool operator==(const DisparityLossConfig&) const = default;
};

inline constexpr double kNccEpsilon = 1e-8;

/// Phi = ||X*Y||_{1,1} / (max(||X||_F, eps) * max(||Y||_F, eps)).
inline Tensor ncc(const Tensor& x, const Tensor& y) {
  require(x.shape() == y.shape(), "ncc: patch shapes differ " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  Tensor num = l1_norm(mul(x, y));
  Tensor den = mul(clamp_min(frobenius_norm(x), kNccEpsilon), clamp_min(frobenius_norm(y), kNccEpsilon));
  return div(num, den);
}

/// Plain-value NCC on raw buffers (same formula, no graph).
inline double ncc_value(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "ncc: patch sizes differ");
  double a = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    a += std::abs(x[i] * y[i]);
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  return a / (std::max(std::sqrt(nx), kNccEpsilon) * std::max(std::sqrt(ny), kNccEpsilon));
}

struct DisparityLossStats {
  std::size_t counted = 0;  // synthesis pixels that contributed
  std::size_t skipped = 0;  // invalid disparity or warp leaving the frame
  bool all_invalid = false;
};

namespace detail {

/// Planar [C,H,W] slice of sample n as an (unclamped) image.
inline ImageBuffer planar_to_image(const Tensor& t, std::size_t n) {
  const int c = static_cast<int>(t.dim(1)), h = static_cast<int>(t.dim(2)), w = static_cast<int>(t.dim(3));
  ImageBuffer out(h, w, c);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(y, x, ch) = t[((n * c + ch) * h + y) * w + x];
  return out;
}

}  // namespace detail

/// Mean over counted synthesis pixels of 1 - Phi(P_I(i), P_W(i)), where P_W
/// is taken from the other view warped into this frame with `disparity`.
/// Pixels are pooled across the batch. Differentiable w.r.t. `inpainted`.
inline Tensor disparity_loss(const Tensor& inpainted, const Tensor& other_view, const Tensor& synthesis,
                             const std::vector<DisparityMap>& disparity, const DisparityLossConfig& cfg = {},
                             DisparityLossStats* stats = nullptr) {
  require(inpainted.rank() == 4 && inpainted.shape() == other_view.shape(),
          "disparity_loss: image tensors must be [N,C,H,W] of equal shape");
  const std::size_t N = inpainted.dim(0), C = inpainted.dim(1), H = inpainted.dim(2), W = inpainted.dim(3);
  require(synthesis.rank() == 4 && synthesis.dim(0) == N && synthesis.dim(1) == 1 && synthesis.dim(2) == H &&
              synthesis.dim(3) == W,
          "disparity_loss: synthesis mask must be [N,1,H,W]");
  require(disparity.size() == N, "disparity_loss: one disparity map per sample required");
  require(cfg.patch_size >= 3 && cfg.patch_size % 2 == 1, "disparity_loss: patch size must be odd and >= 3");
  require(cfg.stride >= 1, "disparity_loss: stride must be >= 1");
  for (const auto& d : disparity)
    require(static_cast<std::size_t>(d.height) == H && static_cast<std::size_t>(d.width) == W,
            "disparity_loss: disparity map size mismatch");

  const int r = cfg.patch_size / 2;
  struct Site {
    std::size_t n;
    int x, y;
  };
  std::vector<Site> sites;
  std::vector<ImageBuffer> warped(N);
  DisparityLossStats st;
  for (std::size_t n = 0; n < N; ++n) {
    const auto w = warp_by_disparity(detail::planar_to_image(other_view, n), disparity[n], WarpDirection::right_to_left);
    std::size_t seen = 0;
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        if (synthesis[(n * H + y) * W + x] == 0.0) continue;
        if (seen++ % static_cast<std::size_t>(cfg.stride) != 0) continue;
        if (!w.valid.at(static_cast<int>(y), static_cast<int>(x))) {
          ++st.skipped;
          continue;
        }
        sites.push_back({n, static_cast<int>(x), static_cast<int>(y)});
      }
    warped[n] = w.image;
  }
  st.counted = sites.size();
  st.all_invalid = sites.empty() && st.skipped > 0;
  if (stats) *stats = st;
  if (sites.empty()) return detail::make_result({}, {0.0}, {inpainted}, [](detail::TensorImpl&) {});

  const std::size_t psz = static_cast<std::size_t>(cfg.patch_size) * cfg.patch_size * C;
  // per-site patch buffers, kept for the backward pass
  auto px = std::make_shared<std::vector<double>>(sites.size() * psz, 0.0);
  auto py = std::make_shared<std::vector<double>>(sites.size() * psz, 0.0);
  auto phi = std::make_shared<std::vector<double>>(sites.size());
  auto read = [&](std::size_t s, std::vector<double>& bx, std::vector<double>& by) {
    const Site& site = sites[s];
    std::size_t k = 0;
    for (int v = -r; v <= r; ++v)
      for (int u = -r; u <= r; ++u)
        for (std::size_t c = 0; c < C; ++c, ++k) {
          const int yy = site.y + v, xx = site.x + u;
          if (yy < 0 || xx < 0 || yy >= static_cast<int>(H) || xx >= static_cast<int>(W)) continue;
          bx[s * psz + k] = inpainted[((site.n * C + c) * H + yy) * W + xx];
          by[s * psz + k] = warped[site.n].at(yy, xx, static_cast<int>(c));
        }
  };
  double total = 0.0;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    read(s, *px, *py);
    (*phi)[s] = ncc_value(std::span<const double>(px->data() + s * psz, psz),
                          std::span<const double>(py->data() + s * psz, psz));
    total += 1.0 - (*phi)[s];
  }
  const double count = static_cast<double>(sites.size());
  auto site_list = std::make_shared<std::vector<Site>>(std::move(sites));
  return detail::make_result(
      {}, {total / count}, {inpainted},
      [inpainted, site_list, px, py, phi, psz, r, C, H, W, count](detail::TensorImpl& self) {
        double* g = detail::grad_of(inpainted);
        if (!g) return;
        const double up = self.grad[0] / count;
        for (std::size_t s = 0; s < site_list->size(); ++s) {
          const double* x = px->data() + s * psz;
          const double* y = py->data() + s * psz;
          double a = 0.0, sx = 0.0, sy = 0.0;
          for (std::size_t k = 0; k < psz; ++k) {
            a += std::abs(x[k] * y[k]);
            sx += x[k] * x[k];
            sy += y[k] * y[k];
          }
          const double nx = std::sqrt(sx), ny = std::sqrt(sy);
          const double dx = std::max(nx, kNccEpsilon), dy = std::max(ny, kNccEpsilon);
          const bool nx_active = nx > kNccEpsilon;
          const auto& site = (*site_list)[s];
          std::size_t k = 0;
          for (int v = -r; v <= r; ++v)
            for (int u = -r; u <= r; ++u)
              for (std::size_t c = 0; c < C; ++c, ++k) {
                const int yy = site.y + v, xx = site.x + u;
                if (yy < 0 || xx < 0 || yy >= static_cast<int>(H) || xx >= static_cast<int>(W)) continue;
                const double xy = x[k] * y[k];
                const double sgn = xy > 0.0 ? 1.0 : (xy < 0.0 ? -1.0 : 0.0);
                double dphi = sgn * y[k] / (dx * dy);
                if (nx_active) dphi -= a / (dx * dx * dy) * (x[k] / nx);
                g[((site.n * C + c) * H + yy) * W + xx] -= up * dphi;
              }
        }
      });
}

struct ReconstructionLosses {
  Tensor synthesis;
  Tensor context;
};

/// ||S*(I - I_gt)||_1 / N and ||C*(I - I_gt)||_1 / N, N = element count of I_gt.
inline ReconstructionLosses reconstruction_losses(const Tensor& image, const Tensor& gt, const Tensor& synthesis,
                                                  const Tensor& context) {
  require(image.shape() == gt.shape(), "reconstruction_losses: image shapes differ");
  const double n = static_cast<double>(gt.numel());
  Tensor diff = sub(image, gt);
  return {scale(l1_norm(mul(synthesis, diff)), 1.0 / n), scale(l1_norm(mul(context, diff)), 1.0 / n)};
}

/// Sum over stages of ||Psi_p(I) - Psi_p(I_gt)||_1 / N_Psi_p.
inline Tensor perceptual_loss(const FeatureExtractor& fe, const Tensor& image, const Tensor& gt) {
  require(image.shape() == gt.shape(), "perceptual_loss: image shapes differ");
  const auto fi = fe.extract(image);
  std::vector<Tensor> fg;
  {
    NoGradGuard guard;
    fg = fe.extract(gt.detach());
  }
  std::vector<Tensor> terms;
  for (std::size_t p = 0; p < fi.size(); ++p)
    terms.push_back(scale(l1_norm(sub(fi[p], fg[p])), 1.0 / static_cast<double>(fi[p].numel())));
  return weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
}

/// Sum over stages of ||K_p (G_I - G_gt)||_1 / C_p^2 with K_p = 1/(C_p H_p W_p),
/// averaged over the batch.
inline Tensor style_loss(const FeatureExtractor& fe, const Tensor& image, const Tensor& gt) {
  require(image.shape() == gt.shape(), "style_loss: image shapes differ");
  const auto fi = fe.extract(image);
  std::vector<Tensor> fg;
  {
    NoGradGuard guard;
    fg = fe.extract(gt.detach());
  }
  std::vector<Tensor> terms;
  for (std::size_t p = 0; p < fi.size(); ++p) {
    const double n = static_cast<double>(fi[p].dim(0)), c = static_cast<double>(fi[p].dim(1));
    const double k = 1.0 / (c * static_cast<double>(fi[p].dim(2) * fi[p].dim(3)));
    Tensor gi = gram_matrix(fi[p]);
    Tensor gg;
    {
      NoGradGuard guard;
      gg = gram_matrix(fg[p]);
    }
    terms.push_back(scale(l1_norm(sub(gi, gg)), k / (c * c) / n));
  }
  return weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
}

/// Anisotropic TV over pixels in S (forward differences inside the frame), / N.
inline Tensor tv_loss(const Tensor& image, const Tensor& synthesis) {
  require(image.rank() == 4, "tv_loss expects [N,C,H,W]");
  const std::size_t N = image.dim(0), C = image.dim(1), H = image.dim(2), W = image.dim(3);
  require(synthesis.rank() == 4 && synthesis.dim(0) == N && synthesis.dim(1) == 1 && synthesis.dim(2) == H &&
              synthesis.dim(3) == W,
          "tv_loss: synthesis mask must be [N,1,H,W]");
  const double inv_n = 1.0 / static_cast<double>(image.numel());
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        if (synthesis[(n * H + y) * W + x] == 0.0) continue;
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t i = ((n * C + c) * H + y) * W + x;
          if (x + 1 < W) total += std::abs(image[i + 1] - image[i]);
          if (y + 1 < H) total += std::abs(image[i + W] - image[i]);
        }
      }
  return detail::make_result({}, {total * inv_n}, {image}, [image, synthesis, N, C, H, W, inv_n](detail::TensorImpl& self) {
    double* g = detail::grad_of(image);
    if (!g) return;
    const double up = self.grad[0] * inv_n;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          if (synthesis[(n * H + y) * W + x] == 0.0) continue;
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t i = ((n * C + c) * H + y) * W + x;
            if (x + 1 < W) {
              const double s = detail::sign(image[i + 1] - image[i]) * up;
              g[i + 1] += s;
              g[i] -= s;
            }
            if (y + 1 < H) {
              const double s = detail::sign(image[i + W] - image[i]) * up;
              g[i + W] += s;
              g[i] -= s;
            }
          }
        }
  });
}

struct LossComponents {
  Tensor synthesis, context, perceptual, style, tv, disparity;
  std::vector<Tensor> as_vector() const { return {synthesis, context, perceptual, style, tv, disparity}; }
};

inline const std::vector<std::string>& loss_component_names() {
  static const std::vector<std::string> names{"synthesis", "context", "perceptual", "style", "tv", "disparity"};
  return names;
}

inline Tensor total_loss(const LossComponents& parts, const LossWeights& weights) {
  weights.validate();
  const auto terms = parts.as_vector();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    require(terms[i].defined() && terms[i].numel() == 1,
            "total_loss: component '" + loss_component_names()[i] + "' missing or not scalar");
    require(terms[i].item() >= 0.0, "total_loss: component '" + loss_component_names()[i] + "' is negative");
  }
  return weighted_sum(terms, weights.as_vector());
}

/// Scalar form for logging and checks.
inline double total_loss(const std::vector<double>& components, const LossWeights& weights) {
  weights.validate();
  require(components.size() == 6, "total_loss needs six components");
  const auto w = weights.as_vector();
  double total = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    require(components[i] >= 0.0, "total_loss: component '" + loss_component_names()[i] + "' is negative");
    total += w[i] * components[i];
  }
  return total;
}

}  // namespace sainet
