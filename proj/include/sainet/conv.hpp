#pragma once

// 2-D convolution kernels (cross-correlation, no kernel flip) lowered to
// im2col + GEMM, the partial (mask-renormalised) variant, and Gram matrices.

#include <Eigen/Core>

#include "sainet/tensor.hpp"

namespace sainet {

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

struct ConvGeometry {
  std::size_t batch = 0, in_channels = 0, height = 0, width = 0;
  std::size_t out_channels = 0, kernel = 0, stride = 1, padding = 0;
  std::size_t out_height = 0, out_width = 0;

  std::size_t patch_rows() const { return in_channels * kernel * kernel; }
  std::size_t out_plane() const { return out_height * out_width; }
  std::size_t in_sample() const { return in_channels * height * width; }
  std::size_t out_sample() const { return out_channels * out_plane(); }
};

inline ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, const Tensor& bias,
                                  int stride, int padding) {
  require(input.rank() == 4, "conv input must be [N,C,H,W], got " + shape_str(input.shape()));
  require(weight.rank() == 4, "conv weight must be [Cout,Cin,k,k], got " + shape_str(weight.shape()));
  require(weight.dim(1) == input.dim(1),
          "conv channel mismatch: input " + shape_str(input.shape()) + ", weight " +
              shape_str(weight.shape()));
  require(weight.dim(2) == weight.dim(3), "conv kernel must be square");
  require(weight.dim(2) % 2 == 1, "conv kernel size must be odd");
  require(stride >= 1, "conv stride must be >= 1");
  require(padding >= 0, "conv padding must be >= 0");
  if (bias.defined())
    require(bias.rank() == 1 && bias.dim(0) == weight.dim(0),
            "conv bias must be [Cout], got " + shape_str(bias.shape()));
  ConvGeometry g;
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.height = input.dim(2);
  g.width = input.dim(3);
  g.out_channels = weight.dim(0);
  g.kernel = weight.dim(2);
  g.stride = static_cast<std::size_t>(stride);
  g.padding = static_cast<std::size_t>(padding);
  require(g.height + 2 * g.padding >= g.kernel && g.width + 2 * g.padding >= g.kernel,
          "conv input " + shape_str(input.shape()) + " smaller than kernel");
  g.out_height = (g.height + 2 * g.padding - g.kernel) / g.stride + 1;
  g.out_width = (g.width + 2 * g.padding - g.kernel) / g.stride + 1;
  return g;
}

/// col[(c*k + ky)*k + kx, oy*OW + ox] = x[c, oy*s + ky - p, ox*s + kx - p] (0 outside).
inline void im2col(const double* x, const ConvGeometry& g, double* col) {
  const auto k = g.kernel;
  const auto plane = g.out_plane();
  for (std::size_t c = 0; c < g.in_channels; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = col + ((c * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_height; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.padding);
          double* dst = row + oy * g.out_width;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill_n(dst, g.out_width, 0.0);
            continue;
          }
          const double* src = x + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_width; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.padding);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                          ? 0.0
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
}

inline void col2im_accumulate(const double* col, const ConvGeometry& g, double* dx) {
  const auto k = g.kernel;
  const auto plane = g.out_plane();
  for (std::size_t c = 0; c < g.in_channels; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = col + ((c * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_height; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          double* dst = dx + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_width; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.padding);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width))
              dst[static_cast<std::size_t>(ix)] += row[oy * g.out_width + ox];
          }
        }
      }
}

/// Shared forward/backward for plain and partial convolution. `scale` holds
/// one factor per (sample, output location); empty means plain convolution.
/// `active` marks where bias is applied; empty means everywhere.
struct ConvPlan {
  ConvGeometry geom;
  std::vector<double> scale;
  std::vector<unsigned char> active;
};

inline Tensor conv_apply(const Tensor& input, const Tensor& weight, const Tensor& bias,
                         std::shared_ptr<const ConvPlan> plan) {
  const ConvGeometry& g = plan->geom;
  const std::size_t rows = g.patch_rows(), plane = g.out_plane();
  std::vector<double> out(g.batch * g.out_sample());
  const ConstMatrixMap w(weight.data().data(), static_cast<Eigen::Index>(g.out_channels),
                         static_cast<Eigen::Index>(rows));
  parallel_for(g.batch, [&](std::size_t n) {
    std::vector<double> col(rows * plane);
    im2col(input.data().data() + n * g.in_sample(), g, col.data());
    double* o = out.data() + n * g.out_sample();
    MatrixMap om(o, static_cast<Eigen::Index>(g.out_channels), static_cast<Eigen::Index>(plane));
    om.noalias() = w * ConstMatrixMap(col.data(), static_cast<Eigen::Index>(rows),
                                      static_cast<Eigen::Index>(plane));
    const double* sc = plan->scale.empty() ? nullptr : plan->scale.data() + n * plane;
    const unsigned char* act = plan->active.empty() ? nullptr : plan->active.data() + n * plane;
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      double* row = o + co * plane;
      const double b = bias.defined() ? bias[co] : 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        if (sc) row[p] *= sc[p];
        if (!act || act[p]) row[p] += b;
      }
    }
  });

  Shape shape{g.batch, g.out_channels, g.out_height, g.out_width};
  std::vector<Tensor> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result(std::move(shape), std::move(out), std::move(parents),
                     [input, weight, bias, plan](TensorImpl& self) {
                       const ConvGeometry& g = plan->geom;
                       const std::size_t rows = g.patch_rows(), plane = g.out_plane();
                       double* gx = grad_of(input);
                       double* gw = grad_of(weight);
                       double* gb = bias.defined() ? grad_of(bias) : nullptr;
                       const ConstMatrixMap w(weight.data().data(),
                                              static_cast<Eigen::Index>(g.out_channels),
                                              static_cast<Eigen::Index>(rows));
                       std::vector<double> gw_parts(gw ? g.batch * g.out_channels * rows : 0, 0.0);
                       std::vector<double> gb_parts(gb ? g.batch * g.out_channels : 0, 0.0);
                       parallel_for(g.batch, [&](std::size_t n) {
                         // gradient w.r.t. the pre-scale GEMM output
                         std::vector<double> graw(self.grad.begin() + static_cast<std::ptrdiff_t>(n * g.out_sample()),
                                                  self.grad.begin() + static_cast<std::ptrdiff_t>((n + 1) * g.out_sample()));
                         const double* sc = plan->scale.empty() ? nullptr : plan->scale.data() + n * plane;
                         const unsigned char* act =
                             plan->active.empty() ? nullptr : plan->active.data() + n * plane;
                         if (gb)
                           for (std::size_t co = 0; co < g.out_channels; ++co) {
                             double acc = 0.0;
                             for (std::size_t p = 0; p < plane; ++p)
                               if (!act || act[p]) acc += graw[co * plane + p];
                             gb_parts[n * g.out_channels + co] = acc;
                           }
                         if (sc)
                           for (std::size_t co = 0; co < g.out_channels; ++co)
                             for (std::size_t p = 0; p < plane; ++p) graw[co * plane + p] *= sc[p];
                         const ConstMatrixMap gm(graw.data(), static_cast<Eigen::Index>(g.out_channels),
                                                 static_cast<Eigen::Index>(plane));
                         if (gw) {
                           std::vector<double> col(rows * plane);
                           im2col(input.data().data() + n * g.in_sample(), g, col.data());
                           MatrixMap(gw_parts.data() + n * g.out_channels * rows,
                                     static_cast<Eigen::Index>(g.out_channels),
                                     static_cast<Eigen::Index>(rows))
                               .noalias() = gm * ConstMatrixMap(col.data(), static_cast<Eigen::Index>(rows),
                                                                static_cast<Eigen::Index>(plane))
                                                     .transpose();
                         }
                         if (gx) {
                           std::vector<double> dcol(rows * plane);
                           MatrixMap(dcol.data(), static_cast<Eigen::Index>(rows),
                                     static_cast<Eigen::Index>(plane))
                               .noalias() = w.transpose() * gm;
                           col2im_accumulate(dcol.data(), g, gx + n * g.in_sample());
                         }
                       });
                       // fixed-order reduction over the batch
                       for (std::size_t n = 0; n < g.batch; ++n) {
                         if (gw)
                           for (std::size_t i = 0; i < g.out_channels * rows; ++i)
                             gw[i] += gw_parts[n * g.out_channels * rows + i];
                         if (gb)
                           for (std::size_t co = 0; co < g.out_channels; ++co)
                             gb[co] += gb_parts[n * g.out_channels + co];
                       }
                     });
}

}  // namespace detail

/// Plain 2-D convolution. `bias` may be an undefined Tensor.
inline Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                     int padding) {
  auto plan = std::make_shared<detail::ConvPlan>();
  plan->geom = detail::conv_geometry(input, weight, bias, stride, padding);
  check_finite(input, "conv2d input");
  return detail::conv_apply(input, weight, bias, std::move(plan));
}

struct PartialConvResult {
  Tensor output;        // [N,Cout,H',W']
  Tensor updated_mask;  // [N,1,H',W'], constant (never requires grad)
};

/// Partial convolution: at each output location the response is computed on
/// X*M only and rescaled by (window positions inside the frame) / sum(M), so
/// a fully valid window reduces to conv2d exactly. Windows with no valid
/// pixel output 0 (no bias) and mark the updated mask 0. The mask is not
/// part of the autodiff graph.
inline PartialConvResult partial_conv2d(const Tensor& input, const Tensor& mask, const Tensor& weight,
                                        const Tensor& bias, int stride, int padding) {
  auto plan = std::make_shared<detail::ConvPlan>();
  plan->geom = detail::conv_geometry(input, weight, bias, stride, padding);
  const auto& g = plan->geom;
  require(mask.rank() == 4 && mask.dim(0) == g.batch && mask.dim(1) == 1 && mask.dim(2) == g.height &&
              mask.dim(3) == g.width,
          "partial_conv2d mask must be [N,1,H,W] matching input, got " + shape_str(mask.shape()));
  for (double v : mask.data()) require(v == 0.0 || v == 1.0, "partial_conv2d mask must be binary");
  check_finite(input, "partial_conv2d input");

  const std::size_t plane = g.out_plane(), in_plane = g.height * g.width;
  plan->scale.assign(g.batch * plane, 0.0);
  plan->active.assign(g.batch * plane, 0);
  std::vector<double> updated(g.batch * plane, 0.0);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const double* m = mask.data().data() + n * in_plane;
    for (std::size_t oy = 0; oy < g.out_height; ++oy)
      for (std::size_t ox = 0; ox < g.out_width; ++ox) {
        std::size_t inside = 0;
        double valid = 0.0;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t kx = 0; kx < g.kernel; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            ++inside;
            valid += m[static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)];
          }
        }
        const std::size_t idx = n * plane + oy * g.out_width + ox;
        if (valid > 0.0) {
          plan->scale[idx] = static_cast<double>(inside) / valid;
          plan->active[idx] = 1;
          updated[idx] = 1.0;
        }
      }
  }

  // X*M; with an all-ones mask this is bit-identical to X
  Tensor masked = mul(input, mask);
  PartialConvResult result;
  result.output = detail::conv_apply(masked, weight, bias, plan);
  result.updated_mask = Tensor::from_data({g.batch, 1, g.out_height, g.out_width}, std::move(updated));
  return result;
}

/// Per-sample Gram matrices F F^T of [N,C,H,W] features viewed as [C, H*W]: [N,C,C].
inline Tensor gram_matrix(const Tensor& features) {
  require(features.rank() == 4, "gram_matrix expects [N,C,H,W], got " + shape_str(features.shape()));
  const std::size_t n = features.dim(0), c = features.dim(1), hw = features.dim(2) * features.dim(3);
  std::vector<double> out(n * c * c);
  for (std::size_t b = 0; b < n; ++b) {
    const detail::ConstMatrixMap f(features.data().data() + b * c * hw, static_cast<Eigen::Index>(c),
                                   static_cast<Eigen::Index>(hw));
    detail::MatrixMap(out.data() + b * c * c, static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c))
        .noalias() = f * f.transpose();
  }
  return detail::make_result({n, c, c}, std::move(out), {features},
                             [features, n, c, hw](detail::TensorImpl& self) {
                               double* gf = detail::grad_of(features);
                               if (!gf) return;
                               for (std::size_t b = 0; b < n; ++b) {
                                 const detail::ConstMatrixMap gg(self.grad.data() + b * c * c,
                                                                 static_cast<Eigen::Index>(c),
                                                                 static_cast<Eigen::Index>(c));
                                 const detail::ConstMatrixMap f(features.data().data() + b * c * hw,
                                                                static_cast<Eigen::Index>(c),
                                                                static_cast<Eigen::Index>(hw));
                                 detail::MatrixMap(gf + b * c * hw, static_cast<Eigen::Index>(c),
                                                   static_cast<Eigen::Index>(hw))
                                     .noalias() += (gg + gg.transpose()) * f;
                               }
                             });
}

}  // namespace sainet
