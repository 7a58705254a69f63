#include "support.hpp"

using namespace sainet;
using sainet::testing::gradient_error;
using sainet::testing::random_tensor;

namespace {

// Direct summation, no im2col.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const long n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const long co = w.dim(0), k = w.dim(2);
  const long oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  std::vector<double> out(n * co * oh * ow, 0.0);
  for (long s = 0; s < n; ++s)
    for (long o = 0; o < co; ++o)
      for (long oy = 0; oy < oh; ++oy)
        for (long ox = 0; ox < ow; ++ox) {
          double acc = b.defined() ? b[o] : 0.0;
          for (long c = 0; c < ci; ++c)
            for (long ky = 0; ky < k; ++ky)
              for (long kx = 0; kx < k; ++kx) {
                const long iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += w[((o * ci + c) * k + ky) * k + kx] * x[((s * ci + c) * h + iy) * wd + ix];
              }
          out[((s * co + o) * oh + oy) * ow + ox] = acc;
        }
  return out;
}

// Partial conv evaluated straight from its definition, in-frame window count as numerator.
std::pair<std::vector<double>, std::vector<double>> naive_pconv(const Tensor& x, const Tensor& m, const Tensor& w,
                                                                const Tensor& b, int stride, int pad) {
  const long n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const long co = w.dim(0), k = w.dim(2);
  const long oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  std::vector<double> out(n * co * oh * ow, 0.0), upd(n * oh * ow, 0.0);
  for (long s = 0; s < n; ++s)
    for (long oy = 0; oy < oh; ++oy)
      for (long ox = 0; ox < ow; ++ox) {
        double valid = 0, inside = 0;
        for (long ky = 0; ky < k; ++ky)
          for (long kx = 0; kx < k; ++kx) {
            const long iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
            inside += 1;
            valid += m[(s * h + iy) * wd + ix];
          }
        if (valid == 0) continue;
        upd[(s * oh + oy) * ow + ox] = 1;
        for (long o = 0; o < co; ++o) {
          double acc = 0;
          for (long c = 0; c < ci; ++c)
            for (long ky = 0; ky < k; ++ky)
              for (long kx = 0; kx < k; ++kx) {
                const long iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += w[((o * ci + c) * k + ky) * k + kx] * x[((s * ci + c) * h + iy) * wd + ix] *
                       m[(s * h + iy) * wd + ix];
              }
          out[((s * co + o) * oh + oy) * ow + ox] = acc * inside / valid + (b.defined() ? b[o] : 0.0);
        }
      }
  return {out, upd};
}

Tensor random_binary(Rng& rng, Shape shape, double p) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform() < p ? 1.0 : 0.0;
  return Tensor::from_data(std::move(shape), std::move(v));
}

}  // namespace

TEST(Conv2d, OnesGiveNine) {
  const auto x = Tensor::full({1, 1, 3, 3}, 1.0);
  const auto w = Tensor::full({1, 1, 3, 3}, 1.0);
  const auto b = Tensor::zeros({1});
  const auto y = conv2d(x, w, b, 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 9.0);
}

TEST(Conv2d, PaddedCornerIsFour) {
  const auto x = Tensor::full({1, 1, 3, 3}, 1.0);
  const auto w = Tensor::full({1, 1, 3, 3}, 1.0);
  const auto y = conv2d(x, w, Tensor::zeros({1}), 1, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_EQ(y[0], 4.0);
  EXPECT_EQ(y[4], 9.0);
  EXPECT_EQ(y.vec(), naive_conv(x, w, Tensor::zeros({1}), 1, 1));
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  const auto x = random_tensor(rng, {2, 1, 5, 4}, -1, 1, false);
  const auto y = conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0), Tensor::zeros({1}), 1, 0);
  EXPECT_EQ(y.vec(), x.vec());
}

TEST(Conv2d, MatchesDirectSummation) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int stride = 1 + static_cast<int>(rng.uniform_int(0, 1));
    const int k = rng.uniform() < 0.5 ? 3 : 1;
    const int pad = static_cast<int>(rng.uniform_int(0, k / 2));
    const auto x = random_tensor(rng, {2, 3, 6, 5}, -1, 1, false);
    const auto w = random_tensor(rng, {4, 3, static_cast<std::size_t>(k), static_cast<std::size_t>(k)}, -1, 1, false);
    const auto b = random_tensor(rng, {4}, -1, 1, false);
    const auto y = conv2d(x, w, b, stride, pad);
    const auto ref = naive_conv(x, w, b, stride, pad);
    ASSERT_EQ(y.numel(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
  }
}

TEST(Conv2d, Linearity) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_tensor(rng, {1, 2, 7, 7}, -1, 1, false);
    const auto y = random_tensor(rng, {1, 2, 7, 7}, -1, 1, false);
    const auto w = random_tensor(rng, {3, 2, 3, 3}, -1, 1, false);
    const Tensor none;
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const auto lhs = conv2d(add(scale(x, a), scale(y, b)), w, none, 1, 1);
    const auto rhs = add(scale(conv2d(x, w, none, 1, 1), a), scale(conv2d(y, w, none, 1, 1), b));
    for (std::size_t i = 0; i < lhs.numel(); ++i)
      EXPECT_LE(std::abs(lhs[i] - rhs[i]), 1e-10 * std::max(1.0, std::abs(rhs[i])));
  }
}

TEST(Conv2d, Errors) {
  const auto x = Tensor::zeros({1, 2, 4, 4});
  EXPECT_THROW(conv2d(x, Tensor::zeros({1, 3, 3, 3}), Tensor(), 1, 1), ContractViolation);
  EXPECT_THROW(conv2d(x, Tensor::zeros({1, 2, 2, 2}), Tensor(), 1, 0), ContractViolation);
  EXPECT_THROW(conv2d(x, Tensor::zeros({1, 2, 3, 3}), Tensor(), 0, 0), ContractViolation);
  EXPECT_THROW(conv2d(x, Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({2}), 1, 0), ContractViolation);
  auto bad = Tensor::zeros({1, 2, 4, 4});
  bad.mutable_data()[3] = std::nan("");
  EXPECT_THROW(conv2d(bad, Tensor::zeros({1, 2, 3, 3}), Tensor(), 1, 1), NumericError);
}

TEST(Conv2d, GradientCheck) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int stride = 1 + static_cast<int>(rng.uniform_int(0, 1));
    const int pad = static_cast<int>(rng.uniform_int(0, 1));
    auto x = random_tensor(rng, {2, 2, 5, 6});
    auto w = random_tensor(rng, {3, 2, 3, 3});
    auto b = random_tensor(rng, {3});
    auto probe = random_tensor(rng, {2, 3, (5 + 2 * pad - 3) / stride + 1u, (6 + 2 * pad - 3) / stride + 1u}, -1, 1, false);
    const double err = gradient_error(
        [&](const std::vector<Tensor>& t) { return sum(mul(conv2d(t[0], t[1], t[2], stride, pad), probe)); },
        {x, w, b});
    EXPECT_LT(err, 1e-4) << "trial " << trial;
  }
}

TEST(PartialConv, FullMaskOnesGiveNine) {
  const auto r = partial_conv2d(Tensor::full({1, 1, 5, 5}, 1.0), Tensor::full({1, 1, 5, 5}, 1.0),
                                Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1}), 1, 0);
  ASSERT_EQ(r.output.shape(), (Shape{1, 1, 3, 3}));
  for (double v : r.output.data()) EXPECT_EQ(v, 9.0);
  for (double v : r.updated_mask.data()) EXPECT_EQ(v, 1.0);
}

TEST(PartialConv, ThreeOfNineValidRenormalises) {
  std::vector<double> m(9, 0.0);
  m[0] = m[4] = m[8] = 1.0;
  const auto r = partial_conv2d(Tensor::full({1, 1, 3, 3}, 1.0), Tensor::from_data({1, 1, 3, 3}, m),
                                Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1}), 1, 0);
  EXPECT_DOUBLE_EQ(r.output[0], 9.0);
}

TEST(PartialConv, HoleGivesZeroAndClearsMask) {
  const auto r = partial_conv2d(Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1, 1, 3, 3}),
                                Tensor::full({1, 1, 3, 3}, 1.0), Tensor::full({1}, 0.5), 1, 0);
  EXPECT_EQ(r.output[0], 0.0);
  EXPECT_EQ(r.updated_mask[0], 0.0);
}

TEST(PartialConv, NonBinaryMaskRejected) {
  EXPECT_THROW(partial_conv2d(Tensor::zeros({1, 1, 3, 3}), Tensor::full({1, 1, 3, 3}, 0.5),
                              Tensor::zeros({1, 1, 3, 3}), Tensor(), 1, 0),
               ContractViolation);
}

TEST(PartialConv, FullMaskBitwiseEqualsConv) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int stride = 1 + static_cast<int>(rng.uniform_int(0, 1));
    const int pad = static_cast<int>(rng.uniform_int(0, 1));
    const auto x = random_tensor(rng, {2, 3, 8, 8}, -1, 1, false);
    const auto w = random_tensor(rng, {4, 3, 3, 3}, -1, 1, false);
    const auto b = random_tensor(rng, {4}, -1, 1, false);
    const auto p = partial_conv2d(x, Tensor::full({2, 1, 8, 8}, 1.0), w, b, stride, pad);
    EXPECT_EQ(p.output.vec(), conv2d(x, w, b, stride, pad).vec());
  }
}

TEST(PartialConv, ConstantInputGivesConstantTimesKSquared) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const double c = rng.uniform(-3, 3);
    const auto m = random_binary(rng, {1, 1, 9, 9}, rng.uniform(0.05, 0.9));
    const auto r = partial_conv2d(Tensor::full({1, 1, 9, 9}, c), m, Tensor::full({1, 1, 3, 3}, 1.0), Tensor(), 1, 0);
    for (std::size_t i = 0; i < r.output.numel(); ++i)
      if (r.updated_mask[i] == 1.0) EXPECT_NEAR(r.output[i], 9.0 * c, 1e-12);
  }
}

TEST(PartialConv, MatchesDefinition) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int stride = 1 + static_cast<int>(rng.uniform_int(0, 1));
    const int pad = static_cast<int>(rng.uniform_int(0, 1));
    const auto x = random_tensor(rng, {2, 2, 6, 7}, -1, 1, false);
    const auto m = random_binary(rng, {2, 1, 6, 7}, rng.uniform(0.0, 1.0));
    const auto w = random_tensor(rng, {3, 2, 3, 3}, -1, 1, false);
    const auto b = random_tensor(rng, {3}, -1, 1, false);
    const auto r = partial_conv2d(x, m, w, b, stride, pad);
    const auto [ref, upd] = naive_pconv(x, m, w, b, stride, pad);
    ASSERT_EQ(r.output.numel(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(r.output[i], ref[i], 1e-12);
    EXPECT_EQ(r.updated_mask.vec(), upd);
  }
}

TEST(PartialConv, MaskIsNotDifferentiated) {
  Rng rng(8);
  auto x = random_tensor(rng, {1, 1, 4, 4});
  auto m = Tensor::full({1, 1, 4, 4}, 1.0, true);
  const auto r = partial_conv2d(x, m, random_tensor(rng, {1, 1, 3, 3}, -1, 1, false), Tensor(), 1, 1);
  EXPECT_FALSE(r.updated_mask.requires_grad());
  backward(sum(r.output));
  EXPECT_TRUE(x.has_grad());
}

TEST(PartialConv, GradientCheck) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const int stride = 1 + static_cast<int>(rng.uniform_int(0, 1));
    const int pad = static_cast<int>(rng.uniform_int(0, 1));
    auto x = random_tensor(rng, {2, 2, 6, 5});
    auto w = random_tensor(rng, {3, 2, 3, 3});
    auto b = random_tensor(rng, {3});
    const auto m = random_binary(rng, {2, 1, 6, 5}, 0.6);
    const double err = gradient_error(
        [&](const std::vector<Tensor>& t) {
          const auto y = partial_conv2d(t[0], m, t[1], t[2], stride, pad).output;
          return sum(mul(y, y));
        },
        {x, w, b});
    EXPECT_LT(err, 1e-4) << "trial " << trial;
  }
}

TEST(Gram, ValuesAndGradient) {
  // 2 channels over a 2x2 plane
  const auto f = Tensor::from_data({1, 2, 2, 2}, {1, 2, 3, 4, 0, 1, 0, 1});
  EXPECT_EQ(gram_matrix(f).vec(), (std::vector<double>{30, 6, 6, 2}));
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = random_tensor(rng, {2, 3, 2, 3});
    auto p = random_tensor(rng, {2, 3, 3}, -1, 1, false);
    EXPECT_LT(gradient_error([&](const auto& t) { return sum(mul(gram_matrix(t[0]), p)); }, {g}), 1e-4);
  }
}
