#include <opencv2/imgproc.hpp>

#include "support.hpp"

using namespace sainet;
using sainet::testing::random_image;

namespace {

ImageBuffer vertical_step(int size = 16) {
  ImageBuffer img(size, size, 1);
  for (int y = 0; y < size; ++y)
    for (int x = size / 2; x < size; ++x) img.at(y, x) = 1.0;
  return img;
}

cv::Mat to_mat(const ImageBuffer& img) {
  cv::Mat m(img.height, img.width, CV_64FC(img.channels));
  std::copy(img.data.begin(), img.data.end(), m.ptr<double>());
  return m;
}

// OpenCV pipeline with matching blur and gradient scale; gradients are
// quantised to int16 at 1e3 per unit, thresholds scaled to match.
ImageBuffer opencv_canny(const ImageBuffer& gray, const CannyParams& p) {
  cv::Mat src = to_mat(gray), blurred, gx, gy;
  const int radius = static_cast<int>(std::ceil(3.0 * p.sigma));
  cv::GaussianBlur(src, blurred, cv::Size(2 * radius + 1, 2 * radius + 1), p.sigma, p.sigma, cv::BORDER_REPLICATE);
  cv::Sobel(blurred, gx, CV_64F, 1, 0, 3, 250.0, 0, cv::BORDER_REPLICATE);
  cv::Sobel(blurred, gy, CV_64F, 0, 1, 3, 250.0, 0, cv::BORDER_REPLICATE);
  cv::Mat dx, dy, edges;
  gx.convertTo(dx, CV_16S);
  gy.convertTo(dy, CV_16S);
  cv::Canny(dx, dy, edges, p.low_threshold * 1000.0, p.high_threshold * 1000.0, true);
  ImageBuffer out(gray.height, gray.width, 1);
  for (int y = 0; y < gray.height; ++y)
    for (int x = 0; x < gray.width; ++x) out.at(y, x) = edges.at<unsigned char>(y, x) ? 1.0 : 0.0;
  return out;
}

// SSIM via OpenCV filtering over the valid region.
double opencv_ssim(const ImageBuffer& a, const ImageBuffer& b) {
  double total = 0.0;
  std::vector<cv::Mat> ca, cb;
  cv::split(to_mat(a), ca);
  cv::split(to_mat(b), cb);
  for (std::size_t c = 0; c < ca.size(); ++c) {
    const cv::Mat& x = ca[c];
    const cv::Mat& y = cb[c];
    auto blur = [](const cv::Mat& m) {
      cv::Mat k = cv::getGaussianKernel(11, 1.5, CV_64F), out;
      cv::sepFilter2D(m, out, CV_64F, k, k, cv::Point(-1, -1), 0, cv::BORDER_CONSTANT);
      return out(cv::Rect(5, 5, m.cols - 10, m.rows - 10)).clone();
    };
    const cv::Mat mx = blur(x), my = blur(y);
    const cv::Mat sxx = blur(x.mul(x)) - mx.mul(mx), syy = blur(y.mul(y)) - my.mul(my),
                  sxy = blur(x.mul(y)) - mx.mul(my);
    const double c1 = 1e-4, c2 = 9e-4;
    cv::Mat num = (2 * mx.mul(my) + c1).mul(2 * sxy + c2);
    cv::Mat den = (mx.mul(mx) + my.mul(my) + c1).mul(sxx + syy + c2);
    cv::Mat map;
    cv::divide(num, den, map);
    total += cv::mean(map)[0];
  }
  return total / static_cast<double>(ca.size());
}

}  // namespace

TEST(Canny, BlackImageHasNoEdges) {
  const auto e = canny(ImageBuffer(16, 16, 3));
  for (double v : e.data) EXPECT_EQ(v, 0.0);
}

TEST(Canny, VerticalStepGivesOneColumn) {
  const auto e = canny(vertical_step());
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) EXPECT_EQ(e.at(y, x), x == 7 ? 1.0 : 0.0) << y << "," << x;
}

TEST(Canny, StepMatchesOpenCV) {
  const CannyParams p;
  EXPECT_EQ(canny(vertical_step(), p).data, opencv_canny(vertical_step(), p).data);
  ImageBuffer horizontal(20, 12, 1);
  for (int y = 9; y < 20; ++y)
    for (int x = 0; x < 12; ++x) horizontal.at(y, x) = 0.8;
  EXPECT_EQ(canny(horizontal, p).data, opencv_canny(horizontal, p).data);
}

TEST(Canny, InverseOfSymmetricStepHasSameEdges) {
  ImageBuffer inv = vertical_step();
  for (double& v : inv.data) v = 1.0 - v;
  EXPECT_EQ(canny(inv).data, canny(vertical_step()).data);
}

TEST(Canny, BinaryAndShiftInvariant) {
  ImageBuffer img(24, 24, 1, 0.1);
  for (int y = 5; y < 15; ++y)
    for (int x = 4; x < 18; ++x) img.at(y, x) = 0.6;
  for (int y = 12; y < 22; ++y)
    for (int x = 10; x < 20; ++x) img.at(y, x) = 0.35;
  ImageBuffer shifted = img;
  for (double& v : shifted.data) v += 0.25;
  const auto e = canny(img);
  for (double v : e.data) EXPECT_TRUE(v == 0.0 || v == 1.0);
  EXPECT_GT(std::count(e.data.begin(), e.data.end(), 1.0), 0);
  EXPECT_EQ(canny(shifted).data, e.data);
}

TEST(Canny, ThresholdOrderChecked) {
  EXPECT_THROW(canny(vertical_step(), {0.3, 0.2, 1.0}), ContractViolation);
  EXPECT_THROW(canny(vertical_step(), {0.0, 0.2, 1.0}), ContractViolation);
  EXPECT_THROW(canny(vertical_step(), {0.1, 0.2, 0.0}), ContractViolation);
}

TEST(Warp, ZeroDisparityIsIdentity) {
  Rng rng(1);
  const auto img = random_image(rng, 9, 11, 3);
  for (auto dir : {WarpDirection::left_to_right, WarpDirection::right_to_left}) {
    const auto r = warp_by_disparity(img, DisparityMap(9, 11, 0.0), dir);
    EXPECT_EQ(r.image, img);
    EXPECT_EQ(r.valid.count(), 99u);
  }
}

TEST(Warp, ConstantDisparityTranslates) {
  Rng rng(2);
  const auto img = random_image(rng, 8, 20, 1);
  const auto r = warp_by_disparity(img, DisparityMap(8, 20, 5.0), WarpDirection::left_to_right);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 20; ++x) {
      if (x < 15) {
        EXPECT_EQ(r.valid.at(y, x), 1);
        EXPECT_EQ(r.image.at(y, x), img.at(y, x + 5));
      } else {
        EXPECT_EQ(r.valid.at(y, x), 0);
      }
    }
}

TEST(Warp, GroundTruthWarpReproducesOtherView) {
  Rng rng(3);
  const int d = 4;
  const auto left = random_image(rng, 10, 24, 3);
  ImageBuffer right(10, 24, 3);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 24; ++x)
      for (int c = 0; c < 3; ++c) right.at(y, x, c) = x + d < 24 ? left.at(y, x + d, c) : 0.0;
  const auto r = warp_by_disparity(right, DisparityMap(10, 24, d), WarpDirection::right_to_left);
  std::size_t checked = 0;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 24; ++x) {
      if (!r.valid.at(y, x)) continue;
      ++checked;
      for (int c = 0; c < 3; ++c) EXPECT_LT(std::abs(r.image.at(y, x, c) - left.at(y, x, c)), 1e-6);
    }
  EXPECT_EQ(checked, 10u * (24 - d));
}

TEST(Warp, RoundTripRecoversImage) {
  Rng rng(4);
  const auto img = random_image(rng, 6, 30, 3);
  for (double d : {3.0, 5.0, 11.0}) {
    const DisparityMap disp(6, 30, d);
    const auto there = warp_by_disparity(img, disp, WarpDirection::left_to_right);
    const auto back = warp_by_disparity(there.image, disp, WarpDirection::right_to_left);
    std::size_t checked = 0;
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 30; ++x) {
        if (!back.valid.at(y, x) || !there.valid.at(y, x - static_cast<int>(d))) continue;
        ++checked;
        for (int c = 0; c < 3; ++c) EXPECT_LT(std::abs(back.image.at(y, x, c) - img.at(y, x, c)), 1e-6);
      }
    EXPECT_EQ(checked, 6u * (30 - static_cast<std::size_t>(d)));
  }
}

TEST(Warp, InvalidDisparityIsSkipped) {
  DisparityMap disp(4, 4, 1.0);
  disp.valid[5] = 0;
  const auto r = warp_by_disparity(ImageBuffer(4, 4, 1, 0.5), disp, WarpDirection::right_to_left);
  EXPECT_EQ(r.valid.data[5], 0);
  EXPECT_EQ(r.valid.data[6], 1);
}

TEST(Warp, SizeMismatchRejected) {
  EXPECT_THROW(warp_by_disparity(ImageBuffer(4, 4, 1), DisparityMap(4, 5), WarpDirection::left_to_right),
               ContractViolation);
}

TEST(Warp, MaskStaysBinary) {
  Rng rng(5);
  const auto m = sainet::testing::random_mask(rng, 8, 8, 0.5);
  const auto r = warp_mask(m, DisparityMap(8, 8, 1.5), WarpDirection::right_to_left);
  for (double v : r.image.data) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(Patch, SizeOneIsPixel) {
  Rng rng(6);
  const auto img = random_image(rng, 5, 5, 3);
  const auto p = extract_patch(img, 2, 3, 1);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(p.values[c], img.at(3, 2, c));
}

TEST(Patch, CornerIsZeroFilled) {
  const auto p = extract_patch(ImageBuffer(5, 5, 1, 1.0), 0, 0, 3);
  EXPECT_EQ(std::count(p.in_frame.begin(), p.in_frame.end(), 0), 5);
  EXPECT_EQ(std::count(p.values.data().begin(), p.values.data().end(), 0.0), 5);
}

TEST(Patch, InteriorIsSubArray) {
  Rng rng(7);
  const auto img = random_image(rng, 9, 9, 3);
  const auto p = extract_patch(img, 4, 5, 5);
  for (int v = 0; v < 5; ++v)
    for (int u = 0; u < 5; ++u)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(p.values[(v * 5 + u) * 3 + c], img.at(3 + v, 2 + u, c));
  EXPECT_THROW(extract_patch(img, 4, 4, 4), ContractViolation);
}

TEST(Psnr, Values) {
  Rng rng(8);
  const auto a = random_image(rng, 8, 8, 3);
  EXPECT_EQ(psnr(a, a), kPsnrIdentical);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  ImageBuffer z(10, 10, 1, 0.0), p1(10, 10, 1, 0.1), p01(10, 10, 1, 0.01);
  EXPECT_NEAR(psnr(z, p1), 20.0, 1e-9);
  EXPECT_NEAR(psnr(z, p01), 40.0, 1e-9);
  EXPECT_THROW(psnr(z, ImageBuffer(10, 10, 3)), ContractViolation);
}

TEST(Psnr, Symmetric) {
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const auto a = random_image(rng, 12, 12, 3), b = random_image(rng, 12, 12, 3);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
  }
}

TEST(Ssim, IdenticalIsOne) {
  Rng rng(10);
  const auto a = random_image(rng, 16, 16, 3);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, NegativeBelowOne) {
  ImageBuffer a(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) a.at(y, x) = ((x / 2 + y / 2) % 2) ? 0.8 : 0.2;
  ImageBuffer b = a;
  for (double& v : b.data) v = 1.0 - v;
  EXPECT_LT(ssim(a, b), 1.0);
}

TEST(Ssim, MatchesOpenCVReference) {
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const int c = i % 2 ? 3 : 1;
    const auto a = random_image(rng, 14 + i, 20, c);
    auto b = a;
    for (double& v : b.data) v = std::clamp(v + rng.uniform(-0.3, 0.3), 0.0, 1.0);
    EXPECT_NEAR(ssim(a, b), opencv_ssim(a, b), 1e-4);
    const auto r = random_image(rng, 14 + i, 20, c);
    EXPECT_NEAR(ssim(a, r), opencv_ssim(a, r), 1e-4);
    EXPECT_NEAR(ssim(a, r), ssim(r, a), 1e-10);
  }
}

TEST(Ssim, TooSmallRejected) {
  EXPECT_THROW(ssim(ImageBuffer(10, 16, 1), ImageBuffer(10, 16, 1)), ContractViolation);
}
