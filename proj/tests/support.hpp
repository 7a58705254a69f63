#pragma once

#include <gtest/gtest.h>

#include <random>

#include "sainet/sainet.hpp"

namespace sainet::testing {

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0, bool grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(v), grad);
}

inline ImageBuffer random_image(Rng& rng, int h, int w, int c) {
  ImageBuffer img(h, w, c);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

inline Mask random_mask(Rng& rng, int h, int w, double p) {
  Mask m(h, w);
  for (auto& v : m.data) v = rng.uniform() < p ? 1 : 0;
  return m;
}

/// Largest norm-wise relative error between the analytic gradient of
/// f(inputs) and central differences, over all inputs.
inline double gradient_error(const std::function<Tensor(const std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
                             double h = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  Tensor out = f(inputs);
  backward(out);
  double worst = 0.0;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    std::vector<double> numeric(t.numel());
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      double plus, minus;
      {
        NoGradGuard guard;
        data[i] = keep + h;
        plus = f(inputs).item();
        data[i] = keep - h;
        minus = f(inputs).item();
      }
      data[i] = keep;
      numeric[i] = (plus - minus) / (2 * h);
    }
    double diff = 0.0, ref = 0.0, an = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      ref += numeric[i] * numeric[i];
      an += analytic[i] * analytic[i];
    }
    const double scale = std::max({std::sqrt(ref), std::sqrt(an), 1e-8});
    worst = std::max(worst, std::sqrt(diff) / scale);
  }
  return worst;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sainet_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace sainet::testing
