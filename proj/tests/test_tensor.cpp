#include "support.hpp"

using namespace sainet;
using sainet::testing::gradient_error;
using sainet::testing::random_tensor;

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor::from_data({2, 2}, {1, 2, 3}), ContractViolation);
  const auto t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.dim(1), 3u);
}

TEST(Tensor, L1NormExample) {
  EXPECT_DOUBLE_EQ(l1_norm(Tensor::from_data({2, 2}, {1, -2, 3, -4})).item(), 10.0);
}

TEST(Tensor, FrobeniusNormExample) { EXPECT_DOUBLE_EQ(frobenius_norm(Tensor::from_data({1, 2}, {3, 4})).item(), 5.0); }

TEST(Tensor, UpsampleReplicates) {
  const auto up = upsample_nearest_2x(Tensor::from_data({1, 1, 1, 1}, {7}));
  ASSERT_EQ(up.shape(), (Shape{1, 1, 2, 2}));
  for (double v : up.data()) EXPECT_EQ(v, 7.0);
}

TEST(Tensor, ElementwiseValues) {
  const auto a = Tensor::from_data({3}, {1, -2, 3});
  const auto b = Tensor::from_data({3}, {4, 5, -6});
  EXPECT_EQ(add(a, b).vec(), (std::vector<double>{5, 3, -3}));
  EXPECT_EQ(sub(a, b).vec(), (std::vector<double>{-3, -7, 9}));
  EXPECT_EQ(mul(a, b).vec(), (std::vector<double>{4, -10, -18}));
  EXPECT_EQ(abs(a).vec(), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(relu(a).vec(), (std::vector<double>{1, 0, 3}));
  EXPECT_EQ(leaky_relu(a, 0.5).vec(), (std::vector<double>{1, -1, 3}));
  EXPECT_DOUBLE_EQ(sum(a).item(), 2.0);
  EXPECT_DOUBLE_EQ(mean(a).item(), 2.0 / 3.0);
}

TEST(Tensor, MatmulValues) {
  const auto a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto b = Tensor::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
  EXPECT_EQ(matmul(a, b).vec(), (std::vector<double>{58, 64, 139, 154}));
  EXPECT_THROW(matmul(a, a), ContractViolation);
}

TEST(Tensor, ConcatChannels) {
  const auto a = Tensor::from_data({1, 1, 1, 2}, {1, 2});
  const auto b = Tensor::from_data({1, 2, 1, 2}, {3, 4, 5, 6});
  EXPECT_EQ(concat_channels({a, b}).vec(), (std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_THROW(concat_channels({a, Tensor::zeros({1, 1, 2, 2})}), ContractViolation);
}

TEST(Tensor, ShapeMismatchIsContractViolation) {
  EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ContractViolation);
  EXPECT_THROW(mul(Tensor::zeros({2}), Tensor::zeros({3})), ContractViolation);
}

TEST(Backward, SumGivesOnes) {
  auto x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareExample) {
  auto x = Tensor::from_data({2}, {2, 3}, true);
  backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad()[0], 4.0);
  EXPECT_EQ(x.grad()[1], 6.0);
}

TEST(Backward, RepeatedCallsAccumulate) {
  auto x = Tensor::from_data({2}, {2, 3}, true);
  backward(sum(mul(x, x)));
  backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad()[0], 8.0);
  x.zero_grad();
  backward(sum(x));
  EXPECT_EQ(x.grad()[1], 1.0);
}

TEST(Backward, NonScalarLossRejected) {
  auto x = Tensor::from_data({2}, {2, 3}, true);
  EXPECT_THROW(backward(mul(x, x)), ContractViolation);
}

TEST(Backward, NonFiniteLossIsNumericError) {
  auto x = Tensor::from_data({1}, {0.0}, true);
  EXPECT_THROW(backward(sum(div(Tensor::from_data({1}, {1.0}), x))), NumericError);
}

TEST(Backward, SharedSubgraphCountsTwice) {
  auto x = Tensor::from_data({1}, {3.0}, true);
  auto y = mul(x, x);
  backward(sum(add(y, y)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

// 100 random small fixtures per op against central differences.
class OpGradient : public ::testing::TestWithParam<std::string> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const std::string op = GetParam();
  Rng rng(std::hash<std::string>{}(op));
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t r = 1 + rng.uniform_int(0, 2), c = 1 + rng.uniform_int(0, 3);
    auto a = random_tensor(rng, {r, c});
    auto b = random_tensor(rng, {r, c});
    // keep kinks and poles away from the evaluation points
    for (auto& v : a.mutable_data())
      if (std::abs(v) < 0.05) v += 0.1;
    for (auto& v : b.mutable_data()) v = v < 0 ? v - 0.5 : v + 0.5;
    std::function<Tensor(const std::vector<Tensor>&)> f;
    if (op == "add") f = [](const auto& t) { return sum(mul(add(t[0], t[1]), t[0])); };
    if (op == "sub") f = [](const auto& t) { return sum(mul(sub(t[0], t[1]), t[1])); };
    if (op == "mul") f = [](const auto& t) { return sum(mul(t[0], t[1])); };
    if (op == "div") f = [](const auto& t) { return sum(div(t[0], t[1])); };
    if (op == "abs") f = [](const auto& t) { return sum(mul(abs(t[0]), t[1])); };
    if (op == "relu") f = [](const auto& t) { return sum(mul(relu(t[0]), t[1])); };
    if (op == "leaky_relu") f = [](const auto& t) { return sum(mul(leaky_relu(t[0], 0.2), t[1])); };
    if (op == "sigmoid") f = [](const auto& t) { return sum(mul(sigmoid(t[0]), t[1])); };
    if (op == "sum") f = [](const auto& t) { return mul(sum(t[0]), sum(t[1])); };
    if (op == "mean") f = [](const auto& t) { return mul(mean(t[0]), mean(t[1])); };
    if (op == "l1_norm") f = [](const auto& t) { return l1_norm(mul(t[0], t[1])); };
    if (op == "frobenius_norm") f = [](const auto& t) { return frobenius_norm(add(t[0], t[1])); };
    if (op == "matmul") f = [](const auto& t) { return sum(mul(matmul(t[0], transpose2d(t[1])), matmul(t[0], transpose2d(t[1])))); };
    if (op == "clamp_min") f = [](const auto& t) { return sum(mul(clamp_min(t[0], 0.0), t[1])); };
    if (op == "scale") f = [](const auto& t) { return sum(mul(scale(t[0], -2.5), add_scalar(t[1], 0.3))); };
    if (op == "one_minus") f = [](const auto& t) { return sum(mul(one_minus(t[0]), t[1])); };
    if (op == "upsample") {
      a = random_tensor(rng, {1, 2, r, c});
      b = random_tensor(rng, {1, 2, 2 * r, 2 * c});
      f = [](const auto& t) { return sum(mul(upsample_nearest_2x(t[0]), t[1])); };
    }
    if (op == "concat") {
      a = random_tensor(rng, {1, 2, r, c});
      b = random_tensor(rng, {1, 1, r, c});
      f = [](const auto& t) {
        auto x = concat_channels({t[0], t[1]});
        return sum(mul(x, x));
      };
    }
    if (op == "slice") {
      a = random_tensor(rng, {2, 3, r, c});
      f = [](const auto& t) { return sum(mul(slice_channels(t[0], 1, 3), slice_channels(t[0], 0, 2))); };
    }
    if (op == "weighted_sum") f = [](const auto& t) { return weighted_sum({sum(mul(t[0], t[0])), l1_norm(t[1])}, {0.7, 2.0}); };
    if (op == "reshape") f = [](const auto& t) { return sum(mul(reshape(t[0], {t[0].numel()}), reshape(t[1], {t[1].numel()}))); };
    if (op == "broadcast") {
      a = random_tensor(rng, {1, 3, r, c});
      b = random_tensor(rng, {1, 1, r, c});
      f = [](const auto& t) { return sum(mul(mul(t[0], t[1]), t[0])); };
    }
    ASSERT_TRUE(f) << op;
    EXPECT_LT(gradient_error(f, {a, b}), 1e-4) << op << " trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient,
                         ::testing::Values("add", "sub", "mul", "div", "abs", "relu", "leaky_relu", "sigmoid", "sum",
                                           "mean", "l1_norm", "frobenius_norm", "matmul", "clamp_min", "scale",
                                           "one_minus", "upsample", "concat", "slice", "weighted_sum", "reshape",
                                           "broadcast"));

TEST(Adam, FirstStepExample) {
  auto p = Tensor::from_data({1}, {0.0}, true);
  backward(sum(p));
  std::vector<Tensor> params{p};
  AdamState st;
  st.lr = 0.1;
  adam_step(params, st);
  EXPECT_LT(std::abs(p[0] + 0.1), 1e-6);
  EXPECT_EQ(st.step_count, 1u);
}

TEST(Adam, ZeroGradientIsNoOp) {
  Rng rng(3);
  auto p = random_tensor(rng, {4, 3});
  const auto before = p.vec();
  backward(scale(sum(p), 0.0));
  std::vector<Tensor> params{p};
  AdamState st;
  for (int i = 0; i < 5; ++i) adam_step(params, st);
  EXPECT_EQ(p.vec(), before);
  EXPECT_EQ(st.step_count, 5u);
}

TEST(Adam, TwoStepsCountTwo) {
  auto p = Tensor::from_data({2}, {1.0, 2.0}, true);
  backward(sum(p));
  std::vector<Tensor> params{p};
  AdamState st;
  adam_step(params, st);
  adam_step(params, st);
  EXPECT_EQ(st.step_count, 2u);
  EXPECT_TRUE(p.has_grad());  // gradients are left for the caller
}

TEST(Adam, MissingGradientRejected) {
  auto p = Tensor::from_data({2}, {1.0, 2.0}, true);
  std::vector<Tensor> params{p};
  AdamState st;
  EXPECT_THROW(adam_step(params, st), ContractViolation);
}

TEST(Threads, ParallelForCoversEveryIndexOnce) {
  set_thread_count(4);
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  set_thread_count(0);
  for (int h : hits) EXPECT_EQ(h, 1);
}
