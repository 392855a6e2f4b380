#include <gtest/gtest.h>

#include <cmath>

#include "audiosr/diffgraph.hpp"
#include "oracles.hpp"

using namespace audiosr;
using namespace audiosr::dg;

namespace {

constexpr double kSmoothTol = 1e-6;
constexpr double kKinkTol = 1e-4;

/// Fixed random projection so every output element influences the loss.
Tensor project(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum_all(mul(y, oracle::random_tensor(rng, y.shape(), -1.0, 1.0, false)));
}

/// Values bounded away from zero so piecewise-linear ops stay off kinks.
Tensor off_kink_tensor(Rng& rng, Shape shape) {
  auto t = oracle::random_tensor(rng, shape, 0.2, 1.0);
  for (double& v : t.mutable_data()) {
    if (rng.uniform() < 0.5) v = -v;
  }
  return t;
}

}  // namespace

TEST(Conv1d, IdentityKernel) {
  Tensor x({1, 1, 4}, {1, -2, 3, 0.5});
  Tensor w({1, 1, 1}, {1.0});
  Tensor b({1}, {0.0});
  EXPECT_EQ(conv1d(x, w, b).values(), x.values());
}

TEST(Conv1d, AllOnesKernelSamePadding) {
  Tensor x({1, 1, 3}, {1, 2, 3});
  Tensor w({1, 1, 3}, {1, 1, 1});
  EXPECT_EQ(conv1d(x, w, Tensor::zeros({1})).values(), (std::vector<double>{3, 6, 5}));
}

TEST(Conv1d, StrideTwoSameLength) {
  auto y = conv1d(Tensor::zeros({1, 1, 5}), Tensor::zeros({1, 1, 3}), Tensor(), 2);
  EXPECT_EQ(y.dim(2), 3u);
  // even length with extra padding on the right
  EXPECT_EQ(conv1d(Tensor::zeros({1, 1, 8}), Tensor::zeros({1, 1, 9}), Tensor(), 2).dim(2), 4u);
}

TEST(Conv1d, ValidPadding) {
  Tensor x({1, 1, 5}, {1, 2, 3, 4, 5});
  Tensor w({1, 1, 3}, {1, 0, -1});
  EXPECT_EQ(conv1d(x, w, Tensor(), 1, Padding::valid).values(), (std::vector<double>{-2, -2, -2}));
}

TEST(Conv1d, RejectsChannelMismatch) {
  EXPECT_THROW(conv1d(Tensor::zeros({1, 2, 4}), Tensor::zeros({1, 3, 3}), Tensor()), InvalidArgument);
  EXPECT_THROW(conv1d(Tensor::zeros({1, 1, 4}), Tensor::zeros({1, 1, 4}), Tensor()), InvalidArgument);
}

TEST(Shuffle, InterleavesChannels) {
  // ch0 = [a, b], ch1 = [c, d] -> [a, c, b, d]
  Tensor x({1, 2, 2}, {1, 2, 3, 4});
  auto y = subpixel_shuffle1d(x, 2);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 4}));
  EXPECT_EQ(y.values(), (std::vector<double>{1, 3, 2, 4}));
}

TEST(Shuffle, ShapeContractAndBijection) {
  Rng rng(3);
  auto x = oracle::random_tensor(rng, {2, 12, 7}, -1, 1, false);
  auto y = subpixel_shuffle1d(x, 2);
  EXPECT_EQ(y.shape(), (Shape{2, 6, 14}));
  EXPECT_EQ(subpixel_unshuffle1d(y, 2).values(), x.values());
  EXPECT_EQ(subpixel_shuffle1d(subpixel_unshuffle1d(y, 7), 7).values(), y.values());
  EXPECT_THROW(subpixel_shuffle1d(Tensor::zeros({1, 3, 2}), 2), InvalidArgument);
}

TEST(Shuffle, RandomBijectionProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t r = static_cast<std::size_t>(rng.uniform_int(2, 4));
    const Shape shape{static_cast<std::size_t>(rng.uniform_int(1, 3)), r * rng.uniform_int(1, 4),
                      static_cast<std::size_t>(rng.uniform_int(1, 9))};
    auto x = oracle::random_tensor(rng, shape, -5, 5, false);
    EXPECT_EQ(subpixel_unshuffle1d(subpixel_shuffle1d(x, r), r).values(), x.values());
  }
}

TEST(Activations, PointValues) {
  Tensor x({1, 1, 2}, {-2, 3});
  EXPECT_EQ(relu(x).values()[0], 0.0);
  EXPECT_EQ(relu(x).values()[1], 3.0);
  EXPECT_DOUBLE_EQ(leaky_relu(x, 0.2).values()[0], -0.4);
  Rng rng(1);
  EXPECT_EQ(dropout(x, 0.0, rng, true).values(), x.values());
  EXPECT_EQ(dropout(x, 0.7, rng, false).values(), x.values());
  EXPECT_THROW(dropout(x, 1.0, rng, true), InvalidArgument);
}

TEST(Activations, DropoutStatisticsAndScaling) {
  Rng rng(5);
  auto x = Tensor::full({1, 1, 20000}, 1.0);
  auto y = dropout(x, 0.25, rng, true);
  std::size_t zeros = 0;
  for (double v : y.values()) {
    if (v == 0.0) ++zeros;
    else EXPECT_DOUBLE_EQ(v, 1.0 / 0.75);
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 20000.0, 0.25, 0.01);
}

TEST(Activations, DropoutMaskDeterministicBySeed) {
  auto x = Tensor::full({2, 3, 50}, 1.0);
  Rng a(9), b(9);
  EXPECT_EQ(dropout(x, 0.5, a, true).values(), dropout(x, 0.5, b, true).values());
}

TEST(Combine, AddConcatSlice) {
  Rng rng(2);
  auto x = oracle::random_tensor(rng, {2, 3, 5}, -1, 1, false);
  auto y = oracle::random_tensor(rng, {2, 5, 5}, -1, 1, false);
  EXPECT_EQ(add(x, Tensor::zeros(x.shape())).values(), x.values());
  auto c = concat_channels(x, y);
  EXPECT_EQ(c.shape(), (Shape{2, 8, 5}));
  EXPECT_EQ(slice_channels(c, 0, 3).values(), x.values());
  EXPECT_EQ(slice_channels(c, 3, 5).values(), y.values());
  EXPECT_THROW(add(x, y), InvalidArgument);
  EXPECT_THROW(concat_channels(x, Tensor::zeros({2, 1, 4})), InvalidArgument);
}

TEST(Losses, PointValues) {
  Tensor p({1, 1, 2}, {1, -1});
  Tensor z = Tensor::zeros({1, 1, 2});
  EXPECT_DOUBLE_EQ(l1_loss(p, z).item(), 1.0);
  EXPECT_DOUBLE_EQ(l2_loss(p, z).item(), 1.0);
  EXPECT_EQ(l1_loss(p, p).item(), 0.0);
  EXPECT_EQ(l2_loss(p, p).item(), 0.0);
  EXPECT_THROW(l1_loss(p, Tensor::zeros({1, 1, 3})), InvalidArgument);
}

TEST(Backward, MeanGradientIsUniform) {
  Rng rng(4);
  auto x = oracle::random_tensor(rng, {2, 3, 4});
  backward(mean_all(x));
  for (double g : x.grad().values()) EXPECT_DOUBLE_EQ(g, 1.0 / 24.0);
}

TEST(Backward, ReluSubgradient) {
  Tensor x({1, 1, 3}, {-1.0, 0.0, 2.0}, true);
  backward(sum_all(relu(x)));
  EXPECT_EQ(x.grad().values(), (std::vector<double>{0.0, 0.0, 1.0}));
  Tensor y({1, 1, 2}, {0.0, -3.0}, true);
  backward(sum_all(leaky_relu(y, 0.2)));
  EXPECT_EQ(y.grad().values(), (std::vector<double>{0.2, 0.2}));
}

TEST(Backward, RejectsNonScalarAndUnrecorded) {
  Rng rng(4);
  auto x = oracle::random_tensor(rng, {1, 1, 3});
  EXPECT_THROW(backward(relu(x)), InvalidArgument);
  EXPECT_THROW(backward(Tensor::scalar(1.0)), InvalidArgument);
}

TEST(Backward, UnusedParameterGradIsZero) {
  Rng rng(4);
  ParameterList params{{"used", oracle::random_tensor(rng, {1, 1, 3})},
                       {"unused", oracle::random_tensor(rng, {1, 1, 3})}};
  zero_grad(params);
  backward(sum_all(params[0].tensor));
  for (double g : params[1].tensor.grad().values()) EXPECT_EQ(g, 0.0);
}

TEST(GradCheck, TwoLayerConvGraph) {
  Rng rng(21);
  auto x = oracle::random_tensor(rng, {2, 2, 11});
  auto w1 = oracle::random_tensor(rng, {4, 2, 5});
  auto b1 = oracle::random_tensor(rng, {4});
  auto w2 = oracle::random_tensor(rng, {3, 4, 3});
  auto b2 = oracle::random_tensor(rng, {3});
  auto loss = [&] { return project(conv1d(leaky_relu(conv1d(x, w1, b1, 2), 0.2), w2, b2), 77); };
  EXPECT_LE(oracle::gradient_check(loss, {x, w1, b1, w2, b2}), kSmoothTol);
}

TEST(GradCheck, ConvStridesAndPaddings) {
  Rng rng(22);
  for (std::size_t stride : {1u, 2u, 3u}) {
    for (Padding pad : {Padding::same, Padding::valid}) {
      auto x = oracle::random_tensor(rng, {2, 3, 10});
      auto w = oracle::random_tensor(rng, {2, 3, 3});
      auto b = oracle::random_tensor(rng, {2});
      auto loss = [&] { return project(conv1d(x, w, b, stride, pad), 5); };
      EXPECT_LE(oracle::gradient_check(loss, {x, w, b}), kSmoothTol) << "stride " << stride;
    }
  }
}

TEST(GradCheck, ElementwiseAndReductions) {
  Rng rng(23);
  auto a = oracle::random_tensor(rng, {2, 3, 4});
  auto b = oracle::random_tensor(rng, {2, 3, 4});
  EXPECT_LE(oracle::gradient_check([&] { return project(add(a, b), 1); }, {a, b}), kSmoothTol);
  EXPECT_LE(oracle::gradient_check([&] { return project(sub(a, b), 2); }, {a, b}), kSmoothTol);
  EXPECT_LE(oracle::gradient_check([&] { return project(mul(a, b), 3); }, {a, b}), kSmoothTol);
  EXPECT_LE(oracle::gradient_check([&] { return project(add_scalar(scale(a, 2.5), 1.0), 4); }, {a}), kSmoothTol);
  EXPECT_LE(oracle::gradient_check([&] { return project(mean_time(a), 5); }, {a}), kSmoothTol);
  EXPECT_LE(oracle::gradient_check([&] { return project(sum_item(a), 6); }, {a}), kSmoothTol);
  EXPECT_LE(oracle::gradient_check([&] { return mean_all(mul(a, a)); }, {a}), kSmoothTol);
  auto pos = oracle::random_tensor(rng, {2, 1, 1}, 0.5, 2.0);
  EXPECT_LE(oracle::gradient_check([&] { return project(sqrt(pos), 7); }, {pos}), kSmoothTol);
}

TEST(GradCheck, LayoutOps) {
  Rng rng(24);
  auto x = oracle::random_tensor(rng, {2, 4, 5});
  auto y = oracle::random_tensor(rng, {2, 3, 5});
  EXPECT_LE(oracle::gradient_check([&] { return project(subpixel_shuffle1d(x, 2), 1); }, {x}), kSmoothTol);
  EXPECT_LE(oracle::gradient_check([&] { return project(subpixel_unshuffle1d(y, 5), 1); }, {y}), kSmoothTol);
  EXPECT_LE(oracle::gradient_check([&] { return project(concat_channels(x, y), 2); }, {x, y}), kSmoothTol);
  EXPECT_LE(oracle::gradient_check([&] { return project(slice_time(x, 1, 3), 3); }, {x}), kSmoothTol);
  auto idx = std::make_shared<std::vector<std::size_t>>(std::vector<std::size_t>{1, 0, 1, 2, 3, 4, 4, 3, 2, 1});
  EXPECT_LE(oracle::gradient_check([&] { return project(gather_time(x, idx, 5), 4); }, {x}), kSmoothTol);
}

TEST(GradCheck, PiecewiseLinearOffKinks) {
  Rng rng(25);
  auto x = off_kink_tensor(rng, {2, 3, 6});
  auto t = oracle::random_tensor(rng, {2, 3, 6}, -0.1, 0.1, false);
  EXPECT_LE(oracle::gradient_check([&] { return project(relu(x), 1); }, {x}), kKinkTol);
  EXPECT_LE(oracle::gradient_check([&] { return project(leaky_relu(x, 0.2), 2); }, {x}), kKinkTol);
  EXPECT_LE(oracle::gradient_check(
                [&] {
                  Rng drop(8);  // same mask every evaluation
                  return project(dropout(x, 0.3, drop, true), 3);
                },
                {x}),
            kKinkTol);
  EXPECT_LE(oracle::gradient_check([&] { return l1_loss(x, t); }, {x}), kKinkTol);
  EXPECT_LE(oracle::gradient_check([&] { return l2_loss(x, t); }, {x}), kSmoothTol);
  EXPECT_LE(oracle::gradient_check(
                [&] {
                  Rng shuffle(4);
                  return project(phase_shuffle(x, 2, shuffle), 4);
                },
                {x}),
            kSmoothTol);
}

TEST(InputGradient, LinearCriticGivesWeights) {
  Rng rng(31);
  auto w = oracle::random_tensor(rng, {1, 1, 8});
  for (int trial = 0; trial < 5; ++trial) {
    auto x = oracle::random_tensor(rng, {1, 1, 8});
    auto g = input_gradient(sum_all(mul(w, x)), x);
    EXPECT_EQ(g.values(), w.values());
  }
}

TEST(InputGradient, LinearCriticPenaltyGradient) {
  Rng rng(32);
  const double lambda = 10.0;
  auto w = oracle::random_tensor(rng, {1, 1, 6});
  auto x = oracle::random_tensor(rng, {1, 1, 6});
  auto g = input_gradient(sum_all(mul(w, x)), x);
  auto norm = sqrt(sum_item(square(g)));
  auto penalty = scale(mean_all(square(add_scalar(norm, -1.0))), lambda);
  w.zero_grad();
  backward(penalty);
  double nw = 0.0;
  for (double v : w.values()) nw += v * v;
  nw = std::sqrt(nw);
  for (std::size_t i = 0; i < w.numel(); ++i) {
    EXPECT_NEAR(w.grad().values()[i], 2.0 * lambda * (nw - 1.0) * w.values()[i] / nw, 1e-12);
  }
}

TEST(InputGradient, ConvCriticPenaltyMatchesFiniteDifferences) {
  Rng rng(33);
  auto x = oracle::random_tensor(rng, {2, 1, 12});
  auto w1 = oracle::random_tensor(rng, {3, 1, 5});
  auto b1 = oracle::random_tensor(rng, {3});
  auto w2 = oracle::random_tensor(rng, {1, 3, 1});
  auto b2 = oracle::random_tensor(rng, {1});
  auto penalty = [&] {
    GradModeGuard on(true);
    auto xi = x.detach().set_requires_grad(true);
    auto score = conv1d(mean_time(leaky_relu(conv1d(xi, w1, b1, 2), 0.2)), w2, b2);
    auto g = input_gradient(sum_all(score), xi);
    auto norm = sqrt(sum_item(square(g)));
    return mean_all(square(add_scalar(norm, -1.0)));
  };
  ParameterList ps{{"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2}};
  zero_grad(ps);
  backward(penalty());
  for (auto& p : ps) {
    const auto numeric = oracle::finite_difference([&] { return penalty().item(); }, p.tensor);
    EXPECT_LE(oracle::rel_error(p.tensor.grad().values(), numeric), 1e-5) << p.name;
  }
}

TEST(InputGradient, RejectsOpWithoutDoubleBackward) {
  Rng rng(34);
  auto x = oracle::random_tensor(rng, {1, 1, 4});
  auto t = oracle::random_tensor(rng, {1, 1, 4}, -1, 1, false);
  try {
    input_gradient(l2_loss(x, t), x);
    FAIL() << "expected rejection";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("l2_loss"), std::string::npos);
  }
}

TEST(Adam, FirstStepMovesByAlpha) {
  Tensor p({1, 1, 3}, {0.0, 1.0, -1.0}, true);
  p.set_grad(Tensor({1, 1, 3}, {3.0, -0.5, 100.0}));
  ParameterList params{{"p", p}};
  AdamState st;
  adam_step(params, st);
  const std::vector<double> expect{-1e-4, 1.0 + 1e-4, -1.0 - 1e-4};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p.values()[i], expect[i], 1e-6 * 1e-4);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor p({1, 1, 2}, {0.3, -0.7}, true);
  ParameterList params{{"p", p}};
  zero_grad(params);
  AdamState st;
  adam_step(params, st);
  EXPECT_EQ(p.values(), (std::vector<double>{0.3, -0.7}));
}

TEST(Adam, TwoStepRecurrence) {
  // g = +1 then -1 with beta1 = 0.9, beta2 = 0.999:
  //   step 1: m_hat = 1, v_hat = 1
  //   step 2: m = 0.09 - 0.1 = -0.01, m_hat = -0.01 / 0.19 = -1/19; v_hat = 1
  const double alpha = 1e-3, eps = 1e-8, p0 = 0.5;
  const double expected = p0 - alpha / (1.0 + eps) + alpha * (1.0 / 19.0) / (1.0 + eps);
  Tensor p({1}, {p0}, true);
  ParameterList params{{"p", p}};
  AdamState st;
  st.alpha = alpha;
  p.set_grad(Tensor({1}, {1.0}));
  adam_step(params, st);
  p.set_grad(Tensor({1}, {-1.0}));
  adam_step(params, st);
  EXPECT_NEAR(p.item(), expected, 1e-15);
}

TEST(Adam, RejectsMissingGradient) {
  ParameterList params{{"p", Tensor({1}, {0.0}, true)}};
  AdamState st;
  EXPECT_THROW(adam_step(params, st), InvalidArgument);
}
