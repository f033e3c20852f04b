#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hwnas/errors.hpp"
#include "hwnas/ops.hpp"
#include "support/oracles.hpp"

using namespace hwnas;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Scalar probe: sum(op(x) * r) with a fixed random r.
Tensor probe(const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, oracle::random_tensor(y.shape(), rng)));
}

}  // namespace

TEST(Conv3d, BiasOnly) {
  std::mt19937_64 rng(1);
  auto x = oracle::random_tensor({1, 1, 4, 4, 4}, rng);
  Tensor w({1, 1, 3, 3, 3}), b({1}, std::vector<double>{0.5});
  auto y = conv3d(x, w, b, {});
  for (double v : y.data()) EXPECT_EQ(v, 0.5);
}

TEST(Conv3d, TableGeometryPreservesShape) {
  std::mt19937_64 rng(2);
  auto x = oracle::random_tensor({1, 2, 5, 5, 5}, rng);
  auto w = oracle::random_tensor({3, 2, 3, 3, 3}, rng);
  EXPECT_EQ(conv3d(x, w, Tensor(), {}).shape(), (Shape{1, 3, 5, 5, 5}));
}

TEST(Conv3d, InvalidGeometryThrows) {
  std::mt19937_64 rng(3);
  auto x = oracle::random_tensor({1, 1, 2, 2, 2}, rng);
  auto w = oracle::random_tensor({1, 1, 3, 3, 3}, rng);
  EXPECT_THROW(conv3d(x, w, Tensor(), {1, 0, 1, 1}), ShapeError);
  auto w2 = oracle::random_tensor({1, 2, 3, 3, 3}, rng);
  EXPECT_THROW(conv3d(x, w2, Tensor(), {}), ShapeError);
}

struct ConvCase {
  Shape x, w;
  int stride, pad, dilation, groups;
  bool bias;
};

TEST(Conv3d, MatchesNestedLoops) {
  const std::vector<ConvCase> cases = {
      {{2, 4, 6, 6, 6}, {3, 4, 3, 3, 3}, 1, 1, 1, 1, true},
      {{2, 4, 6, 6, 6}, {4, 4, 3, 3, 3}, 1, 2, 2, 1, false},
      {{1, 4, 6, 5, 6}, {4, 1, 3, 3, 3}, 1, 1, 1, 4, true},
      {{2, 4, 6, 6, 6}, {6, 2, 3, 3, 3}, 2, 1, 1, 2, true},
      {{1, 3, 4, 6, 5}, {2, 3, 1, 1, 1}, 1, 0, 1, 1, true},
  };
  std::mt19937_64 rng(4);
  for (const auto& c : cases) {
    auto x = oracle::random_tensor(c.x, rng);
    auto w = oracle::random_tensor(c.w, rng);
    auto b = oracle::random_tensor({c.w[0]}, rng);
    const ConvGeometry g{static_cast<std::size_t>(c.stride), static_cast<std::size_t>(c.pad),
                         static_cast<std::size_t>(c.dilation), static_cast<std::size_t>(c.groups)};
    auto y = conv3d(x, w, c.bias ? b : Tensor(), g);
    Shape ref_shape;
    auto ref = oracle::naive_conv3d(x, w, c.bias ? &b : nullptr, c.stride, c.pad, c.dilation, c.groups, &ref_shape);
    ASSERT_EQ(y.shape(), ref_shape);
    EXPECT_LT(max_abs_diff(y.data(), ref), 1e-10);
  }
}

TEST(Conv3d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  auto x = oracle::random_tensor({2, 2, 4, 4, 4}, rng);
  auto w = oracle::random_tensor({3, 2, 3, 3, 3}, rng);
  auto b = oracle::random_tensor({3}, rng);
  EXPECT_LT(oracle::grad_check([&] { return probe(conv3d(x, w, b, {}), 6); }, {x, w, b}), 1e-4);
  EXPECT_LT(oracle::grad_check([&] { return probe(conv3d(x, w, b, {1, 2, 2, 1}), 7); }, {x, w, b}), 1e-4);
  auto wg = oracle::random_tensor({2, 1, 3, 3, 3}, rng);
  EXPECT_LT(oracle::grad_check([&] { return probe(conv3d(x, wg, Tensor(), {1, 1, 1, 2}), 8); }, {x, wg}), 1e-4);
}

TEST(Separable, IdentityFactorization) {
  std::mt19937_64 rng(9);
  auto x = oracle::random_tensor({1, 3, 4, 4, 4}, rng);
  Tensor dw({3, 1, 3, 3, 3}), pw({3, 3, 1, 1, 1}), b({3});
  for (std::size_t c = 0; c < 3; ++c) {
    dw.mutable_data()[c * 27 + 13] = 1.0;
    pw.mutable_data()[c * 3 + c] = 1.0;
  }
  auto y = separable_conv3d(x, dw, pw, b);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Separable, EqualsGroupedThenPointwise) {
  std::mt19937_64 rng(10);
  auto x = oracle::random_tensor({2, 4, 6, 6, 6}, rng);
  auto dw = oracle::random_tensor({4, 1, 3, 3, 3}, rng);
  auto pw = oracle::random_tensor({3, 4, 1, 1, 1}, rng);
  auto b = oracle::random_tensor({3}, rng);
  auto y = separable_conv3d(x, dw, pw, b);
  auto ref = conv3d(conv3d(x, dw, Tensor(), {1, 1, 1, 4}), pw, b, {1, 0, 1, 1});
  ASSERT_EQ(y.shape(), (Shape{2, 3, 6, 6, 6}));
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_EQ(y.data()[i], ref.data()[i]);

  // Against nested loops as well.
  Shape s1, s2;
  auto mid = oracle::naive_conv3d(x, dw, nullptr, 1, 1, 1, 4, &s1);
  Tensor mid_t(s1, mid);
  auto naive = oracle::naive_conv3d(mid_t, pw, &b, 1, 0, 1, 1, &s2);
  EXPECT_LT(max_abs_diff(y.data(), naive), 1e-10);
}

TEST(Separable, ChannelMismatchThrows) {
  std::mt19937_64 rng(11);
  auto x = oracle::random_tensor({1, 3, 4, 4, 4}, rng);
  auto dw = oracle::random_tensor({2, 1, 3, 3, 3}, rng);
  auto pw = oracle::random_tensor({3, 2, 1, 1, 1}, rng);
  EXPECT_THROW(separable_conv3d(x, dw, pw, Tensor({3})), ShapeError);
}

TEST(Separable, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(12);
  auto x = oracle::random_tensor({2, 3, 4, 4, 4}, rng);
  auto dw = oracle::random_tensor({3, 1, 3, 3, 3}, rng);
  auto pw = oracle::random_tensor({2, 3, 1, 1, 1}, rng);
  auto b = oracle::random_tensor({2}, rng);
  EXPECT_LT(oracle::grad_check([&] { return probe(separable_conv3d(x, dw, pw, b), 13); }, {x, dw, pw, b}), 1e-4);
}

TEST(MaxPool, ConstantInput) {
  auto x = Tensor::full({1, 2, 4, 4, 4}, -0.7);
  auto y = maxpool3d(x);
  for (double v : y.data()) EXPECT_EQ(v, -0.7);
}

TEST(MaxPool, SpikeSpreadsToBlock) {
  Tensor x({1, 1, 5, 5, 5});
  x.mutable_data()[2 * 25 + 2 * 5 + 2] = 3.0;
  auto y = maxpool3d(x);
  for (int d = 0; d < 5; ++d)
    for (int h = 0; h < 5; ++h)
      for (int w = 0; w < 5; ++w) {
        const bool inside = std::abs(d - 2) <= 1 && std::abs(h - 2) <= 1 && std::abs(w - 2) <= 1;
        EXPECT_EQ(y.data()[static_cast<std::size_t>(d * 25 + h * 5 + w)], inside ? 3.0 : 0.0);
      }
}

TEST(MaxPool, MatchesWindowScan) {
  std::mt19937_64 rng(14);
  for (auto [k, s, p] : {std::tuple{3, 1, 1}, std::tuple{2, 2, 0}, std::tuple{3, 2, 1}}) {
    auto x = oracle::random_tensor({2, 4, 6, 6, 6}, rng);
    auto y = maxpool3d(x, k, s, p);
    Shape shape;
    auto ref = oracle::naive_maxpool3d(x, k, s, p, &shape);
    ASSERT_EQ(y.shape(), shape);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(y.data()[i], ref[i]);
  }
}

TEST(MaxPool, TieGoesToFirstElement) {
  auto x = Tensor::full({1, 1, 2, 2, 2}, 1.0);
  x.set_requires_grad(true);
  backward(sum(maxpool3d(x, 2, 2, 0)));
  EXPECT_EQ(x.grad()[0], 1.0);
  for (std::size_t i = 1; i < 8; ++i) EXPECT_EQ(x.grad()[i], 0.0);
}

TEST(MaxPool, GradientAwayFromTies) {
  std::vector<double> v(2 * 2 * 4 * 4 * 4);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i * 53) % v.size()) * 2e-3 - 0.2;
  Tensor x({2, 2, 4, 4, 4}, v);
  EXPECT_LT(oracle::grad_check([&] { return probe(maxpool3d(x), 15); }, {x}), 1e-4);
  EXPECT_LT(oracle::grad_check([&] { return probe(maxpool3d(x, 2, 2, 0), 16); }, {x}), 1e-4);
}

TEST(IdentityZero, Semantics) {
  std::mt19937_64 rng(17);
  auto x = oracle::random_tensor({1, 2, 3, 3, 3}, rng, -1, 1, true);
  auto id = identity_op(x);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(id.data()[i], x.data()[i]);
  auto z = zero_op(x);
  EXPECT_EQ(z.shape(), x.shape());
  EXPECT_EQ(sum(z).item(), 0.0);
  backward(sum(z));
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Primitives, AllPreserveSpatialExtent) {
  std::mt19937_64 rng(18);
  for (Shape s : {Shape{1, 2, 1, 1, 1}, Shape{1, 2, 3, 5, 2}, Shape{2, 2, 6, 6, 6}}) {
    auto x = oracle::random_tensor(s, rng);
    for (auto op : kPrimitiveOps) {
      auto w = init_op_weights(op, 2, 2, rng);
      EXPECT_EQ(apply_primitive(op, x, w).shape(), s) << to_string(op);
    }
  }
}

TEST(Primitives, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(19);
  auto x = oracle::random_tensor({2, 2, 4, 4, 4}, rng);
  for (auto op : kPrimitiveOps) {
    if (op == PrimitiveOp::MaxPool3d) continue;  // covered away from ties above
    auto w = init_op_weights(op, 2, 2, rng);
    // Shift biases so ReLU kinks are unlikely to sit within h of a point.
    if (w.bias.defined())
      for (auto& b : w.bias.mutable_data()) b = 0.05;
    auto wrt = w.parameters();
    wrt.push_back(x);
    EXPECT_LT(oracle::grad_check([&] { return probe(apply_primitive(op, x, w), 20); }, wrt), 1e-4) << to_string(op);
  }
}

TEST(Preprocess, ShapeRules) {
  std::mt19937_64 rng(21);
  auto x = oracle::random_tensor({1, 4, 8, 8, 8}, rng);
  auto up = init_pointwise(4, 8, rng);
  EXPECT_EQ(contract_preprocess(x, up).shape(), (Shape{1, 8, 4, 4, 4}));
  auto y = oracle::random_tensor({1, 8, 4, 4, 4}, rng);
  auto down = init_pointwise(8, 4, rng);
  EXPECT_EQ(expand_preprocess(y, down).shape(), (Shape{1, 4, 8, 8, 8}));
  auto same = init_pointwise(4, 4, rng);
  EXPECT_EQ(nonscale_preprocess(x, same).shape(), x.shape());
  auto odd = oracle::random_tensor({1, 4, 5, 8, 8}, rng);
  EXPECT_THROW(contract_preprocess(odd, up), ShapeError);
}

TEST(Preprocess, NearestUpsampleDuplicates) {
  Tensor x({1, 1, 1, 2, 2}, {1, 2, 3, 4});
  auto y = upsample_nearest2(x);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 4, 4}));
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t h = 0; h < 4; ++h)
      for (std::size_t w = 0; w < 4; ++w) EXPECT_EQ(y.data()[d * 16 + h * 4 + w], x.data()[(h / 2) * 2 + w / 2]);
}

TEST(Preprocess, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(22);
  std::vector<double> v(2 * 2 * 4 * 4 * 4);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i * 71) % v.size()) * 3e-3 - 0.3;
  Tensor x({2, 2, 4, 4, 4}, v);
  auto up = init_pointwise(2, 4, rng);
  auto same = init_pointwise(2, 2, rng);
  auto down = init_pointwise(2, 1, rng);
  EXPECT_LT(oracle::grad_check([&] { return probe(contract_preprocess(x, up), 23); }, {x, up.weight, up.bias}), 1e-4);
  EXPECT_LT(oracle::grad_check([&] { return probe(nonscale_preprocess(x, same), 24); }, {x, same.weight, same.bias}),
            1e-4);
  EXPECT_LT(oracle::grad_check([&] { return probe(expand_preprocess(x, down), 25); }, {x, down.weight, down.bias}),
            1e-4);
}

TEST(CrossEntropy, AnalyticValues) {
  Tensor logits({1, 4, 1, 2, 2});
  LabelVolume labels = {0, 1, 2, 3};
  EXPECT_NEAR(cross_entropy(logits, labels).item(), std::log(4.0), 1e-12);
  Tensor sat({1, 2, 1, 1, 2}, {1e6, 0, 0, 1e6});
  EXPECT_LT(cross_entropy(sat, LabelVolume{0, 1}).item(), 1e-6);
  EXPECT_THROW(cross_entropy(logits, LabelVolume{0, 1, 2, 4}), DataError);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(26);
  auto logits = oracle::random_tensor({2, 3, 2, 3, 3}, rng, -2, 2);
  LabelVolume labels(2 * 2 * 3 * 3);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>((i * 7) % 3);
  EXPECT_LT(oracle::grad_check([&] { return cross_entropy(logits, labels); }, {logits}), 1e-5);
}

TEST(Dice, AnalyticValues) {
  LabelVolume a = {1, 1, 0, 0}, b = {0, 0, 1, 1}, c = {1, 0, 1, 0};
  EXPECT_EQ(dice_score(a, a, 1), 1.0);
  EXPECT_EQ(dice_score(a, b, 1), 0.0);
  EXPECT_EQ(dice_score(a, c, 1), 0.5);
  EXPECT_EQ(dice_score(a, a, 2), 1.0);
}
