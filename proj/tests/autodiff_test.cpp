#include <gtest/gtest.h>

#include "pansharp/autodiff.hpp"
#include "pansharp/gradcheck.hpp"
#include "pansharp/ops.hpp"
#include "pansharp/rng.hpp"
#include "support/oracles.hpp"

using pansharp::ContractError;
using pansharp::Graph;
using pansharp::Rng;
using pansharp::Shape;
using pansharp::Tensor;
namespace ops = pansharp::ops;
namespace pt = pansharp::testing;

TEST(Backward, SumGivesOnes) {
  Rng rng(1);
  Graph<double> g;
  auto x = g.input(pt::random_tensor<double>({2, 3, 4, 4}, rng));
  auto loss = g.sum(x);
  g.backward(loss);
  for (int64_t i = 0; i < g.grad(x).size(); ++i)
    EXPECT_DOUBLE_EQ(g.grad(x)[i], 1.0);
}

TEST(Backward, ConcatRoutesGradientSlices) {
  Rng rng(2);
  Graph<double> g;
  auto a = g.input(pt::random_tensor<double>({1, 2, 3, 3}, rng));
  auto b = g.input(pt::random_tensor<double>({1, 3, 3, 3}, rng));
  auto loss = g.sum(g.concat_channels(a, b));
  g.backward(loss);
  for (int64_t i = 0; i < g.grad(a).size(); ++i)
    EXPECT_DOUBLE_EQ(g.grad(a)[i], 1.0);
  for (int64_t i = 0; i < g.grad(b).size(); ++i)
    EXPECT_DOUBLE_EQ(g.grad(b)[i], 1.0);
}

TEST(Backward, SharedNodeGradientsSum) {
  Rng rng(3);
  Graph<double> g;
  auto x = g.input(pt::random_tensor<double>({1, 1, 2, 2}, rng));
  auto y = g.add(x, x);
  auto loss = g.sum(y);
  g.backward(loss);
  for (int64_t i = 0; i < g.grad(x).size(); ++i)
    EXPECT_DOUBLE_EQ(g.grad(x)[i], 2.0);
}

TEST(Backward, RepeatableAfterZeroing) {
  Rng rng(4);
  Graph<double> g;
  auto x = g.input(pt::random_tensor<double>({1, 2, 4, 4}, rng));
  auto w = g.input(pt::random_tensor<double>({3, 2, 3, 3}, rng));
  auto b = g.input(pt::random_tensor<double>({3}, rng));
  auto loss = g.sum(g.conv2d(x, w, b, 1, 1));
  g.backward(loss);
  Tensor<double> first = g.grad(w);
  g.zero_grads();
  g.backward(loss);
  EXPECT_EQ(first, g.grad(w));
}

TEST(Backward, RejectsNonScalarLoss) {
  Graph<double> g;
  auto x = g.input(Tensor<double>({1, 1, 2, 2}));
  EXPECT_THROW(g.backward(x), ContractError);
}

TEST(Backward, RejectsDetachedNode) {
  Graph<double> g;
  g.input(Tensor<double>({1}));
  EXPECT_THROW(g.backward(5), ContractError);
  EXPECT_THROW(g.backward(-1), ContractError);
}

namespace {

// Runs finite_diff_check for a loss built by `wire` over the given leaf
// parameter tensors.
template <typename Wire>
double check_gradients(std::vector<Tensor<double>>& leaves, Wire&& wire,
                       double eps) {
  auto eval = [&]() {
    Graph<double> g;
    std::vector<int> ids;
    ids.reserve(leaves.size());
    for (auto& t : leaves) ids.push_back(g.input(t));
    return g.value(wire(g, ids))[0];
  };
  Graph<double> g;
  std::vector<int> ids;
  for (auto& t : leaves) ids.push_back(g.input(t));
  g.backward(wire(g, ids));
  std::vector<Tensor<double>> analytic;
  std::vector<Tensor<double>*> params;
  for (size_t i = 0; i < leaves.size(); ++i) {
    analytic.push_back(g.grad(ids[i]));
    params.push_back(&leaves[i]);
  }
  return pansharp::finite_diff_check(params, eval, analytic, eps);
}

}  // namespace

TEST(FiniteDiff, LinearConvIsExactToRounding) {
  // Small magnitudes keep the central-difference cancellation noise well
  // under the 1e-9 bound a linear map should reach.
  Rng rng(5);
  std::vector<Tensor<double>> leaves;
  leaves.push_back(pt::random_tensor<double>({1, 2, 4, 4}, rng, -0.5, 0.5));
  leaves.push_back(pt::random_tensor<double>({2, 2, 3, 3}, rng, -0.5, 0.5));
  leaves.push_back(pt::random_tensor<double>({2}, rng, -0.5, 0.5));
  double err = check_gradients(
      leaves,
      [](Graph<double>& g, const std::vector<int>& ids) {
        return g.sum(g.conv2d(ids[0], ids[1], ids[2], 1, 1));
      },
      1e-5);
  EXPECT_LT(err, 1e-9);
}

TEST(FiniteDiff, ConvPReluBlock) {
  Rng rng(6);
  std::vector<Tensor<double>> leaves;
  leaves.push_back(pt::random_tensor<double>({1, 2, 6, 6}, rng));
  leaves.push_back(pt::random_tensor<double>({4, 2, 3, 3}, rng));
  leaves.push_back(pt::random_tensor<double>({4}, rng));
  leaves.push_back(pt::random_tensor<double>({4}, rng, 0.05, 0.5));
  leaves.push_back(pt::random_tensor<double>({4, 4, 2, 2}, rng));
  leaves.push_back(pt::random_tensor<double>({4}, rng));
  double err = check_gradients(
      leaves,
      [](Graph<double>& g, const std::vector<int>& ids) {
        auto h = g.prelu(g.conv2d(ids[0], ids[1], ids[2], 1, 1), ids[3]);
        return g.sum(g.conv2d(h, ids[4], ids[5], 2, 0));
      },
      1e-5);
  EXPECT_LT(err, 1e-4);
}

TEST(FiniteDiff, TransposeConvAndLosses) {
  Rng rng(7);
  std::vector<Tensor<double>> leaves;
  leaves.push_back(pt::random_tensor<double>({1, 3, 4, 4}, rng));
  leaves.push_back(pt::random_tensor<double>({3, 2, 2, 2}, rng));
  leaves.push_back(pt::random_tensor<double>({2}, rng));
  Tensor<double> target = pt::random_tensor<double>({1, 2, 8, 8}, rng);
  for (bool use_l2 : {false, true}) {
    double err = check_gradients(
        leaves,
        [&](Graph<double>& g, const std::vector<int>& ids) {
          auto y = g.conv2d_transpose(ids[0], ids[1], ids[2], 2);
          auto t = g.input(target);
          return use_l2 ? g.l2_loss(y, t) : g.l1_loss(y, t);
        },
        1e-5);
    EXPECT_LT(err, 1e-4);
  }
}

TEST(FiniteDiff, AddElementwiseOnRandomPair) {
  Rng rng(8);
  std::vector<Tensor<double>> leaves;
  leaves.push_back(pt::random_tensor<double>({2, 3, 4, 4}, rng));
  leaves.push_back(pt::random_tensor<double>({2, 3, 4, 4}, rng));
  double err = check_gradients(
      leaves,
      [](Graph<double>& g, const std::vector<int>& ids) {
        return g.sum(g.add(ids[0], ids[1]));
      },
      1e-5);
  EXPECT_LT(err, 1e-6);
}

TEST(FiniteDiff, ConstantFunctionHasZeroError) {
  // Loss ignores the parameter entirely: analytic and numeric gradients are
  // both exactly zero.
  Tensor<double> leaf = Tensor<double>::full({1, 1, 2, 2}, 0.5);
  Tensor<double> fixed = Tensor<double>::full({1, 1, 2, 2}, 2.0);
  auto eval = [&]() { return ops::sum(fixed); };
  std::vector<Tensor<double>> analytic{Tensor<double>(leaf.shape())};
  std::vector<Tensor<double>*> params{&leaf};
  EXPECT_EQ(pansharp::finite_diff_check(params, eval, analytic, 1e-5), 0.0);
}

TEST(FiniteDiff, RejectsEpsilonOutOfRange) {
  Tensor<double> leaf({1});
  std::vector<Tensor<double>> analytic{Tensor<double>({1})};
  std::vector<Tensor<double>*> params{&leaf};
  auto eval = []() { return 0.0; };
  EXPECT_THROW(pansharp::finite_diff_check(params, eval, analytic, 1e-8),
               ContractError);
  EXPECT_THROW(pansharp::finite_diff_check(params, eval, analytic, 1e-2),
               ContractError);
}

TEST(Adjointness, ConvAgainstTransposeOverRandomGeometries) {
  // <conv2d(x, w), y> == <x, conv2d_transpose(y, w)> with zero bias for the
  // kernel-equals-stride geometries the networks use.
  Rng rng(9);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int stride = 1 + static_cast<int>(rng.next_below(2));
    const int b = 1 + static_cast<int>(rng.next_below(2));
    const int cin = 1 + static_cast<int>(rng.next_below(5));
    const int cout = 1 + static_cast<int>(rng.next_below(5));
    const int h = stride * (1 + static_cast<int>(rng.next_below(6)));
    const int w = stride * (1 + static_cast<int>(rng.next_below(6)));
    auto x = pt::random_tensor<double>({b, cin, h, w}, rng);
    auto kernel =
        pt::random_tensor<double>({cout, cin, stride, stride}, rng);
    auto y = pt::random_tensor<double>(
        {b, cout, h / stride, w / stride}, rng);
    Tensor<double> zero_out({cout}), zero_in({cin});
    const double lhs =
        pt::inner_product(ops::conv2d(x, kernel, zero_out, stride, 0), y);
    const double rhs =
        pt::inner_product(x, ops::conv2d_transpose(y, kernel, zero_in, stride));
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-12});
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(GraphValues, ForwardMatchesOpsDirectly) {
  Rng rng(10);
  auto x = pt::random_tensor<float>({1, 3, 8, 8}, rng);
  auto w = pt::random_tensor<float>({5, 3, 3, 3}, rng);
  auto b = pt::random_tensor<float>({5}, rng);
  Graph<float> g;
  auto id = g.conv2d(g.input(x), g.input(w), g.input(b), 1, 1);
  EXPECT_EQ(g.value(id), ops::conv2d(x, w, b, 1, 1));
}
