#include <cmath>
#include <limits>

#include "doctest.h"
#include "gaitgcn/gradcheck.hpp"
#include "gaitgcn/ops.hpp"
#include "gaitgcn/random.hpp"
#include "gaitgcn/tensor.hpp"

using namespace gaitgcn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool grad = true) {
  Tensor t(shape, 0.0, grad);
  for (double& v : t.mutable_data()) v = uniform(rng, -1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("matmul values and shape errors") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor c = matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 2});
  CHECK(c.data()[0] == 58);
  CHECK(c.data()[1] == 64);
  CHECK(c.data()[2] == 139);
  CHECK(c.data()[3] == 154);
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(add(a, b), ShapeError);
}

TEST_CASE("leaf gradients accumulate across backward calls") {
  Tensor x({3}, {1, 2, 3}, true);
  Tensor loss = sum(multiply(x, x));
  loss.backward();
  CHECK(x.grad()[2] == doctest::Approx(6.0));
  loss.backward();
  CHECK(x.grad()[2] == doctest::Approx(12.0));
  x.zero_grad();
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("no-grad guard stops recording") {
  Tensor x({2}, {1, 2}, true);
  {
    NoGradGuard guard;
    Tensor y = scale(x, 2.0);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.grad_fn() == nullptr);
  }
  CHECK(scale(x, 2.0).requires_grad());
}

TEST_CASE("checked mode rejects non-finite inputs") {
  Tensor x({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_NOTHROW(relu(x));
  CheckedModeGuard guard;
  CHECK_THROWS_AS(relu(x), NonFiniteError);
}

TEST_CASE("backward visits ops in reverse creation order") {
  Tensor x({2}, {1, 2}, true);
  Tensor y = relu(scale(x, 3.0));
  Tensor l = sum(y);
  const auto order = backward_order(l);
  REQUIRE(order.size() == 3);
  CHECK(order[0] == "sum");
  CHECK(order[2] == "scale");
}

TEST_CASE("softmax cross-entropy of uniform logits is log(classes)") {
  Tensor logits({2, 4}, 0.0);
  const std::size_t labels[] = {1, 3};
  CHECK(softmax_cross_entropy(logits, labels).item() == doctest::Approx(std::log(4.0)));
}

TEST_CASE("primitive gradients match central differences") {
  Rng rng(11);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Tensor x = random_tensor({2, 3, 5, 4}, rng);
  Tensor w = random_tensor({2, 3, 3, 1}, rng);
  Tensor bias = random_tensor({2}, rng);
  Tensor gamma = random_tensor({3}, rng);
  Tensor beta = random_tensor({3}, rng);
  Tensor r = random_tensor({2, 3, 5, 4}, rng, false);

  SUBCASE("matmul") {
    auto res = gradient_check([&] { return sum(multiply(matmul(a, b), matmul(a, b))); }, {a, b});
    CHECK(res.max_rel_error < 1e-7);
  }
  SUBCASE("conv2d with stride, dilation and padding") {
    Conv2dParams p;
    p.stride = {2, 1};
    p.dilation = {2, 1};
    p.padding = {2, 0};
    auto res = gradient_check([&] { return sum(sigmoid(conv2d(x, w, bias, p))); }, {x, w, bias});
    CHECK(res.max_rel_error < 1e-7);
  }
  SUBCASE("batchnorm in training mode") {
    BatchNormState st{Tensor({3}, 0.0), Tensor({3}, 1.0)};
    auto res = gradient_check(
        [&] { return sum(multiply(batchnorm(x, gamma, beta, st, true), r)); }, {x, gamma, beta});
    CHECK(res.max_rel_error < 1e-6);
  }
  SUBCASE("unfold, transpose, reshape, mean and max") {
    auto res = gradient_check(
        [&] {
          Tensor u = unfold_temporal(x, 3, 2);
          Tensor t = reshape(transpose(u, {0, 2, 1, 3}), {10, 36});
          return add(sum(mean(t, {1})), sum(max(x, {3})));
        },
        {x});
    CHECK(res.max_rel_error < 1e-7);
  }
  SUBCASE("expand, concat and slice") {
    Tensor s = random_tensor({2, 1, 5, 1}, rng);
    auto res = gradient_check(
        [&] {
          Tensor e = expand(s, {2, 3, 5, 4});
          Tensor c = concat({x, e}, 1);
          return sum(multiply(slice(c, 1, 2, 3), slice(c, 1, 1, 3)));
        },
        {x, s});
    CHECK(res.max_rel_error < 1e-7);
  }
}

TEST_CASE("batchnorm eval mode uses running statistics") {
  Tensor x({1, 1, 1, 2}, {3.0, 5.0});
  Tensor gamma({1}, 1.0);
  Tensor beta({1}, 0.0);
  BatchNormState st{Tensor({1}, {1.0}), Tensor({1}, {4.0})};
  st.eps = 0.0;
  Tensor y = batchnorm(x, gamma, beta, st, false);
  CHECK(y.data()[0] == doctest::Approx(1.0));
  CHECK(y.data()[1] == doctest::Approx(2.0));
}
