#include <doctest.h>

#include "mcgan/adam.hpp"
#include "mcgan/ops.hpp"

using namespace mcgan;

TEST_CASE("backward through a diamond accumulates both paths") {
  // y = x*x + x  =>  dy/dx = 2x + 1
  Tensor x = Tensor::from({3}, {1, 2, 3}).set_requires_grad();
  Tensor y = sum(add(mul(x, x), x));
  backward(y);
  CHECK(x.grad()[0] == doctest::Approx(3));
  CHECK(x.grad()[1] == doctest::Approx(5));
  CHECK(x.grad()[2] == doctest::Approx(7));
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = Tensor::from({2}, {1, 2}).set_requires_grad();
  CHECK_THROWS_AS(backward(add(x, x)), ContractError);
}

TEST_CASE("grads accumulate across backward calls until cleared") {
  Tensor x = Tensor::from({2}, {1, 1}).set_requires_grad();
  backward(sum(x));
  backward(sum(x));
  CHECK(x.grad()[0] == doctest::Approx(2));
  x.zero_grad();
  CHECK(x.grad()[0] == doctest::Approx(0));
}

TEST_CASE("NoGradGuard suspends taping") {
  Tensor x = Tensor::from({2}, {1, 2}).set_requires_grad();
  Tensor y;
  {
    NoGradGuard ng;
    y = mul(x, x);
  }
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("detach stops gradient flow but shares values") {
  Tensor x = Tensor::from({2}, {3, 4}).set_requires_grad();
  Tensor d = mul(x, x).detach();
  CHECK(d.data()[0] == doctest::Approx(9));
  CHECK_FALSE(d.requires_grad());
}

TEST_CASE("broadcast add matches manual expansion") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = Tensor::from({1, 3}, {10, 20, 30});
  Tensor s = add(a, r);
  CHECK(s.data() == std::vector<float>{11, 22, 33, 14, 25, 36});
}

TEST_CASE("elementwise shape mismatch raises") {
  Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({3, 2});
  CHECK_THROWS_AS(add(a, b), ShapeError);
}

TEST_CASE("matmul matches hand result and rejects bad shapes") {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8});
  Tensor c = matmul(a, b);
  CHECK(c.data() == std::vector<float>{19, 22, 43, 50});
  CHECK_THROWS_AS(matmul(a, Tensor::zeros({3, 2})), ShapeError);
}

TEST_CASE("softmax is a probability vector and shift-invariant") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = Tensor::uniform({9}, rng, -5, 5);
    Tensor y = softmax(x);
    double s = 0;
    for (float v : y.data()) {
      CHECK(v >= 0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));

    Tensor shifted = softmax(add_scalar(x, 11.5f));
    for (int64_t i = 0; i < 9; ++i)
      CHECK(shifted.data()[i] == doctest::Approx(y.data()[i]).epsilon(1e-6));
  }
}

TEST_CASE("softmax hand values") {
  // [c, c+ln 3] -> [0.25, 0.75]
  Tensor x = Tensor::from({2}, {2.0f, 2.0f + std::log(3.0f)});
  Tensor y = softmax(x);
  CHECK(y.data()[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(y.data()[1] == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("softmax propagates NaN as a numeric error") {
  Tensor x = Tensor::from({2}, {std::nanf(""), 0.0f});
  CHECK_THROWS_AS(softmax(x), NumericError);
}

TEST_CASE("concat/slice0/stack0 round-trip") {
  Tensor a = Tensor::from({1, 2}, {1, 2});
  Tensor b = Tensor::from({1, 2}, {3, 4});
  Tensor c = concat(a, b, 0);
  CHECK(c.shape() == Shape{2, 2});
  Tensor back = stack0(std::vector<Tensor>{slice0(c, 0), slice0(c, 1)});
  CHECK(back.data() == c.data());
}

TEST_CASE("outer rejects non-vectors") {
  CHECK_THROWS_AS(outer(Tensor::zeros({2, 2}), Tensor::zeros({2})), ShapeError);
}

TEST_CASE("reshape preserves data, rejects bad numel") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(reshape(a, {3, 2}).data() == a.data());
  CHECK_THROWS_AS(reshape(a, {4, 2}), ShapeError);
}

TEST_CASE("spatial_mean averages over H and W") {
  Tensor x = Tensor::from({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  Tensor m = spatial_mean(x);
  CHECK(m.shape() == Shape{1, 2});
  CHECK(m.data()[0] == doctest::Approx(2.5));
  CHECK(m.data()[1] == doctest::Approx(25));
}

TEST_CASE("adam single step matches hand arithmetic") {
  // one parameter, g=1: m=0.5, v=0.001, mhat=1, vhat=1,
  // update = lr * 1 / (1 + eps)
  Tensor p = Tensor::from({1}, {1.0f}).set_requires_grad();
  p.grad()[0] = 1.0f;
  Adam opt(0.1f, 0.5f, 0.999f, 0.0f);
  opt.add_param(p);
  opt.step();
  CHECK(p.data()[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p.grad()[0] == 0.0f);  // cleared after the update
}

TEST_CASE("adam rejects params without grad tracking") {
  Adam opt;
  Tensor p = Tensor::zeros({1});
  CHECK_THROWS_AS(opt.add_param(p), ContractError);
}

TEST_CASE("adam throws on missing gradient at step time") {
  Tensor p = Tensor::from({1}, {1.0f}).set_requires_grad();
  Adam opt;
  opt.add_param(p);
  CHECK_THROWS_AS(opt.step(), ContractError);
}
