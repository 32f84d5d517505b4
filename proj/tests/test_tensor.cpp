// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "srnn/error.hpp"
#include "srnn/tape.hpp"
#include "testutil.hpp"

using namespace srnn;

TEST_CASE("matmul hand values") {
  Tape t;
  Value a = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Value b = t.constant(Tensor::matrix(2, 1, {5, 6}));
  Value c = t.matmul(a, b);
  CHECK(t.val(c).at(0, 0) == doctest::Approx(17));
  CHECK(t.val(c).at(1, 0) == doctest::Approx(39));

  Value v = t.constant(Tensor::vec({5, 6}));
  Value mv = t.matmul(a, v);
  CHECK(t.val(mv).rank() == 1);
  CHECK(t.val(mv)[0] == doctest::Approx(17));
  CHECK(t.val(mv)[1] == doctest::Approx(39));

  CHECK_THROWS_AS(t.matmul(a, t.constant(Tensor::matrix(3, 1, {1, 2, 3}))), Error);
}

TEST_CASE("softmax of uniform logits is uniform and stable") {
  Tape t;
  Value s = t.softmax(t.constant(Tensor::vec({0, 0, 0})));
  for (int i = 0; i < 3; ++i) CHECK(t.val(s)[i] == doctest::Approx(1.0 / 3));

  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = testutil::random_tensor({5}, rng, -3, 3);
    Tensor shifted = logits;
    for (std::size_t i = 0; i < 5; ++i) shifted[i] += 123.456;
    Tape t2;
    const Tensor& y = t2.val(t2.softmax(t2.constant(logits)));
    const Tensor& y2 = t2.val(t2.softmax(t2.constant(shifted)));
    double sum = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      sum += y[i];
      CHECK(std::abs(y[i] - y2[i]) < 1e-12);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("concat of empty list is an error") {
  Tape t;
  CHECK_THROWS_AS(t.concat({}, 0), Error);
}

TEST_CASE("concat and slice round values") {
  Tape t;
  Value a = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Value b = t.constant(Tensor::matrix(2, 1, {5, 6}));
  Value cat = t.concat({a, b}, 1);
  CHECK(t.val(cat).shape() == std::vector<std::size_t>{2, 3});
  CHECK(t.val(cat).at(0, 2) == 5);
  CHECK(t.val(cat).at(1, 2) == 6);
  Value back = t.slice(cat, 1, 2, 1);
  CHECK(t.val(back).at(0, 0) == 5);
  CHECK(t.val(back).at(1, 0) == 6);
}

TEST_CASE("euclidean loss values and gradient") {
  {
    Tape t;
    Value p = t.constant(Tensor::vec({1, 2, 3}));
    Value loss = t.euclidean_loss(p, p);
    CHECK(t.val(loss)[0] == 0.0);
  }
  Parameter pred("p", Tensor::vec({1, 0}));
  Tape t;
  Value loss = t.euclidean_loss(t.param(pred), t.constant(Tensor::vec({0, 0})));
  CHECK(t.val(loss)[0] == doctest::Approx(0.5));
  t.backward(loss);
  CHECK(pred.grad[0] == doctest::Approx(1.0));
  CHECK(pred.grad[1] == doctest::Approx(0.0));

  Tape t2;
  CHECK_THROWS_AS(t2.euclidean_loss(t2.constant(Tensor::vec({1})),
                                    t2.constant(Tensor::vec({1, 2}))),
                  Error);
}

TEST_CASE("cross entropy values and range check") {
  {
    Tape t;
    Value loss = t.cross_entropy_loss(t.constant(Tensor::vec({1, 0, 0})), 0);
    CHECK(std::abs(t.val(loss)[0]) < 1e-9);
  }
  {
    Tape t;
    Value loss = t.cross_entropy_loss(t.constant(Tensor::vec({0.25, 0.25, 0.25, 0.25})), 2);
    CHECK(t.val(loss)[0] == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  }
  {
    Tape t;
    CHECK_THROWS_AS(t.cross_entropy_loss(t.constant(Tensor::vec({0.5, 0.25, 0.25})), 5), Error);
  }
  {
    Tape t;  // not a probability vector
    CHECK_THROWS_AS(t.cross_entropy_loss(t.constant(Tensor::vec({0.5, 0.2})), 0), Error);
  }
}

TEST_CASE("backward: square function, accumulation, unreachable params") {
  Parameter p("p", Tensor::scalar(3.0));
  Parameter unused("q", Tensor::scalar(11.0));
  Tape t;
  Value loss = t.mul(t.param(p), t.param(p));
  t.backward(loss);
  CHECK(p.grad[0] == doctest::Approx(6.0));
  CHECK(unused.grad[0] == 0.0);

  // Second backward without clearing doubles the accumulator.
  t.backward(loss);
  CHECK(p.grad[0] == doctest::Approx(12.0));

  // Two different losses accumulate their contributions.
  Parameter r("r", Tensor::scalar(2.0));
  Tape t2;
  Value l1 = t2.mul(t2.param(r), t2.param(r));           // d/dr = 4
  Value l2 = t2.scale(t2.param(r), 3.0);                 // d/dr = 3
  t2.backward(l1);
  t2.backward(l2);
  CHECK(r.grad[0] == doctest::Approx(7.0));
}

TEST_CASE("sum_list equals chained add bit-exactly") {
  Rng rng(3);
  for (std::size_t n = 1; n <= 16; ++n) {
    std::vector<Tensor> ts;
    for (std::size_t i = 0; i < n; ++i) ts.push_back(testutil::random_tensor({4}, rng));
    Tape t;
    std::vector<Value> vals;
    for (const Tensor& x : ts) vals.push_back(t.constant(x));
    Value sum = t.sum_list(vals);
    Value fold = vals[0];
    for (std::size_t i = 1; i < n; ++i) fold = t.add(fold, vals[i]);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(t.val(sum)[i] == t.val(fold)[i]);  // bit-identical
    }
  }
}

TEST_CASE("gradcheck: quadratic, constant, and every core op") {
  Rng rng(11);

  // Quadratic form: tight tolerance.
  Tensor q = testutil::random_tensor({4}, rng);
  double err = gradcheck(
      [](Tape& t, Value x) {
        Value y = t.mul(x, x);
        return t.sum_all(y);
      },
      q, 1e-6);
  CHECK(err < 1e-7);

  // Constant function: both gradients zero.
  double cerr = gradcheck([](Tape& t, Value) { return t.constant(Tensor::scalar(5.0)); }, q);
  CHECK(cerr == 0.0);

  // Weighted-sum wrappers keep every op's gradient informative.
  auto weighted = [](Tape& t, Value y, const Tensor& w) {
    return t.sum_all(t.mul(y, t.constant(w)));
  };

  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = testutil::random_tensor({3, 4}, rng);
    Tensor w34 = testutil::random_tensor({3, 4}, rng);
    Tensor w32 = testutil::random_tensor({3, 2}, rng);
    Tensor m42 = testutil::random_tensor({4, 2}, rng);
    Tensor m24 = testutil::random_tensor({2, 4}, rng);
    Tensor bias = testutil::random_tensor({4}, rng);

    CHECK(gradcheck([&](Tape& t, Value v) { return weighted(t, t.matmul(v, t.constant(m42)), w32); }, x) < 1e-5);
    CHECK(gradcheck([&](Tape& t, Value v) { return weighted(t, t.matmul_nt(v, t.constant(m24)), w32); }, x) < 1e-5);
    CHECK(gradcheck([&](Tape& t, Value v) { return weighted(t, t.add(v, t.constant(bias)), w34); }, x) < 1e-5);
    CHECK(gradcheck([&](Tape& t, Value v) { return weighted(t, t.sub(v, t.constant(w34)), w34); }, x) < 1e-5);
    CHECK(gradcheck([&](Tape& t, Value v) { return weighted(t, t.mul(v, t.constant(w34)), w34); }, x) < 1e-5);
    CHECK(gradcheck([&](Tape& t, Value v) { return weighted(t, t.sigmoid(v), w34); }, x) < 1e-5);
    CHECK(gradcheck([&](Tape& t, Value v) { return weighted(t, t.tanh(v), w34); }, x) < 1e-5);
    CHECK(gradcheck([&](Tape& t, Value v) { return weighted(t, t.softmax(v), w34); }, x) < 1e-5);
    CHECK(gradcheck([&](Tape& t, Value v) { return weighted(t, t.slice(v, 1, 1, 2), w32); }, x) < 1e-5);
    CHECK(gradcheck([&](Tape& t, Value v) {
            return weighted(t, t.concat({v, t.constant(w34)}, 1), testutil::random_tensor({3, 8}, rng));
          }, x) < 1e-5);
    CHECK(gradcheck([&](Tape& t, Value v) {
            return weighted(t, t.sum_list({v, t.constant(w34), t.constant(x)}), w34);
          }, x) < 1e-5);
    CHECK(gradcheck([&](Tape& t, Value v) {
            return t.euclidean_loss(v, t.constant(w34));
          }, x) < 1e-5);
  }

  // Cross entropy through softmax.
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = testutil::random_tensor({5}, rng);
    CHECK(gradcheck([&](Tape& t, Value v) { return t.cross_entropy_loss(t.softmax(v), 2); },
                    logits) < 1e-5);
  }
}
