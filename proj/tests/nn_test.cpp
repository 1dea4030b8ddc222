#include "malfuse/nn.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "grad_check.hpp"
#include "malfuse/errors.hpp"
#include "temp_dir.hpp"

using namespace malfuse;
using namespace malfuse::nn;
using malfuse::test::check_layer_gradients;
using malfuse::test::random_input;

TEST_CASE("tensor indexing is row-major") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  t.at3(1, 2, 3) = 7.0;
  CHECK(t.data[1 * 12 + 2 * 4 + 3] == 7.0);
  Tensor u({3, 5});
  u.at2(2, 4) = 9.0;
  CHECK(u.data[14] == 9.0);
}

TEST_CASE("uniform01 is deterministic and in [0,1)") {
  std::mt19937_64 a(123), b(123);
  for (int i = 0; i < 1000; ++i) {
    const double va = uniform01(a);
    CHECK(va == uniform01(b));
    CHECK(va >= 0.0);
    CHECK(va < 1.0);
  }
}

TEST_CASE("conv2d forward matches a hand computation") {
  std::mt19937_64 rng(1);
  Conv2d conv(1, 1, 2, 2, rng);
  conv.weight.data = {1.0, 0.0, 0.0, -1.0};
  conv.bias.data = {0.5};
  Tensor x({1, 3, 3});
  x.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const Tensor out = conv.forward(x);
  REQUIRE(out.shape == std::vector<std::size_t>{1, 2, 2});
  for (double v : out.data) CHECK(v == doctest::Approx(-3.5));
}

TEST_CASE("conv2d rejects inputs smaller than the kernel") {
  std::mt19937_64 rng(1);
  Conv2d conv(1, 1, 5, 5, rng);
  Tensor x({1, 4, 8});
  CHECK_THROWS_AS(conv.forward(x), ValidationError);
}

TEST_CASE("conv1d forward matches a hand computation") {
  std::mt19937_64 rng(1);
  Conv1d conv(2, 1, 2, rng);
  // out[t] = 1*x0[t] + 2*x0[t+1] + 3*x1[t] + 4*x1[t+1] + (-1)
  conv.weight.data = {1, 2, 3, 4};
  conv.bias.data = {-1.0};
  Tensor x({2, 3});
  x.data = {1, 2, 3, 10, 20, 30};
  const Tensor out = conv.forward(x);
  REQUIRE(out.shape == std::vector<std::size_t>{1, 2});
  CHECK(out.data[0] == doctest::Approx(1 + 4 + 30 + 80 - 1));
  CHECK(out.data[1] == doctest::Approx(2 + 6 + 60 + 120 - 1));
}

TEST_CASE("maxpool2d picks maxima and drops odd tails") {
  MaxPool2d pool;
  Tensor x({1, 3, 5});
  x.data = {1,  9, 2, 3, 99,
            4,  5, 6, 7, 98,
            97, 96, 95, 94, 93};  // row 2 and column 4 are dropped
  const Tensor out = pool.forward(x);
  REQUIRE(out.shape == std::vector<std::size_t>{1, 1, 2});
  CHECK(out.data[0] == 9.0);
  CHECK(out.data[1] == 7.0);

  Tensor go({1, 1, 2});
  go.data = {1.0, 2.0};
  const Tensor gi = pool.backward(go);
  CHECK(gi.data[1] == 1.0);  // position of the 9
  CHECK(gi.data[8] == 2.0);  // position of the 7
  double sum = 0.0;
  for (double v : gi.data) sum += v;
  CHECK(sum == 3.0);
}

TEST_CASE("maxpool2d ties go to the earliest element") {
  MaxPool2d pool;
  Tensor x({1, 2, 2});
  x.data = {5, 5, 5, 5};
  pool.forward(x);
  Tensor go({1, 1, 1});
  go.data = {1.0};
  const Tensor gi = pool.backward(go);
  CHECK(gi.data[0] == 1.0);
  CHECK(gi.data[1] == 0.0);
  CHECK(gi.data[2] == 0.0);
  CHECK(gi.data[3] == 0.0);
}

TEST_CASE("layernorm normalizes across channels at each position") {
  LayerNorm ln(4);
  Tensor x({4, 3});
  std::mt19937_64 rng(7);
  for (double& v : x.data) v = uniform01(rng) * 10.0;
  const Tensor out = ln.forward(x);
  for (std::size_t p = 0; p < 3; ++p) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 4; ++c) mean += out.at2(c, p);
    mean /= 4.0;
    for (std::size_t c = 0; c < 4; ++c) {
      var += (out.at2(c, p) - mean) * (out.at2(c, p) - mean);
    }
    var /= 4.0;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shrinks it a bit
  }
}

TEST_CASE("dense forward matches a hand computation") {
  std::mt19937_64 rng(1);
  Dense dense(3, 2, rng);
  dense.weight.data = {1, 2, 3, 4, 5, 6};
  dense.bias.data = {0.5, -0.5};
  Tensor x({3});
  x.data = {1, 1, 2};
  const Tensor out = dense.forward(x);
  CHECK(out.data[0] == doctest::Approx(1 + 2 + 6 + 0.5));
  CHECK(out.data[1] == doctest::Approx(4 + 5 + 12 - 0.5));
}

TEST_CASE("embedding maps ids to channel-major columns") {
  std::mt19937_64 rng(1);
  Embedding emb(5, 3, rng);
  emb.weight.data = {0, 1, 2,     // row 0
                     10, 11, 12,  // row 1
                     20, 21, 22,  // row 2
                     30, 31, 32,  // row 3
                     40, 41, 42}; // row 4
  const Tensor out = emb.forward({2, 0, 4});
  REQUIRE(out.shape == std::vector<std::size_t>{3, 3});
  CHECK(out.at2(0, 0) == 20.0);
  CHECK(out.at2(1, 0) == 21.0);
  CHECK(out.at2(2, 2) == 42.0);

  Tensor go({3, 3});
  go.fill(1.0);
  emb.backward(go);
  CHECK(emb.grad_weight.data[2 * 3 + 0] == 1.0);  // row 2 touched once
  CHECK(emb.grad_weight.data[1 * 3 + 0] == 0.0);  // row 1 untouched

  CHECK_THROWS_AS(emb.forward({5}), ValidationError);
}

TEST_CASE("masked global max pool ignores invalid positions") {
  GlobalMaxPool1d pool;
  Tensor x({2, 4});
  x.data = {1, 9, 3, 4,
            -5, -1, -7, -2};
  SUBCASE("full mask") {
    const Tensor out = pool.forward(x, {1, 1, 1, 1});
    CHECK(out.data[0] == 9.0);
    CHECK(out.data[1] == -1.0);
  }
  SUBCASE("mask hides the maximum") {
    const Tensor out = pool.forward(x, {1, 0, 1, 1});
    CHECK(out.data[0] == 4.0);
    CHECK(out.data[1] == -2.0);
    Tensor go({2});
    go.data = {1.0, 1.0};
    const Tensor gi = pool.backward(go);
    CHECK(gi.data[1] == 0.0);  // masked position receives no gradient
    CHECK(gi.data[3] == 1.0);
    CHECK(gi.data[7] == 1.0);
  }
  SUBCASE("empty mask yields zeros and no gradient") {
    const Tensor out = pool.forward(x, {0, 0, 0, 0});
    CHECK(out.data[0] == 0.0);
    CHECK(out.data[1] == 0.0);
    Tensor go({2});
    go.data = {3.0, 3.0};
    const Tensor gi = pool.backward(go);
    for (double v : gi.data) CHECK(v == 0.0);
  }
}

TEST_CASE("softmax cross entropy basics") {
  Tensor logits({3});
  logits.data = {0.0, 0.0, 0.0};
  const SoftmaxLoss r = softmax_cross_entropy(logits, 1);
  CHECK(r.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(r.probs[0] == doctest::Approx(1.0 / 3));
  double gsum = 0.0;
  for (double g : r.grad.data) gsum += g;
  CHECK(gsum == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.grad.data[1] < 0.0);

  CHECK_THROWS_AS(softmax_cross_entropy(logits, 3), ValidationError);
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
  Tensor logits({5});
  std::mt19937_64 rng(11);
  for (double& v : logits.data) v = 2.0 * uniform01(rng) - 1.0;
  const SoftmaxLoss r = softmax_cross_entropy(logits, 2);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double fd = malfuse::test::fd_grad(
        [&]() { return softmax_cross_entropy(logits, 2).loss; },
        &logits.data[i], 1e-6);
    CHECK(r.grad.data[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("layer gradients match finite differences") {
  const double kTol = 1e-4;
  std::mt19937_64 rng(2024);

  SUBCASE("conv2d") {
    Conv2d conv(2, 3, 3, 3, rng);
    const auto r = check_layer_gradients(conv, random_input({2, 6, 7}, 1), 10);
    CHECK(r.max_rel_err < kTol);
  }
  SUBCASE("conv1d") {
    Conv1d conv(3, 4, 5, rng);
    const auto r = check_layer_gradients(conv, random_input({3, 12}, 2), 11);
    CHECK(r.max_rel_err < kTol);
  }
  SUBCASE("dense") {
    Dense dense(10, 7, rng);
    const auto r = check_layer_gradients(dense, random_input({10}, 3), 12);
    CHECK(r.max_rel_err < kTol);
  }
  SUBCASE("layernorm") {
    LayerNorm ln(6);
    std::mt19937_64 prng(5);
    for (double& v : ln.gamma.data) v = 0.5 + uniform01(prng);
    for (double& v : ln.beta.data) v = uniform01(prng) - 0.5;
    const auto r = check_layer_gradients(ln, random_input({6, 5}, 4), 13);
    CHECK(r.max_rel_err < kTol);
  }
  SUBCASE("relu") {
    Relu relu;
    const auto r = check_layer_gradients(relu, random_input({4, 5}, 5), 14);
    CHECK(r.max_rel_err < kTol);
  }
  SUBCASE("maxpool2d") {
    MaxPool2d pool;
    const auto r = check_layer_gradients(pool, random_input({2, 6, 6}, 6), 15);
    CHECK(r.max_rel_err < kTol);
  }
  SUBCASE("maxpool1d") {
    MaxPool1d pool;
    const auto r = check_layer_gradients(pool, random_input({3, 10}, 7), 16);
    CHECK(r.max_rel_err < kTol);
  }
}

TEST_CASE("adam minimizes a quadratic") {
  Tensor p({4});
  p.data = {5.0, -3.0, 2.0, 8.0};
  Tensor g({4});
  Adam opt(0.05);
  opt.attach({&p}, {&g});
  for (int it = 0; it < 2000; ++it) {
    for (std::size_t i = 0; i < 4; ++i) g.data[i] = 2.0 * p.data[i];
    opt.step();
  }
  for (double v : p.data) CHECK(std::abs(v) < 1e-3);
}

TEST_CASE("adam first step moves by roughly the learning rate") {
  Tensor p({1});
  p.data = {1.0};
  Tensor g({1});
  g.data = {0.001};
  Adam opt(0.1);
  opt.attach({&p}, {&g});
  opt.step();
  // Bias correction makes the first step ~lr * sign(grad).
  CHECK(p.data[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-3));
  CHECK(g.data[0] == 0.0);  // gradients are cleared after the step
}

TEST_CASE("weight serialization round-trips at float32 precision") {
  malfuse::test::TempDir dir("weights");
  const auto path = dir.path() / "w.bin";

  std::mt19937_64 rng(99);
  Dense a(4, 3, rng), b(4, 3, rng);
  save_weights(path, "TEST1", {&a.weight, &a.bias});
  load_weights(path, "TEST1", {&b.weight, &b.bias});
  for (std::size_t i = 0; i < a.weight.size(); ++i) {
    CHECK(b.weight.data[i] ==
          static_cast<double>(static_cast<float>(a.weight.data[i])));
  }

  SUBCASE("architecture tag mismatch") {
    CHECK_THROWS_AS(load_weights(path, "OTHER", {&b.weight, &b.bias}),
                    ValidationError);
  }
  SUBCASE("tensor count mismatch") {
    CHECK_THROWS_AS(load_weights(path, "TEST1", {&b.weight}), ValidationError);
  }
  SUBCASE("shape mismatch") {
    Dense c(3, 4, rng);
    CHECK_THROWS_AS(load_weights(path, "TEST1", {&c.weight, &c.bias}),
                    ValidationError);
  }
  SUBCASE("garbage file") {
    const auto bad = dir.path() / "bad.bin";
    std::ofstream(bad, std::ios::binary) << "not a weights file";
    CHECK_THROWS_AS(load_weights(bad, "TEST1", {&b.weight, &b.bias}),
                    ParseError);
  }
}

TEST_CASE("initialization is deterministic by seed") {
  std::mt19937_64 r1(7), r2(7), r3(8);
  Conv2d a(2, 4, 3, 3, r1), b(2, 4, 3, 3, r2), c(2, 4, 3, 3, r3);
  CHECK(a.weight.data == b.weight.data);
  CHECK(a.weight.data != c.weight.data);
}
