#include <doctest.h>

#include <cmath>
#include <numeric>

#include "radfiner/checkpoint.hpp"
#include "radfiner/error.hpp"
#include "radfiner/gradcheck.hpp"
#include "radfiner/graph.hpp"
#include "radfiner/optim.hpp"
#include "support.hpp"

using namespace radfiner;
using namespace radfiner::nn;
using testing::random_tensor;
using testing::weighted_sum;

namespace {

// Runs gradient_check on a loss built from the store's parameters.
double check(ParamStore& store, const LossBuilder& loss) {
  auto params = store.trainable();
  return gradient_check(loss, params).max_relative_error;
}

}  // namespace

TEST_CASE("tensor construction validates sizes") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.all_finite());
  t[4] = std::nan("");
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("masked softmax contracts") {
  Graph g;
  SUBCASE("equal logits") {
    auto y = masked_softmax(g.constant(Tensor({1, 4}, 0.7)), 1);
    for (double v : y.value().values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("masked slot is exactly zero") {
    const std::vector<std::uint8_t> mask{1, 1, 0};
    auto y = masked_softmax(g.constant(Tensor({1, 3}, std::vector<double>{0.3, -1.2, 5.0})), 1, mask);
    CHECK(y.value()[2] == 0.0);
    CHECK(y.value()[0] + y.value()[1] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("fully masked slice is zero") {
    const std::vector<std::uint8_t> mask{0, 0, 1, 1};
    auto y = masked_softmax(g.constant(Tensor({2, 2}, std::vector<double>{1, 2, 3, 4})), 1, mask);
    CHECK(y.value()[0] == 0.0);
    CHECK(y.value()[1] == 0.0);
    CHECK(y.value()[2] + y.value()[3] == doctest::Approx(1.0));
  }
  SUBCASE("axis 0 of a rank-3 tensor") {
    Rng rng = derive_rng(3);
    auto x = random_tensor({4, 3, 2}, rng, -3, 3);
    auto y = masked_softmax(g.constant(x), 0);
    for (std::size_t j = 0; j < 6; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < 4; ++i) s += y.value()[i * 6 + j];
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
  SUBCASE("bad axis") { CHECK_THROWS(masked_softmax(g.constant(Tensor({2, 2})), 2)); }
}

TEST_CASE("activations at fixed points") {
  Graph g;
  auto x = g.constant(Tensor({3}, std::vector<double>{0.0, -3.0, 2.0}));
  CHECK(gelu(x).value()[0] == 0.0);
  CHECK(relu(x).value()[1] == 0.0);
  CHECK(relu(x).value()[2] == 2.0);
  // x * Phi(x) at x = 2
  CHECK(gelu(x).value()[2] == doctest::Approx(2.0 * 0.5 * std::erfc(-2.0 / std::sqrt(2.0))).epsilon(1e-15));
}

TEST_CASE("backward of sum(W x) gives the outer structure") {
  ParamStore store;
  Rng rng = derive_rng(11);
  auto& w = store.add("w", random_tensor({3, 4}, rng));
  Tensor x = random_tensor({2, 3}, rng);
  Graph g;
  auto y = sum_all(matmul(g.constant(x), g.param(w)));
  g.backward(y);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(w.grad.at(i, j) == doctest::Approx(x.at(0, i) + x.at(1, i)));
  }
}

TEST_CASE("masked softmax slot with mask 0 sends no gradient") {
  ParamStore store;
  auto& p = store.add("p", Tensor({1, 3}, std::vector<double>{0.2, 0.5, -0.1}));
  const std::vector<std::uint8_t> mask{1, 0, 1};
  Graph g;
  auto y = weighted_sum(masked_softmax(g.param(p), 1, mask), Tensor({1, 3}, std::vector<double>{1.0, 7.0, -2.0}));
  g.backward(y);
  CHECK(p.grad[1] == 0.0);
  CHECK(p.grad[0] != 0.0);
}

TEST_CASE("gradients accumulate across backward calls") {
  ParamStore store;
  auto& p = store.add("p", Tensor({2}, std::vector<double>{1.0, 2.0}));
  for (int k = 0; k < 2; ++k) {
    Graph g;
    g.backward(sum_all(mul(g.param(p), g.param(p))));
  }
  CHECK(p.grad[0] == 4.0);
  CHECK(p.grad[1] == 8.0);
  store.zero_grad();
  CHECK(p.grad[0] == 0.0);
}

TEST_CASE("backward rejects non-scalar roots") {
  Graph g;
  ParamStore store;
  auto& p = store.add("p", Tensor({2}, 1.0));
  CHECK_THROWS(g.backward(g.param(p)));
}

TEST_CASE("gradient check of a quadratic is exact to rounding") {
  ParamStore store;
  Rng rng = derive_rng(5);
  auto& p = store.add("theta", random_tensor({7}, rng, -2, 2));
  auto loss = [&](Graph& g) { return scale(sum_all(mul(g.param(p), g.param(p))), 0.5); };
  CHECK(check(store, loss) < 1e-9);
}

TEST_CASE("round-off accounting in gradient reports") {
  GradCheckReport r;
  r.loss = 2.0;
  r.step = 1e-5;
  CHECK(r.roundoff() == doctest::Approx(2.0 * 0x1p-52 / 2e-5).epsilon(1e-15));
  // an exact zero seen through a one-ulp flip, a clean match, and a real error
  r.params.push_back({"zero", 1, 0.0, {0.0}, {r.roundoff()}});
  r.params.push_back({"fine", 1, 0.0, {0.5}, {0.5 + 1e-9}});
  r.params.push_back({"bad", 1, 0.0, {0.5}, {0.51}});
  CHECK(r.unexplained(1e-4) == 1);
  r.params.pop_back();
  CHECK(r.unexplained(1e-4) == 0);
  CHECK(r.unexplained(1e-4, 0.5) == 1);

  // reports carry the loss, the step and every entry
  ParamStore store;
  auto& p = store.add("theta", Tensor({3}, 1.5));
  auto params = store.trainable();
  const auto rep = gradient_check([&](Graph& g) { return sum_all(mul(g.param(p), g.param(p))); }, params, 1e-4);
  CHECK(rep.loss == 6.75);
  CHECK(rep.step == 1e-4);
  REQUIRE(rep.params.size() == 1);
  CHECK(rep.params[0].analytic == std::vector<double>{3.0, 3.0, 3.0});
  for (double n : rep.params[0].numeric) CHECK(n == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("primitive reverse passes match finite differences") {
  Rng rng = derive_rng(21);
  ParamStore store;
  auto& a = store.add("a", random_tensor({4, 3}, rng));
  auto& b = store.add("b", random_tensor({3, 5}, rng));
  auto& c = store.add("c", random_tensor({4, 3}, rng));
  auto& r = store.add("r", random_tensor({3}, rng));
  const Tensor w43 = random_tensor({4, 3}, rng);
  const Tensor w45 = random_tensor({4, 5}, rng);

  SUBCASE("matmul") { CHECK(check(store, [&](Graph& g) { return weighted_sum(matmul(g.param(a), g.param(b)), w45); }) < 1e-6); }
  SUBCASE("add, sub, row broadcast") {
    CHECK(check(store, [&](Graph& g) {
      return weighted_sum(sub(add(g.param(a), g.param(r)), g.param(c)), w43);
    }) < 1e-6);
  }
  SUBCASE("mul, scale") {
    CHECK(check(store, [&](Graph& g) { return weighted_sum(scale(mul(g.param(a), g.param(c)), -1.7), w43); }) < 1e-6);
  }
  SUBCASE("relu, gelu") {
    CHECK(check(store, [&](Graph& g) { return weighted_sum(gelu(relu(g.param(a))), w43); }) < 1e-6);
  }
  SUBCASE("masked softmax over rows") {
    std::vector<std::uint8_t> mask(12, 1);
    mask[1] = mask[5] = 0;
    CHECK(check(store, [&](Graph& g) { return weighted_sum(masked_softmax(g.param(a), 1, mask), w43); }) < 1e-6);
  }
  SUBCASE("masked softmax over axis 0") {
    CHECK(check(store, [&](Graph& g) { return weighted_sum(masked_softmax(g.param(a), 0), w43); }) < 1e-6);
  }
  SUBCASE("segment softmax") {
    const std::vector<std::size_t> offsets{0, 1, 4};
    CHECK(check(store, [&](Graph& g) { return weighted_sum(segment_softmax(g.param(a), offsets), w43); }) < 1e-6);
  }
  SUBCASE("gather rows with padding") {
    const std::vector<std::size_t> idx{3, 0, 0, 3, 2};
    const std::vector<std::uint8_t> valid{1, 1, 0, 1, 1};
    const Tensor w53 = random_tensor({5, 3}, rng);
    CHECK(check(store, [&](Graph& g) { return weighted_sum(gather_rows(g.param(a), idx, valid), w53); }) < 1e-6);
  }
  SUBCASE("segment sum, reduce sum, mask rows") {
    const std::vector<std::size_t> offsets{0, 2, 4};
    const std::vector<std::uint8_t> keep{1, 0, 1, 1};
    const Tensor w23 = random_tensor({2, 3}, rng);
    CHECK(check(store, [&](Graph& g) {
      auto s = segment_sum(mask_rows(g.param(a), keep), offsets);
      return add(weighted_sum(s, w23), sum_all(reduce_sum(g.param(c), 1)));
    }) < 1e-6);
  }
}

TEST_CASE("batch normalization") {
  Rng rng = derive_rng(31);
  ParamStore store;
  auto& x = store.add("x", random_tensor({9, 4}, rng, -3, 5));
  auto bn = BatchNormState::create(store, "bn", 4);
  for (auto& v : bn.gamma->value.values()) v = uniform(rng, 0.5, 1.5);
  for (auto& v : bn.beta->value.values()) v = uniform(rng, -0.5, 0.5);
  const Tensor w = random_tensor({9, 4}, rng);
  const std::vector<std::uint8_t> rows{1, 1, 0, 1, 1, 1, 0, 1, 1};

  SUBCASE("training output is standardized before the affine part") {
    bn.gamma->value.fill(1.0);
    bn.beta->value.fill(0.0);
    auto column_moments = [](const Tensor& t, std::size_t c) {
      double m = 0, v = 0;
      for (std::size_t r = 0; r < t.rows(); ++r) m += t.at(r, c);
      m /= static_cast<double>(t.rows());
      for (std::size_t r = 0; r < t.rows(); ++r) v += (t.at(r, c) - m) * (t.at(r, c) - m);
      return std::pair{m, v / static_cast<double>(t.rows())};
    };
    Graph g;
    auto y = batchnorm(g.param(x), bn, Mode::Training).value();
    for (std::size_t c = 0; c < 4; ++c) {
      const auto [m, v] = column_moments(y, c);
      const double vx = column_moments(x.value, c).second;
      CHECK(std::abs(m) < 1e-9);
      CHECK(v == doctest::Approx(vx / (vx + 1e-5)).epsilon(1e-12));
    }
    // wide inputs make the eps shrinkage negligible
    auto& wide = store.add("wide", random_tensor({9, 4}, rng, -30, 50));
    Graph g2;
    auto yw = batchnorm(g2.param(wide), bn, Mode::Training).value();
    for (std::size_t c = 0; c < 4; ++c) {
      const auto [m, v] = column_moments(yw, c);
      CHECK(std::abs(m) < 1e-9);
      CHECK(std::abs(v - 1.0) < 1e-6);
    }
  }
  SUBCASE("running statistics follow the momentum rule") {
    Graph g;
    batchnorm(g.param(x), bn, Mode::Training);
    double mean0 = 0;
    for (std::size_t r = 0; r < 9; ++r) mean0 += x.value.at(r, 0);
    mean0 /= 9;
    CHECK(bn.running_mean->value[0] == doctest::Approx(0.1 * mean0).epsilon(1e-12));
    for (double v : bn.running_var->value.values()) CHECK(v >= 0.0);
  }
  SUBCASE("inference is an affine map") {
    Graph g;
    auto y = batchnorm(g.param(x), bn, Mode::Inference).value();
    const double expect = (x.value.at(2, 1) - 0.0) / std::sqrt(1.0 + 1e-5) * bn.gamma->value[1] + bn.beta->value[1];
    CHECK(y.at(2, 1) == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("training-mode gradients with a row mask") {
    const double err = check(store, [&](Graph& g) {
      auto y = batchnorm(g.param(x), bn, Mode::Training, rows);
      return weighted_sum(gelu(y), w);
    });
    CHECK(err < 1e-5);
  }
  SUBCASE("inference-mode gradients") {
    const double err = check(store, [&](Graph& g) { return weighted_sum(batchnorm(g.param(x), bn, Mode::Inference), w); });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("AdamW update rules") {
  ParamStore store;
  auto& p = store.add("p", Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
  auto params = store.trainable();
  SUBCASE("zero gradient applies pure decoupled decay") {
    AdamW opt({0.01, 0.9, 0.999, 1e-8, 0.1});
    opt.step(params);
    CHECK(p.value[0] == doctest::Approx(1.0 * (1 - 0.01 * 0.1)).epsilon(1e-15));
    CHECK(p.value[1] == doctest::Approx(-2.0 * (1 - 0.01 * 0.1)).epsilon(1e-15));
    CHECK(opt.step_count() == 1);
  }
  SUBCASE("zero gradient without decay leaves parameters") {
    AdamW opt({0.01, 0.9, 0.999, 1e-8, 0.0});
    opt.step(params);
    CHECK(p.value[0] == 1.0);
    CHECK(p.value[2] == 0.5);
  }
  SUBCASE("first step with unit gradient moves by lr") {
    AdamW opt({0.001, 0.9, 0.999, 1e-8, 0.0});
    p.grad.fill(1.0);
    opt.step(params);
    // m_hat = v_hat = 1, so the step is lr / (1 + eps)
    CHECK(p.value[0] == doctest::Approx(1.0 - 0.001 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(p.value[1] == doctest::Approx(-2.0 - 0.001 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(p.grad[0] == 0.0);
  }
}

TEST_CASE("checkpoint round trip") {
  Rng rng = derive_rng(41);
  ParamStore a, b;
  a.add("layer.w", random_tensor({3, 2}, rng));
  a.add("layer.bn.running_var", random_tensor({2}, rng, 0.1, 2), false);
  b.add("layer.w", Tensor({3, 2}));
  b.add("layer.bn.running_var", Tensor({2}), false);
  const auto text = format_checkpoint(a);
  CHECK(text.rfind("#radfiner-ckpt v1\n", 0) == 0);
  parse_checkpoint(b, text);
  CHECK(b.get("layer.w").value == a.get("layer.w").value);
  CHECK(b.get("layer.bn.running_var").value == a.get("layer.bn.running_var").value);
  CHECK(format_checkpoint(b) == text);

  ParamStore wrong;
  wrong.add("layer.w", Tensor({2, 3}));
  wrong.add("layer.bn.running_var", Tensor({2}), false);
  CHECK_THROWS_AS(parse_checkpoint(wrong, text), DataError);
}
