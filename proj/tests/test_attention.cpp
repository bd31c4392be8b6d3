#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "radfiner/attention.hpp"
#include "radfiner/error.hpp"
#include "radfiner/gradcheck.hpp"
#include "radfiner/neighborhood.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace radfiner;
using namespace radfiner::nn;
using testing::coords_tensor;
using testing::random_coords;
using testing::random_tensor;
using namespace testing::oracle;

namespace {

// Valid slots of row i as a plain list.
std::vector<std::size_t> row_indices(const Neighborhood& nb, std::size_t i) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < nb.max_neighbors; ++k) {
    if (nb.valid[nb.slot(i, k)]) out.push_back(nb.indices[nb.slot(i, k)]);
  }
  return out;
}

Tensor run_attention(Block& b, const Tensor& coords, const Tensor& x, double radius, std::size_t nmax, Mode mode,
                     PaddingMode pad = PaddingMode::Mask) {
  Graph g;
  const auto nb = ball_query(coords, radius, nmax);
  return radius_attention(g.constant(x), nb, b.params, mode, pad).features.value();
}

// Coordinates with distinct pairwise distances (almost surely) on a small square.
Tensor cluster_coords(std::size_t n, double extent, Rng& rng) { return random_coords(n, extent, rng); }

}  // namespace

TEST_CASE("ball query on three collinear points") {
  const auto nb = ball_query(coords_tensor({{0, 0}, {3, 0}, {10, 0}}), 5.0, 24);
  CHECK(row_indices(nb, 0) == std::vector<std::size_t>{0, 1});
  CHECK(row_indices(nb, 1) == std::vector<std::size_t>{1, 0});
  CHECK(row_indices(nb, 2) == std::vector<std::size_t>{2});
  CHECK(nb.rel_pos[2 * nb.slot(0, 1)] == -3.0);
  // padding carries index 0 and zero offset
  CHECK(nb.indices[nb.slot(2, 5)] == 0);
  CHECK(nb.rel_pos[2 * nb.slot(2, 5) + 1] == 0.0);
}

TEST_CASE("ball query on a single point") {
  const auto nb = ball_query(coords_tensor({{4, -2}}), 5.0, 24);
  CHECK(nb.valid_count(0) == 1);
  CHECK(nb.total_valid() == 1);
  CHECK(nb.max_neighbors == 24);
  CHECK(std::count(nb.valid.begin(), nb.valid.end(), 0) == 23);
}

TEST_CASE("radius is inclusive and ties break by index") {
  const auto nb = ball_query(coords_tensor({{0, 0}, {0, 2}, {2, 0}, {0, -2}, {0, 2.0000001}}), 2.0, 3);
  CHECK(row_indices(nb, 0) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("30 points inside the radius keep the 24 nearest") {
  Rng rng = derive_rng(2);
  Tensor c({30, 2});
  for (std::size_t i = 0; i < 30; ++i) {
    const double ang = uniform(rng, 0, 6.283185307179586), rad = uniform(rng, 0, 2.0);
    c.at(i, 0) = rad * std::cos(ang);
    c.at(i, 1) = rad * std::sin(ang);
  }
  const auto nb = ball_query(c, 5.0, 24);
  for (std::size_t i = 0; i < 30; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < 30; ++j) {
      if (j == i) continue;
      all.push_back({std::hypot(c.at(i, 0) - c.at(j, 0), c.at(i, 1) - c.at(j, 1)), j});
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect{i};
    for (std::size_t k = 0; k < 23; ++k) expect.push_back(all[k].second);
    CHECK(row_indices(nb, i) == expect);
  }
}

TEST_CASE("grid ball query equals the exhaustive reference") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng = derive_rng(seed, 77);
    const std::size_t n = static_cast<std::size_t>(uniform_int(rng, 1, 150));
    const auto c = random_coords(n, uniform(rng, 2.0, 40.0), rng);
    const double r = uniform(rng, 0.5, 6.0);
    const auto nmax = static_cast<std::size_t>(uniform_int(rng, 1, 30));
    CHECK(ball_query(c, r, nmax) == ball_query_reference(c, r, nmax));
    const std::vector<std::size_t> seg{0, n / 2, n};
    const auto split = ball_query(c, r, nmax, seg);
    CHECK(split == ball_query_reference(c, r, nmax, seg));
    for (std::size_t i = 0; i < n; ++i) {
      for (auto j : row_indices(split, i)) CHECK((i < n / 2) == (j < n / 2));
    }
  }
}

TEST_CASE("ball query errors") {
  Tensor c = coords_tensor({{0, 0}, {1, 1}});
  CHECK_THROWS(ball_query(c, 0.0, 4));
  CHECK_THROWS(ball_query(c, 1.0, 0));
  c.at(1, 0) = std::nan("");
  CHECK_THROWS_AS(ball_query(c, 1.0, 4), DataError);
}

TEST_CASE("positional encoding padding and zero offsets") {
  Block b(6, 3);
  Graph g;
  SUBCASE("padded rows are zero") {
    Tensor rel({3, 2}, std::vector<double>{1, 2, -1, 0.5, 3, 3});
    const std::vector<std::uint8_t> valid{1, 0, 1};
    auto r = positional_encoding(g, rel, valid, b.params, Mode::Training).value();
    for (std::size_t c = 0; c < 6; ++c) CHECK(r.at(1, c) == 0.0);
  }
  SUBCASE("zero offset with unit statistics encodes to zero") {
    b.params.bn_pos.running_mean->value.fill(0.0);
    b.params.bn_pos.running_var->value.fill(1.0);
    b.params.bn_pos.beta->value.fill(0.0);
    const std::vector<std::uint8_t> valid{1};
    auto r = positional_encoding(g, Tensor({1, 2}), valid, b.params, Mode::Inference).value();
    for (double v : r.values()) CHECK(v == 0.0);
  }
  SUBCASE("W_p2 gradient matches finite differences") {
    Rng rng = derive_rng(8);
    Tensor rel = random_tensor({10, 2}, rng, -4, 4);
    std::vector<std::uint8_t> valid(10, 1);
    valid[3] = 0;
    const Tensor w = random_tensor({10, 6}, rng);
    std::vector<Param*> params{b.params.w_p2, b.params.w_p1};
    auto report = gradient_check(
        [&](Graph& gg) { return testing::weighted_sum(positional_encoding(gg, rel, valid, b.params, Mode::Inference), w); },
        params);
    CHECK(report.max_relative_error < 1e-4);
  }
}

TEST_CASE("single point attends to itself") {
  Block b(5, 4);
  Rng rng = derive_rng(4);
  const Tensor x = random_tensor({1, 5}, rng);
  const Tensor c = coords_tensor({{2, 2}});
  for (Mode mode : {Mode::Inference, Mode::Training}) {
    Graph g;
    const auto nb = ball_query(c, 5.0, 24);
    auto res = radius_attention(g.constant(x), nb, b.params, mode);
    auto pos = positional_encoding(g, res.edges.rel_pos, res.edges.valid, b.params, mode).value();
    const auto v = matmul(g.constant(x), g.param(*b.params.w_v)).value();
    for (std::size_t ch = 0; ch < 5; ++ch) {
      CHECK(res.weights.value().at(0, ch) == 1.0);
      CHECK(res.features.value().at(0, ch) == doctest::Approx(v.at(0, ch) + pos.at(0, ch)).epsilon(1e-14));
    }
  }
}

TEST_CASE("attention equals the loop-nest oracle") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Block b(8, 100 + seed);
    Rng rng = derive_rng(seed, 5);
    const Tensor c = cluster_coords(12, 8.0, rng);
    const Tensor x = random_tensor({12, 8}, rng);
    for (Mode mode : {Mode::Inference, Mode::Training}) {
      const std::size_t nmax = seed % 2 ? 24 : 4;
      const Mat expect = oracle_attention(c, x, 3.0, nmax, b.params, mode);
      const Tensor got = run_attention(b, c, x, 3.0, nmax, mode);
      double worst = 0.0;
      for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t ch = 0; ch < 8; ++ch) worst = std::max(worst, std::abs(got.at(i, ch) - expect[i][ch]));
      CHECK(worst < 1e-10);
    }
  }
}

TEST_CASE("attention weights are distributions over valid slots") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Block b(6, seed);
    Rng rng = derive_rng(seed, 9);
    const std::size_t n = static_cast<std::size_t>(uniform_int(rng, 1, 60));
    const Tensor c = random_coords(n, 15.0, rng);
    const Tensor x = random_tensor({n, 6}, rng, -2, 2);
    Graph g;
    const auto nb = ball_query(c, 4.0, 8);
    auto res = radius_attention(g.constant(x), nb, b.params, Mode::Training);
    const auto& w = res.weights.value();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t ch = 0; ch < 6; ++ch) {
        double s = 0.0;
        for (std::size_t e = res.edges.offsets[i]; e < res.edges.offsets[i + 1]; ++e) {
          CHECK(w.at(e, ch) >= 0.0);
          s += w.at(e, ch);
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("zero-pad mode lets padded slots take weight") {
  Block b(4, 12);
  const Tensor c = coords_tensor({{0, 0}, {1, 0}, {30, 30}});
  Rng rng = derive_rng(12);
  const Tensor x = random_tensor({3, 4}, rng);
  Graph g;
  const auto nb = ball_query(c, 2.0, 3);
  auto res = radius_attention(g.constant(x), nb, b.params, Mode::Inference, PaddingMode::ZeroPad);
  CHECK(res.edges.size() == 9);
  CHECK_FALSE(res.edges.all_valid);
  // isolated point: one real slot and two padded ones share the mass
  double pad_mass = 0.0;
  for (std::size_t e = 7; e < 9; ++e) pad_mass += res.weights.value().at(e, 0);
  CHECK(pad_mass > 0.0);
  CHECK(parse_padding_mode("zeropad") == PaddingMode::ZeroPad);
  CHECK_THROWS_AS(parse_padding_mode("none"), DataError);
}

TEST_CASE("locality: points beyond the radius never influence an anchor") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Block b(6, seed + 1000);
    Rng rng = derive_rng(seed, 13);
    const std::size_t n = 40;
    const Tensor c = random_coords(n, 20.0, rng);
    Tensor x = random_tensor({n, 6}, rng);
    const double r = 3.0;
    const Tensor before = run_attention(b, c, x, r, 24, Mode::Inference);
    const std::size_t moved = static_cast<std::size_t>(uniform_int(rng, 0, n - 1));
    for (std::size_t ch = 0; ch < 6; ++ch) x.at(moved, ch) += uniform(rng, -50, 50);
    const Tensor after = run_attention(b, c, x, r, 24, Mode::Inference);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::hypot(c.at(i, 0) - c.at(moved, 0), c.at(i, 1) - c.at(moved, 1)) <= r) continue;
      for (std::size_t ch = 0; ch < 6; ++ch) CHECK(after.at(i, ch) == before.at(i, ch));
    }
  }
}

TEST_CASE("two distant clusters are independent") {
  Block b(6, 44);
  Rng rng = derive_rng(44);
  Tensor c = random_coords(20, 3.0, rng);
  for (std::size_t i = 10; i < 20; ++i) c.at(i, 0) += 50.0;
  Tensor x = random_tensor({20, 6}, rng);
  const Tensor before = run_attention(b, c, x, 5.0, 24, Mode::Inference);
  for (std::size_t i = 10; i < 20; ++i)
    for (std::size_t ch = 0; ch < 6; ++ch) x.at(i, ch) = uniform(rng, -100, 100);
  const Tensor after = run_attention(b, c, x, 5.0, 24, Mode::Inference);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t ch = 0; ch < 6; ++ch) CHECK(after.at(i, ch) == before.at(i, ch));
}

TEST_CASE("permutation equivariance") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Block b(5, seed + 7);
    Rng rng = derive_rng(seed, 17);
    const std::size_t n = 25;
    const Tensor c = random_coords(n, 10.0, rng);
    const Tensor x = random_tensor({n, 5}, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor pc({n, 2}), px({n, 5});
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t d = 0; d < 2; ++d) pc.at(k, d) = c.at(perm[k], d);
      for (std::size_t d = 0; d < 5; ++d) px.at(k, d) = x.at(perm[k], d);
    }
    for (Mode mode : {Mode::Inference, Mode::Training}) {
      const Tensor a = run_attention(b, c, x, 4.0, 6, mode);
      const Tensor p = run_attention(b, pc, px, 4.0, 6, mode);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t d = 0; d < 5; ++d) CHECK(p.at(k, d) == doctest::Approx(a.at(perm[k], d)).epsilon(1e-12));
    }
  }
}

TEST_CASE("a cap above every row population matches an uncapped run") {
  Block b(5, 91);
  Rng rng = derive_rng(91);
  const Tensor c = random_coords(30, 12.0, rng);
  const Tensor x = random_tensor({30, 5}, rng);
  const Tensor big = run_attention(b, c, x, 3.0, 30, Mode::Training);
  const auto nb = ball_query(c, 3.0, 30);
  std::size_t most = 0;
  for (std::size_t i = 0; i < 30; ++i) most = std::max(most, nb.valid_count(i));
  CHECK(run_attention(b, c, x, 3.0, most, Mode::Training) == big);
}

TEST_CASE("attention block gradients match finite differences") {
  Block b(8, 55);
  Rng rng = derive_rng(55);
  const Tensor c = random_coords(12, 6.0, rng);
  ParamStore inputs;
  auto& xin = inputs.add("x", random_tensor({12, 8}, rng));
  const Tensor w = random_tensor({12, 8}, rng);
  const auto nb = ball_query(c, 3.0, 6);
  for (int k = 0; k < 30; ++k) {
    Graph g;
    radius_attention(g.param(xin), nb, b.params, Mode::Training);
  }
  auto params = b.store.trainable();
  params.push_back(&xin);
  auto report = gradient_check(
      [&](Graph& g) {
        return testing::weighted_sum(radius_attention(g.param(xin), nb, b.params, Mode::Inference).features, w);
      },
      params);
  // Shifts that are constant over an anchor's neighbors cancel in the softmax,
  // so some entries have an exact zero gradient; those may only disagree by
  // loss round-off.
  CHECK(report.unexplained(1e-4) == 0);
  for (const auto& p : report.params) {
    if (p.name.ends_with("w_q") || p.name.ends_with("w_v") || p.name == "x") {
      INFO(p.name);
      CHECK(p.max_relative_error < 1e-4);
    }
  }
}
