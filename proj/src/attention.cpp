#include "radfiner/attention.hpp"

#include <cmath>

#include "radfiner/error.hpp"

namespace radfiner {

using nn::Mode;
using nn::Tensor;
using nn::Var;

PaddingMode parse_padding_mode(const std::string& s) {
  if (s == "mask") return PaddingMode::Mask;
  if (s == "zeropad") return PaddingMode::ZeroPad;
  throw DataError("unknown attention padding mode '" + s + "' (expected mask|zeropad)");
}

std::string to_string(PaddingMode m) { return m == PaddingMode::Mask ? "mask" : "zeropad"; }

nn::Param& add_linear_weight(nn::ParamStore& store, const std::string& name, std::size_t fan_in,
                             std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w({fan_in, fan_out});
  for (auto& v : w.values()) v = uniform(rng, -bound, bound);
  return store.add(name, std::move(w));
}

RadiusAttentionParams RadiusAttentionParams::create(nn::ParamStore& store, const std::string& prefix,
                                                    std::size_t width, Rng& rng) {
  RadiusAttentionParams p;
  p.width = width;
  p.w_q = &add_linear_weight(store, prefix + ".w_q", width, width, rng);
  p.w_k = &add_linear_weight(store, prefix + ".w_k", width, width, rng);
  p.w_v = &add_linear_weight(store, prefix + ".w_v", width, width, rng);
  p.w_p1 = &add_linear_weight(store, prefix + ".pos.w_p1", 2, 2, rng);
  p.bn_pos = nn::BatchNormState::create(store, prefix + ".pos.bn", 2);
  p.w_p2 = &add_linear_weight(store, prefix + ".pos.w_p2", 2, width, rng);
  p.w_1 = &add_linear_weight(store, prefix + ".mlp.w_1", width, width, rng);
  p.bn_attn1 = nn::BatchNormState::create(store, prefix + ".mlp.bn1", width);
  p.w_2 = &add_linear_weight(store, prefix + ".mlp.w_2", width, width, rng);
  p.bn_attn2 = nn::BatchNormState::create(store, prefix + ".mlp.bn2", width);
  return p;
}

EdgeLayout EdgeLayout::build(const Neighborhood& nb, PaddingMode mode) {
  EdgeLayout e;
  const std::size_t total = mode == PaddingMode::Mask ? nb.total_valid() : nb.num_points * nb.max_neighbors;
  e.anchor.reserve(total);
  e.neighbor.reserve(total);
  e.valid.reserve(total);
  e.offsets.reserve(nb.num_points + 1);
  e.offsets.push_back(0);
  std::vector<double> rel;
  rel.reserve(2 * total);
  for (std::size_t i = 0; i < nb.num_points; ++i) {
    for (std::size_t k = 0; k < nb.max_neighbors; ++k) {
      const auto s = nb.slot(i, k);
      if (mode == PaddingMode::Mask && !nb.valid[s]) continue;
      e.anchor.push_back(i);
      e.neighbor.push_back(nb.indices[s]);
      e.valid.push_back(nb.valid[s]);
      rel.push_back(nb.rel_pos[2 * s]);
      rel.push_back(nb.rel_pos[2 * s + 1]);
      if (!nb.valid[s]) e.all_valid = false;
    }
    e.offsets.push_back(e.anchor.size());
  }
  e.rel_pos = Tensor({e.anchor.size(), 2}, std::move(rel));
  return e;
}

Var positional_encoding(nn::Graph& g, const Tensor& rel_pos, std::span<const std::uint8_t> valid,
                        RadiusAttentionParams& params, Mode mode) {
  if (rel_pos.rank() != 2 || rel_pos.dim(1) != 2) throw ShapeError("positional_encoding: rel_pos must be E x 2");
  if (valid.size() != rel_pos.rows()) throw ShapeError("positional_encoding: mask length mismatch");
  Var r = g.constant(rel_pos);
  Var h = nn::matmul(r, g.param(*params.w_p1));
  h = nn::relu(nn::batchnorm(h, params.bn_pos, mode, valid));
  Var enc = nn::matmul(h, g.param(*params.w_p2));
  return nn::mask_rows(enc, valid);
}

Var positional_encoding(nn::Graph& g, const Neighborhood& nb, RadiusAttentionParams& params, Mode mode) {
  Tensor rel({nb.num_points * nb.max_neighbors, 2}, nb.rel_pos);
  return positional_encoding(g, rel, nb.valid, params, mode);
}

AttentionResult radius_attention(Var x_in, const Neighborhood& nb, RadiusAttentionParams& params, Mode mode,
                                 PaddingMode padding) {
  const Tensor& X = x_in.value();
  if (X.rank() != 2 || X.dim(1) != params.width) {
    throw ShapeError("radius_attention: expected N x " + std::to_string(params.width) + " features, got " +
                     nn::shape_string(X.shape()));
  }
  if (X.dim(0) != nb.num_points) throw ShapeError("radius_attention: neighborhood/point count mismatch");

  nn::Graph& g = *x_in.graph();
  AttentionResult res;
  res.edges = EdgeLayout::build(nb, padding);
  const auto& e = res.edges;
  std::span<const std::uint8_t> stats_mask;
  if (!e.all_valid) stats_mask = e.valid;

  Var q = nn::matmul(x_in, g.param(*params.w_q));
  Var k = nn::matmul(x_in, g.param(*params.w_k));
  Var v = nn::matmul(x_in, g.param(*params.w_v));
  Var q_r = nn::gather_rows(q, e.anchor, e.valid);
  Var k_r = nn::gather_rows(k, e.neighbor, e.valid);
  Var v_r = nn::gather_rows(v, e.neighbor, e.valid);
  Var pos = positional_encoding(g, e.rel_pos, e.valid, params, mode);

  Var a = nn::add(nn::sub(q_r, k_r), pos);
  a = nn::matmul(a, g.param(*params.w_1));
  a = nn::relu(nn::batchnorm(a, params.bn_attn1, mode, stats_mask));
  a = nn::matmul(a, g.param(*params.w_2));
  // The softmax runs per (anchor, channel), so bn_attn2's per-channel shift
  // cancels exactly; leaving it out keeps that cancellation exact in floating point.
  a = nn::batchnorm(a, params.bn_attn2, mode, stats_mask, false);

  res.weights = nn::segment_softmax(a, e.offsets);
  res.features = nn::segment_sum(nn::mul(res.weights, nn::add(v_r, pos)), e.offsets);
  return res;
}

}  // namespace radfiner
