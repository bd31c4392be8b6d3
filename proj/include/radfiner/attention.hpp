#pragma once

#include <string>
#include <vector>

#include "radfiner/graph.hpp"
#include "radfiner/neighborhood.hpp"
#include "radfiner/rng.hpp"

namespace radfiner {

/// How padded neighbor slots are treated by the attention softmax.
///  - Mask: padded slots are dropped and receive exactly zero weight.
///  - ZeroPad: padded slots carry zero query/key/value/encoding, pass through
///    the attention MLP and take part in the softmax normalization.
enum class PaddingMode { Mask, ZeroPad };

PaddingMode parse_padding_mode(const std::string& s);
std::string to_string(PaddingMode m);

/// Uniform init in +-sqrt(6 / (fan_in + fan_out)).
nn::Param& add_linear_weight(nn::ParamStore& store, const std::string& name, std::size_t fan_in,
                             std::size_t fan_out, Rng& rng);

struct RadiusAttentionParams {
  std::size_t width = 0;
  nn::Param* w_q = nullptr;
  nn::Param* w_k = nullptr;
  nn::Param* w_v = nullptr;
  nn::Param* w_p1 = nullptr;  // 2 x 2
  nn::Param* w_p2 = nullptr;  // 2 x width
  nn::BatchNormState bn_pos;
  nn::Param* w_1 = nullptr;  // width x width
  nn::Param* w_2 = nullptr;  // width x width
  nn::BatchNormState bn_attn1;
  nn::BatchNormState bn_attn2;

  static RadiusAttentionParams create(nn::ParamStore& store, const std::string& prefix, std::size_t width, Rng& rng);
};

/// Flattened (anchor, neighbor) pairs of a neighborhood, grouped by anchor.
/// In mask mode only valid slots appear; in zero-pad mode all slots do.
struct EdgeLayout {
  std::vector<std::size_t> anchor;
  std::vector<std::size_t> neighbor;
  std::vector<std::uint8_t> valid;
  std::vector<std::size_t> offsets;  // num_points + 1
  nn::Tensor rel_pos;                // E x 2
  bool all_valid = true;

  std::size_t size() const { return anchor.size(); }
  static EdgeLayout build(const Neighborhood& nb, PaddingMode mode);
};

/// R = ReLU(BN(rel_pos W_p1)) W_p2 per edge row; rows with valid == 0 are
/// exactly zero and excluded from normalization statistics.
nn::Var positional_encoding(nn::Graph& g, const nn::Tensor& rel_pos, std::span<const std::uint8_t> valid,
                            RadiusAttentionParams& params, nn::Mode mode);

/// Dense variant over all N x N_max slots of a neighborhood (row-major slots).
nn::Var positional_encoding(nn::Graph& g, const Neighborhood& nb, RadiusAttentionParams& params, nn::Mode mode);

struct AttentionResult {
  nn::Var features;  // N x width
  nn::Var weights;   // E x width, softmax-normalized per (anchor, channel)
  EdgeLayout edges;
};

/// Radius-limited vector attention:
///   Q, K, V = X W_Q, X W_K, X W_V
///   A_ij = (Q_i - K_j) + R_ij, passed through Linear-BN-ReLU-Linear-BN
///   X_out_i = sum_j softmax_j(A_ij) * (V_j + R_ij)    (per channel)
AttentionResult radius_attention(nn::Var x_in, const Neighborhood& nb, RadiusAttentionParams& params,
                                 nn::Mode mode, PaddingMode padding = PaddingMode::Mask);

}  // namespace radfiner
