#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "radfiner/attention.hpp"
#include "radfiner/graph.hpp"
#include "radfiner/keyvalue.hpp"
#include "radfiner/scan.hpp"

namespace radfiner {

struct NetworkConfig {
  std::size_t d_in = 5;
  std::size_t d1 = 64;
  std::size_t d2 = 256;
  // Head widths; 0 means "derive by halving": d2/2, d2/4, d2/8.
  std::size_t head1 = 0;
  std::size_t head2 = 0;
  std::size_t head3 = 0;
  std::size_t classes = kNumClasses;
  double radius = 5.0;
  std::size_t nmax = 24;
  std::uint64_t seed = 1;
  bool mlp_norm = true;          // batch normalization inside the MLPs
  bool embed_activation = true;  // GELU between the two embedding layers
  bool input_norm = true;        // batch normalization of the raw input features
  PaddingMode attn_pad = PaddingMode::Mask;

  std::size_t head_width(int i) const;
  void validate() const;

  static NetworkConfig from_keyvalue(const KeyValueConfig& kv);
  static NetworkConfig load(const std::filesystem::path& path);
  std::string to_text() const;
};

/// Coordinates and features of several scans stacked row-wise. `offsets`
/// delimit scans; neighborhoods never cross scan boundaries.
struct PointBatch {
  nn::Tensor coords;    // N x 2
  nn::Tensor features;  // N x 5
  std::vector<std::size_t> offsets;

  std::size_t size() const { return coords.rows(); }
  std::size_t scans() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  static PointBatch single(nn::Tensor coords, nn::Tensor features);
  static PointBatch stack(const std::vector<const nn::Tensor*>& coords, const std::vector<const nn::Tensor*>& features);
};

/// Linear layer with optional bias; weights stored in x out layout.
struct Linear {
  nn::Param* weight = nullptr;
  nn::Param* bias = nullptr;

  static Linear create(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                       bool with_bias, Rng& rng);
  nn::Var operator()(nn::Var x) const;
};

/// Linear -> [BN] -> GELU, used as the building step of every MLP.
struct DenseGelu {
  Linear linear;
  bool norm = true;
  nn::BatchNormState bn;

  static DenseGelu create(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                          bool norm, Rng& rng);
  nn::Var forward(nn::Var x, nn::Mode mode);
};

/// Two DenseGelu steps: in -> hidden -> out.
struct Mlp {
  DenseGelu first;
  DenseGelu second;

  static Mlp create(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                    std::size_t out, bool norm, Rng& rng);
  nn::Var forward(nn::Var x, nn::Mode mode);
};

/// Residual block: pre-MLP, radius attention with a skip around it, post-MLP.
struct TransformerBlock {
  std::size_t in_width = 0;
  std::size_t width = 0;
  Mlp pre;
  RadiusAttentionParams attention;
  Mlp post;

  static TransformerBlock create(nn::ParamStore& store, const std::string& name, std::size_t in,
                                 std::size_t width, bool norm, Rng& rng);
  nn::Var forward(nn::Var x, const Neighborhood& nb, nn::Mode mode, PaddingMode padding);
};

/// Embedding, two transformer blocks and the three-MLP classification head.
class RefinerNet {
 public:
  explicit RefinerNet(NetworkConfig config);
  RefinerNet(NetworkConfig config, std::uint64_t seed);
  RefinerNet(RefinerNet&&) = default;
  RefinerNet& operator=(RefinerNet&&) = default;

  const NetworkConfig& config() const { return config_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  Neighborhood neighborhood(const PointBatch& batch) const;

  /// Per-point class logits, N x classes.
  nn::Var forward(nn::Graph& g, const PointBatch& batch, nn::Mode mode);
  nn::Var forward(nn::Graph& g, const PointBatch& batch, const Neighborhood& nb, nn::Mode mode);

  /// Inference-mode logits for one scan's moving points; does not mutate parameters.
  nn::Tensor infer(const nn::Tensor& coords, const nn::Tensor& features);

  TransformerBlock& block(int i) { return i == 0 ? block1_ : block2_; }

 private:
  NetworkConfig config_;
  nn::ParamStore store_;
  nn::BatchNormState input_bn_;
  DenseGelu embed_in_;
  Linear embed_out_;
  TransformerBlock block1_;
  TransformerBlock block2_;
  Mlp head1_;
  Mlp head2_;
  DenseGelu head3_;
  Linear classifier_;
};

/// Row-wise argmax; ties resolve to the lowest class code.
std::vector<SemanticClass> predict_classes(const nn::Tensor& logits);

}  // namespace radfiner
