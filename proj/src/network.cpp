#include "radfiner/network.hpp"

#include <sstream>

#include "radfiner/error.hpp"

namespace radfiner {

using nn::Mode;
using nn::Tensor;
using nn::Var;

std::size_t NetworkConfig::head_width(int i) const {
  const std::size_t explicit_w = i == 0 ? head1 : i == 1 ? head2 : head3;
  if (explicit_w) return explicit_w;
  return std::max<std::size_t>(1, d2 >> (i + 1));
}

void NetworkConfig::validate() const {
  if (d_in != 5) throw DataError("network config: input width must be 5");
  if (!d1 || !d2 || !head_width(0) || !head_width(1) || !head_width(2)) {
    throw DataError("network config: widths must be positive");
  }
  if (classes < 2) throw DataError("network config: at least two classes required");
  if (!(radius > 0.0)) throw DataError("network config: radius must be positive");
  if (nmax < 1) throw DataError("network config: nmax must be at least 1");
}

NetworkConfig NetworkConfig::from_keyvalue(const KeyValueConfig& kv) {
  NetworkConfig c;
  c.d1 = static_cast<std::size_t>(kv.get_int("d1", static_cast<long long>(c.d1)));
  c.d2 = static_cast<std::size_t>(kv.get_int("d2", static_cast<long long>(c.d2)));
  c.head1 = static_cast<std::size_t>(kv.get_int("head1", 0));
  c.head2 = static_cast<std::size_t>(kv.get_int("head2", 0));
  c.head3 = static_cast<std::size_t>(kv.get_int("head3", 0));
  c.classes = static_cast<std::size_t>(kv.get_int("classes", static_cast<long long>(c.classes)));
  c.radius = kv.get_double("radius", c.radius);
  c.nmax = static_cast<std::size_t>(kv.get_int("nmax", static_cast<long long>(c.nmax)));
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.mlp_norm = kv.get_bool("mlp_norm", c.mlp_norm);
  c.embed_activation = kv.get_bool("embed_activation", c.embed_activation);
  c.input_norm = kv.get_bool("input_norm", c.input_norm);
  c.attn_pad = parse_padding_mode(kv.get_string("attn_pad", to_string(c.attn_pad)));
  c.validate();
  return c;
}

NetworkConfig NetworkConfig::load(const std::filesystem::path& path) {
  return from_keyvalue(KeyValueConfig::load(path));
}

std::string NetworkConfig::to_text() const {
  std::ostringstream os;
  os << "d1=" << d1 << "\nd2=" << d2 << "\nhead1=" << head_width(0) << "\nhead2=" << head_width(1)
     << "\nhead3=" << head_width(2) << "\nclasses=" << classes << "\nradius=" << format_real(radius)
     << "\nnmax=" << nmax << "\nseed=" << seed << "\nmlp_norm=" << (mlp_norm ? 1 : 0)
     << "\nembed_activation=" << (embed_activation ? 1 : 0) << "\ninput_norm=" << (input_norm ? 1 : 0) << "\nattn_pad=" << to_string(attn_pad) << "\n";
  return os.str();
}

PointBatch PointBatch::single(Tensor coords, Tensor features) {
  PointBatch b;
  const std::size_t n = coords.rows();
  b.coords = std::move(coords);
  b.features = std::move(features);
  b.offsets = {0, n};
  return b;
}

PointBatch PointBatch::stack(const std::vector<const Tensor*>& coords, const std::vector<const Tensor*>& features) {
  if (coords.size() != features.size()) throw ShapeError("PointBatch::stack: input count mismatch");
  std::size_t n = 0;
  for (const auto* c : coords) n += c->rows();
  PointBatch b;
  b.coords = Tensor({n, 2});
  b.features = Tensor({n, 5});
  b.offsets.push_back(0);
  std::size_t row = 0;
  for (std::size_t s = 0; s < coords.size(); ++s) {
    const auto& c = *coords[s];
    const auto& f = *features[s];
    if (c.rows() != f.rows()) throw ShapeError("PointBatch::stack: coordinate/feature rows differ");
    std::copy(c.values().begin(), c.values().end(), b.coords.data() + 2 * row);
    std::copy(f.values().begin(), f.values().end(), b.features.data() + 5 * row);
    row += c.rows();
    b.offsets.push_back(row);
  }
  return b;
}

Linear Linear::create(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                      bool with_bias, Rng& rng) {
  Linear l;
  l.weight = &add_linear_weight(store, name + ".weight", in, out, rng);
  if (with_bias) l.bias = &store.add(name + ".bias", Tensor({out}, 0.0));
  return l;
}

Var Linear::operator()(Var x) const {
  nn::Graph& g = *x.graph();
  Var y = nn::matmul(x, g.param(*weight));
  if (bias) y = nn::add(y, g.param(*bias));
  return y;
}

DenseGelu DenseGelu::create(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                            bool norm, Rng& rng) {
  DenseGelu d;
  d.linear = Linear::create(store, name, in, out, !norm, rng);
  d.norm = norm;
  if (norm) d.bn = nn::BatchNormState::create(store, name + ".bn", out);
  return d;
}

Var DenseGelu::forward(Var x, Mode mode) {
  Var y = linear(x);
  if (norm) y = nn::batchnorm(y, bn, mode);
  return nn::gelu(y);
}

Mlp Mlp::create(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                std::size_t out, bool norm, Rng& rng) {
  return {DenseGelu::create(store, name + ".0", in, hidden, norm, rng),
          DenseGelu::create(store, name + ".1", hidden, out, norm, rng)};
}

Var Mlp::forward(Var x, Mode mode) { return second.forward(first.forward(x, mode), mode); }

TransformerBlock TransformerBlock::create(nn::ParamStore& store, const std::string& name, std::size_t in,
                                          std::size_t width, bool norm, Rng& rng) {
  TransformerBlock b;
  b.in_width = in;
  b.width = width;
  b.pre = Mlp::create(store, name + ".pre", in, width, width, norm, rng);
  b.attention = RadiusAttentionParams::create(store, name + ".attn", width, rng);
  b.post = Mlp::create(store, name + ".post", width, width, width, norm, rng);
  return b;
}

Var TransformerBlock::forward(Var x, const Neighborhood& nb, Mode mode, PaddingMode padding) {
  if (x.value().rank() != 2 || x.value().dim(1) != in_width) {
    throw ShapeError("transformer block: expected input width " + std::to_string(in_width) + ", got " +
                     nn::shape_string(x.value().shape()));
  }
  Var skip = pre.forward(x, mode);
  Var attended = radius_attention(skip, nb, attention, mode, padding).features;
  return post.forward(nn::add(attended, skip), mode);
}

RefinerNet::RefinerNet(NetworkConfig config) : RefinerNet(config, config.seed) {}

RefinerNet::RefinerNet(NetworkConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  config_.seed = seed;
  Rng rng = derive_rng(seed, 0x5e3aULL);
  const bool norm = config_.mlp_norm;
  const auto d1 = config_.d1, d2 = config_.d2;
  const auto h1 = config_.head_width(0), h2 = config_.head_width(1), h3 = config_.head_width(2);
  if (config_.input_norm) input_bn_ = nn::BatchNormState::create(store_, "input.bn", config_.d_in);
  embed_in_ = DenseGelu::create(store_, "embed.0", config_.d_in, d1, norm, rng);
  embed_out_ = Linear::create(store_, "embed.1", d1, d1, false, rng);
  block1_ = TransformerBlock::create(store_, "block1", d1, d1, norm, rng);
  block2_ = TransformerBlock::create(store_, "block2", d1, d2, norm, rng);
  head1_ = Mlp::create(store_, "head1", d2, d2, h1, norm, rng);
  head2_ = Mlp::create(store_, "head2", h1, h1, h2, norm, rng);
  head3_ = DenseGelu::create(store_, "head3", h2, h3, norm, rng);
  classifier_ = Linear::create(store_, "classifier", h3, config_.classes, true, rng);
}

Neighborhood RefinerNet::neighborhood(const PointBatch& batch) const {
  return ball_query(batch.coords, config_.radius, config_.nmax, batch.offsets);
}

Var RefinerNet::forward(nn::Graph& g, const PointBatch& batch, Mode mode) {
  return forward(g, batch, neighborhood(batch), mode);
}

Var RefinerNet::forward(nn::Graph& g, const PointBatch& batch, const Neighborhood& nb, Mode mode) {
  if (batch.size() == 0) throw ShapeError("network forward: empty input");
  if (batch.features.rank() != 2 || batch.features.dim(1) != config_.d_in ||
      batch.features.rows() != batch.coords.rows()) {
    throw ShapeError("network forward: expected N x 5 features aligned with coordinates");
  }
  Var x = g.constant(batch.features);
  if (config_.input_norm) x = nn::batchnorm(x, input_bn_, mode);
  Var h = embed_in_.linear(x);
  if (embed_in_.norm) h = nn::batchnorm(h, embed_in_.bn, mode);
  if (config_.embed_activation) h = nn::gelu(h);
  h = embed_out_(h);
  h = block1_.forward(h, nb, mode, config_.attn_pad);
  h = block2_.forward(h, nb, mode, config_.attn_pad);
  h = head1_.forward(h, mode);
  h = head2_.forward(h, mode);
  h = head3_.forward(h, mode);
  return classifier_(h);
}

Tensor RefinerNet::infer(const Tensor& coords, const Tensor& features) {
  nn::Graph g;
  auto batch = PointBatch::single(coords, features);
  return forward(g, batch, Mode::Inference).value();
}

std::vector<SemanticClass> predict_classes(const Tensor& logits) {
  std::vector<SemanticClass> out;
  out.reserve(logits.rows());
  const std::size_t c = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k) {
      if (logits.at(r, k) > logits.at(r, best)) best = k;
    }
    out.push_back(class_from_code(static_cast<int>(best)));
  }
  return out;
}

}  // namespace radfiner
