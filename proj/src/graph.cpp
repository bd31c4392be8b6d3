#include "radfiner/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "radfiner/error.hpp"

namespace radfiner::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using MapM = Eigen::Map<RowMat>;

// ---- ParamStore ----------------------------------------------------------

Param& ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (params_.count(name)) throw ShapeError("duplicate parameter name " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->grad = Tensor::zeros_like(value);
  p->value = std::move(value);
  p->trainable = trainable;
  auto& ref = *p;
  params_.emplace(name, std::move(p));
  return ref;
}

Param& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ShapeError("unknown parameter " + name);
  return *it->second;
}

const Param& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ShapeError("unknown parameter " + name);
  return *it->second;
}

std::vector<Param*> ParamStore::all() {
  std::vector<Param*> out;
  for (auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParamStore::all() const {
  std::vector<const Param*> out;
  for (const auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

std::vector<Param*> ParamStore::trainable() {
  std::vector<Param*> out;
  for (auto& [_, p] : params_) {
    if (p->trainable) out.push_back(p.get());
  }
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p->zero_grad();
}

std::size_t ParamStore::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) {
    if (!trainable_only || p->trainable) n += p->value.size();
  }
  return n;
}

// ---- Graph ---------------------------------------------------------------

const Tensor& Var::value() const {
  if (!graph_) throw ShapeError("use of an unrecorded tensor");
  return graph_->value(*this);
}

void Graph::check(Var v) const {
  if (v.graph_ != this || v.id_ >= nodes_.size()) throw ShapeError("tensor is not recorded in this graph");
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false, false});
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(Param& p) {
  // Parameter nodes read the parameter's storage directly instead of copying it.
  nodes_.push_back(Node{Tensor(), {}, {}, &p, p.trainable, false});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn back) {
  bool needs = false;
  for (const auto& in : inputs) {
    check(in);
    needs = needs || nodes_[in.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(back) : BackwardFn{}, nullptr, needs, false});
  return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::value(Var v) const {
  check(v);
  const auto& n = nodes_[v.id_];
  return n.param ? n.param->value : n.value;
}

bool Graph::requires_grad(Var v) const {
  check(v);
  return nodes_[v.id_].requires_grad;
}

Tensor& Graph::grad(Var v) {
  check(v);
  auto& n = nodes_[v.id_];
  const Tensor& val = n.param ? n.param->value : n.value;
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(val);
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor* Graph::grad_if_any(Var v) const {
  check(v);
  const auto& n = nodes_[v.id_];
  return n.has_grad ? &n.grad : nullptr;
}

void Graph::backward(Var root) {
  check(root);
  if (value(root).size() != 1) {
    throw ShapeError("backward requires a scalar root, got " + shape_string(value(root).shape()));
  }
  for (auto& n : nodes_) {
    n.grad = Tensor();
    n.has_grad = false;
  }
  grad(root)[0] = 1.0;
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || !n.has_grad) continue;
    if (n.back) {
      n.back(*this, n.grad);
    } else if (n.param) {
      if (n.param->grad.shape() != n.grad.shape()) throw ShapeError("parameter gradient shape mismatch");
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

// ---- primitives ----------------------------------------------------------

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

void require_rank2(const Tensor& t, const char* op) {
  require(t.rank() == 2, std::string(op) + ": expected a rank-2 tensor, got " + shape_string(t.shape()));
}

void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <typename F>
Var unary(Var a, F f, std::function<double(double x, double y)> df) {
  const Tensor& x = a.value();
  Tensor y = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  Graph& g = *a.graph();
  Tensor ycopy = y;
  return g.record(std::move(y), {a}, [a, df, ycopy = std::move(ycopy)](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad(a);
    const Tensor& x = a.value();
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * df(x[i], ycopy[i]);
  });
}

struct Group {
  std::size_t base;
  std::size_t count;
  std::size_t stride;
};

Var softmax_groups(Var xv, std::vector<Group> groups, std::span<const std::uint8_t> mask_span) {
  const Tensor& x = xv.value();
  std::vector<std::uint8_t> mask(mask_span.begin(), mask_span.end());
  require(mask.empty() || mask.size() == x.size(), "masked_softmax: mask size does not match input");
  auto valid = [&](std::size_t idx) { return mask.empty() || mask[idx] != 0; };
  Tensor y = Tensor::zeros_like(x);
  for (const auto& gr : groups) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < gr.count; ++k) {
      const auto idx = gr.base + k * gr.stride;
      if (valid(idx)) mx = std::max(mx, x[idx]);
    }
    if (!std::isfinite(mx)) continue;
    double sum = 0.0;
    for (std::size_t k = 0; k < gr.count; ++k) {
      const auto idx = gr.base + k * gr.stride;
      if (valid(idx)) {
        y[idx] = std::exp(x[idx] - mx);
        sum += y[idx];
      }
    }
    for (std::size_t k = 0; k < gr.count; ++k) y[gr.base + k * gr.stride] /= sum;
  }
  Graph& g = *xv.graph();
  Tensor ycopy = y;
  return g.record(std::move(y), {xv},
                  [xv, groups = std::move(groups), ycopy = std::move(ycopy)](Graph& g, const Tensor& go) {
                    Tensor& gx = g.grad(xv);
                    for (const auto& gr : groups) {
                      double dot = 0.0;
                      for (std::size_t k = 0; k < gr.count; ++k) {
                        const auto idx = gr.base + k * gr.stride;
                        dot += ycopy[idx] * go[idx];
                      }
                      for (std::size_t k = 0; k < gr.count; ++k) {
                        const auto idx = gr.base + k * gr.stride;
                        gx[idx] += ycopy[idx] * (go[idx] - dot);
                      }
                    }
                  });
}

void check_offsets(std::span<const std::size_t> offsets, std::size_t rows, const char* op) {
  require(!offsets.empty() && offsets.front() == 0 && offsets.back() == rows,
          std::string(op) + ": segment offsets must span all rows");
  for (std::size_t s = 1; s < offsets.size(); ++s) {
    require(offsets[s] >= offsets[s - 1], std::string(op) + ": segment offsets must be non-decreasing");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2(A, "matmul");
  require_rank2(B, "matmul");
  require(A.dim(1) == B.dim(0), "matmul: inner dimensions differ " + shape_string(A.shape()) + " vs " +
                                    shape_string(B.shape()));
  const auto n = A.dim(0), k = A.dim(1), m = B.dim(1);
  Tensor C({n, m});
  if (n && m && k) MapM(C.data(), n, m).noalias() = MapC(A.data(), n, k) * MapC(B.data(), k, m);
  return a.graph()->record(std::move(C), {a, b}, [a, b, n, k, m](Graph& g, const Tensor& go) {
    if (!n || !m || !k) return;
    MapC G(go.data(), n, m);
    if (g.requires_grad(a)) {
      MapM(g.grad(a).data(), n, k).noalias() += G * MapC(b.value().data(), k, m).transpose();
    }
    if (g.requires_grad(b)) {
      MapM(g.grad(b).data(), k, m).noalias() += MapC(a.value().data(), n, k).transpose() * G;
    }
  });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape() == B.shape()) {
    Tensor C = A;
    accumulate(C, B);
    return a.graph()->record(std::move(C), {a, b}, [a, b](Graph& g, const Tensor& go) {
      if (g.requires_grad(a)) accumulate(g.grad(a), go);
      if (g.requires_grad(b)) accumulate(g.grad(b), go);
    });
  }
  require_rank2(A, "add");
  const auto m = A.dim(1);
  require((B.rank() == 1 && B.dim(0) == m) || (B.rank() == 2 && B.dim(0) == 1 && B.dim(1) == m),
          "add: cannot broadcast " + shape_string(B.shape()) + " onto " + shape_string(A.shape()));
  Tensor C = A;
  for (std::size_t r = 0; r < A.dim(0); ++r) {
    for (std::size_t c = 0; c < m; ++c) C[r * m + c] += B[c];
  }
  return a.graph()->record(std::move(C), {a, b}, [a, b, m](Graph& g, const Tensor& go) {
    if (g.requires_grad(a)) accumulate(g.grad(a), go);
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i % m] += go[i];
    }
  });
}

Var sub(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.shape() == B.shape(), "sub: shape mismatch " + shape_string(A.shape()) + " vs " + shape_string(B.shape()));
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] -= B[i];
  return a.graph()->record(std::move(C), {a, b}, [a, b](Graph& g, const Tensor& go) {
    if (g.requires_grad(a)) accumulate(g.grad(a), go);
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.shape() == B.shape(), "mul: shape mismatch " + shape_string(A.shape()) + " vs " + shape_string(B.shape()));
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  return a.graph()->record(std::move(C), {a, b}, [a, b](Graph& g, const Tensor& go) {
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad(a);
      const Tensor& B = b.value();
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * B[i];
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b);
      const Tensor& A = a.value();
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * A[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor C = a.value();
  for (auto& v : C.values()) v *= s;
  return a.graph()->record(std::move(C), {a}, [a, s](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * s;
  });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var gelu(Var a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        return cdf + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
      });
}

Var masked_softmax(Var x, std::size_t axis, std::span<const std::uint8_t> mask) {
  const Tensor& X = x.value();
  require(X.rank() == 2 || X.rank() == 3, "masked_softmax: expected rank 2 or 3");
  require(axis < X.rank(), "masked_softmax: axis " + std::to_string(axis) + " out of range for " +
                               shape_string(X.shape()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= X.dim(d);
  for (std::size_t d = axis + 1; d < X.rank(); ++d) inner *= X.dim(d);
  const std::size_t len = X.dim(axis);
  std::vector<Group> groups;
  groups.reserve(outer * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) groups.push_back({o * len * inner + i, len, inner});
  }
  return softmax_groups(x, std::move(groups), mask);
}

Var segment_softmax(Var x, std::span<const std::size_t> offsets) {
  const Tensor& X = x.value();
  require_rank2(X, "segment_softmax");
  check_offsets(offsets, X.dim(0), "segment_softmax");
  const std::size_t d = X.dim(1);
  std::vector<Group> groups;
  groups.reserve((offsets.size() - 1) * d);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    for (std::size_t c = 0; c < d; ++c) groups.push_back({offsets[s] * d + c, offsets[s + 1] - offsets[s], d});
  }
  return softmax_groups(x, std::move(groups), {});
}

Var gather_rows(Var x, std::span<const std::size_t> indices, std::span<const std::uint8_t> valid) {
  const Tensor& X = x.value();
  require_rank2(X, "gather_rows");
  require(valid.empty() || valid.size() == indices.size(), "gather_rows: mask length mismatch");
  const std::size_t d = X.dim(1);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<std::uint8_t> ok(valid.begin(), valid.end());
  Tensor Y({idx.size(), d});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (!ok.empty() && !ok[r]) continue;
    require(idx[r] < X.dim(0), "gather_rows: index out of range");
    std::copy_n(X.data() + idx[r] * d, d, Y.data() + r * d);
  }
  return x.graph()->record(std::move(Y), {x}, [x, idx = std::move(idx), ok = std::move(ok), d](Graph& g, const Tensor& go) {
    Tensor& gx = g.grad(x);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (!ok.empty() && !ok[r]) continue;
      double* dst = gx.data() + idx[r] * d;
      const double* src = go.data() + r * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  });
}

Var segment_sum(Var x, std::span<const std::size_t> offsets) {
  const Tensor& X = x.value();
  require_rank2(X, "segment_sum");
  check_offsets(offsets, X.dim(0), "segment_sum");
  const std::size_t d = X.dim(1);
  const std::size_t segs = offsets.size() - 1;
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  Tensor Y({segs, d});
  for (std::size_t s = 0; s < segs; ++s) {
    for (std::size_t r = off[s]; r < off[s + 1]; ++r) {
      for (std::size_t c = 0; c < d; ++c) Y[s * d + c] += X[r * d + c];
    }
  }
  return x.graph()->record(std::move(Y), {x}, [x, off = std::move(off), d](Graph& g, const Tensor& go) {
    Tensor& gx = g.grad(x);
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      for (std::size_t r = off[s]; r < off[s + 1]; ++r) {
        for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += go[s * d + c];
      }
    }
  });
}

Var reduce_sum(Var x, std::size_t axis) {
  const Tensor& X = x.value();
  require_rank2(X, "reduce_sum");
  require(axis < 2, "reduce_sum: axis out of range");
  const std::size_t n = X.dim(0), m = X.dim(1);
  Tensor Y = axis == 0 ? Tensor({1, m}) : Tensor({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) Y[axis == 0 ? c : r] += X[r * m + c];
  }
  return x.graph()->record(std::move(Y), {x}, [x, axis, n, m](Graph& g, const Tensor& go) {
    Tensor& gx = g.grad(x);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < m; ++c) gx[r * m + c] += go[axis == 0 ? c : r];
    }
  });
}

Var sum_all(Var x) {
  const Tensor& X = x.value();
  double s = 0.0;
  for (double v : X.values()) s += v;
  return x.graph()->record(Tensor::scalar(s), {x}, [x](Graph& g, const Tensor& go) {
    Tensor& gx = g.grad(x);
    for (auto& v : gx.values()) v += go[0];
  });
}

Var mask_rows(Var x, std::span<const std::uint8_t> mask) {
  const Tensor& X = x.value();
  require_rank2(X, "mask_rows");
  require(mask.size() == X.dim(0), "mask_rows: mask length mismatch");
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  Tensor Y = X;
  const std::size_t d = X.dim(1);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    if (!keep[r]) std::fill_n(Y.data() + r * d, d, 0.0);
  }
  return x.graph()->record(std::move(Y), {x}, [x, keep = std::move(keep), d](Graph& g, const Tensor& go) {
    Tensor& gx = g.grad(x);
    for (std::size_t r = 0; r < keep.size(); ++r) {
      if (!keep[r]) continue;
      for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += go[r * d + c];
    }
  });
}

// ---- batch normalization -------------------------------------------------

BatchNormState BatchNormState::create(ParamStore& store, const std::string& prefix, std::size_t width) {
  BatchNormState s;
  s.gamma = &store.add(prefix + ".gamma", Tensor({width}, 1.0));
  s.beta = &store.add(prefix + ".beta", Tensor({width}, 0.0));
  s.running_mean = &store.add(prefix + ".running_mean", Tensor({width}, 0.0), false);
  s.running_var = &store.add(prefix + ".running_var", Tensor({width}, 1.0), false);
  return s;
}

Var batchnorm(Var x, BatchNormState& state, Mode mode, std::span<const std::uint8_t> row_mask, bool shift) {
  const Tensor& X = x.value();
  require_rank2(X, "batchnorm");
  const std::size_t n = X.dim(0), d = X.dim(1);
  require(state.gamma->value.size() == d, "batchnorm: width mismatch with parameters");
  require(row_mask.empty() || row_mask.size() == n, "batchnorm: row mask length mismatch");
  Graph& g = *x.graph();
  Var gamma = g.param(*state.gamma);
  Var beta = shift ? g.param(*state.beta) : g.constant(Tensor({d}, 0.0));

  std::vector<std::uint8_t> mask(row_mask.begin(), row_mask.end());
  auto in_stats = [&mask](std::size_t r) { return mask.empty() || mask[r] != 0; };
  std::size_t count = 0;
  for (std::size_t r = 0; r < n; ++r) count += in_stats(r) ? 1 : 0;

  std::vector<double> mean(d, 0.0), var(d, 0.0);
  const bool batch_stats = mode == Mode::Training && count > 0;
  if (batch_stats) {
    for (std::size_t r = 0; r < n; ++r) {
      if (!in_stats(r)) continue;
      for (std::size_t c = 0; c < d; ++c) mean[c] += X[r * d + c];
    }
    for (auto& m : mean) m /= static_cast<double>(count);
    for (std::size_t r = 0; r < n; ++r) {
      if (!in_stats(r)) continue;
      for (std::size_t c = 0; c < d; ++c) {
        const double e = X[r * d + c] - mean[c];
        var[c] += e * e;
      }
    }
    for (auto& v : var) v /= static_cast<double>(count);
    auto& rm = state.running_mean->value;
    auto& rv = state.running_var->value;
    const double unbias = count > 1 ? static_cast<double>(count) / static_cast<double>(count - 1) : 1.0;
    for (std::size_t c = 0; c < d; ++c) {
      rm[c] = (1.0 - state.momentum) * rm[c] + state.momentum * mean[c];
      rv[c] = (1.0 - state.momentum) * rv[c] + state.momentum * var[c] * unbias;
    }
  } else {
    for (std::size_t c = 0; c < d; ++c) {
      mean[c] = state.running_mean->value[c];
      var[c] = state.running_var->value[c];
    }
  }
  std::vector<double> invstd(d);
  for (std::size_t c = 0; c < d; ++c) invstd[c] = 1.0 / std::sqrt(var[c] + state.epsilon);

  Tensor xhat({n, d});
  Tensor Y({n, d});
  const Tensor& G = gamma.value();
  const Tensor& B = beta.value();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (X[r * d + c] - mean[c]) * invstd[c];
      xhat[r * d + c] = h;
      Y[r * d + c] = G[c] * h + B[c];
    }
  }
  return g.record(
      std::move(Y), {x, gamma, beta},
      [x, gamma, beta, n, d, batch_stats, count, mask = std::move(mask), xhat = std::move(xhat),
       invstd = std::move(invstd)](Graph& g, const Tensor& go) {
        const Tensor& G = gamma.value();
        if (g.requires_grad(gamma) || g.requires_grad(beta)) {
          Tensor& gg = g.grad(gamma);
          Tensor& gb = g.grad(beta);
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
              gg[c] += go[r * d + c] * xhat[r * d + c];
              gb[c] += go[r * d + c];
            }
          }
        }
        if (!g.requires_grad(x)) return;
        Tensor& gx = g.grad(x);
        // d(loss)/d(xhat) for every row, then the direct path.
        std::vector<double> sum_dh(d, 0.0), sum_dh_h(d, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < d; ++c) {
            const double dh = go[r * d + c] * G[c];
            gx[r * d + c] += dh * invstd[c];
            sum_dh[c] += dh;
            sum_dh_h[c] += dh * xhat[r * d + c];
          }
        }
        if (!batch_stats) return;
        // Statistics path: only rows that contributed to mean/var receive it.
        const double m = static_cast<double>(count);
        for (std::size_t c = 0; c < d; ++c) {
          // dL/dmean = -invstd * sum(dh); dL/dvar = -0.5 * invstd^3 * sum(dh * (x - mean)).
          const double dmean = -invstd[c] * sum_dh[c];
          const double dvar = -0.5 * invstd[c] * invstd[c] * sum_dh_h[c];
          for (std::size_t r = 0; r < n; ++r) {
            if (!mask.empty() && !mask[r]) continue;
            const double centered = xhat[r * d + c] / invstd[c];
            gx[r * d + c] += dmean / m + dvar * 2.0 * centered / m;
          }
        }
      });
}

}  // namespace radfiner::nn
