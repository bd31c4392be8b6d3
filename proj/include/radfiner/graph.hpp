#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "radfiner/tensor.hpp"

namespace radfiner::nn {

/// A named learned (or buffered) tensor. `grad` always matches `value` in shape.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;  // false for running statistics

  void zero_grad() { grad.fill(0.0); }
};

/// Owns parameters with stable addresses, iterated in name order.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Param& add(const std::string& name, Tensor value, bool trainable = true);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::vector<Param*> all();
  std::vector<const Param*> all() const;
  std::vector<Param*> trainable();
  void zero_grad();
  std::size_t scalar_count(bool trainable_only = true) const;

 private:
  std::map<std::string, std::unique_ptr<Param>> params_;
};

enum class Mode { Training, Inference };

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Computation record for reverse-mode differentiation. Nodes are appended in
/// evaluation order, so reverse creation order is a valid topological order.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var param(Param& p);

  /// Appends a node. `back` is stored only if some input requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn back);

  /// Seeds d(root)/d(root) = 1 and accumulates into every reachable Param.grad.
  void backward(Var root);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient buffer of `v`, allocated as zeros on first use.
  Tensor& grad(Var v);
  const Tensor* grad_if_any(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn back;
    Param* param = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
  };
  void check(Var v) const;
  std::deque<Node> nodes_;  // stable addresses: values are read while new nodes are appended
};

// ---- forward primitives -------------------------------------------------

Var matmul(Var a, Var b);
/// Same-shape addition, or row broadcast when `b` has shape [m] or [1, m].
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
/// Exact GELU: x * Phi(x).
Var gelu(Var a);

/// Softmax along `axis` of a rank-2 or rank-3 tensor. `mask` is empty (all
/// valid) or has one byte per element. Masked entries get exactly 0; a slice
/// with no valid entry is all 0.
Var masked_softmax(Var x, std::size_t axis, std::span<const std::uint8_t> mask = {});

/// Per-column softmax over consecutive row ranges [offsets[s], offsets[s+1]).
Var segment_softmax(Var x, std::span<const std::size_t> offsets);

/// Rows of `x` selected by `indices`; rows with `valid[r] == 0` are zero.
Var gather_rows(Var x, std::span<const std::size_t> indices, std::span<const std::uint8_t> valid = {});

/// Row sums over consecutive row ranges; output has one row per segment.
Var segment_sum(Var x, std::span<const std::size_t> offsets);

/// Sum of a rank-2 tensor over axis 0 (-> [1, m]) or axis 1 (-> [n, 1]).
Var reduce_sum(Var x, std::size_t axis);
Var sum_all(Var x);

/// Multiplies each row r by mask[r] (0 or 1).
Var mask_rows(Var x, std::span<const std::uint8_t> mask);

// ---- batch normalization -----------------------------------------------

struct BatchNormState {
  Param* gamma = nullptr;
  Param* beta = nullptr;
  Param* running_mean = nullptr;
  Param* running_var = nullptr;
  double momentum = 0.1;
  double epsilon = 1e-5;

  static BatchNormState create(ParamStore& store, const std::string& prefix, std::size_t width);
};

/// Per-column normalization of a rank-2 tensor. In training mode statistics
/// come from the rows with `row_mask[r] != 0` (all rows if empty) and the
/// running statistics are updated; every row is normalized with them.
/// With `shift` false the beta term is left out; use it only where a
/// per-column constant cannot change the result (ahead of a softmax).
Var batchnorm(Var x, BatchNormState& state, Mode mode, std::span<const std::uint8_t> row_mask = {},
              bool shift = true);

}  // namespace radfiner::nn
