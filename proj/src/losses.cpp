#include "radfiner/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "radfiner/error.hpp"

namespace radfiner {

using nn::Graph;
using nn::Tensor;
using nn::Var;

namespace {

std::vector<std::size_t> resolve_offsets(std::span<const std::size_t> offsets, std::size_t rows) {
  if (offsets.empty()) return {0, rows};
  if (offsets.front() != 0 || offsets.back() != rows) throw ShapeError("loss: offsets must span all rows");
  return {offsets.begin(), offsets.end()};
}

// 1 / (number of non-empty scans), or 0 when every scan is empty.
double scan_weight(const std::vector<std::size_t>& off) {
  std::size_t nonempty = 0;
  for (std::size_t s = 0; s + 1 < off.size(); ++s) nonempty += off[s + 1] > off[s] ? 1 : 0;
  return nonempty ? 1.0 / static_cast<double>(nonempty) : 0.0;
}

void check_targets(const Tensor& logits, std::span<const int> targets, const char* op) {
  if (logits.rank() != 2) throw ShapeError(std::string(op) + ": logits must be N x C");
  if (targets.size() != logits.rows()) throw ShapeError(std::string(op) + ": target count mismatch");
  const int c = static_cast<int>(logits.cols());
  for (int t : targets) {
    if (t < 0 || t >= c) throw ShapeError(std::string(op) + ": target class out of range");
  }
}

}  // namespace

Var cross_entropy_loss(Var logits, std::span<const int> targets, std::span<const std::size_t> offsets) {
  const Tensor& X = logits.value();
  check_targets(X, targets, "cross_entropy_loss");
  if (!X.all_finite()) throw NumericalError("cross_entropy_loss: non-finite logits");
  const auto off = resolve_offsets(offsets, X.rows());
  const double wscan = scan_weight(off);
  const std::size_t c = X.cols();
  Tensor dlogits = Tensor::zeros_like(X);
  double loss = 0.0;
  for (std::size_t s = 0; s + 1 < off.size(); ++s) {
    const std::size_t n = off[s + 1] - off[s];
    if (!n) continue;
    const double w = wscan / static_cast<double>(n);
    for (std::size_t r = off[s]; r < off[s + 1]; ++r) {
      auto row = X.row(r);
      const double mx = *std::max_element(row.begin(), row.end());
      double sum = 0.0;
      for (double v : row) sum += std::exp(v - mx);
      const double lse = mx + std::log(sum);
      loss += w * (lse - row[static_cast<std::size_t>(targets[r])]);
      for (std::size_t k = 0; k < c; ++k) {
        dlogits[r * c + k] = w * (std::exp(row[k] - lse) - (static_cast<int>(k) == targets[r] ? 1.0 : 0.0));
      }
    }
  }
  return logits.graph()->record(Tensor::scalar(loss), {logits},
                                [logits, dlogits = std::move(dlogits)](Graph& g, const Tensor& go) {
                                  Tensor& gx = g.grad(logits);
                                  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[0] * dlogits[i];
                                });
}

Var lovasz_softmax_from_probs(Var probs, std::span<const int> targets, std::span<const std::size_t> offsets) {
  const Tensor& P = probs.value();
  check_targets(P, targets, "lovasz_softmax_loss");
  const auto off = resolve_offsets(offsets, P.rows());
  const double wscan = scan_weight(off);
  const std::size_t c = P.cols();
  Tensor dprobs = Tensor::zeros_like(P);
  double loss = 0.0;

  std::vector<std::size_t> order;
  std::vector<double> errors;
  std::vector<std::uint8_t> fg;
  for (std::size_t s = 0; s + 1 < off.size(); ++s) {
    const std::size_t begin = off[s], n = off[s + 1] - off[s];
    if (!n) continue;
    std::set<std::size_t> classes;
    for (std::size_t r = begin; r < begin + n; ++r) {
      classes.insert(static_cast<std::size_t>(targets[r]));
      auto row = P.row(r);
      classes.insert(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
    const double wclass = wscan / static_cast<double>(classes.size());
    for (std::size_t cls : classes) {
      errors.resize(n);
      fg.resize(n);
      order.resize(n);
      double gts = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t r = begin + k;
        fg[k] = static_cast<std::size_t>(targets[r]) == cls ? 1 : 0;
        errors[k] = std::abs(static_cast<double>(fg[k]) - P[r * c + cls]);
        gts += fg[k];
      }
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });
      // Discrete gradient of the Jaccard loss along the sorted errors.
      double cum_fg = 0.0, cum_bg = 0.0, prev_jaccard = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = order[k];
        cum_fg += fg[idx];
        cum_bg += 1.0 - fg[idx];
        const double inter = gts - cum_fg;
        const double uni = gts + cum_bg;
        const double jaccard = 1.0 - inter / uni;
        const double grad = jaccard - prev_jaccard;
        prev_jaccard = jaccard;
        loss += wclass * errors[idx] * grad;
        // d error / d p = -1 for foreground points, +1 otherwise.
        dprobs[(begin + idx) * c + cls] += wclass * grad * (fg[idx] ? -1.0 : 1.0);
      }
    }
  }
  return probs.graph()->record(Tensor::scalar(loss), {probs},
                               [probs, dprobs = std::move(dprobs)](Graph& g, const Tensor& go) {
                                 Tensor& gp = g.grad(probs);
                                 for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go[0] * dprobs[i];
                               });
}

Var lovasz_softmax_loss(Var logits, std::span<const int> targets, std::span<const std::size_t> offsets) {
  return lovasz_softmax_from_probs(nn::masked_softmax(logits, 1), targets, offsets);
}

double consistency_loss(std::span<const SemanticClass> classes, std::span<const InstanceId> instance_ids) {
  if (classes.size() != instance_ids.size()) throw ShapeError("consistency_loss: length mismatch");
  std::map<InstanceId, std::set<SemanticClass>> members;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (instance_ids[i] != 0) members[instance_ids[i]].insert(classes[i]);
  }
  if (members.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [_, set] : members) sum += 1.0 - 1.0 / static_cast<double>(set.size());
  return sum / static_cast<double>(members.size());
}

Var soft_consistency_loss(Var logits, std::span<const InstanceId> instance_ids, std::span<const std::size_t> offsets) {
  Var probs = nn::masked_softmax(logits, 1);
  const Tensor& P = probs.value();
  if (instance_ids.size() != P.rows()) throw ShapeError("soft_consistency_loss: length mismatch");
  const auto off = resolve_offsets(offsets, P.rows());
  const double wscan = scan_weight(off);
  const std::size_t c = P.cols();
  Tensor dprobs = Tensor::zeros_like(P);
  double loss = 0.0;
  for (std::size_t s = 0; s + 1 < off.size(); ++s) {
    std::map<InstanceId, std::vector<std::size_t>> groups;
    for (std::size_t r = off[s]; r < off[s + 1]; ++r) {
      if (instance_ids[r] != 0) groups[instance_ids[r]].push_back(r);
    }
    if (groups.empty()) continue;
    const double winst = wscan / static_cast<double>(groups.size());
    std::vector<double> q(c);
    for (const auto& [_, rows] : groups) {
      std::fill(q.begin(), q.end(), 0.0);
      const double inv = 1.0 / static_cast<double>(rows.size());
      for (auto r : rows) {
        for (std::size_t k = 0; k < c; ++k) q[k] += inv * P[r * c + k];
      }
      double sq = 0.0;
      for (double v : q) sq += v * v;
      loss += winst * (1.0 - sq);
      for (auto r : rows) {
        for (std::size_t k = 0; k < c; ++k) dprobs[r * c + k] += winst * (-2.0 * q[k]) * inv;
      }
    }
  }
  return logits.graph()->record(Tensor::scalar(loss), {probs},
                                [probs, dprobs = std::move(dprobs)](Graph& g, const Tensor& go) {
                                  Tensor& gp = g.grad(probs);
                                  for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go[0] * dprobs[i];
                                });
}

LossBreakdown LossTerms::breakdown() const {
  LossBreakdown b;
  b.ce = ce.value()[0];
  b.lovasz = lovasz.value()[0];
  b.consistency = consistency.value()[0];
  b.total = total.value()[0];
  return b;
}

LossTerms combined_loss(Var logits, std::span<const int> targets, std::span<const InstanceId> instance_ids,
                        std::span<const std::size_t> offsets) {
  LossTerms t;
  t.ce = cross_entropy_loss(logits, targets, offsets);
  t.lovasz = lovasz_softmax_loss(logits, targets, offsets);
  t.consistency = soft_consistency_loss(logits, instance_ids, offsets);
  t.total = nn::add(nn::add(t.ce, t.lovasz), t.consistency);
  return t;
}

}  // namespace radfiner
