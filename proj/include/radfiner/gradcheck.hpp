#pragma once

#include <functional>
#include <string>
#include <vector>

#include "radfiner/graph.hpp"

namespace radfiner::nn {

struct ParamCheck {
  std::string name;
  std::size_t entries = 0;
  double max_relative_error = 0.0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_relative_error = 0.0;
  double loss = 0.0;  // at the unperturbed parameters
  double step = 0.0;

  /// Size of a one-ulp change of the loss seen through the central
  /// difference, |loss| * 2^-52 / (2h). Entries whose true gradient is zero
  /// or tiny cannot be resolved below this.
  double roundoff() const;
  /// Entries with relative error >= tol whose absolute error also exceeds
  /// `ulps` times roundoff().
  std::size_t unexplained(double tol, double ulps = 4.0) const;
};

/// Builds a scalar loss inside the given graph from the current parameter values.
using LossBuilder = std::function<Var(Graph&)>;

/// Compares reverse-mode gradients against central differences
/// (f(θ+h) - f(θ-h)) / 2h for every entry of `params`. The relative error of
/// an entry is |a - n| / max(|a|, |n|, 1e-8). Throws NumericalError on a
/// non-finite loss.
GradCheckReport gradient_check(const LossBuilder& loss, std::span<Param* const> params, double h = 1e-5);

}  // namespace radfiner::nn
