#include "radfiner/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "radfiner/error.hpp"

namespace radfiner::nn {

namespace {

double evaluate(const LossBuilder& loss) {
  Graph g;
  Var root = loss(g);
  if (root.value().size() != 1) throw ShapeError("gradient_check: loss must be a scalar");
  const double v = root.value()[0];
  if (!std::isfinite(v)) throw NumericalError("gradient_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckReport gradient_check(const LossBuilder& loss, std::span<Param* const> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("gradient_check: step must be positive");
  for (Param* p : params) p->zero_grad();
  double loss0 = 0.0;
  {
    Graph g;
    Var root = loss(g);
    if (!std::isfinite(root.value()[0])) throw NumericalError("gradient_check: non-finite loss");
    g.backward(root);
    loss0 = root.value()[0];
  }
  GradCheckReport report;
  report.loss = loss0;
  report.step = h;
  for (Param* p : params) {
    ParamCheck pc{p->name, p->value.size(), 0.0, {}, {}};
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double fp = evaluate(loss);
      p->value[i] = orig - h;
      const double fm = evaluate(loss);
      p->value[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = p->grad[i];
      pc.analytic.push_back(analytic);
      pc.numeric.push_back(numeric);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      pc.max_relative_error = std::max(pc.max_relative_error, std::abs(analytic - numeric) / denom);
    }
    report.max_relative_error = std::max(report.max_relative_error, pc.max_relative_error);
    report.params.push_back(std::move(pc));
  }
  for (Param* p : params) p->zero_grad();
  return report;
}

double GradCheckReport::roundoff() const {
  return std::abs(loss) * std::numeric_limits<double>::epsilon() / (2.0 * step);
}

std::size_t GradCheckReport::unexplained(double tol, double ulps) const {
  std::size_t count = 0;
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p.analytic.size(); ++i) {
      const double a = p.analytic[i], n = p.numeric[i];
      const double err = std::abs(a - n);
      if (err / std::max({std::abs(a), std::abs(n), 1e-8}) < tol) continue;
      if (err > ulps * roundoff()) ++count;
    }
  }
  return count;
}

}  // namespace radfiner::nn
