#pragma once

#include <map>
#include <span>
#include <string>

#include "radfiner/graph.hpp"

namespace radfiner::nn {

/// AdamW with decoupled weight decay. Moments are keyed by parameter name.
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW() = default;
  explicit AdamW(Options options) : options_(options) {}

  /// One update of every parameter in `params`, then zeroes their gradients.
  void step(std::span<Param* const> params);

  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  long long step_count() const { return t_; }
  const Options& options() const { return options_; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  Options options_;
  long long t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace radfiner::nn
