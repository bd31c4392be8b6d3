#pragma once

#include <span>
#include <vector>

#include "radfiner/graph.hpp"
#include "radfiner/scan.hpp"

namespace radfiner {

// All differentiable losses take per-row class targets and scan offsets over
// rows. Each scan's loss is averaged over its points, then the scans are
// averaged (empty scans are skipped). Omitted offsets mean a single scan.

/// Mean negative log-softmax at the target, with max-shifted logits.
nn::Var cross_entropy_loss(nn::Var logits, std::span<const int> targets, std::span<const std::size_t> offsets = {});

/// Lovász-softmax over the classes present in the targets or in the argmax
/// predictions, averaged over those classes.
nn::Var lovasz_softmax_loss(nn::Var logits, std::span<const int> targets, std::span<const std::size_t> offsets = {});

/// Lovász-softmax on already normalized probabilities (N x C).
nn::Var lovasz_softmax_from_probs(nn::Var probs, std::span<const int> targets,
                                  std::span<const std::size_t> offsets = {});

/// Instance consistency: mean over instances of 1 - 1/|distinct classes|.
/// Points with instance id 0 are ignored; 0 when there is no instance.
double consistency_loss(std::span<const SemanticClass> classes, std::span<const InstanceId> instance_ids);

/// Differentiable surrogate of the consistency loss: per instance, average
/// the point softmax distributions into q and take 1 - sum_c q_c^2. It is 0
/// when one class holds all mass and 1 - 1/C at the uniform distribution.
nn::Var soft_consistency_loss(nn::Var logits, std::span<const InstanceId> instance_ids,
                              std::span<const std::size_t> offsets = {});

struct LossBreakdown {
  double ce = 0.0;
  double lovasz = 0.0;
  double consistency = 0.0;  // soft surrogate, the term that is optimized
  double total = 0.0;        // ce + lovasz + consistency
};

struct LossTerms {
  nn::Var ce;
  nn::Var lovasz;
  nn::Var consistency;
  nn::Var total;

  LossBreakdown breakdown() const;
};

/// Sum of the three losses with unit weights.
LossTerms combined_loss(nn::Var logits, std::span<const int> targets, std::span<const InstanceId> instance_ids,
                        std::span<const std::size_t> offsets = {});

}  // namespace radfiner
