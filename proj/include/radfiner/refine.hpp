#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "radfiner/scan.hpp"

namespace radfiner {

enum class RefineMode {
  Split,     // split instances by predicted class, drop static-classified points
  Majority,  // relabel each instance with its majority class
};

RefineMode parse_refine_mode(std::string_view text);  // throws DataError
std::string_view to_string(RefineMode mode);

struct RefinedInstances {
  std::vector<InstanceId> instance_id;
  std::vector<SemanticClass> semantic;
};

/// Split mode: static-classified points get id 0; every (original id, class)
/// group with a non-static class gets a fresh id, numbered from 1 in
/// ascending (original id, class code) order.
/// Majority mode: each nonzero original id takes its majority class (ties to
/// the lowest code); an instance voted static becomes id 0. Points with
/// original id 0 are split by class as in split mode.
RefinedInstances refine_instances(std::span<const InstanceId> instance_ids, std::span<const SemanticClass> classes,
                                  RefineMode mode = RefineMode::Split);

/// Full-scan panoptic output: points the backbone calls static become
/// (static, 0); moving point k of the selection takes refined label k.
PanopticPrediction assemble_panoptic(const RadarScan& scan, const MovingPrediction& backbone,
                                     const RefinedInstances& refined, std::span<const std::size_t> index_map);

/// Refines the thing-labeled points of an assembled prediction again.
PanopticPrediction refine_panoptic(const PanopticPrediction& pred, RefineMode mode = RefineMode::Split);

/// refine_panoptic(pred) == pred.
bool refinement_is_idempotent(const PanopticPrediction& pred, RefineMode mode = RefineMode::Split);

/// Unrefined baseline: each predicted instance takes the majority non-static
/// ground-truth class of its points, or static (id 0) when all of its points
/// are ground-truth static.
PanopticPrediction majority_true_panoptic(const RadarScan& scan, const MovingPrediction& backbone);

}  // namespace radfiner
