#pragma once

#include <vector>

#include "radfiner/metrics.hpp"
#include "radfiner/network.hpp"
#include "radfiner/refine.hpp"
#include "radfiner/scan.hpp"

namespace radfiner {

/// select -> classify -> refine -> assemble for one scan.
PanopticPrediction predict_scan(RefinerNet& net, const RadarScan& scan, const MovingPrediction& backbone,
                                RefineMode mode = RefineMode::Split);

struct EvalResult {
  PanopticStats stats;
  std::vector<PanopticPrediction> predictions;
};

/// Network predictions for every scan, scored against ground truth. Scans
/// run on `workers` threads; stats are merged in scan order.
EvalResult evaluate_network(RefinerNet& net, const std::vector<RadarScan>& scans,
                            const std::vector<MovingPrediction>& backbone, RefineMode mode, int workers = 1);

/// Backbone instances labeled with their majority ground-truth class.
EvalResult evaluate_majority_true(const std::vector<RadarScan>& scans, const std::vector<MovingPrediction>& backbone,
                                  int workers = 1);

/// Scores existing panoptic predictions.
PanopticStats score(const std::vector<RadarScan>& scans, const std::vector<PanopticPrediction>& preds);

/// Pairs predictions with scans by scan id; throws DataError on a mismatch.
void check_aligned(const std::vector<RadarScan>& scans, const std::vector<MovingPrediction>& preds);

}  // namespace radfiner
