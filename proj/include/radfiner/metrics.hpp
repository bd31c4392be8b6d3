#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "radfiner/scan.hpp"

namespace radfiner {

struct ClassStats {
  double tp_iou_sum = 0.0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  friend bool operator==(const ClassStats&, const ClassStats&) = default;
};

/// Dataset-level panoptic counters. Confusion rows are ground truth, columns prediction.
struct PanopticStats {
  std::array<ClassStats, kNumClasses> classes{};
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> confusion{};

  std::uint64_t points() const;
  void merge(const PanopticStats& other);
  friend bool operator==(const PanopticStats&, const PanopticStats&) = default;
};

struct SegmentMatch {
  std::size_t gt = 0;
  std::size_t pred = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<SegmentMatch> matches;  // sorted by gt index
  std::vector<std::size_t> unmatched_gt;
  std::vector<std::size_t> unmatched_pred;
};

/// Pairs segments with IoU > 0.5; such a partner is unique on both sides.
/// Segments are point-index sets; overlap within one side throws DataError.
MatchResult match_instances(const std::vector<std::vector<std::size_t>>& gt,
                            const std::vector<std::vector<std::size_t>>& pred);

/// Adds one scan. Thing classes are matched per instance; static forms a
/// single segment per side.
void accumulate(PanopticStats& stats, const PanopticPrediction& gt, const PanopticPrediction& pred);
PanopticStats scan_stats(const PanopticPrediction& gt, const PanopticPrediction& pred);

struct PqResult {
  std::array<double, kNumClasses> pq{};
  std::array<bool, kNumClasses> present{};  // class occurs in ground truth or prediction
  double mean = 0.0;         // over present classes, static included
  double mean_things = 0.0;  // over present thing classes
};

struct IouResult {
  std::array<double, kNumClasses> iou{};
  std::array<bool, kNumClasses> present{};
  double mean = 0.0;
};

PqResult panoptic_quality(const PanopticStats& stats);
IouResult mean_iou(const PanopticStats& stats);

/// Per-class table of PQ and IoU in percent with the means.
std::string format_report(const PanopticStats& stats);
/// `metric,static,car,...,mean` rows for PQ and IoU plus a PQ-without-static row.
std::string format_metrics_csv(const PanopticStats& stats);

}  // namespace radfiner
