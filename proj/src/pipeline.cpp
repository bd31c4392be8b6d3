#include "radfiner/pipeline.hpp"

#include "radfiner/error.hpp"
#include "radfiner/parallel.hpp"

namespace radfiner {

PanopticPrediction predict_scan(RefinerNet& net, const RadarScan& scan, const MovingPrediction& backbone,
                                RefineMode mode) {
  const auto sel = select_moving(scan, backbone);
  std::vector<SemanticClass> classes;
  std::vector<InstanceId> ids;
  if (!sel.empty()) {
    classes = predict_classes(net.infer(sel.coords, sel.features));
    ids.reserve(sel.size());
    for (auto i : sel.index_map) ids.push_back(backbone.instance_id[i]);
  }
  const auto refined = refine_instances(ids, classes, mode);
  return assemble_panoptic(scan, backbone, refined, sel.index_map);
}

void check_aligned(const std::vector<RadarScan>& scans, const std::vector<MovingPrediction>& preds) {
  if (scans.size() != preds.size()) {
    throw DataError("prediction file has " + std::to_string(preds.size()) + " scans, dataset has " +
                    std::to_string(scans.size()));
  }
  for (std::size_t s = 0; s < scans.size(); ++s) {
    if (scans[s].scan_id != preds[s].scan_id) {
      throw DataError("scan " + std::to_string(s) + ": prediction id '" + preds[s].scan_id + "' does not match '" +
                      scans[s].scan_id + "'");
    }
    if (scans[s].size() != preds[s].size()) {
      throw DataError("scan '" + scans[s].scan_id + "': prediction has " + std::to_string(preds[s].size()) +
                      " points, scan has " + std::to_string(scans[s].size()));
    }
  }
}

namespace {

template <typename Fn>
EvalResult evaluate(const std::vector<RadarScan>& scans, int workers, Fn&& predict) {
  EvalResult r;
  r.predictions.resize(scans.size());
  std::vector<PanopticStats> per_scan(scans.size());
  parallel_for(scans.size(), workers, [&](std::size_t s) {
    r.predictions[s] = predict(s);
    per_scan[s] = scan_stats(ground_truth_panoptic(scans[s]), r.predictions[s]);
  });
  for (const auto& st : per_scan) r.stats.merge(st);
  return r;
}

}  // namespace

EvalResult evaluate_network(RefinerNet& net, const std::vector<RadarScan>& scans,
                            const std::vector<MovingPrediction>& backbone, RefineMode mode, int workers) {
  check_aligned(scans, backbone);
  return evaluate(scans, workers, [&](std::size_t s) { return predict_scan(net, scans[s], backbone[s], mode); });
}

EvalResult evaluate_majority_true(const std::vector<RadarScan>& scans, const std::vector<MovingPrediction>& backbone,
                                  int workers) {
  check_aligned(scans, backbone);
  return evaluate(scans, workers, [&](std::size_t s) { return majority_true_panoptic(scans[s], backbone[s]); });
}

PanopticStats score(const std::vector<RadarScan>& scans, const std::vector<PanopticPrediction>& preds) {
  if (scans.size() != preds.size()) throw DataError("prediction and dataset scan counts differ");
  PanopticStats stats;
  for (std::size_t s = 0; s < scans.size(); ++s) {
    if (scans[s].scan_id != preds[s].scan_id) throw DataError("scan id mismatch at scan " + std::to_string(s));
    accumulate(stats, ground_truth_panoptic(scans[s]), preds[s]);
  }
  return stats;
}

}  // namespace radfiner
