#include "radfiner/refine.hpp"

#include <array>
#include <map>
#include <stdexcept>

#include "radfiner/error.hpp"

namespace radfiner {

RefineMode parse_refine_mode(std::string_view text) {
  if (text == "split") return RefineMode::Split;
  if (text == "majority") return RefineMode::Majority;
  throw DataError("unknown refine mode '" + std::string(text) + "' (expected split|majority)");
}

std::string_view to_string(RefineMode mode) { return mode == RefineMode::Split ? "split" : "majority"; }

namespace {

using Votes = std::array<std::size_t, kNumClasses>;

SemanticClass majority(const Votes& v) {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (v[static_cast<std::size_t>(c)] > v[static_cast<std::size_t>(best)]) best = c;
  }
  return class_from_code(best);
}

}  // namespace

RefinedInstances refine_instances(std::span<const InstanceId> instance_ids, std::span<const SemanticClass> classes,
                                  RefineMode mode) {
  if (instance_ids.size() != classes.size()) {
    throw std::invalid_argument("refine_instances: ids and classes differ in length");
  }
  const std::size_t n = classes.size();
  RefinedInstances out;
  out.semantic.assign(classes.begin(), classes.end());
  out.instance_id.assign(n, 0);

  if (mode == RefineMode::Majority) {
    std::map<InstanceId, Votes> votes;
    for (std::size_t i = 0; i < n; ++i) {
      if (instance_ids[i]) ++votes[instance_ids[i]][static_cast<std::size_t>(code(classes[i]))];
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (instance_ids[i]) out.semantic[i] = majority(votes[instance_ids[i]]);
    }
  }

  std::map<std::pair<InstanceId, int>, InstanceId> fresh;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_thing(out.semantic[i])) fresh.emplace(std::pair{instance_ids[i], code(out.semantic[i])}, 0);
  }
  InstanceId next = 1;
  for (auto& [key, id] : fresh) id = next++;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_thing(out.semantic[i])) out.instance_id[i] = fresh.at({instance_ids[i], code(out.semantic[i])});
  }
  return out;
}

PanopticPrediction assemble_panoptic(const RadarScan& scan, const MovingPrediction& backbone,
                                     const RefinedInstances& refined, std::span<const std::size_t> index_map) {
  const std::size_t n = scan.size();
  if (backbone.size() != n) throw DataError("scan " + scan.scan_id + ": prediction length differs from scan");
  if (refined.instance_id.size() != index_map.size() || refined.semantic.size() != index_map.size()) {
    throw std::invalid_argument("assemble_panoptic: refined labels and index map differ in length");
  }
  PanopticPrediction out{scan.scan_id, std::vector<SemanticClass>(n, SemanticClass::Static),
                         std::vector<InstanceId>(n, 0)};
  for (std::size_t k = 0; k < index_map.size(); ++k) {
    const std::size_t i = index_map[k];
    if (i >= n) throw std::out_of_range("assemble_panoptic: index map entry out of range");
    if (!backbone.moving[i]) throw DataError("scan " + scan.scan_id + ": index map selects a static point");
    out.semantic[i] = refined.semantic[k];
    out.instance_id[i] = refined.instance_id[k];
  }
  validate(out);
  return out;
}

PanopticPrediction refine_panoptic(const PanopticPrediction& pred, RefineMode mode) {
  std::vector<InstanceId> ids;
  std::vector<SemanticClass> classes;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!is_thing(pred.semantic[i])) continue;
    ids.push_back(pred.instance_id[i]);
    classes.push_back(pred.semantic[i]);
    where.push_back(i);
  }
  const auto refined = refine_instances(ids, classes, mode);
  PanopticPrediction out = pred;
  for (std::size_t k = 0; k < where.size(); ++k) {
    out.semantic[where[k]] = refined.semantic[k];
    out.instance_id[where[k]] = refined.instance_id[k];
  }
  return out;
}

bool refinement_is_idempotent(const PanopticPrediction& pred, RefineMode mode) {
  return refine_panoptic(pred, mode) == pred;
}

PanopticPrediction majority_true_panoptic(const RadarScan& scan, const MovingPrediction& backbone) {
  const std::size_t n = scan.size();
  if (backbone.size() != n) throw DataError("scan " + scan.scan_id + ": prediction length differs from scan");
  std::map<InstanceId, Votes> votes;
  for (std::size_t i = 0; i < n; ++i) {
    if (backbone.moving[i] && backbone.instance_id[i]) {
      ++votes[backbone.instance_id[i]][static_cast<std::size_t>(code(scan.gt[i].semantic))];
    }
  }
  std::map<InstanceId, SemanticClass> label;
  for (auto& [id, v] : votes) {
    Votes things = v;
    things[0] = 0;
    bool any = false;
    for (auto c : things) any = any || c > 0;
    label[id] = any ? majority(things) : SemanticClass::Static;
  }
  PanopticPrediction out{scan.scan_id, std::vector<SemanticClass>(n, SemanticClass::Static),
                         std::vector<InstanceId>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    if (!backbone.moving[i]) continue;
    const InstanceId id = backbone.instance_id[i];
    if (id == 0) {
      // A moving point without an instance has no group to vote with.
      out.semantic[i] = scan.gt[i].semantic;
      continue;
    }
    out.semantic[i] = label[id];
    out.instance_id[i] = is_thing(label[id]) ? id : 0;
  }
  // Ungrouped moving points need ids of their own to satisfy the invariant.
  InstanceId next = 0;
  for (auto id : backbone.instance_id) next = std::max(next, id);
  for (std::size_t i = 0; i < n; ++i) {
    if (is_thing(out.semantic[i]) && out.instance_id[i] == 0) out.instance_id[i] = ++next;
  }
  validate(out);
  return out;
}

}  // namespace radfiner
