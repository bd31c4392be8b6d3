#include "radfiner/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "radfiner/error.hpp"

namespace radfiner {

std::uint64_t PanopticStats::points() const {
  std::uint64_t total = 0;
  for (const auto& row : confusion) {
    for (auto v : row) total += v;
  }
  return total;
}

void PanopticStats::merge(const PanopticStats& other) {
  for (std::size_t c = 0; c < classes.size(); ++c) {
    classes[c].tp_iou_sum += other.classes[c].tp_iou_sum;
    classes[c].tp += other.classes[c].tp;
    classes[c].fp += other.classes[c].fp;
    classes[c].fn += other.classes[c].fn;
    for (std::size_t k = 0; k < classes.size(); ++k) confusion[c][k] += other.confusion[c][k];
  }
}

namespace {

std::unordered_map<std::size_t, std::size_t> owner_map(const std::vector<std::vector<std::size_t>>& segs,
                                                       const char* side) {
  std::unordered_map<std::size_t, std::size_t> owner;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    for (auto p : segs[s]) {
      if (!owner.emplace(p, s).second) {
        throw DataError(std::string("match_instances: ") + side + " segments overlap at point " + std::to_string(p));
      }
    }
  }
  return owner;
}

}  // namespace

MatchResult match_instances(const std::vector<std::vector<std::size_t>>& gt,
                            const std::vector<std::vector<std::size_t>>& pred) {
  owner_map(gt, "ground-truth");
  const auto pred_owner = owner_map(pred, "predicted");
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> inter;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (auto p : gt[g]) {
      if (auto it = pred_owner.find(p); it != pred_owner.end()) ++inter[{g, it->second}];
    }
  }
  MatchResult out;
  std::vector<bool> gt_hit(gt.size(), false), pred_hit(pred.size(), false);
  for (const auto& [key, count] : inter) {
    const auto [g, p] = key;
    const double uni = static_cast<double>(gt[g].size() + pred[p].size() - count);
    const double iou = static_cast<double>(count) / uni;
    if (iou > 0.5) {
      out.matches.push_back({g, p, iou});
      gt_hit[g] = pred_hit[p] = true;
    }
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (!gt_hit[g]) out.unmatched_gt.push_back(g);
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!pred_hit[p]) out.unmatched_pred.push_back(p);
  }
  return out;
}

namespace {

// Segments of one class: one per instance id, or one for all static points.
std::array<std::vector<std::vector<std::size_t>>, kNumClasses> segments(const PanopticPrediction& p) {
  std::array<std::map<InstanceId, std::vector<std::size_t>>, kNumClasses> grouped;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int c = code(p.semantic[i]);
    if (c < 0 || c >= kNumClasses) throw DataError("accumulate: class code out of range");
    grouped[static_cast<std::size_t>(c)][is_thing(p.semantic[i]) ? p.instance_id[i] : 0].push_back(i);
  }
  std::array<std::vector<std::vector<std::size_t>>, kNumClasses> out;
  for (std::size_t c = 0; c < grouped.size(); ++c) {
    for (auto& [id, pts] : grouped[c]) out[c].push_back(std::move(pts));
  }
  return out;
}

}  // namespace

void accumulate(PanopticStats& stats, const PanopticPrediction& gt, const PanopticPrediction& pred) {
  if (gt.size() != pred.size() || gt.instance_id.size() != gt.size() || pred.instance_id.size() != pred.size()) {
    throw DataError("accumulate: scan '" + gt.scan_id + "' ground truth and prediction differ in length");
  }
  const auto gseg = segments(gt);
  const auto pseg = segments(pred);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto m = match_instances(gseg[c], pseg[c]);
    auto& cs = stats.classes[c];
    for (const auto& x : m.matches) cs.tp_iou_sum += x.iou;
    cs.tp += m.matches.size();
    cs.fn += m.unmatched_gt.size();
    cs.fp += m.unmatched_pred.size();
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    ++stats.confusion[static_cast<std::size_t>(code(gt.semantic[i]))][static_cast<std::size_t>(code(pred.semantic[i]))];
  }
}

PanopticStats scan_stats(const PanopticPrediction& gt, const PanopticPrediction& pred) {
  PanopticStats s;
  accumulate(s, gt, pred);
  return s;
}

PqResult panoptic_quality(const PanopticStats& stats) {
  PqResult r;
  double sum = 0.0, sum_things = 0.0;
  int n = 0, n_things = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& cs = stats.classes[c];
    r.present[c] = cs.tp + cs.fp + cs.fn > 0;
    if (!r.present[c]) continue;
    const double denom = static_cast<double>(cs.tp) + 0.5 * static_cast<double>(cs.fp) + 0.5 * static_cast<double>(cs.fn);
    r.pq[c] = cs.tp_iou_sum / denom;
    sum += r.pq[c];
    ++n;
    if (c != 0) {
      sum_things += r.pq[c];
      ++n_things;
    }
  }
  r.mean = n ? sum / n : 0.0;
  r.mean_things = n_things ? sum_things / n_things : 0.0;
  return r;
}

IouResult mean_iou(const PanopticStats& stats) {
  IouResult r;
  double sum = 0.0;
  int n = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      row += stats.confusion[c][k];
      col += stats.confusion[k][c];
    }
    const std::uint64_t tp = stats.confusion[c][c];
    r.present[c] = row + col > 0;
    if (!r.present[c]) continue;
    r.iou[c] = static_cast<double>(tp) / static_cast<double>(row + col - tp);
    sum += r.iou[c];
    ++n;
  }
  r.mean = n ? sum / n : 0.0;
  return r;
}

namespace {

std::string pct(double v, bool present) {
  if (!present) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
  return buf;
}

}  // namespace

std::string format_report(const PanopticStats& stats) {
  const auto pq = panoptic_quality(stats);
  const auto iou = mean_iou(stats);
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s", "");
  out += line;
  for (auto c : kAllClasses) {
    std::snprintf(line, sizeof(line), " %16s", std::string(class_name(c)).c_str());
    out += line;
  }
  out += "     mean  mean(things)\n";
  auto row = [&](const char* label, const auto& vals, const auto& present, double mean, const std::string& extra) {
    std::snprintf(line, sizeof(line), "%-8s", label);
    out += line;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      std::snprintf(line, sizeof(line), " %16s", pct(vals[c], present[c]).c_str());
      out += line;
    }
    std::snprintf(line, sizeof(line), " %8s %13s\n", pct(mean, true).c_str(), extra.c_str());
    out += line;
  };
  row("PQ", pq.pq, pq.present, pq.mean, pct(pq.mean_things, true));
  row("IoU", iou.iou, iou.present, iou.mean, "");
  std::snprintf(line, sizeof(line), "points %llu\n", static_cast<unsigned long long>(stats.points()));
  out += line;
  return out;
}

std::string format_metrics_csv(const PanopticStats& stats) {
  const auto pq = panoptic_quality(stats);
  const auto iou = mean_iou(stats);
  std::string out = "metric";
  for (auto c : kAllClasses) out += "," + std::string(class_name(c));
  out += ",mean\n";
  auto row = [&](const char* name, const auto& vals, const auto& present, double mean) {
    out += name;
    for (std::size_t c = 0; c < kNumClasses; ++c) out += "," + (present[c] ? format_real(vals[c]) : std::string());
    out += "," + format_real(mean) + "\n";
  };
  row("PQ", pq.pq, pq.present, pq.mean);
  row("IoU", iou.iou, iou.present, iou.mean);
  out += "PQ_things";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out += "," + (c != 0 && pq.present[c] ? format_real(pq.pq[c]) : std::string());
  }
  out += "," + format_real(pq.mean_things) + "\n";
  return out;
}

}  // namespace radfiner
