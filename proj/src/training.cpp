#include "radfiner/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <map>
#include <numeric>

#include "radfiner/error.hpp"
#include "radfiner/parallel.hpp"
#include "radfiner/pipeline.hpp"

namespace radfiner {

ClutterSource parse_clutter_source(std::string_view text) {
  if (text == "synthetic") return ClutterSource::Synthetic;
  if (text == "sampled") return ClutterSource::Sampled;
  throw DataError("unknown clutter source '" + std::string(text) + "' (expected synthetic|sampled)");
}

std::string_view to_string(ClutterSource source) {
  return source == ClutterSource::Synthetic ? "synthetic" : "sampled";
}

AugmentConfig AugmentConfig::from_keyvalue(const KeyValueConfig& kv) {
  AugmentConfig c;
  c.p_instance = kv.get_double("p_instance", c.p_instance);
  c.p_scan = kv.get_double("p_scan", c.p_scan);
  c.boundary_sigma = kv.get_double("boundary_sigma", c.boundary_sigma);
  c.clutter_min = static_cast<int>(kv.get_int("clutter_min", c.clutter_min));
  c.clutter_max = static_cast<int>(kv.get_int("clutter_max", c.clutter_max));
  c.clutter_spread = kv.get_double("clutter_spread", c.clutter_spread);
  c.clutter_source = parse_clutter_source(kv.get_string("clutter_source", std::string(to_string(c.clutter_source))));
  c.seed = static_cast<std::uint64_t>(kv.get_int("augment_seed", static_cast<long long>(c.seed)));
  c.validate();
  return c;
}

void AugmentConfig::validate() const {
  if (!(p_instance >= 0.0 && p_instance <= 1.0) || !(p_scan >= 0.0 && p_scan <= 1.0)) {
    throw DataError("augment config: probabilities must lie in [0, 1]");
  }
  if (clutter_min < 1 || clutter_max > 5 || clutter_min > clutter_max) {
    throw DataError("augment config: clutter sizes must satisfy 1 <= clutter_min <= clutter_max <= 5");
  }
  if (!(boundary_sigma >= 0.0) || !(clutter_spread >= 0.0)) throw DataError("augment config: spreads must be non-negative");
}

namespace {

struct SampleBuilder {
  std::vector<double> coords, features;
  TrainSample out;

  void add(double x, double y, double z, double rcs, double doppler, int target, InstanceId id) {
    coords.insert(coords.end(), {x, y});
    features.insert(features.end(), {x, y, z, rcs, doppler});
    out.targets.push_back(target);
    out.instance_ids.push_back(id);
  }

  TrainSample finish() {
    const std::size_t n = out.targets.size();
    out.coords = nn::Tensor({n, 2}, std::move(coords));
    out.features = nn::Tensor({n, 5}, std::move(features));
    return std::move(out);
  }
};

SampleBuilder moving_builder(const RadarScan& scan) {
  SampleBuilder b;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (!is_thing(scan.gt[i].semantic)) continue;
    const auto& p = scan.points[i];
    b.add(p.x, p.y, p.z, p.rcs, p.doppler, code(scan.gt[i].semantic), scan.gt[i].instance_id);
  }
  b.out.base = b.out.targets.size();
  return b;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

TrainSample moving_sample(const RadarScan& scan) { return moving_builder(scan).finish(); }

TrainSample augment_scan(const RadarScan& scan, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  SampleBuilder b = moving_builder(scan);
  constexpr int kStatic = 0;

  std::vector<std::size_t> statics;
  std::map<InstanceId, std::vector<std::size_t>> instances;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (is_thing(scan.gt[i].semantic)) {
      instances[scan.gt[i].instance_id].push_back(i);
    } else {
      statics.push_back(i);
    }
  }
  auto pick = [&](const std::vector<std::size_t>& from) {
    return from[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(from.size()) - 1))];
  };

  for (const auto& [id, members] : instances) {
    if (!bernoulli(rng, cfg.p_instance)) continue;
    const auto& anchor = scan.points[pick(members)];
    const double angle = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const double dist = std::abs(normal(rng, 0.0, cfg.boundary_sigma));
    const double x = anchor.x + dist * std::cos(angle);
    const double y = anchor.y + dist * std::sin(angle);
    if (!statics.empty()) {
      const auto& src = scan.points[pick(statics)];
      b.add(x, y, src.z, src.rcs, src.doppler, kStatic, 0);
    } else {
      std::vector<double> rcs;
      for (auto i : members) rcs.push_back(scan.points[i].rcs);
      b.add(x, y, 0.0, median(std::move(rcs)), 0.0, kStatic, 0);
    }
  }

  if (bernoulli(rng, cfg.p_scan) && scan.size() > 0) {
    const int count = uniform_int(rng, cfg.clutter_min, cfg.clutter_max);
    if (cfg.clutter_source == ClutterSource::Sampled && !statics.empty()) {
      const auto seed_idx = pick(statics);
      const auto& s = scan.points[seed_idx];
      std::vector<std::pair<double, std::size_t>> near;
      for (auto j : statics) {
        const double d = std::hypot(scan.points[j].x - s.x, scan.points[j].y - s.y);
        if (d <= 3.0) near.emplace_back(d, j);
      }
      std::sort(near.begin(), near.end());
      for (std::size_t k = 0; k < near.size() && k < static_cast<std::size_t>(count); ++k) {
        const auto& p = scan.points[near[k].second];
        b.add(p.x, p.y, p.z, p.rcs, p.doppler, kStatic, 0);
      }
    } else {
      double x0 = scan.points[0].x, x1 = x0, y0 = scan.points[0].y, y1 = y0;
      std::vector<double> rcs;
      for (const auto& p : scan.points) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
        rcs.push_back(p.rcs);
      }
      const double cx = uniform(rng, x0, x1), cy = uniform(rng, y0, y1);
      const double fallback_rcs = statics.empty() ? median(std::move(rcs)) : 0.0;
      for (int k = 0; k < count; ++k) {
        const double x = cx + normal(rng, 0.0, cfg.clutter_spread);
        const double y = cy + normal(rng, 0.0, cfg.clutter_spread);
        if (!statics.empty()) {
          const auto& src = scan.points[pick(statics)];
          b.add(x, y, src.z, src.rcs, src.doppler, kStatic, 0);
        } else {
          b.add(x, y, 0.0, fallback_rcs, 0.0, kStatic, 0);
        }
      }
    }
  }
  return b.finish();
}

double TrainConfig::learning_rate(int epoch) const { return epoch < lr_drop_epoch ? lr : lr / lr_drop_factor; }

TrainConfig TrainConfig::from_keyvalue(const KeyValueConfig& kv) {
  TrainConfig c;
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.batch_size = static_cast<std::size_t>(kv.get_int("batch_size", static_cast<long long>(c.batch_size)));
  c.lr = kv.get_double("lr", c.lr);
  c.lr_drop_epoch = static_cast<int>(kv.get_int("lr_drop_epoch", c.lr_drop_epoch));
  c.lr_drop_factor = kv.get_double("lr_drop_factor", c.lr_drop_factor);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.beta1 = kv.get_double("beta1", c.beta1);
  c.beta2 = kv.get_double("beta2", c.beta2);
  c.adam_eps = kv.get_double("adam_eps", c.adam_eps);
  c.seed = static_cast<std::uint64_t>(kv.get_int("train_seed", static_cast<long long>(c.seed)));
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw DataError("train config: epochs must be >= 1");
  if (batch_size < 1) throw DataError("train config: batch_size must be >= 1");
  if (!(lr > 0.0) || !(lr_drop_factor > 0.0)) throw DataError("train config: lr and lr_drop_factor must be positive");
  if (lr_drop_epoch < 0 || lr_drop_epoch >= epochs) throw DataError("train config: lr_drop_epoch must be < epochs");
  if (!(weight_decay >= 0.0)) throw DataError("train config: weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw DataError("train config: bad optimizer hyperparameters");
  }
}

namespace {

struct StepResult {
  LossBreakdown loss;
  double consistency_hard = 0.0;
  std::size_t scans = 0;  // non-empty scans in the batch
};

StepResult step_batch(RefinerNet& net, nn::AdamW& opt, const std::vector<const TrainSample*>& batch) {
  StepResult r;
  std::vector<const nn::Tensor*> coords, feats;
  std::vector<int> targets;
  std::vector<InstanceId> ids;
  for (const auto* s : batch) {
    coords.push_back(&s->coords);
    feats.push_back(&s->features);
    targets.insert(targets.end(), s->targets.begin(), s->targets.end());
    ids.insert(ids.end(), s->instance_ids.begin(), s->instance_ids.end());
    if (s->size() > 0) ++r.scans;
  }
  if (r.scans == 0) return r;
  const auto pb = PointBatch::stack(coords, feats);
  nn::Graph g;
  auto logits = net.forward(g, pb, nn::Mode::Training);
  auto terms = combined_loss(logits, targets, ids, pb.offsets);
  r.loss = terms.breakdown();
  if (!std::isfinite(r.loss.total)) return r;

  const auto classes = predict_classes(logits.value());
  for (std::size_t s = 0; s + 1 < pb.offsets.size(); ++s) {
    const auto lo = pb.offsets[s], hi = pb.offsets[s + 1];
    if (lo == hi) continue;
    r.consistency_hard += consistency_loss(std::span(classes).subspan(lo, hi - lo), std::span(ids).subspan(lo, hi - lo));
  }
  r.consistency_hard /= static_cast<double>(r.scans);

  g.backward(terms.total);
  auto params = net.params().trainable();
  opt.step(params);
  return r;
}

}  // namespace

LossBreakdown train_step(RefinerNet& net, nn::AdamW& opt, const std::vector<TrainSample>& batch) {
  std::vector<const TrainSample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  const auto r = step_batch(net, opt, ptrs);
  if (!std::isfinite(r.loss.total)) throw NumericalError("train_step: non-finite loss");
  return r.loss;
}

std::vector<EpochRecord> train(RefinerNet& net, const std::vector<RadarScan>& scans, const TrainConfig& cfg,
                               const AugmentConfig& aug, const ValidationSplit* validation,
                               const EpochCallback& on_epoch) {
  cfg.validate();
  aug.validate();
  if (scans.empty()) throw DataError("train: empty training set");
  nn::AdamW opt({cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});
  std::vector<EpochRecord> history;
  std::vector<TrainSample> samples(scans.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(cfg.learning_rate(epoch));
    std::vector<std::size_t> order(scans.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = derive_rng(cfg.seed, static_cast<std::uint64_t>(epoch), 0x5f1e);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    parallel_for(scans.size(), cfg.workers, [&](std::size_t s) {
      Rng rng = derive_rng(aug.seed ^ cfg.seed, static_cast<std::uint64_t>(epoch), fnv1a(scans[s].scan_id));
      samples[s] = augment_scan(scans[s], aug, rng);
    });

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = opt.lr();
    std::size_t batches = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += cfg.batch_size, ++b) {
      std::vector<const TrainSample*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        batch.push_back(&samples[order[k]]);
      }
      const auto where = "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1);
      StepResult r;
      try {
        r = step_batch(net, opt, batch);
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at " + where + ": " + e.what());
      }
      if (r.scans == 0) continue;
      if (!std::isfinite(r.loss.total)) throw NumericalError("training diverged: non-finite loss at " + where);
      rec.loss.ce += r.loss.ce;
      rec.loss.lovasz += r.loss.lovasz;
      rec.loss.consistency += r.loss.consistency;
      rec.loss.total += r.loss.total;
      rec.consistency_hard += r.consistency_hard;
      ++batches;
    }
    if (batches > 0) {
      const double n = static_cast<double>(batches);
      rec.loss.ce /= n;
      rec.loss.lovasz /= n;
      rec.loss.consistency /= n;
      rec.loss.total = rec.loss.ce + rec.loss.lovasz + rec.loss.consistency;
      rec.consistency_hard /= n;
    }
    if (validation && validation->scans && validation->backbone) {
      const auto ev = evaluate_network(net, *validation->scans, *validation->backbone, validation->mode, cfg.workers);
      rec.has_validation = true;
      rec.val_pq = panoptic_quality(ev.stats).mean;
      rec.val_miou = mean_iou(ev.stats).mean;
    }
    history.push_back(rec);
    if (on_epoch) on_epoch(rec, net);
  }
  return history;
}

}  // namespace radfiner
