#include "radfiner/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "radfiner/error.hpp"
#include "radfiner/parallel.hpp"

namespace radfiner {

namespace {

constexpr double kPi = std::numbers::pi;

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw DataError(std::string("config: ") + name + " must lie in [0, 1]");
}

double half_diagonal(const ClassLaw& law) {
  if (law.gaussian_cluster) return 0.5 * std::max(law.length, law.width);
  return 0.5 * std::hypot(law.length, law.width);
}

struct Placed {
  ObjectSpec spec;
  double radius;
};

}  // namespace

SceneConfig SceneConfig::defaults() {
  SceneConfig c;
  using S = SemanticClass;
  c.laws[code(S::Static)] = {0, 0, 0.0, 0.0, 0.0, 0.0, 2.0, 8.0, false};
  c.laws[code(S::Car)] = {4, 12, 4.5, 1.9, 3.0, 14.0, 7.0, 3.0, false};
  c.laws[code(S::Pedestrian)] = {1, 4, 0.6, 0.6, 0.6, 2.0, -7.0, 2.5, false};
  c.laws[code(S::PedestrianGroup)] = {5, 14, 3.0, 3.0, 0.5, 1.8, -3.0, 2.5, true};
  c.laws[code(S::Bike)] = {2, 6, 1.9, 0.7, 2.0, 7.0, 1.0, 2.5, false};
  c.laws[code(S::Truck)] = {8, 20, 10.0, 2.6, 3.0, 12.0, 13.0, 3.0, false};
  return c;
}

SceneConfig SceneConfig::from_keyvalue(const KeyValueConfig& kv) {
  SceneConfig c = defaults();
  for (auto cls : kAllClasses) {
    const std::string p = std::string(class_name(cls)) + ".";
    auto& law = c.laws[code(cls)];
    law.points_min = static_cast<int>(kv.get_int(p + "points_min", law.points_min));
    law.points_max = static_cast<int>(kv.get_int(p + "points_max", law.points_max));
    law.length = kv.get_double(p + "length", law.length);
    law.width = kv.get_double(p + "width", law.width);
    law.speed_min = kv.get_double(p + "speed_min", law.speed_min);
    law.speed_max = kv.get_double(p + "speed_max", law.speed_max);
    law.rcs_mean = kv.get_double(p + "rcs_mean", law.rcs_mean);
    law.rcs_std = kv.get_double(p + "rcs_std", law.rcs_std);
    if (is_thing(cls)) c.class_weights[code(cls)] = kv.get_double(p + "weight", c.class_weights[code(cls)]);
  }
  c.instances_min = static_cast<int>(kv.get_int("instances_min", c.instances_min));
  c.instances_max = static_cast<int>(kv.get_int("instances_max", c.instances_max));
  c.static_min = static_cast<int>(kv.get_int("static_min", c.static_min));
  c.static_max = static_cast<int>(kv.get_int("static_max", c.static_max));
  c.boundary_static_max = static_cast<int>(kv.get_int("boundary_static_max", c.boundary_static_max));
  c.adjacent_probability = kv.get_double("adjacent_probability", c.adjacent_probability);
  c.adjacent_gap_max = kv.get_double("adjacent_gap_max", c.adjacent_gap_max);
  c.doppler_noise = kv.get_double("doppler_noise", c.doppler_noise);
  c.fov_deg = kv.get_double("fov_deg", c.fov_deg);
  c.min_range = kv.get_double("min_range", c.min_range);
  c.max_range = kv.get_double("max_range", c.max_range);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.validate();
  return c;
}

void SceneConfig::validate() const {
  if (!(max_range > 0.0) || !(min_range >= 0.0) || min_range >= max_range) throw DataError("scene config: bad range limits");
  if (!(fov_deg > 0.0 && fov_deg <= 360.0)) throw DataError("scene config: fov_deg must lie in (0, 360]");
  if (instances_min < 0 || instances_max < instances_min) throw DataError("scene config: bad instance count range");
  if (static_min < 0 || static_max < static_min) throw DataError("scene config: bad static count range");
  if (boundary_static_max < 0) throw DataError("scene config: boundary_static_max must be non-negative");
  check_probability(adjacent_probability, "adjacent_probability");
  if (!(doppler_noise >= 0.0)) throw DataError("scene config: doppler_noise must be non-negative");
  double total_weight = 0.0;
  for (auto cls : kAllClasses) {
    const auto& law = laws[code(cls)];
    if (!(law.rcs_std >= 0.0)) throw DataError("scene config: rcs_std must be non-negative");
    if (!is_thing(cls)) continue;
    if (law.points_min < 1 || law.points_max < law.points_min) {
      throw DataError("scene config: bad point count range for " + std::string(class_name(cls)));
    }
    if (!(law.length > 0.0 && law.width > 0.0)) throw DataError("scene config: extents must be positive");
    if (!(law.speed_min >= 0.0) || law.speed_max < law.speed_min) {
      throw DataError("scene config: bad speed range for " + std::string(class_name(cls)));
    }
    if (!(class_weights[code(cls)] >= 0.0)) throw DataError("scene config: class weights must be non-negative");
    total_weight += class_weights[code(cls)];
  }
  if (instances_max > 0 && !(total_weight > 0.0)) throw DataError("scene config: all class weights are zero");
}

SurrogateConfig SurrogateConfig::from_keyvalue(const KeyValueConfig& kv) {
  SurrogateConfig c;
  c.eps_boundary = kv.get_double("eps_boundary", c.eps_boundary);
  c.eps_clutter = kv.get_double("eps_clutter", c.eps_clutter);
  c.eps_merge = kv.get_double("eps_merge", c.eps_merge);
  c.eps_miss = kv.get_double("eps_miss", c.eps_miss);
  c.merge_gap = kv.get_double("merge_gap", c.merge_gap);
  c.boundary_radius = kv.get_double("boundary_radius", c.boundary_radius);
  c.seed = static_cast<std::uint64_t>(kv.get_int("surrogate_seed", static_cast<long long>(c.seed)));
  c.validate();
  return c;
}

void SurrogateConfig::validate() const {
  check_probability(eps_boundary, "eps_boundary");
  check_probability(eps_clutter, "eps_clutter");
  check_probability(eps_merge, "eps_merge");
  check_probability(eps_miss, "eps_miss");
  if (!(merge_gap >= 0.0) || !(boundary_radius >= 0.0)) throw DataError("surrogate config: distances must be non-negative");
}

double radial_velocity(double x, double y, double vx, double vy) {
  const double r = std::hypot(x, y);
  if (r == 0.0) return 0.0;
  return (vx * x + vy * y) / r;
}

std::vector<RadarPoint> sample_object_points(const ObjectSpec& obj, const SceneConfig& cfg, int count, Rng& rng) {
  const auto& law = cfg.laws[code(obj.semantic)];
  const double c = std::cos(obj.heading), s = std::sin(obj.heading);
  std::vector<RadarPoint> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    double u, v;
    if (law.gaussian_cluster) {
      // extent covers about +-3 sigma
      u = normal(rng, 0.0, law.length / 6.0);
      v = normal(rng, 0.0, law.width / 6.0);
    } else {
      u = uniform(rng, -0.5 * law.length, 0.5 * law.length);
      v = uniform(rng, -0.5 * law.width, 0.5 * law.width);
    }
    RadarPoint p;
    p.x = obj.cx + c * u - s * v;
    p.y = obj.cy + s * u + c * v;
    p.z = 0.0;
    p.doppler = radial_velocity(p.x, p.y, obj.vx, obj.vy) + normal(rng, 0.0, cfg.doppler_noise);
    p.rcs = normal(rng, law.rcs_mean, law.rcs_std);
    pts.push_back(p);
  }
  return pts;
}

RadarScan generate_scene(const SceneConfig& cfg, std::uint64_t seed, const std::string& scan_id) {
  cfg.validate();
  Rng rng = derive_rng(seed, 0x5ce7eULL);
  const double half_fov = 0.5 * cfg.fov_deg * kPi / 180.0;
  auto sample_in_fov = [&](double& x, double& y) {
    const double r = std::sqrt(uniform(rng, cfg.min_range * cfg.min_range, cfg.max_range * cfg.max_range));
    const double a = uniform(rng, -half_fov, half_fov);
    x = r * std::cos(a);
    y = r * std::sin(a);
  };
  auto in_fov = [&](double x, double y) {
    const double r = std::hypot(x, y);
    return r >= cfg.min_range && r <= cfg.max_range && std::abs(std::atan2(y, x)) <= half_fov;
  };

  std::vector<double> weights(cfg.class_weights.begin(), cfg.class_weights.end());
  std::discrete_distribution<int> pick_class(weights.begin(), weights.end());
  const int n_inst = uniform_int(rng, cfg.instances_min, cfg.instances_max);

  std::vector<Placed> placed;
  for (int k = 0; k < n_inst; ++k) {
    ObjectSpec spec;
    spec.semantic = class_from_code(pick_class(rng));
    const auto& law = cfg.laws[code(spec.semantic)];
    const double radius = half_diagonal(law);
    bool ok = false;
    for (int attempt = 0; attempt < 500 && !ok; ++attempt) {
      if (!placed.empty() && bernoulli(rng, cfg.adjacent_probability)) {
        const auto& other = placed[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(placed.size()) - 1))];
        const double dist = other.radius + radius + uniform(rng, 0.3, cfg.adjacent_gap_max);
        const double a = uniform(rng, -kPi, kPi);
        spec.cx = other.spec.cx + dist * std::cos(a);
        spec.cy = other.spec.cy + dist * std::sin(a);
      } else {
        sample_in_fov(spec.cx, spec.cy);
      }
      ok = in_fov(spec.cx, spec.cy);
      for (const auto& o : placed) {
        if (!ok) break;
        if (std::hypot(o.spec.cx - spec.cx, o.spec.cy - spec.cy) < o.radius + radius + 0.25) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) throw DataError("scene config: cannot fit " + std::to_string(n_inst) + " instances into the field of view");
    spec.heading = uniform(rng, -kPi, kPi);
    const double speed = uniform(rng, law.speed_min, law.speed_max);
    spec.vx = speed * std::cos(spec.heading);
    spec.vy = speed * std::sin(spec.heading);
    placed.push_back({spec, radius});
  }

  std::vector<RadarPoint> points;
  std::vector<PanopticLabel> labels;
  for (std::size_t k = 0; k < placed.size(); ++k) {
    const auto& spec = placed[k].spec;
    const auto& law = cfg.laws[code(spec.semantic)];
    const int count = uniform_int(rng, law.points_min, law.points_max);
    for (const auto& p : sample_object_points(spec, cfg, count, rng)) {
      points.push_back(p);
      labels.push_back({spec.semantic, static_cast<InstanceId>(k + 1)});
    }
  }

  const auto& static_law = cfg.laws[code(SemanticClass::Static)];
  auto static_point = [&](double x, double y) {
    return RadarPoint{x, y, 0.0, normal(rng, static_law.rcs_mean, static_law.rcs_std),
                      normal(rng, 0.0, cfg.doppler_noise)};
  };
  // Static returns just outside each object's surface: the typical source of boundary errors.
  for (const auto& pl : placed) {
    const auto& law = cfg.laws[code(pl.spec.semantic)];
    const double span = law.gaussian_cluster ? 1.0 / 3.0 : 0.5;
    const double c = std::cos(pl.spec.heading), s = std::sin(pl.spec.heading);
    const int count = uniform_int(rng, 0, cfg.boundary_static_max);
    for (int k = 0; k < count; ++k) {
      const double d = uniform(rng, 0.2, 1.5);
      const double a = span * law.length + d, b = span * law.width + d;
      // Uniform position on the perimeter of the grown box.
      double t = uniform(rng, 0.0, 4.0 * (a + b));
      double u, v;
      if (t < 2 * a) {
        u = t - a, v = b;
      } else if ((t -= 2 * a) < 2 * b) {
        u = a, v = t - b;
      } else if ((t -= 2 * b) < 2 * a) {
        u = a - t, v = -b;
      } else {
        t -= 2 * a;
        u = -a, v = b - t;
      }
      points.push_back(static_point(pl.spec.cx + c * u - s * v, pl.spec.cy + s * u + c * v));
      labels.push_back({SemanticClass::Static, 0});
    }
  }
  const int n_static = uniform_int(rng, cfg.static_min, cfg.static_max);
  for (int k = 0; k < n_static; ++k) {
    double x = 0, y = 0;
    for (int attempt = 0; attempt < 100; ++attempt) {
      sample_in_fov(x, y);
      bool inside = false;
      for (const auto& pl : placed) {
        if (std::hypot(pl.spec.cx - x, pl.spec.cy - y) < pl.radius + 0.2) inside = true;
      }
      if (!inside) break;
    }
    points.push_back(static_point(x, y));
    labels.push_back({SemanticClass::Static, 0});
  }

  std::vector<std::size_t> perm(points.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  RadarScan scan;
  scan.scan_id = scan_id;
  scan.points.reserve(points.size());
  scan.gt.reserve(points.size());
  for (auto i : perm) {
    scan.points.push_back(points[i]);
    scan.gt.push_back(labels[i]);
  }
  if (scan.points.empty()) {
    double x = 0, y = 0;
    sample_in_fov(x, y);
    scan.points.push_back(static_point(x, y));
    scan.gt.push_back({SemanticClass::Static, 0});
  }
  validate(scan);
  return scan;
}

std::vector<RadarScan> generate_corpus(const SceneConfig& cfg, std::size_t count, std::uint64_t seed,
                                       const std::string& prefix, int workers) {
  std::vector<RadarScan> scans(count);
  parallel_for(count, workers, [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%05zu", i);
    const auto scene_seed = derive_rng(seed, i, 0xc0de)();
    scans[i] = generate_scene(cfg, scene_seed, prefix + id);
  });
  return scans;
}

MovingPrediction surrogate_backbone(const RadarScan& scan, const SurrogateConfig& cfg, std::uint64_t seed,
                                    SurrogateStats* stats) {
  cfg.validate();
  Rng rng = derive_rng(seed, fnv1a(scan.scan_id), 0x5a11ULL);
  const std::size_t n = scan.size();
  SurrogateStats local;
  MovingPrediction pred{scan.scan_id, std::vector<std::uint8_t>(n, 0), std::vector<InstanceId>(n, 0)};
  InstanceId max_id = 0;
  std::vector<std::size_t> gt_moving;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_thing(scan.gt[i].semantic)) {
      pred.moving[i] = 1;
      pred.instance_id[i] = scan.gt[i].instance_id;
      gt_moving.push_back(i);
    }
    max_id = std::max(max_id, scan.gt[i].instance_id);
  }
  auto dist = [&](std::size_t a, std::size_t b) {
    return std::hypot(scan.points[a].x - scan.points[b].x, scan.points[a].y - scan.points[b].y);
  };

  // 1. Missed instance points.
  for (auto i : gt_moving) {
    if (bernoulli(rng, cfg.eps_miss)) {
      pred.moving[i] = 0;
      pred.instance_id[i] = 0;
      ++local.missed;
    }
  }

  // 2. Boundary false positives attached to the nearest ground-truth instance.
  for (std::size_t i = 0; i < n; ++i) {
    if (is_thing(scan.gt[i].semantic) || gt_moving.empty()) continue;
    double best = std::numeric_limits<double>::infinity();
    std::size_t nearest = 0;
    for (auto j : gt_moving) {
      const double d = dist(i, j);
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    if (best > cfg.boundary_radius) continue;
    ++local.boundary_eligible;
    if (bernoulli(rng, cfg.eps_boundary)) {
      pred.moving[i] = 1;
      pred.instance_id[i] = scan.gt[nearest].instance_id;
      ++local.boundary_flagged;
    }
  }

  // 3. A small static cluster reported as a spurious moving instance.
  if (bernoulli(rng, cfg.eps_clutter)) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
      if (!pred.moving[i] && !is_thing(scan.gt[i].semantic)) candidates.push_back(i);
    }
    const int size = uniform_int(rng, 1, 5);
    if (!candidates.empty()) {
      const auto seed_pt = candidates[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(candidates.size()) - 1))];
      std::vector<std::pair<double, std::size_t>> near;
      for (auto j : candidates) {
        const double d = dist(seed_pt, j);
        if (d <= 3.0) near.emplace_back(d, j);
      }
      std::sort(near.begin(), near.end());
      const InstanceId fresh = ++max_id;
      for (std::size_t k = 0; k < near.size() && k < static_cast<std::size_t>(size); ++k) {
        pred.moving[near[k].second] = 1;
        pred.instance_id[near[k].second] = fresh;
      }
      ++local.clutter_instances;
    }
  }

  // 4. Merge instances whose closest points are nearer than merge_gap.
  std::map<InstanceId, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) {
    if (pred.instance_id[i]) members[pred.instance_id[i]].push_back(i);
  }
  std::vector<InstanceId> ids;
  for (const auto& [id, _] : members) ids.push_back(id);
  std::map<InstanceId, InstanceId> parent;
  for (auto id : ids) parent[id] = id;
  auto find = [&](InstanceId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      double gap = std::numeric_limits<double>::infinity();
      for (auto i : members[ids[a]]) {
        for (auto j : members[ids[b]]) gap = std::min(gap, dist(i, j));
      }
      if (gap >= cfg.merge_gap) continue;
      if (bernoulli(rng, cfg.eps_merge)) {
        const auto ra = find(ids[a]), rb = find(ids[b]);
        if (ra != rb) {
          parent[std::max(ra, rb)] = std::min(ra, rb);
          ++local.merges;
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (pred.instance_id[i]) pred.instance_id[i] = find(pred.instance_id[i]);
  }
  validate(pred);
  if (stats) *stats = local;
  return pred;
}

}  // namespace radfiner
