#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "radfiner/keyvalue.hpp"
#include "radfiner/rng.hpp"
#include "radfiner/scan.hpp"

namespace radfiner {

struct ClassLaw {
  int points_min = 1;
  int points_max = 1;
  double length = 1.0;  // m, along heading
  double width = 1.0;   // m
  double speed_min = 0.0;
  double speed_max = 1.0;  // m/s
  double rcs_mean = 0.0;   // dBsm
  double rcs_std = 1.0;
  bool gaussian_cluster = false;  // points drawn around the center instead of inside a box
};

struct SceneConfig {
  std::array<ClassLaw, kNumClasses> laws;  // index by class code; [0] holds the static RCS law
  std::array<double, kNumClasses> class_weights{0.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  int instances_min = 2;
  int instances_max = 7;
  int static_min = 120;
  int static_max = 220;
  int boundary_static_max = 3;      // static points placed just outside each instance
  double adjacent_probability = 0.35;  // chance an instance is placed beside an earlier one
  double adjacent_gap_max = 1.8;    // m
  double doppler_noise = 0.15;      // m/s, Gaussian
  double fov_deg = 120.0;
  double min_range = 3.0;
  double max_range = 60.0;
  std::uint64_t seed = 1;

  static SceneConfig defaults();
  static SceneConfig from_keyvalue(const KeyValueConfig& kv);
  void validate() const;
};

struct SurrogateConfig {
  double eps_boundary = 0.15;
  double eps_clutter = 0.2;
  double eps_merge = 0.2;
  double eps_miss = 0.05;
  double merge_gap = 1.5;        // m
  double boundary_radius = 2.0;  // m, static points this close to an instance are eligible
  std::uint64_t seed = 1;

  static SurrogateConfig from_keyvalue(const KeyValueConfig& kv);
  void validate() const;
};

/// One rigid moving object.
struct ObjectSpec {
  SemanticClass semantic = SemanticClass::Car;
  double cx = 0.0, cy = 0.0;  // m
  double heading = 0.0;       // rad
  double vx = 0.0, vy = 0.0;  // m/s
};

/// Radial component of `velocity` along the line of sight to (x, y).
double radial_velocity(double x, double y, double vx, double vy);

/// Points of one object: positions from the class law, Doppler as the radial
/// projection of the object velocity plus noise, RCS from the class law.
std::vector<RadarPoint> sample_object_points(const ObjectSpec& obj, const SceneConfig& cfg, int count, Rng& rng);

/// Deterministic synthetic scan with ground truth; instance ids start at 1.
RadarScan generate_scene(const SceneConfig& cfg, std::uint64_t seed, const std::string& scan_id);

/// Scan ids `<prefix><index:05>` with per-scan seeds derived from `seed`.
std::vector<RadarScan> generate_corpus(const SceneConfig& cfg, std::size_t count, std::uint64_t seed,
                                       const std::string& prefix = "scan", int workers = 1);

struct SurrogateStats {
  std::size_t boundary_eligible = 0;
  std::size_t boundary_flagged = 0;
  std::size_t missed = 0;
  std::size_t clutter_instances = 0;
  std::size_t merges = 0;
};

/// Replays the ground-truth moving labels with seeded label errors, applied
/// in order: missed points, boundary false positives, clutter instances,
/// merges of nearby instances. Never touches point data.
MovingPrediction surrogate_backbone(const RadarScan& scan, const SurrogateConfig& cfg, std::uint64_t seed,
                                    SurrogateStats* stats = nullptr);

}  // namespace radfiner
