#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "radfiner/tensor.hpp"

namespace radfiner {

inline constexpr int kNumClasses = 6;

/// Panoptic classes with their stable on-disk codes. `Static` is the only
/// stuff class; the others are thing classes.
enum class SemanticClass : std::uint8_t {
  Static = 0,
  Car = 1,
  Pedestrian = 2,
  PedestrianGroup = 3,
  Bike = 4,
  Truck = 5,
};

inline constexpr std::array<SemanticClass, kNumClasses> kAllClasses = {
    SemanticClass::Static, SemanticClass::Car,  SemanticClass::Pedestrian,
    SemanticClass::PedestrianGroup, SemanticClass::Bike, SemanticClass::Truck};

constexpr int code(SemanticClass c) { return static_cast<int>(c); }
SemanticClass class_from_code(int code);  // throws DataError outside 0..5
std::string_view class_name(SemanticClass c);
constexpr bool is_thing(SemanticClass c) { return c != SemanticClass::Static; }

using InstanceId = std::uint32_t;

struct RadarPoint {
  double x = 0.0;        // m
  double y = 0.0;        // m
  double z = 0.0;        // m, always 0
  double rcs = 0.0;      // dBsm
  double doppler = 0.0;  // m/s, ego-motion compensated

  friend bool operator==(const RadarPoint&, const RadarPoint&) = default;
};

struct PanopticLabel {
  SemanticClass semantic = SemanticClass::Static;
  InstanceId instance_id = 0;

  friend bool operator==(const PanopticLabel&, const PanopticLabel&) = default;
};

struct RadarScan {
  std::string scan_id;
  std::vector<RadarPoint> points;
  std::vector<PanopticLabel> gt;

  std::size_t size() const { return points.size(); }
  friend bool operator==(const RadarScan&, const RadarScan&) = default;
};

/// Backbone output: moving/static flag plus instance id per point.
struct MovingPrediction {
  std::string scan_id;
  std::vector<std::uint8_t> moving;
  std::vector<InstanceId> instance_id;

  std::size_t size() const { return moving.size(); }
  friend bool operator==(const MovingPrediction&, const MovingPrediction&) = default;
};

/// Final per-point panoptic labels. Instances are semantically pure and
/// static points carry instance id 0.
struct PanopticPrediction {
  std::string scan_id;
  std::vector<SemanticClass> semantic;
  std::vector<InstanceId> instance_id;

  std::size_t size() const { return semantic.size(); }
  friend bool operator==(const PanopticPrediction&, const PanopticPrediction&) = default;
};

// Invariant checks. Each throws DataError naming the scan and the offending point.
void validate(const RadarScan& scan);
void validate(const MovingPrediction& pred);
void validate(const PanopticPrediction& pred);

/// Ground-truth labels of a scan viewed as a panoptic prediction.
PanopticPrediction ground_truth_panoptic(const RadarScan& scan);

// Scan file: `#radfiner-scans v1`, then per scan `scan <id> <N>` and N lines
// `x y z rcs doppler sem_code instance_id`.
std::vector<RadarScan> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<RadarScan>& scans, const std::filesystem::path& path);
std::vector<RadarScan> parse_dataset(std::string_view text, std::string_view origin = "<memory>");
std::string format_dataset(const std::vector<RadarScan>& scans);

// Prediction file: `#radfiner-pred v1`, then per scan `scan <id> <N>` and N
// lines `moving instance_id [sem_code]`. The sem_code column is written only
// for refined (panoptic) outputs.
std::vector<MovingPrediction> load_predictions(const std::filesystem::path& path);
std::vector<PanopticPrediction> load_panoptic(const std::filesystem::path& path);
void save_predictions(const std::vector<MovingPrediction>& preds, const std::filesystem::path& path);
void save_panoptic(const std::vector<PanopticPrediction>& preds, const std::filesystem::path& path);
std::string format_predictions(const std::vector<MovingPrediction>& preds);
std::string format_panoptic(const std::vector<PanopticPrediction>& preds);
std::vector<MovingPrediction> parse_predictions(std::string_view text, std::string_view origin = "<memory>");
std::vector<PanopticPrediction> parse_panoptic(std::string_view text, std::string_view origin = "<memory>");

/// Shortest decimal (non-exponent) text that parses back to exactly `v`.
std::string format_real(double v);

/// Rows of the scan flagged moving, in original order.
struct MovingSelection {
  nn::Tensor coords;    // N_mov x 2
  nn::Tensor features;  // N_mov x 5: x, y, z, rcs, doppler
  std::vector<std::size_t> index_map;

  bool empty() const { return index_map.empty(); }
  std::size_t size() const { return index_map.size(); }
};

MovingSelection select_moving(const RadarScan& scan, const MovingPrediction& pred);
MovingSelection select_points(const RadarScan& scan, const std::vector<std::uint8_t>& mask);

}  // namespace radfiner
