#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "radfiner/keyvalue.hpp"
#include "radfiner/losses.hpp"
#include "radfiner/network.hpp"
#include "radfiner/optim.hpp"
#include "radfiner/refine.hpp"
#include "radfiner/rng.hpp"
#include "radfiner/scan.hpp"

namespace radfiner {

enum class ClutterSource {
  Synthetic,  // positions drawn around a uniform location in the scan's bounding box
  Sampled,    // a real static point and its nearest static neighbors
};

ClutterSource parse_clutter_source(std::string_view text);  // throws DataError
std::string_view to_string(ClutterSource source);

struct AugmentConfig {
  double p_instance = 0.4;
  double p_scan = 0.4;
  double boundary_sigma = 0.5;  // m
  int clutter_min = 1;
  int clutter_max = 5;
  double clutter_spread = 1.0;  // m, synthetic clutter spread around its center
  ClutterSource clutter_source = ClutterSource::Synthetic;
  std::uint64_t seed = 1;

  static AugmentConfig from_keyvalue(const KeyValueConfig& kv);
  void validate() const;
};

/// Network input for one scan plus per-point targets. Rows [0, base) are the
/// ground-truth moving points in scan order; augmentation only appends.
struct TrainSample {
  nn::Tensor coords;    // N x 2
  nn::Tensor features;  // N x 5
  std::vector<int> targets;
  std::vector<InstanceId> instance_ids;  // ground-truth ids, 0 for injected points
  std::size_t base = 0;

  std::size_t size() const { return targets.size(); }
};

TrainSample moving_sample(const RadarScan& scan);

/// Ground-truth moving sample with injected static points: per instance, with
/// probability p_instance, one point near a random instance point; per scan,
/// with probability p_scan, a clutter group of clutter_min..clutter_max points.
TrainSample augment_scan(const RadarScan& scan, const AugmentConfig& cfg, Rng& rng);

struct TrainConfig {
  int epochs = 80;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  int lr_drop_epoch = 60;
  double lr_drop_factor = 10.0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  int workers = 1;

  /// Learning rate of the zero-based epoch index.
  double learning_rate(int epoch) const;
  static TrainConfig from_keyvalue(const KeyValueConfig& kv);
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  LossBreakdown loss;        // mean over batches
  double consistency_hard = 0.0;  // mean over scans of the argmax consistency loss
  bool has_validation = false;
  double val_pq = 0.0;
  double val_miou = 0.0;
  double lr = 0.0;
};

struct ValidationSplit {
  const std::vector<RadarScan>* scans = nullptr;
  const std::vector<MovingPrediction>* backbone = nullptr;
  RefineMode mode = RefineMode::Split;
};

using EpochCallback = std::function<void(const EpochRecord&, RefinerNet&)>;

/// Trains in place. Throws NumericalError naming epoch and batch when the
/// loss becomes non-finite, DataError when the training set is empty.
std::vector<EpochRecord> train(RefinerNet& net, const std::vector<RadarScan>& scans, const TrainConfig& cfg,
                               const AugmentConfig& aug, const ValidationSplit* validation = nullptr,
                               const EpochCallback& on_epoch = {});

/// One optimizer step on a fixed batch; used by smoke tests.
LossBreakdown train_step(RefinerNet& net, nn::AdamW& opt, const std::vector<TrainSample>& batch);

}  // namespace radfiner
