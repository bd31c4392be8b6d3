#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "radfiner/attention.hpp"
#include "radfiner/refine.hpp"
#include "radfiner/training.hpp"

namespace radfiner {

// Command implementations behind the `radfiner` tool. Each returns a process
// exit code: 0 success, 2 data/validation error, 3 numerical failure. Errors
// are reported on `err`.

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Flags shared by several commands; unset values keep the config file's.
struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<double> radius;
  std::optional<std::size_t> nmax;
  std::optional<std::string> attn_pad;
  int workers = 1;
};

struct GenerateOptions {
  CommonOptions common;
  std::filesystem::path out_dir;
  std::size_t count = 0;
  std::string prefix = "scan";
};

struct TrainOptions {
  CommonOptions common;
  std::filesystem::path data_dir;
  std::optional<std::filesystem::path> val_dir;
  std::filesystem::path out_dir;
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<int> lr_drop_epoch;
  std::optional<std::size_t> d1;
  std::optional<std::size_t> d2;
  std::optional<double> p_instance;
  std::optional<double> p_scan;
  std::optional<std::string> clutter_source;
  std::optional<std::string> refine_mode;
  int checkpoint_every = 10;
};

struct EvalOptions {
  CommonOptions common;
  std::filesystem::path data_dir;
  std::optional<std::filesystem::path> pred;        // defaults to <data_dir>/pred.txt
  std::optional<std::filesystem::path> checkpoint;  // absent: score the backbone with majority-true classes
  std::optional<std::filesystem::path> network_config;
  bool refine = false;
  std::optional<std::string> refine_mode;
  std::optional<std::filesystem::path> out_dir;
};

struct RefineOptions {
  CommonOptions common;
  std::filesystem::path data_dir;
  std::optional<std::filesystem::path> pred;
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> network_config;
  std::optional<std::string> refine_mode;
  std::filesystem::path out;
};

struct GradcheckOptions {
  CommonOptions common;
  std::size_t points = 20;
  std::optional<std::size_t> d1;
  std::optional<std::size_t> d2;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::optional<std::filesystem::path> out;
};

struct BenchOptions {
  CommonOptions common;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> network_config;
  std::optional<std::filesystem::path> data_dir;  // absent: synthetic scans of `scan_points` points
  std::size_t scans = 1000;
  std::size_t scan_points = 600;
  std::size_t repetitions = 1;
  std::size_t warmup = 20;
  std::optional<std::size_t> d1;
  std::optional<std::size_t> d2;
  std::optional<std::string> refine_mode;
  std::size_t ball_query_points = 2000;
  std::optional<std::filesystem::path> out;
};

int cmd_generate(const GenerateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);
int cmd_refine(const RefineOptions& opt, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& err);

/// history.csv text for the given epochs.
std::string format_history(const std::vector<EpochRecord>& history);

struct BenchStats {
  std::size_t samples = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
};
BenchStats summarize_latencies(std::vector<double> ms);

/// A synthetic scan with exactly `points` points (static clutter trimmed or added).
RadarScan bench_scene(std::size_t points, std::uint64_t seed, const std::string& scan_id);

}  // namespace radfiner
