#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "radfiner/graph.hpp"
#include "radfiner/rng.hpp"
#include "radfiner/scan.hpp"

namespace testing {

using radfiner::Rng;
using radfiner::nn::Tensor;

inline Tensor random_tensor(radfiner::nn::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = radfiner::uniform(rng, lo, hi);
  return t;
}

/// sum(x * w) with fixed random weights, so every output entry gets a distinct gradient.
inline radfiner::nn::Var weighted_sum(radfiner::nn::Var x, const Tensor& w) {
  auto& g = *x.graph();
  return radfiner::nn::sum_all(radfiner::nn::mul(x, g.constant(w)));
}

inline Tensor coords_tensor(const std::vector<std::pair<double, double>>& pts) {
  Tensor t({pts.size(), 2});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    t.at(i, 0) = pts[i].first;
    t.at(i, 1) = pts[i].second;
  }
  return t;
}

inline Tensor random_coords(std::size_t n, double extent, Rng& rng) {
  Tensor t({n, 2});
  for (auto& v : t.values()) v = radfiner::uniform(rng, 0.0, extent);
  return t;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("radfiner_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.string().c_str(), "rb");
  if (!f) return {};
  std::string s;
  char buf[65536];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) s.append(buf, n);
  std::fclose(f);
  return s;
}

}  // namespace testing
