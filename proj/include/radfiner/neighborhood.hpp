#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "radfiner/tensor.hpp"

namespace radfiner {

/// Fixed-width ball-query result. Row i lists the neighbors of anchor i:
/// slot 0 is the anchor itself, the remaining valid slots follow in
/// ascending distance (ties by index), and unused slots are padding with
/// index 0 and zero relative position.
struct Neighborhood {
  std::size_t num_points = 0;
  std::size_t max_neighbors = 0;
  std::vector<std::size_t> indices;   // num_points * max_neighbors
  std::vector<std::uint8_t> valid;    // num_points * max_neighbors
  std::vector<double> rel_pos;        // num_points * max_neighbors * 2, p_i - p_j

  std::size_t slot(std::size_t i, std::size_t k) const { return i * max_neighbors + k; }
  std::size_t valid_count(std::size_t i) const;
  std::size_t total_valid() const;

  friend bool operator==(const Neighborhood&, const Neighborhood&) = default;
};

/// Ball query with cap over an N x 2 coordinate tensor using a uniform grid
/// with cell size `radius`. When `segments` is given (offsets over rows),
/// neighborhoods never cross segment boundaries.
Neighborhood ball_query(const nn::Tensor& coords, double radius, std::size_t max_neighbors,
                        std::span<const std::size_t> segments = {});

/// Exhaustive O(N^2) reference with identical selection and ordering rules.
Neighborhood ball_query_reference(const nn::Tensor& coords, double radius, std::size_t max_neighbors,
                                  std::span<const std::size_t> segments = {});

}  // namespace radfiner
