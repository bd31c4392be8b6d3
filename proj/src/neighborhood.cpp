#include "radfiner/neighborhood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "radfiner/error.hpp"

namespace radfiner {

std::size_t Neighborhood::valid_count(std::size_t i) const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < max_neighbors; ++k) n += valid[slot(i, k)];
  return n;
}

std::size_t Neighborhood::total_valid() const {
  std::size_t n = 0;
  for (auto v : valid) n += v;
  return n;
}

namespace {

// A neighbor other than the anchor itself; the anchor always takes slot 0.
struct Candidate {
  double d2;
  std::size_t index;

  bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
};

double sq_dist(const nn::Tensor& c, std::size_t i, std::size_t j) {
  const double dx = c[2 * i] - c[2 * j];
  const double dy = c[2 * i + 1] - c[2 * j + 1];
  return dx * dx + dy * dy;
}

std::vector<std::size_t> normalized_segments(const nn::Tensor& coords, std::span<const std::size_t> segments) {
  const std::size_t n = coords.rows();
  if (segments.empty()) return {0, n};
  if (segments.front() != 0 || segments.back() != n) throw ShapeError("ball_query: segments must span all points");
  return {segments.begin(), segments.end()};
}

Neighborhood empty_neighborhood(const nn::Tensor& coords, double radius, std::size_t max_neighbors) {
  if (coords.rank() != 2 || coords.dim(1) != 2) throw ShapeError("ball_query: coordinates must be N x 2");
  if (!(radius > 0.0)) throw std::invalid_argument("ball_query: radius must be positive");
  if (max_neighbors < 1) throw std::invalid_argument("ball_query: max_neighbors must be at least 1");
  if (!coords.all_finite()) throw DataError("ball_query: non-finite coordinates");
  Neighborhood nb;
  nb.num_points = coords.rows();
  nb.max_neighbors = max_neighbors;
  nb.indices.assign(nb.num_points * max_neighbors, 0);
  nb.valid.assign(nb.num_points * max_neighbors, 0);
  nb.rel_pos.assign(nb.num_points * max_neighbors * 2, 0.0);
  return nb;
}

void fill_row(Neighborhood& nb, const nn::Tensor& coords, std::size_t i, std::span<Candidate> cand) {
  const std::size_t keep = std::min(cand.size(), nb.max_neighbors - 1);
  const auto mid = cand.begin() + static_cast<std::ptrdiff_t>(keep);
  if (keep < cand.size()) std::nth_element(cand.begin(), mid, cand.end());
  std::sort(cand.begin(), mid);
  auto put = [&](std::size_t k, std::size_t j) {
    const std::size_t s = nb.slot(i, k);
    nb.indices[s] = j;
    nb.valid[s] = 1;
    nb.rel_pos[2 * s] = coords[2 * i] - coords[2 * j];
    nb.rel_pos[2 * s + 1] = coords[2 * i + 1] - coords[2 * j + 1];
  };
  put(0, i);
  for (std::size_t k = 0; k < keep; ++k) put(k + 1, cand[k].index);
}

}  // namespace

Neighborhood ball_query_reference(const nn::Tensor& coords, double radius, std::size_t max_neighbors,
                                  std::span<const std::size_t> segments) {
  Neighborhood nb = empty_neighborhood(coords, radius, max_neighbors);
  const auto seg = normalized_segments(coords, segments);
  const double r2 = radius * radius;
  std::vector<Candidate> cand;
  for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
    for (std::size_t i = seg[s]; i < seg[s + 1]; ++i) {
      cand.clear();
      for (std::size_t j = seg[s]; j < seg[s + 1]; ++j) {
        const double d2 = sq_dist(coords, i, j);
        if (d2 <= r2 && j != i) cand.push_back({d2, j});
      }
      fill_row(nb, coords, i, cand);
    }
  }
  return nb;
}

Neighborhood ball_query(const nn::Tensor& coords, double radius, std::size_t max_neighbors,
                        std::span<const std::size_t> segments) {
  Neighborhood nb = empty_neighborhood(coords, radius, max_neighbors);
  const auto seg = normalized_segments(coords, segments);
  const double r2 = radius * radius;

  std::vector<Candidate> cand;
  std::vector<std::size_t> cell_of, start, idx;
  std::vector<double> xs, ys;
  for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
    const std::size_t begin = seg[s], end = seg[s + 1];
    const std::size_t n = end - begin;
    if (n == 0) continue;
    double x0 = coords[2 * begin], x1 = x0, y0 = coords[2 * begin + 1], y1 = y0;
    for (std::size_t i = begin; i < end; ++i) {
      x0 = std::min(x0, coords[2 * i]);
      x1 = std::max(x1, coords[2 * i]);
      y0 = std::min(y0, coords[2 * i + 1]);
      y1 = std::max(y1, coords[2 * i + 1]);
    }
    if (!std::isfinite(x1 - x0) || !std::isfinite(y1 - y0)) {
      return ball_query_reference(coords, radius, max_neighbors, segments);
    }
    // Any cell at least as wide as the radius keeps in-radius pairs in
    // adjacent cells; widen sparse layouts so the grid stays O(n) in size.
    // The small factor absorbs rounding in the division.
    double cell = radius * (1.0 + 1e-9);
    const double budget = 4.0 * static_cast<double>(n) + 16.0;
    const double area_cells = ((x1 - x0) / cell + 1.0) * ((y1 - y0) / cell + 1.0);
    if (area_cells > budget) cell *= std::sqrt(area_cells / budget);
    const auto width = static_cast<std::size_t>((x1 - x0) / cell) + 1;
    const auto height = static_cast<std::size_t>((y1 - y0) / cell) + 1;

    // Counting sort by cell, row-major so the three cells of a row are contiguous.
    cell_of.resize(n);
    start.assign(width * height + 1, 0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto cx = std::min(static_cast<std::size_t>((coords[2 * (begin + k)] - x0) / cell), width - 1);
      const auto cy = std::min(static_cast<std::size_t>((coords[2 * (begin + k) + 1] - y0) / cell), height - 1);
      cell_of[k] = cy * width + cx;
      ++start[cell_of[k] + 1];
    }
    for (std::size_t c = 0; c < width * height; ++c) start[c + 1] += start[c];
    idx.resize(n);
    xs.resize(n);
    ys.resize(n);
    {
      std::vector<std::size_t> fill(start.begin(), start.end() - 1);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t at = fill[cell_of[k]]++;
        idx[at] = begin + k;
        xs[at] = coords[2 * (begin + k)];
        ys[at] = coords[2 * (begin + k) + 1];
      }
    }

    cand.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = begin + k;
      const double px = coords[2 * i], py = coords[2 * i + 1];
      const std::size_t cx = cell_of[k] % width, cy = cell_of[k] / width;
      const std::size_t lo_x = cx > 0 ? cx - 1 : 0, hi_x = std::min(cx + 1, width - 1);
      const std::size_t lo_y = cy > 0 ? cy - 1 : 0, hi_y = std::min(cy + 1, height - 1);
      std::size_t m = 0;
      for (std::size_t row = lo_y; row <= hi_y; ++row) {
        const std::size_t a = start[row * width + lo_x], b = start[row * width + hi_x + 1];
        for (std::size_t t = a; t < b; ++t) {
          const double dx = px - xs[t], dy = py - ys[t];
          const double d2 = dx * dx + dy * dy;
          cand[m] = {d2, idx[t]};
          m += static_cast<std::size_t>((d2 <= r2) & (idx[t] != i));
        }
      }
      fill_row(nb, coords, i, std::span(cand.data(), m));
    }
  }
  return nb;
}

}  // namespace radfiner
