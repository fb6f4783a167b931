#include "gridcast/weights.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridcast {

namespace {

struct Entry {
  int row, col;
  double w;
};

SpatialWeights from_entries(int n, std::vector<Entry> entries, WeightsKind kind,
                            bool row_standardized) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<int> row_ptr(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> col;
  std::vector<double> w;
  col.reserve(entries.size());
  w.reserve(entries.size());
  for (const Entry& e : entries) {
    ++row_ptr[static_cast<std::size_t>(e.row) + 1];
    col.push_back(e.col);
    w.push_back(e.w);
  }
  for (int i = 0; i < n; ++i) row_ptr[i + 1] += row_ptr[i];
  return SpatialWeights(n, std::move(row_ptr), std::move(col), std::move(w), kind,
                        row_standardized);
}

}  // namespace

SpatialWeights SpatialWeights::distance_threshold(const GridIndex& grid, double d_meters) {
  if (d_meters <= 0.0) throw std::invalid_argument("distance_threshold: d must be positive");
  const int n = grid.n_cells();
  const double cs = grid.cell_size();
  const int reach = static_cast<int>(std::floor(d_meters / cs)) + 1;
  const double d2 = d_meters * d_meters;

  std::vector<Entry> entries;
  for (int i = 0; i < n; ++i) {
    const GridCell& ci = grid.cell(i);
    for (int dr = -reach; dr <= reach; ++dr) {
      const int r = ci.row + dr;
      if (r < 0 || r >= grid.n_rows()) continue;
      for (int dc = -reach; dc <= reach; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int c = ci.col + dc;
        if (c < 0 || c >= grid.n_cols()) continue;
        const double dist2 = (dr * cs) * (dr * cs) + (dc * cs) * (dc * cs);
        if (dist2 <= d2) entries.push_back({i, r * grid.n_cols() + c, 1.0});
      }
    }
  }
  return from_entries(n, std::move(entries), WeightsKind::kDistanceThreshold, false);
}

SpatialWeights SpatialWeights::knn(const GridIndex& grid, int k) {
  const int n = grid.n_cells();
  if (k <= 0 || k >= n) throw std::invalid_argument("knn: need 0 < k < n");

  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(n) * k);
  std::vector<std::pair<double, int>> cand;
  for (int i = 0; i < n; ++i) {
    const Point pi = grid.centroid(i);
    cand.clear();
    cand.reserve(static_cast<std::size_t>(n) - 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const Point pj = grid.centroid(j);
      const double dx = pi.x - pj.x;
      const double dy = pi.y - pj.y;
      cand.emplace_back(dx * dx + dy * dy, j);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int m = 0; m < k; ++m) entries.push_back({i, cand[m].second, 1.0});
  }
  return from_entries(n, std::move(entries), WeightsKind::kKnn, false);
}

SpatialWeights SpatialWeights::distance_threshold_subset(const GridIndex& grid,
                                                         std::span<const int> cells,
                                                         double d_meters) {
  const int n = static_cast<int>(cells.size());
  const double d2 = d_meters * d_meters;
  std::vector<Entry> entries;
  for (int a = 0; a < n; ++a) {
    const Point pa = grid.centroid(cells[a]);
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const Point pb = grid.centroid(cells[b]);
      const double dx = pa.x - pb.x;
      const double dy = pa.y - pb.y;
      if (dx * dx + dy * dy <= d2) entries.push_back({a, b, 1.0});
    }
  }
  return from_entries(n, std::move(entries), WeightsKind::kDistanceThreshold, false);
}

double SpatialWeights::total_weight() const {
  double s = 0.0;
  for (double v : w_) s += v;
  return s;
}

SpatialWeights SpatialWeights::row_standardize() const {
  std::vector<double> w = w_;
  for (int i = 0; i < n_; ++i) {
    double row_sum = 0.0;
    for (int e = row_begin(i); e < row_end(i); ++e) row_sum += w[e];
    if (row_sum > 0.0)
      for (int e = row_begin(i); e < row_end(i); ++e) w[e] /= row_sum;
  }
  return SpatialWeights(n_, row_ptr_, col_, std::move(w), kind_, true);
}

SpatialWeights SpatialWeights::symmetrize_union() const {
  std::vector<Entry> entries;
  entries.reserve(nnz() * 2);
  for (int i = 0; i < n_; ++i)
    for (int e = row_begin(i); e < row_end(i); ++e) {
      entries.push_back({i, col_[e], w_[e]});
      entries.push_back({col_[e], i, w_[e]});
    }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  // Keep the max weight per (row, col).
  std::vector<Entry> dedup;
  for (const Entry& e : entries) {
    if (!dedup.empty() && dedup.back().row == e.row && dedup.back().col == e.col)
      dedup.back().w = std::max(dedup.back().w, e.w);
    else
      dedup.push_back(e);
  }
  return from_entries(n_, std::move(dedup), kind_, false);
}

std::vector<double> SpatialWeights::lag(std::span<const double> y) const {
  if (static_cast<int>(y.size()) != n_)
    throw std::invalid_argument("SpatialWeights::lag: size mismatch");
  std::vector<double> out(static_cast<std::size_t>(n_), 0.0);
  for (int i = 0; i < n_; ++i) {
    double s = 0.0;
    for (int e = row_begin(i); e < row_end(i); ++e) s += w_[e] * y[col_[e]];
    out[i] = s;
  }
  return out;
}

std::pair<std::vector<int>, int> SpatialWeights::connected_components() const {
  std::vector<int> comp(static_cast<std::size_t>(n_), -1);
  std::vector<int> stack;
  int n_comp = 0;
  for (int s = 0; s < n_; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = n_comp;
    stack.push_back(s);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int e = row_begin(u); e < row_end(u); ++e) {
        const int v = col_[e];
        if (comp[v] < 0) {
          comp[v] = n_comp;
          stack.push_back(v);
        }
      }
    }
    ++n_comp;
  }
  return {std::move(comp), n_comp};
}

SpatialWeights SpatialWeights::subgraph(std::span<const int> nodes) const {
  std::vector<int> local(static_cast<std::size_t>(n_), -1);
  for (std::size_t a = 0; a < nodes.size(); ++a) local[nodes[a]] = static_cast<int>(a);
  std::vector<Entry> entries;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    const int i = nodes[a];
    for (int e = row_begin(i); e < row_end(i); ++e) {
      const int lj = local[col_[e]];
      if (lj >= 0) entries.push_back({static_cast<int>(a), lj, w_[e]});
    }
  }
  return from_entries(static_cast<int>(nodes.size()), std::move(entries), kind_,
                      row_standardized_);
}

SpatialWeights build_weights(const GridIndex& grid, const WeightsParam& param) {
  if (grid.n_cells() == 0) throw std::invalid_argument("build_weights: empty grid");
  SpatialWeights w = (param.kind == WeightsKind::kDistanceThreshold)
                         ? SpatialWeights::distance_threshold(grid, param.distance_m)
                         : SpatialWeights::knn(grid, param.k);
  if (w.nnz() == 0) throw std::runtime_error("build_weights: no neighbors at this scale");
  return w;
}

}  // namespace gridcast
