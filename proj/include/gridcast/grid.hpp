#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace gridcast {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct GridCell {
  int id = 0;
  int row = 0;
  int col = 0;
  Point centroid;
};

struct CellBounds {
  double x_min, y_min, x_max, y_max;
};

/// Uniform axis-aligned square grid in planar metric coordinates. Cell ids
/// are dense row-major: id = row * n_cols + col.
class GridIndex {
 public:
  static constexpr double kDefaultCellSize = 1500.0;  // meters

  GridIndex(Point origin, double cell_size, int n_rows, int n_cols)
      : origin_(origin), cell_size_(cell_size), n_rows_(n_rows), n_cols_(n_cols) {
    if (cell_size <= 0.0) throw std::invalid_argument("GridIndex: cell_size must be positive");
    if (n_rows <= 0 || n_cols <= 0)
      throw std::invalid_argument("GridIndex: grid dimensions must be positive");
    cells_.reserve(static_cast<std::size_t>(n_rows) * n_cols);
    for (int r = 0; r < n_rows; ++r) {
      for (int c = 0; c < n_cols; ++c) {
        GridCell cell;
        cell.id = r * n_cols + c;
        cell.row = r;
        cell.col = c;
        cell.centroid = {origin.x + (c + 0.5) * cell_size, origin.y + (r + 0.5) * cell_size};
        cells_.push_back(cell);
      }
    }
  }

  int n_rows() const { return n_rows_; }
  int n_cols() const { return n_cols_; }
  int n_cells() const { return n_rows_ * n_cols_; }
  double cell_size() const { return cell_size_; }
  Point origin() const { return origin_; }
  const std::vector<GridCell>& cells() const { return cells_; }
  const GridCell& cell(int id) const { return cells_.at(static_cast<std::size_t>(id)); }
  Point centroid(int id) const { return cell(id).centroid; }

  CellBounds bounds(int id) const {
    const GridCell& c = cell(id);
    const double x0 = origin_.x + c.col * cell_size_;
    const double y0 = origin_.y + c.row * cell_size_;
    return {x0, y0, x0 + cell_size_, y0 + cell_size_};
  }

  /// Cell containing p under half-open intervals [x_min, x_max) per axis,
  /// or -1 if p falls outside the grid.
  int cell_at(Point p) const {
    const double fx = (p.x - origin_.x) / cell_size_;
    const double fy = (p.y - origin_.y) / cell_size_;
    const int col = static_cast<int>(std::floor(fx));
    const int row = static_cast<int>(std::floor(fy));
    if (row < 0 || row >= n_rows_ || col < 0 || col >= n_cols_) return -1;
    return row * n_cols_ + col;
  }

  double cell_area_m2() const { return cell_size_ * cell_size_; }
  double cell_area_km2() const { return cell_area_m2() / 1e6; }

 private:
  Point origin_;
  double cell_size_;
  int n_rows_;
  int n_cols_;
  std::vector<GridCell> cells_;
};

}  // namespace gridcast
