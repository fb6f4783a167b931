#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridcast/grid.hpp"

namespace gridcast {

enum class FeatureKind { kExtensive, kIntensive, kCategorical };

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::kIntensive;
  double sigma = 0.0;             // population std dev over all cells
  bool in_dissimilarity = true;   // false for zero-variance columns
};

struct FeatureSchema {
  std::vector<FeatureColumn> columns;

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return static_cast<int>(i);
    return -1;
  }
  int n_columns() const { return static_cast<int>(columns.size()); }
};

/// Row-major n_cells x m feature values plus their schema.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(FeatureSchema schema, int n_rows)
      : schema_(std::move(schema)), n_rows_(n_rows),
        values_(static_cast<std::size_t>(n_rows) * schema_.columns.size(), 0.0) {}

  const FeatureSchema& schema() const { return schema_; }
  FeatureSchema& schema() { return schema_; }
  int n_rows() const { return n_rows_; }
  int n_cols() const { return schema_.n_columns(); }

  double& at(int row, int col) {
    return values_[static_cast<std::size_t>(row) * schema_.columns.size() + col];
  }
  double at(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * schema_.columns.size() + col];
  }
  std::span<const double> row(int r) const {
    return {values_.data() + static_cast<std::size_t>(r) * schema_.columns.size(),
            schema_.columns.size()};
  }
  std::span<double> row(int r) {
    return {values_.data() + static_cast<std::size_t>(r) * schema_.columns.size(),
            schema_.columns.size()};
  }
  std::vector<double> column(int c) const {
    std::vector<double> out(static_cast<std::size_t>(n_rows_));
    for (int r = 0; r < n_rows_; ++r) out[r] = at(r, c);
    return out;
  }

 private:
  FeatureSchema schema_;
  int n_rows_ = 0;
  std::vector<double> values_;
};

/// Per-cell demand proxy, aligned to grid cell ids.
struct DemandVector {
  std::vector<double> values;
};

struct PolygonFeature {
  std::vector<Point> ring;  // simple polygon, consistent winding
  double value = 0.0;
  std::string cls;          // class label for categorical layers
};

struct PolygonLayer {
  std::string name;
  std::vector<PolygonFeature> polygons;
};

struct PointFeature {
  Point p;
  double weight = 1.0;
};

struct PointLayer {
  std::string name;
  std::vector<PointFeature> points;
};

enum class ArealMode { kExtensive, kIntensive };

struct ArealMapResult {
  std::vector<double> values;         // per cell
  std::vector<std::uint8_t> flagged;  // intensive cells with no coverage
  int degenerate_skipped = 0;
};

struct CategoricalMapResult {
  std::vector<std::string> classes;   // sorted labels; may end with "none"
  std::vector<int> label;             // per cell, index into classes
  std::vector<std::vector<double>> one_hot;  // one column per class
};

struct PointMapResult {
  std::vector<double> values;
  int ignored_outside = 0;
};

/// Area-weighted allocation of polygon values onto grid cells.
ArealMapResult map_areal_layer(const GridIndex& grid, const PolygonLayer& layer,
                               ArealMode mode);

/// Dominant class per cell by intersected area; ties go to the smaller
/// class index, empty cells to the reserved class "none".
CategoricalMapResult map_categorical_layer(const GridIndex& grid, const PolygonLayer& layer);

/// Weighted point counts per cell, optionally per km^2. Boundary points are
/// assigned by half-open cell intervals.
PointMapResult map_point_layer(const GridIndex& grid, const PointLayer& layer,
                               bool normalize_by_area);

struct MappedColumn {
  std::string name;
  FeatureKind kind = FeatureKind::kIntensive;
  std::vector<double> values;
};

/// Concatenates mapped columns in declared order and fills per-column sigma.
FeatureMatrix assemble_features(const GridIndex& grid, const std::vector<MappedColumn>& columns);

// Geometry helpers (exact on the rectangle clipping used above).
double polygon_area(std::span<const Point> ring);  // absolute shoelace area
std::vector<Point> clip_to_rect(std::span<const Point> ring, const CellBounds& rect);

}  // namespace gridcast
