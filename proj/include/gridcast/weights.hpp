#pragma once

#include <span>
#include <vector>

#include "gridcast/grid.hpp"

namespace gridcast {

enum class WeightsKind { kDistanceThreshold, kKnn };

/// Sparse spatial neighbor structure in CSR form. No self-weights.
class SpatialWeights {
 public:
  SpatialWeights() = default;
  SpatialWeights(int n, std::vector<int> row_ptr, std::vector<int> col,
                 std::vector<double> w, WeightsKind kind, bool row_standardized)
      : n_(n), row_ptr_(std::move(row_ptr)), col_(std::move(col)), w_(std::move(w)),
        kind_(kind), row_standardized_(row_standardized) {}

  /// Binary symmetric weights: w_ij = 1 iff 0 < dist(centroid_i, centroid_j) <= d_meters.
  static SpatialWeights distance_threshold(const GridIndex& grid, double d_meters);

  /// k nearest centroids per row (asymmetric; ties by lower cell id).
  static SpatialWeights knn(const GridIndex& grid, int k);

  /// Same structure over an arbitrary subset of cells; entry (i, j) refers
  /// to positions in `cells`.
  static SpatialWeights distance_threshold_subset(const GridIndex& grid,
                                                  std::span<const int> cells,
                                                  double d_meters);

  int n() const { return n_; }
  WeightsKind kind() const { return kind_; }
  bool row_standardized() const { return row_standardized_; }
  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col() const { return col_; }
  const std::vector<double>& weights() const { return w_; }
  std::size_t nnz() const { return col_.size(); }

  inline int row_begin(int i) const { return row_ptr_[i]; }
  inline int row_end(int i) const { return row_ptr_[i + 1]; }
  int row_degree(int i) const { return row_end(i) - row_begin(i); }

  /// Sum of all weights (W in the Moran formula).
  double total_weight() const;

  /// Each nonempty row rescaled to sum to one.
  SpatialWeights row_standardize() const;

  /// Symmetrized by union: w_ij := max(w_ij, w_ji).
  SpatialWeights symmetrize_union() const;

  /// Spatial lag (W * y).
  std::vector<double> lag(std::span<const double> y) const;

  /// Connected components of the undirected neighbor graph; returns
  /// component id per node and the component count.
  std::pair<std::vector<int>, int> connected_components() const;

  /// Restriction to a node subset; entry indices refer to positions in
  /// `nodes`. Edges leaving the subset are dropped.
  SpatialWeights subgraph(std::span<const int> nodes) const;

 private:
  int n_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_;
  std::vector<double> w_;
  WeightsKind kind_ = WeightsKind::kDistanceThreshold;
  bool row_standardized_ = false;
};

struct WeightsParam {
  WeightsKind kind = WeightsKind::kDistanceThreshold;
  double distance_m = 0.0;  // for kDistanceThreshold
  int k = 0;                // for kKnn
};

/// Convenience dispatcher; errors if the resulting graph has no edges.
SpatialWeights build_weights(const GridIndex& grid, const WeightsParam& param);

}  // namespace gridcast
