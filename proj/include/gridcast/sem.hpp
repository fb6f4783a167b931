#pragma once

#include <span>
#include <vector>

#include "gridcast/gbt.hpp"
#include "gridcast/grid.hpp"
#include "gridcast/weights.hpp"

namespace gridcast {

struct SemComponentFit {
  int size = 0;
  double lambda = 0.0;
  double innovation_sse = 0.0;
};

/// Residual spatial-dependence model eps = lambda * W * eps + u, fitted by
/// minimizing the innovation sum of squares ||(I - lambda W) eps||^2.
struct SemModel {
  double lambda = 0.0;
  double innovation_sse = 0.0;
  double residual_sse = 0.0;          // ||eps||^2, the lambda = 0 baseline
  double moran_before = 0.0;
  double moran_after = 0.0;
  bool moran_defined = false;         // false when residuals are constant
  std::vector<SemComponentFit> components;  // per connected component of W
  std::vector<double> innovations;    // u = (I - lambda W) eps
};

/// Estimates lambda on training residuals given row-standardized weights
/// over the training cells. Disconnected graphs are fitted per component
/// and aggregated by size-weighted mean.
SemModel fit_lambda(std::span<const double> residuals, const SpatialWeights& w);

/// Sparse row-standardized weights from each test cell to its training
/// neighbors within d_meters. Rows with no training neighbor stay empty.
struct CrossWeights {
  int n_test = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col;  // index into the training-cell array
  std::vector<double> w;
};

CrossWeights build_cross_weights(const GridIndex& grid, std::span<const int> test_ids,
                                 std::span<const int> train_ids, double d_meters);

/// SEM-corrected predictions: yhat_i + lambda * sum_j w_ij e_j over training
/// neighbors. Cells without training neighbors pass through unchanged.
std::vector<double> correct_predictions(const SemModel& sem,
                                        std::span<const double> yhat_test,
                                        std::span<const double> train_residuals,
                                        const CrossWeights& cross);

/// Iterative solve of (I - lambda W) z = rhs by fixed-point iteration
/// (convergent for |lambda| < 1 with row-standardized W).
std::vector<double> solve_filtered(const SpatialWeights& w, double lambda,
                                   std::span<const double> rhs, double tol = 1e-10);

struct SemObjective {
  double value = 0.0;
  double mse = 0.0;
  double l2_theta = 0.0;          // alpha * ||theta||^2
  double spatial_penalty = 0.0;   // beta * ||(I - lambda W)^-1 eps||^2, as printed
  double whitened_penalty = 0.0;  // beta * ||(I - lambda W) eps||^2, diagnostic
  double alpha = 0.0;
  double beta = 0.0;
};

/// Regularized objective decomposition: mean squared residual, the leaf-value
/// norm of the boosted model, and the spatial penalty term. Reported as a
/// diagnostic; it is not jointly optimized.
SemObjective evaluate_objective(const GbtModel& model, std::span<const double> residuals,
                                const SpatialWeights& w, double lambda, double alpha,
                                double beta);

}  // namespace gridcast
