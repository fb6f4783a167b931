#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridcast/grid.hpp"
#include "gridcast/layers.hpp"
#include "gridcast/weights.hpp"

namespace gridcast {

enum class ContextLayout { kBlocks, kRadial, kVoronoi };

/// Full parameterization of a synthetic city. Demand is a log-normal field
/// over a disk-smoothed latent driver, modulated by context-class
/// multipliers and hotspots; features are noisy transforms of the latent
/// driver plus context one-hots. A second smoothed field ("hidden") enters
/// demand but no feature, leaving spatially structured residuals for the
/// error model to pick up.
struct CityRecipe {
  int n_rows = 40;
  int n_cols = 40;
  double cell_size = GridIndex::kDefaultCellSize;
  std::uint64_t seed = 1;

  double smoothing_radius = 3.0;  // cells; controls the Moran range
  double mu = 8.0;                // log-demand location
  double sigma = 1.0;             // log-demand scale

  int n_context_classes = 3;
  ContextLayout layout = ContextLayout::kBlocks;
  int context_block_cells = 0;              // blocks layout; 0: min(rows,cols)/3, in [3, 13]
  std::vector<double> context_multipliers;  // defaults to {1.0, 2.5, 0.4, ...}

  double feature_noise = 0.3;
  int n_noise_features = 2;

  double hidden_amplitude = 0.3;
  double hidden_radius = 4.0;  // cells

  int hotspot_count = 3;
  double hotspot_amplitude = 1.5;
  double hotspot_radius = 2.0;  // cells
};

struct SyntheticCity {
  GridIndex grid{{0.0, 0.0}, GridIndex::kDefaultCellSize, 1, 1};
  DemandVector demand;
  FeatureMatrix features;
  std::vector<int> context_class;          // per cell
  std::vector<std::string> context_names;
  std::vector<int> context_columns;        // schema indices of the one-hots
  std::vector<double> latent;              // ground-truth driver field
  std::vector<double> hidden;              // unobserved residual field
};

SyntheticCity generate(const CityRecipe& recipe);

/// Independent seeded cities sharing one feature schema.
std::vector<SyntheticCity> multi_city(std::span<const CityRecipe> recipes);

namespace oracle {

/// Literal O(n^2) evaluation of global Moran's I from a dense copy of the
/// weights. Kept independent of the sparse implementation it checks.
double moran_dense(std::span<const double> y, const SpatialWeights& w);

/// Forward-simulates the residual process by the dense solve
/// (I - lambda*W) eps = u with u ~ N(0,1) drawn from noise_seed.
std::vector<double> sem_forward(double lambda, const SpatialWeights& w,
                                std::uint64_t noise_seed);

/// Dense solve of (I - lambda*W) z = rhs by Gaussian elimination with
/// partial pivoting; n <= 2500.
std::vector<double> solve_dense(double lambda, const SpatialWeights& w,
                                std::span<const double> rhs);

}  // namespace oracle

}  // namespace gridcast
