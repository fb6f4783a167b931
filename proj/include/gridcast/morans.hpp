#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridcast/grid.hpp"
#include "gridcast/weights.hpp"

namespace gridcast {

struct MoranResult {
  double i = 0.0;
  int n_used = 0;
  double mean = 0.0;
  double variance_term = 0.0;  // sum((y_i - mean)^2)
};

enum class LocalCategory { kHH, kLL, kHL, kLH, kNone };

std::string to_string(LocalCategory c);

struct LocalMoranMap {
  std::vector<double> i;               // per-cell local statistic
  std::vector<LocalCategory> category;
};

struct MoranProfilePoint {
  double distance_cells = 0.0;
  double i = 0.0;
};

struct MoranProfile {
  std::vector<MoranProfilePoint> points;
  double range_cells = 0.0;  // largest distance with I >= range_cutoff
};

/// Global Moran's I over the sparse weights; throws on constant y.
MoranResult global_morans_i(std::span<const double> y, const SpatialWeights& w);

/// Per-cell local Moran's I with HH/LL/HL/LH quadrant categories. Cells
/// without neighbors, or with an exactly zero deviation or lag, are kNone.
LocalMoranMap local_morans_i(std::span<const double> y, const SpatialWeights& w);

/// Global I at a list of increasing distance thresholds (in cell units).
MoranProfile morans_profile(std::span<const double> y, const GridIndex& grid,
                            std::span<const double> thresholds_cells,
                            double range_cutoff = 0.2);

/// Optional conditional-permutation pseudo p-values for the local statistics.
/// Not part of the pipeline; exposed behind this call only.
std::vector<double> local_moran_permutation_pvalues(std::span<const double> y,
                                                    const SpatialWeights& w,
                                                    int n_draws, std::uint64_t seed);

}  // namespace gridcast
