#include "gridcast/morans.hpp"

#include <cmath>
#include <stdexcept>

#include "gridcast/kernels.hpp"
#include "gridcast/rng.hpp"

namespace gridcast {

std::string to_string(LocalCategory c) {
  switch (c) {
    case LocalCategory::kHH: return "HH";
    case LocalCategory::kLL: return "LL";
    case LocalCategory::kHL: return "HL";
    case LocalCategory::kLH: return "LH";
    case LocalCategory::kNone: return "NONE";
  }
  return "NONE";
}

namespace {

struct Centered {
  std::vector<double> z;     // y - mean
  double mean;
  double variance_term;      // sum(z^2)
};

Centered center(std::span<const double> y) {
  Centered c;
  c.mean = kern::sum(y) / static_cast<double>(y.size());
  c.z.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) c.z[i] = y[i] - c.mean;
  c.variance_term = kern::sse_about(y, c.mean);
  return c;
}

}  // namespace

MoranResult global_morans_i(std::span<const double> y, const SpatialWeights& w) {
  const int n = static_cast<int>(y.size());
  if (n != w.n()) throw std::invalid_argument("global_morans_i: size mismatch");
  const double total_w = w.total_weight();
  if (total_w <= 0.0) throw std::invalid_argument("global_morans_i: W must be positive");

  const Centered c = center(y);
  if (c.variance_term <= 0.0)
    throw std::runtime_error("Moran undefined: zero variance");

  // Cross-product over the sparse entries, exactly as written in the
  // double-sum formulation.
  double num = 0.0;
  const auto& col = w.col();
  const auto& wv = w.weights();
  for (int i = 0; i < n; ++i)
    for (int e = w.row_begin(i); e < w.row_end(i); ++e)
      num += wv[e] * c.z[i] * c.z[col[e]];

  MoranResult r;
  r.n_used = n;
  r.mean = c.mean;
  r.variance_term = c.variance_term;
  r.i = (static_cast<double>(n) / total_w) * (num / c.variance_term);
  return r;
}

LocalMoranMap local_morans_i(std::span<const double> y, const SpatialWeights& w) {
  const int n = static_cast<int>(y.size());
  if (n != w.n()) throw std::invalid_argument("local_morans_i: size mismatch");
  const Centered c = center(y);
  if (c.variance_term <= 0.0)
    throw std::runtime_error("Moran undefined: zero variance");

  LocalMoranMap out;
  out.i.resize(static_cast<std::size_t>(n));
  out.category.resize(static_cast<std::size_t>(n));
  const std::vector<double> lag = w.lag(c.z);
  for (int i = 0; i < n; ++i) {
    out.i[i] = c.z[i] * lag[i];
    if (w.row_degree(i) == 0 || c.z[i] == 0.0 || lag[i] == 0.0) {
      out.category[i] = LocalCategory::kNone;
    } else if (c.z[i] > 0.0) {
      out.category[i] = lag[i] > 0.0 ? LocalCategory::kHH : LocalCategory::kHL;
    } else {
      out.category[i] = lag[i] > 0.0 ? LocalCategory::kLH : LocalCategory::kLL;
    }
  }
  return out;
}

MoranProfile morans_profile(std::span<const double> y, const GridIndex& grid,
                            std::span<const double> thresholds_cells, double range_cutoff) {
  for (std::size_t i = 1; i < thresholds_cells.size(); ++i)
    if (thresholds_cells[i] <= thresholds_cells[i - 1])
      throw std::invalid_argument("morans_profile: thresholds must be increasing");

  MoranProfile out;
  for (double t : thresholds_cells) {
    const SpatialWeights w =
        SpatialWeights::distance_threshold(grid, t * grid.cell_size());
    if (w.nnz() == 0) throw std::runtime_error("morans_profile: no neighbors at this scale");
    const MoranResult r = global_morans_i(y, w);
    out.points.push_back({t, r.i});
    if (r.i >= range_cutoff) out.range_cells = std::max(out.range_cells, t);
  }
  return out;
}

std::vector<double> local_moran_permutation_pvalues(std::span<const double> y,
                                                    const SpatialWeights& w,
                                                    int n_draws, std::uint64_t seed) {
  const int n = static_cast<int>(y.size());
  const Centered c = center(y);
  const LocalMoranMap observed = local_morans_i(y, w);

  // Conditional permutation: hold cell i fixed, permute the remaining
  // values among its neighbor slots.
  std::vector<double> pvals(static_cast<std::size_t>(n), 1.0);
  std::vector<double> others;
  others.reserve(static_cast<std::size_t>(n) - 1);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int deg = w.row_degree(i);
    if (deg == 0) continue;
    others.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) others.push_back(c.z[j]);
    int at_least = 0;
    for (int d = 0; d < n_draws; ++d) {
      // Partial Fisher-Yates: draw `deg` values without replacement.
      double lag = 0.0;
      for (int m = 0; m < deg; ++m) {
        const std::size_t pick =
            m + static_cast<std::size_t>(rng.uniform_int(others.size() - m));
        std::swap(others[m], others[pick]);
        lag += others[m];
      }
      const double ii = c.z[i] * lag;  // binary weights assumed for the draw
      if (std::fabs(ii) >= std::fabs(observed.i[i])) ++at_least;
    }
    pvals[i] = (at_least + 1.0) / (n_draws + 1.0);
  }
  return pvals;
}

}  // namespace gridcast
