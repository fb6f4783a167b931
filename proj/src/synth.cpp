#include "gridcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gridcast/kernels.hpp"
#include "gridcast/rng.hpp"

namespace gridcast {

namespace {

// White noise convolved with a disk kernel of the given radius (cells),
// then standardized to zero mean / unit variance.
std::vector<double> smoothed_field(int n_rows, int n_cols, double radius,
                                   std::uint64_t seed) {
  const int n = n_rows * n_cols;
  Rng rng(seed);
  std::vector<double> noise(static_cast<std::size_t>(n));
  for (double& v : noise) v = rng.normal();
  if (radius <= 0.0) {
    // Already unit white noise; standardize the sample anyway.
    const double mean = kern::sum(noise) / n;
    const double sd = std::sqrt(kern::sse_about(noise, mean) / n);
    for (double& v : noise) v = (v - mean) / (sd > 0 ? sd : 1.0);
    return noise;
  }

  const int reach = static_cast<int>(std::floor(radius));
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int r = 0; r < n_rows; ++r) {
    for (int c = 0; c < n_cols; ++c) {
      double acc = 0.0;
      int count = 0;
      for (int dr = -reach; dr <= reach; ++dr) {
        const int rr = r + dr;
        if (rr < 0 || rr >= n_rows) continue;
        for (int dc = -reach; dc <= reach; ++dc) {
          const int cc = c + dc;
          if (cc < 0 || cc >= n_cols) continue;
          if (dr * dr + dc * dc > radius * radius) continue;
          acc += noise[static_cast<std::size_t>(rr) * n_cols + cc];
          ++count;
        }
      }
      out[static_cast<std::size_t>(r) * n_cols + c] = acc / count;
    }
  }
  const double mean = kern::sum(out) / n;
  const double sd = std::sqrt(kern::sse_about(out, mean) / n);
  for (double& v : out) v = (v - mean) / (sd > 0 ? sd : 1.0);
  return out;
}

std::vector<int> context_labels(const CityRecipe& r, const GridIndex& grid,
                                std::uint64_t seed) {
  const int n = grid.n_cells();
  std::vector<int> label(static_cast<std::size_t>(n), 0);
  Rng rng(seed);
  switch (r.layout) {
    case ContextLayout::kBlocks: {
      int bc = r.context_block_cells;
      if (bc <= 0) bc = std::clamp(std::min(grid.n_rows(), grid.n_cols()) / 3, 3, 13);
      const int blocks_r = (grid.n_rows() + bc - 1) / bc;
      const int blocks_c = (grid.n_cols() + bc - 1) / bc;
      std::vector<int> block_class(static_cast<std::size_t>(blocks_r) * blocks_c);
      for (int b = 0; b < blocks_r * blocks_c; ++b)
        block_class[b] = static_cast<int>(rng.uniform_int(r.n_context_classes));
      // Guarantee every class appears at least once when possible.
      for (int k = 0; k < r.n_context_classes && k < blocks_r * blocks_c; ++k)
        block_class[k] = k;
      rng.shuffle(block_class);
      for (int i = 0; i < n; ++i) {
        const GridCell& cell = grid.cell(i);
        const int b = (cell.row / bc) * blocks_c + (cell.col / bc);
        label[i] = block_class[b];
      }
      break;
    }
    case ContextLayout::kRadial: {
      const double cx = grid.origin().x + 0.5 * grid.n_cols() * grid.cell_size();
      const double cy = grid.origin().y + 0.5 * grid.n_rows() * grid.cell_size();
      const double max_r = std::hypot(0.5 * grid.n_cols(), 0.5 * grid.n_rows());
      for (int i = 0; i < n; ++i) {
        const Point p = grid.centroid(i);
        const double d = std::hypot(p.x - cx, p.y - cy) / grid.cell_size();
        int k = static_cast<int>(d / max_r * r.n_context_classes);
        label[i] = std::min(k, r.n_context_classes - 1);
      }
      break;
    }
    case ContextLayout::kVoronoi: {
      const int sites = std::max(r.n_context_classes * 3, 6);
      std::vector<double> sx(sites), sy(sites);
      std::vector<int> sc(sites);
      for (int s = 0; s < sites; ++s) {
        sx[s] = rng.uniform(0.0, grid.n_cols() * grid.cell_size());
        sy[s] = rng.uniform(0.0, grid.n_rows() * grid.cell_size());
        sc[s] = s % r.n_context_classes;
      }
      for (int i = 0; i < n; ++i) {
        const Point p = grid.centroid(i);
        double best = 1e300;
        int best_s = 0;
        for (int s = 0; s < sites; ++s) {
          const double d2 = (p.x - sx[s]) * (p.x - sx[s]) + (p.y - sy[s]) * (p.y - sy[s]);
          if (d2 < best) {
            best = d2;
            best_s = s;
          }
        }
        label[i] = sc[best_s];
      }
      break;
    }
  }
  return label;
}

const char* kContextNames[] = {"residential", "commercial", "park", "mixed4", "mixed5",
                               "mixed6", "mixed7", "mixed8"};

}  // namespace

SyntheticCity generate(const CityRecipe& recipe) {
  if (recipe.sigma <= 0.0) throw std::invalid_argument("generate: sigma must be positive");
  if (recipe.smoothing_radius < 0.0)
    throw std::invalid_argument("generate: smoothing radius must be nonnegative");
  if (recipe.n_context_classes < 1 ||
      recipe.n_context_classes > static_cast<int>(std::size(kContextNames)))
    throw std::invalid_argument("generate: unsupported context class count");

  SyntheticCity city;
  city.grid = GridIndex({0.0, 0.0}, recipe.cell_size, recipe.n_rows, recipe.n_cols);
  const int n = city.grid.n_cells();

  city.latent = smoothed_field(recipe.n_rows, recipe.n_cols, recipe.smoothing_radius,
                               derive_seed(recipe.seed, 1));
  city.hidden = smoothed_field(recipe.n_rows, recipe.n_cols, recipe.hidden_radius,
                               derive_seed(recipe.seed, 2));
  city.context_class = context_labels(recipe, city.grid, derive_seed(recipe.seed, 3));

  std::vector<double> mult = recipe.context_multipliers;
  if (mult.empty()) mult = {1.0, 2.5, 0.4, 1.6, 0.7, 1.2, 0.9, 1.9};
  if (static_cast<int>(mult.size()) < recipe.n_context_classes)
    throw std::invalid_argument("generate: need one multiplier per context class");

  // Hotspot multipliers with a linear disk falloff.
  std::vector<double> hot(static_cast<std::size_t>(n), 1.0);
  {
    Rng rng(derive_seed(recipe.seed, 4));
    for (int h = 0; h < recipe.hotspot_count; ++h) {
      const int at = static_cast<int>(rng.uniform_int(n));
      const GridCell& hc = city.grid.cell(at);
      const int reach = static_cast<int>(std::ceil(recipe.hotspot_radius));
      for (int dr = -reach; dr <= reach; ++dr) {
        for (int dc = -reach; dc <= reach; ++dc) {
          const int rr = hc.row + dr;
          const int cc = hc.col + dc;
          if (rr < 0 || rr >= recipe.n_rows || cc < 0 || cc >= recipe.n_cols) continue;
          const double d = std::sqrt(static_cast<double>(dr * dr + dc * dc));
          if (d > recipe.hotspot_radius) continue;
          const double falloff = 1.0 - d / (recipe.hotspot_radius + 1e-9);
          hot[static_cast<std::size_t>(rr) * recipe.n_cols + cc] *=
              1.0 + recipe.hotspot_amplitude * falloff;
        }
      }
    }
  }

  city.demand.values.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double log_y = recipe.mu + recipe.sigma * city.latent[i] +
                         recipe.hidden_amplitude * city.hidden[i];
    city.demand.values[i] = std::exp(log_y) * mult[city.context_class[i]] * hot[i];
  }

  // Feature layers: noisy transforms of the latent driver. The hidden field
  // deliberately appears in none of them.
  Rng fr(derive_seed(recipe.seed, 5));
  const double fn = recipe.feature_noise;
  std::vector<MappedColumn> cols;

  MappedColumn pop{"pop_density", FeatureKind::kIntensive, {}};
  MappedColumn poi{"poi_count", FeatureKind::kExtensive, {}};
  MappedColumn road{"road_km", FeatureKind::kExtensive, {}};
  MappedColumn infra{"infra_sites", FeatureKind::kExtensive, {}};
  pop.values.resize(n);
  poi.values.resize(n);
  road.values.resize(n);
  infra.values.resize(n);
  for (int i = 0; i < n; ++i) {
    const double z = city.latent[i];
    pop.values[i] = 800.0 * std::exp(0.7 * z + fn * fr.normal());
    poi.values[i] = std::max(0.0, 12.0 + 9.0 * z + 6.0 * fn * fr.normal());
    road.values[i] = std::max(0.0, 2.5 + 0.9 * z + fn * fr.normal());
    infra.values[i] = (z + 0.5 * fn * fr.normal() > 0.4) ? 1.0 : 0.0;
  }
  cols.push_back(std::move(pop));
  cols.push_back(std::move(poi));
  cols.push_back(std::move(road));
  cols.push_back(std::move(infra));

  for (int k = 0; k < recipe.n_context_classes; ++k) {
    MappedColumn oh;
    oh.name = std::string("landuse=") + kContextNames[k];
    oh.kind = FeatureKind::kCategorical;
    oh.values.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
      if (city.context_class[i] == k) oh.values[i] = 1.0;
    cols.push_back(std::move(oh));
  }

  for (int k = 0; k < recipe.n_noise_features; ++k) {
    MappedColumn nz;
    nz.name = "noise_" + std::to_string(k);
    nz.kind = FeatureKind::kIntensive;
    nz.values.resize(static_cast<std::size_t>(n));
    for (double& v : nz.values) v = fr.normal();
    cols.push_back(std::move(nz));
  }

  city.features = assemble_features(city.grid, cols);
  for (int k = 0; k < recipe.n_context_classes; ++k) {
    city.context_names.push_back(kContextNames[k]);
    city.context_columns.push_back(
        city.features.schema().index_of(std::string("landuse=") + kContextNames[k]));
  }
  return city;
}

std::vector<SyntheticCity> multi_city(std::span<const CityRecipe> recipes) {
  std::vector<SyntheticCity> cities;
  cities.reserve(recipes.size());
  for (const CityRecipe& r : recipes) cities.push_back(generate(r));
  for (std::size_t i = 1; i < cities.size(); ++i) {
    if (cities[i].features.n_cols() != cities[0].features.n_cols())
      throw std::runtime_error("multi_city: feature schema mismatch across recipes");
    for (int c = 0; c < cities[0].features.n_cols(); ++c)
      if (cities[i].features.schema().columns[c].name !=
          cities[0].features.schema().columns[c].name)
        throw std::runtime_error("multi_city: feature schema mismatch across recipes");
  }
  return cities;
}

namespace oracle {

double moran_dense(std::span<const double> y, const SpatialWeights& w) {
  const int n = static_cast<int>(y.size());
  if (n > 2500) throw std::invalid_argument("oracle::moran_dense: n too large");

  // Dense copy of the weights.
  std::vector<double> dense(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int e = w.row_begin(i); e < w.row_end(i); ++e)
      dense[static_cast<std::size_t>(i) * n + w.col()[e]] = w.weights()[e];

  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += y[i];
  mean /= n;

  double denom = 0.0;
  for (int i = 0; i < n; ++i) denom += (y[i] - mean) * (y[i] - mean);
  if (denom <= 0.0) throw std::runtime_error("oracle::moran_dense: zero variance");

  double total_w = 0.0;
  double num = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double wij = dense[static_cast<std::size_t>(i) * n + j];
      total_w += wij;
      num += wij * (y[i] - mean) * (y[j] - mean);
    }
  }
  return (n / total_w) * (num / denom);
}

std::vector<double> solve_dense(double lambda, const SpatialWeights& w,
                                std::span<const double> rhs) {
  const int n = w.n();
  if (n > 2500) throw std::invalid_argument("oracle::solve_dense: n too large");
  if (static_cast<int>(rhs.size()) != n)
    throw std::invalid_argument("oracle::solve_dense: rhs size mismatch");

  // A = I - lambda*W, dense.
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i) * n + i] = 1.0;
  for (int i = 0; i < n; ++i)
    for (int e = w.row_begin(i); e < w.row_end(i); ++e)
      a[static_cast<std::size_t>(i) * n + w.col()[e]] -= lambda * w.weights()[e];

  std::vector<double> x(rhs.begin(), rhs.end());
  // Gaussian elimination with partial pivoting.
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::fabs(a[static_cast<std::size_t>(k) * n + k]);
    for (int i = k + 1; i < n; ++i) {
      const double v = std::fabs(a[static_cast<std::size_t>(i) * n + k]);
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best < 1e-14) throw std::runtime_error("oracle::solve_dense: singular system");
    if (piv != k) {
      for (int j = k; j < n; ++j)
        std::swap(a[static_cast<std::size_t>(k) * n + j], a[static_cast<std::size_t>(piv) * n + j]);
      std::swap(x[k], x[piv]);
    }
    const double akk = a[static_cast<std::size_t>(k) * n + k];
    for (int i = k + 1; i < n; ++i) {
      const double f = a[static_cast<std::size_t>(i) * n + k] / akk;
      if (f == 0.0) continue;
      for (int j = k; j < n; ++j)
        a[static_cast<std::size_t>(i) * n + j] -= f * a[static_cast<std::size_t>(k) * n + j];
      x[i] -= f * x[k];
    }
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int j = i + 1; j < n; ++j) s -= a[static_cast<std::size_t>(i) * n + j] * x[j];
    x[i] = s / a[static_cast<std::size_t>(i) * n + i];
  }
  return x;
}

std::vector<double> sem_forward(double lambda, const SpatialWeights& w,
                                std::uint64_t noise_seed) {
  if (std::fabs(lambda) >= 1.0)
    throw std::invalid_argument("oracle::sem_forward: |lambda| must be < 1");
  Rng rng(noise_seed);
  std::vector<double> u(static_cast<std::size_t>(w.n()));
  for (double& v : u) v = rng.normal();
  return solve_dense(lambda, w, u);
}

}  // namespace oracle

}  // namespace gridcast
