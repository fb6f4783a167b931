#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gridcast/morans.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/synth.hpp"

using namespace gridcast;

namespace {

CityRecipe base_recipe(std::uint64_t seed) {
  CityRecipe r;
  r.n_rows = 20;
  r.n_cols = 20;
  r.seed = seed;
  r.smoothing_radius = 3.0;
  return r;
}

double sample_skewness(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  return m3 / std::pow(m2, 1.5);
}

}  // namespace

TEST_CASE("same seed twice gives a bit-identical city") {
  const CityRecipe r = base_recipe(404);
  const SyntheticCity a = generate(r);
  const SyntheticCity b = generate(r);
  CHECK(a.demand.values == b.demand.values);
  for (int i = 0; i < a.features.n_rows(); ++i)
    for (int c = 0; c < a.features.n_cols(); ++c)
      CHECK(a.features.at(i, c) == b.features.at(i, c));
  CHECK(a.context_class == b.context_class);
}

TEST_CASE("demand is strictly positive and features correlate with it") {
  const SyntheticCity c = generate(base_recipe(7));
  double min_y = 1e300;
  for (double y : c.demand.values) min_y = std::min(min_y, y);
  CHECK(min_y > 0.0);

  // pop_density should correlate positively with log demand.
  const int pop = c.features.schema().index_of("pop_density");
  REQUIRE(pop >= 0);
  const int n = c.features.n_rows();
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = std::log(c.features.at(i, pop));
    const double yv = std::log(c.demand.values[i]);
    sx += x;
    sy += yv;
    sxy += x * yv;
    sxx += x * x;
    syy += yv * yv;
  }
  const double corr = (n * sxy - sx * sy) /
                      std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  CHECK(corr > 0.4);
}

TEST_CASE("rho = 0 leaves demand inside the white-noise Moran envelope") {
  int inside = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CityRecipe r = base_recipe(seed);
    r.smoothing_radius = 0.0;
    r.hidden_amplitude = 0.0;
    r.hotspot_count = 0;
    r.n_context_classes = 1;
    r.context_multipliers = {1.0};
    r.sigma = 0.4;
    const SyntheticCity c = generate(r);
    const SpatialWeights w = SpatialWeights::distance_threshold(c.grid, 1500.0);
    const double i = global_morans_i(c.demand.values, w).i;
    if (std::fabs(i) <= 3.0 * std::sqrt(1.0 / c.grid.n_cells())) ++inside;
  }
  CHECK(inside >= 4);  // 3-sigma envelope, a rare excursion is tolerated
}

TEST_CASE("rho = 3 puts the estimated Moran range in [3, 9] cells (median of seeds)") {
  std::vector<double> ranges;
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    CityRecipe r = base_recipe(seed);
    r.n_rows = 30;
    r.n_cols = 30;
    r.hidden_amplitude = 0.0;
    r.hotspot_count = 0;
    r.n_context_classes = 1;
    r.context_multipliers = {1.0};
    const SyntheticCity c = generate(r);
    const std::vector<double> thresholds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    const MoranProfile p = morans_profile(c.demand.values, c.grid, thresholds);
    ranges.push_back(p.range_cells);
    // I decreases with distance on a smoothed field.
    CHECK(p.points.front().i > p.points.back().i);
  }
  std::sort(ranges.begin(), ranges.end());
  const double median = ranges[ranges.size() / 2];
  CHECK(median >= 3.0);
  CHECK(median <= 9.0);
}

TEST_CASE("heavy tail: positive demand skewness across seeds") {
  int positive = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    CityRecipe r = base_recipe(seed);
    r.sigma = 0.8;
    const SyntheticCity c = generate(r);
    if (sample_skewness(c.demand.values) > 0.0) ++positive;
  }
  CHECK(positive == 20);
}

TEST_CASE("positive autocorrelation at distance 1 for rho >= 2 across seeds") {
  int strong = 0;
  for (std::uint64_t seed = 200; seed < 220; ++seed) {
    CityRecipe r = base_recipe(seed);
    r.smoothing_radius = 2.0;
    const SyntheticCity c = generate(r);
    const SpatialWeights w = SpatialWeights::distance_threshold(c.grid, 1500.0);
    if (global_morans_i(c.demand.values, w).i > 0.3) ++strong;
  }
  CHECK(strong == 20);
}

TEST_CASE("multi_city: disjoint seeds share a schema; mismatches throw") {
  std::vector<CityRecipe> recipes;
  for (std::uint64_t s = 1; s <= 5; ++s) recipes.push_back(base_recipe(s));
  const auto cities = multi_city(recipes);
  REQUIRE(cities.size() == 5);
  int total = 0;
  for (const SyntheticCity& c : cities) total += c.grid.n_cells();
  CHECK(total == 5 * 400);
  CHECK(cities[0].demand.values != cities[1].demand.values);
  for (std::size_t i = 1; i < cities.size(); ++i)
    CHECK(cities[i].features.schema().columns.size() ==
          cities[0].features.schema().columns.size());

  std::vector<CityRecipe> bad = {base_recipe(1), base_recipe(2)};
  bad[1].n_context_classes = 2;
  CHECK_THROWS(multi_city(bad));
}

TEST_CASE("dense Moran oracle sanity: checkerboard and blocks") {
  const GridIndex g({0, 0}, 1500.0, 2, 2);
  const SpatialWeights w = SpatialWeights::distance_threshold(g, 1500.0);
  const std::vector<double> checker = {1.0, -1.0, -1.0, 1.0};
  CHECK(oracle::moran_dense(checker, w) == doctest::Approx(-1.0));
}

TEST_CASE("sem_forward: lambda 0 returns the raw noise") {
  const GridIndex g({0, 0}, 1500.0, 5, 5);
  const SpatialWeights w =
      SpatialWeights::distance_threshold(g, 1500.0).row_standardize();
  const std::vector<double> eps = oracle::sem_forward(0.0, w, 99);
  Rng rng(99);
  for (double v : eps) CHECK(v == doctest::Approx(rng.normal()).epsilon(1e-12));
}

TEST_CASE("sem_forward matches a fixed-point iteration oracle") {
  const GridIndex g({0, 0}, 1500.0, 6, 6);
  const SpatialWeights w =
      SpatialWeights::distance_threshold(g, 1500.0).row_standardize();
  for (double lambda : {0.5, -0.4}) {
    const std::vector<double> eps = oracle::sem_forward(lambda, w, 31);
    // Independent fixed point: eps = lambda W eps + u.
    Rng rng(31);
    std::vector<double> u(static_cast<std::size_t>(w.n()));
    for (double& v : u) v = rng.normal();
    std::vector<double> z = u;
    for (int it = 0; it < 4000; ++it) {
      const std::vector<double> lag = w.lag(z);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = u[i] + lambda * lag[i];
    }
    for (std::size_t i = 0; i < z.size(); ++i)
      CHECK(eps[i] == doctest::Approx(z[i]).epsilon(1e-8));
  }
}
