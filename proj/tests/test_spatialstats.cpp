#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gridcast/morans.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/synth.hpp"
#include "gridcast/weights.hpp"

using namespace gridcast;

namespace {

GridIndex grid(int rows, int cols) { return GridIndex({0.0, 0.0}, 1500.0, rows, cols); }

std::vector<double> random_field(Rng& rng, int n) {
  std::vector<double> y(n);
  for (double& v : y) v = rng.normal();
  return y;
}

}  // namespace

TEST_CASE("distance threshold weights reproduce rook and queen adjacency") {
  const GridIndex g = grid(3, 3);
  const SpatialWeights rook = SpatialWeights::distance_threshold(g, 1.0 * 1500.0);
  CHECK(rook.row_degree(0) == 2);  // corner
  CHECK(rook.row_degree(4) == 4);  // center
  CHECK(rook.total_weight() == doctest::Approx(24.0));

  const SpatialWeights queen = SpatialWeights::distance_threshold(g, 1.5 * 1500.0);
  CHECK(queen.row_degree(4) == 8);
  CHECK(queen.row_degree(0) == 3);

  // Symmetry of the binary weights.
  for (int i = 0; i < g.n_cells(); ++i)
    for (int e = queen.row_begin(i); e < queen.row_end(i); ++e) {
      const int j = queen.col()[e];
      bool found = false;
      for (int e2 = queen.row_begin(j); e2 < queen.row_end(j); ++e2)
        if (queen.col()[e2] == i) found = true;
      CHECK(found);
    }
}

TEST_CASE("knn weights have exactly k entries per row") {
  const GridIndex g = grid(10, 10);
  const SpatialWeights w = SpatialWeights::knn(g, 4);
  for (int i = 0; i < g.n_cells(); ++i) CHECK(w.row_degree(i) == 4);
  CHECK_THROWS(SpatialWeights::knn(g, 0));
  CHECK_THROWS(SpatialWeights::knn(g, 100));
}

TEST_CASE("knn symmetrized by union is symmetric with max weights") {
  const GridIndex g = grid(5, 7);
  const SpatialWeights knn = SpatialWeights::knn(g, 3);
  const SpatialWeights sym = knn.symmetrize_union();
  // Symmetry and weight-max semantics.
  for (int i = 0; i < g.n_cells(); ++i)
    for (int e = sym.row_begin(i); e < sym.row_end(i); ++e) {
      const int j = sym.col()[e];
      bool found = false;
      for (int e2 = sym.row_begin(j); e2 < sym.row_end(j); ++e2)
        if (sym.col()[e2] == i) {
          found = true;
          CHECK(sym.weights()[e2] == sym.weights()[e]);
        }
      CHECK(found);
    }
  // The union never drops an edge.
  CHECK(sym.nnz() >= knn.nnz());
}

TEST_CASE("row standardization sums rows to one") {
  const GridIndex g = grid(4, 4);
  const SpatialWeights w = SpatialWeights::distance_threshold(g, 1500.0).row_standardize();
  for (int i = 0; i < g.n_cells(); ++i) {
    double s = 0.0;
    for (int e = w.row_begin(i); e < w.row_end(i); ++e) s += w.weights()[e];
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("checkerboard yields exactly I = -1") {
  const GridIndex g = grid(2, 2);
  const SpatialWeights w = SpatialWeights::distance_threshold(g, 1500.0);
  const std::vector<double> y = {1.0, -1.0, -1.0, 1.0};
  const MoranResult r = global_morans_i(y, w);
  CHECK(r.i == doctest::Approx(-1.0).epsilon(1e-15));

  // Larger checkerboard, still exactly -1 under rook weights.
  const GridIndex g6 = grid(6, 6);
  const SpatialWeights w6 = SpatialWeights::distance_threshold(g6, 1500.0);
  std::vector<double> alt(36);
  for (int i = 0; i < 36; ++i) {
    const GridCell& c = g6.cell(i);
    alt[i] = ((c.row + c.col) % 2 == 0) ? 3.0 : -3.0;
  }
  CHECK(global_morans_i(alt, w6).i == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("two separated constant blocks give I = 1") {
  // Two 2x2 constant blocks with a one-column gap; rook-distance weights
  // never bridge the gap, so every neighbor equals its cell exactly.
  const GridIndex g = grid(2, 5);
  std::vector<int> cells;
  for (int i = 0; i < g.n_cells(); ++i)
    if (g.cell(i).col != 2) cells.push_back(i);
  const SpatialWeights w = SpatialWeights::distance_threshold_subset(g, cells, 1500.0);
  std::vector<double> y(cells.size());
  for (std::size_t a = 0; a < cells.size(); ++a)
    y[a] = g.cell(cells[a]).col <= 1 ? 4.0 : -4.0;
  CHECK(global_morans_i(y, w).i == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("global Moran matches the dense oracle on random fixtures") {
  Rng rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    const int rows = 4 + static_cast<int>(rng.uniform_int(3));
    const int cols = 4 + static_cast<int>(rng.uniform_int(3));
    const GridIndex g = grid(rows, cols);
    const double d = (1.0 + rng.uniform() * 2.0) * 1500.0;
    const SpatialWeights w = SpatialWeights::distance_threshold(g, d);
    const std::vector<double> y = random_field(rng, g.n_cells());
    const double got = global_morans_i(y, w).i;
    const double want = oracle::moran_dense(y, w);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("Moran errors: constant field and zero weights") {
  const GridIndex g = grid(3, 3);
  const SpatialWeights w = SpatialWeights::distance_threshold(g, 1500.0);
  const std::vector<double> constant(9, 2.0);
  CHECK_THROWS_WITH(global_morans_i(constant, w), doctest::Contains("zero variance"));
  CHECK_THROWS(build_weights(g, {WeightsKind::kDistanceThreshold, 10.0, 0}));  // 10 m: no edges
}

TEST_CASE("affine invariance and label-permutation symmetry") {
  Rng rng(321);
  const GridIndex g = grid(6, 6);
  const SpatialWeights w = SpatialWeights::distance_threshold(g, 2.0 * 1500.0);
  const std::vector<double> y = random_field(rng, 36);
  const double base = global_morans_i(y, w).i;

  std::vector<double> scaled(36);
  for (int i = 0; i < 36; ++i) scaled[i] = -3.7 * y[i] + 11.0;
  CHECK(global_morans_i(scaled, w).i == doctest::Approx(base).epsilon(1e-10));

  // Permute labels together with y and W.
  std::vector<int> perm(36);
  for (int i = 0; i < 36; ++i) perm[i] = i;
  Rng prng(99);
  prng.shuffle(perm);
  std::vector<double> yp(36);
  for (int i = 0; i < 36; ++i) yp[perm[i]] = y[i];
  // Rebuild W under the permutation via a dense pass.
  std::vector<int> row_ptr{0};
  std::vector<int> col;
  std::vector<double> wv;
  std::vector<std::vector<double>> dense(36, std::vector<double>(36, 0.0));
  for (int i = 0; i < 36; ++i)
    for (int e = w.row_begin(i); e < w.row_end(i); ++e)
      dense[perm[i]][perm[w.col()[e]]] = w.weights()[e];
  for (int i = 0; i < 36; ++i) {
    for (int j = 0; j < 36; ++j)
      if (dense[i][j] != 0.0) {
        col.push_back(j);
        wv.push_back(dense[i][j]);
      }
    row_ptr.push_back(static_cast<int>(col.size()));
  }
  const SpatialWeights wp(36, row_ptr, col, wv, WeightsKind::kDistanceThreshold, false);
  CHECK(global_morans_i(yp, wp).i == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("local Moran categories and additivity identity") {
  const GridIndex g = grid(3, 3);
  const SpatialWeights w = SpatialWeights::distance_threshold(g, 1500.0);

  // Cell above the mean surrounded by cells above the mean -> HH.
  std::vector<double> y = {9.0, 9.0, 9.0, 9.0, 10.0, 9.0, 1.0, 1.0, 1.0};
  LocalMoranMap m = local_morans_i(y, w);
  CHECK(m.category[4] == LocalCategory::kHH);

  // Isolated spike: high cell with low neighbors -> HL with negative I_i.
  std::vector<double> spike(9, 1.0);
  spike[4] = 50.0;
  m = local_morans_i(spike, w);
  CHECK(m.category[4] == LocalCategory::kHL);
  CHECK(m.i[4] < 0.0);
  CHECK(m.category[1] == LocalCategory::kLH);

  // Additivity: sum_i I_i equals the global numerator for binary symmetric W.
  Rng rng(654);
  const GridIndex g6 = grid(6, 6);
  const SpatialWeights w6 = SpatialWeights::distance_threshold(g6, 1500.0);
  const std::vector<double> yr = random_field(rng, 36);
  const LocalMoranMap lm = local_morans_i(yr, w6);
  double mean = 0.0;
  for (double v : yr) mean += v;
  mean /= 36.0;
  double numerator = 0.0;
  for (int i = 0; i < 36; ++i)
    for (int e = w6.row_begin(i); e < w6.row_end(i); ++e)
      numerator += w6.weights()[e] * (yr[i] - mean) * (yr[w6.col()[e]] - mean);
  double sum_local = 0.0;
  for (double v : lm.i) sum_local += v;
  CHECK(sum_local == doctest::Approx(numerator).epsilon(1e-10));
}

TEST_CASE("zero deviation or zero lag classifies as NONE") {
  const GridIndex g = grid(1, 3);
  const SpatialWeights w = SpatialWeights::distance_threshold(g, 1500.0);
  const std::vector<double> y = {2.0, 1.0, 0.0};  // mean 1: middle cell dev = 0
  const LocalMoranMap m = local_morans_i(y, w);
  CHECK(m.category[1] == LocalCategory::kNone);
}

TEST_CASE("profile: white noise stays in the null envelope, smoothing shows range") {
  CityRecipe white;
  white.n_rows = 20;
  white.n_cols = 20;
  white.seed = 11;
  white.smoothing_radius = 0.0;
  white.hidden_amplitude = 0.0;
  white.hotspot_count = 0;
  white.n_context_classes = 1;
  white.context_multipliers = {1.0};
  const SyntheticCity wc = generate(white);
  const std::vector<double> thresholds = {1.0, 2.0, 3.0};
  const MoranProfile wp = morans_profile(wc.demand.values, wc.grid, thresholds);
  const double envelope = 3.0 * std::sqrt(1.0 / wc.grid.n_cells());
  for (const MoranProfilePoint& p : wp.points) CHECK(std::fabs(p.i) <= envelope);
  CHECK(wp.range_cells == doctest::Approx(0.0));

  CityRecipe smooth = white;
  smooth.smoothing_radius = 3.0;
  smooth.seed = 12;
  const SyntheticCity sc = generate(smooth);
  const std::vector<double> t2 = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0};
  const MoranProfile sp = morans_profile(sc.demand.values, sc.grid, t2);
  CHECK(sp.range_cells >= 3.0);
  CHECK(sp.range_cells <= 9.0);
  // I decreases with distance on a smoothed field.
  CHECK(sp.points.front().i > sp.points.back().i);

  // Single-threshold profile has length 1.
  const std::vector<double> one = {2.0};
  CHECK(morans_profile(sc.demand.values, sc.grid, one).points.size() == 1);

  // Thresholds must increase.
  const std::vector<double> bad = {2.0, 1.0};
  CHECK_THROWS(morans_profile(sc.demand.values, sc.grid, bad));
}

TEST_CASE("optional permutation p-values flag a strong cluster") {
  CityRecipe r;
  r.n_rows = 12;
  r.n_cols = 12;
  r.seed = 5;
  r.smoothing_radius = 3.0;
  r.n_context_classes = 1;
  r.context_multipliers = {1.0};
  r.hidden_amplitude = 0.0;
  r.hotspot_count = 0;
  const SyntheticCity c = generate(r);
  const SpatialWeights w = SpatialWeights::distance_threshold(c.grid, 1500.0);
  const auto pvals = local_moran_permutation_pvalues(c.demand.values, w, 199, 42);
  CHECK(pvals.size() == c.demand.values.size());
  const double min_p = *std::min_element(pvals.begin(), pvals.end());
  CHECK(min_p < 0.05);  // a smoothed field has at least one significant cluster
  for (double p : pvals) {
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
  }
}
