#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "gridcast/gbt.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/synth.hpp"

using namespace gridcast;

namespace {

FeatureMatrix matrix_from(const GridIndex& g, std::vector<std::vector<double>> cols) {
  std::vector<MappedColumn> mapped;
  for (std::size_t c = 0; c < cols.size(); ++c)
    mapped.push_back({"f" + std::to_string(c), FeatureKind::kIntensive, std::move(cols[c])});
  return assemble_features(g, mapped);
}

std::vector<int> iota_ids(int n) {
  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

}  // namespace

TEST_CASE("zero trees predict the training mean everywhere") {
  const GridIndex g({0, 0}, 1.0, 4, 4);
  Rng rng(1);
  std::vector<double> x(16), y(16);
  for (int i = 0; i < 16; ++i) {
    x[i] = rng.uniform();
    y[i] = rng.uniform(0.0, 10.0);
  }
  const FeatureMatrix fm = matrix_from(g, {x});
  GbtHyperParams hp;
  hp.n_trees = 0;
  hp.min_leaf = 2;
  const GbtModel m = gbt_train(fm, y, iota_ids(16), hp);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= 16.0;
  for (int i = 0; i < 16; ++i)
    CHECK(m.predict_row(fm.row(i)) == doctest::Approx(mean).epsilon(1e-12));
  CHECK(m.trees.empty());
}

TEST_CASE("a depth-1 model drives training MAE to ~0 on a step function") {
  const GridIndex g({0, 0}, 1.0, 10, 10);
  std::vector<double> x(100), y(100);
  for (int i = 0; i < 100; ++i) {
    x[i] = i / 100.0;
    y[i] = x[i] < 0.5 ? 2.0 : 7.0;
  }
  const FeatureMatrix fm = matrix_from(g, {x});
  GbtHyperParams hp;
  hp.n_trees = 200;
  hp.max_depth = 1;
  hp.learning_rate = 0.3;
  hp.min_leaf = 2;
  hp.l2_leaf = 0.0;
  hp.subsample = 1.0;
  const GbtModel m = gbt_train(fm, y, iota_ids(100), hp);
  double mae = 0.0;
  for (int i = 0; i < 100; ++i) mae += std::fabs(y[i] - m.predict_row(fm.row(i)));
  mae /= 100.0;
  CHECK(mae < 1e-3);
}

TEST_CASE("training is deterministic under a fixed seed even with subsampling") {
  CityRecipe r;
  r.n_rows = 12;
  r.n_cols = 12;
  r.seed = 5;
  const SyntheticCity city = generate(r);
  GbtHyperParams hp;
  hp.n_trees = 40;
  hp.subsample = 0.7;
  hp.seed = 99;
  const auto ids = iota_ids(city.grid.n_cells());
  const GbtModel a = gbt_train(city.features, city.demand.values, ids, hp);
  const GbtModel b = gbt_train(city.features, city.demand.values, ids, hp);
  REQUIRE(a.trees.size() == b.trees.size());
  for (int i = 0; i < city.grid.n_cells(); ++i)
    CHECK(a.predict_row(city.features.row(i)) == b.predict_row(city.features.row(i)));

  GbtHyperParams hp2 = hp;
  hp2.seed = 100;
  const GbtModel c = gbt_train(city.features, city.demand.values, ids, hp2);
  bool any_diff = false;
  for (int i = 0; i < city.grid.n_cells(); ++i)
    if (a.predict_row(city.features.row(i)) != c.predict_row(city.features.row(i)))
      any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("an overfit model memorizes the training targets") {
  const GridIndex g({0, 0}, 1.0, 8, 8);
  Rng rng(3);
  std::vector<double> x1(64), x2(64), y(64);
  for (int i = 0; i < 64; ++i) {
    x1[i] = rng.uniform();
    x2[i] = rng.uniform();
    y[i] = rng.uniform(0.0, 5.0);
  }
  const FeatureMatrix fm = matrix_from(g, {x1, x2});
  GbtHyperParams hp;
  hp.n_trees = 400;
  hp.max_depth = 8;
  hp.min_leaf = 1;
  hp.l2_leaf = 0.0;
  hp.subsample = 1.0;
  hp.learning_rate = 0.5;
  const GbtModel m = gbt_train(fm, y, iota_ids(64), hp);
  for (int i = 0; i < 64; ++i)
    CHECK(m.predict_row(fm.row(i)) == doctest::Approx(y[i]).epsilon(1e-6));
}

TEST_CASE("predict: empty mask, constant features, schema mismatch") {
  const GridIndex g({0, 0}, 1.0, 4, 4);
  std::vector<double> x(16, 3.0), y(16);
  for (int i = 0; i < 16; ++i) y[i] = i;
  const FeatureMatrix fm = matrix_from(g, {x});
  GbtHyperParams hp;
  hp.n_trees = 10;
  hp.min_leaf = 2;
  const GbtModel m = gbt_train(fm, y, iota_ids(16), hp);

  CHECK(m.predict(fm, {}).empty());

  // Constant feature: every prediction identical.
  const std::vector<double> preds = m.predict(fm, iota_ids(16));
  for (double p : preds) CHECK(p == doctest::Approx(preds[0]));

  const FeatureMatrix fm2 = matrix_from(g, {x, x});
  CHECK_THROWS(m.predict(fm2, iota_ids(16)));
}

TEST_CASE("stagewise descent: training SSE never increases per round") {
  CityRecipe r;
  r.n_rows = 10;
  r.n_cols = 10;
  r.seed = 77;
  const SyntheticCity city = generate(r);
  const auto ids = iota_ids(100);
  GbtHyperParams hp;
  hp.n_trees = 60;
  hp.subsample = 1.0;  // descent guarantee holds without row sampling
  const GbtModel m = gbt_train(city.features, city.demand.values, ids, hp);

  std::vector<double> pred(100, m.base_score);
  double prev_sse = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double d = city.demand.values[i] - pred[i];
    prev_sse += d * d;
  }
  for (const RegressionTree& t : m.trees) {
    for (int i = 0; i < 100; ++i)
      pred[i] += hp.learning_rate * t.predict_row(city.features.row(i));
    double sse = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double d = city.demand.values[i] - pred[i];
      sse += d * d;
    }
    CHECK(sse <= prev_sse + 1e-9 * prev_sse);
    prev_sse = sse;
  }
}

TEST_CASE("prediction is invariant under consistent feature-column permutation") {
  CityRecipe r;
  r.n_rows = 10;
  r.n_cols = 10;
  r.seed = 13;
  const SyntheticCity city = generate(r);
  const int m = city.features.n_cols();
  const int n = city.grid.n_cells();

  std::vector<int> perm(m);
  for (int i = 0; i < m; ++i) perm[i] = i;
  Rng rng(4);
  rng.shuffle(perm);

  std::vector<MappedColumn> permuted;
  for (int c = 0; c < m; ++c) {
    MappedColumn col;
    col.name = city.features.schema().columns[perm[c]].name;
    col.values = city.features.column(perm[c]);
    permuted.push_back(std::move(col));
  }
  const FeatureMatrix fmp = assemble_features(city.grid, permuted);

  GbtHyperParams hp;
  hp.n_trees = 50;
  hp.subsample = 1.0;
  const auto ids = iota_ids(n);
  const GbtModel m1 = gbt_train(city.features, city.demand.values, ids, hp);
  const GbtModel m2 = gbt_train(fmp, city.demand.values, ids, hp);
  for (int i = 0; i < n; ++i)
    CHECK(m1.predict_row(city.features.row(i)) ==
          doctest::Approx(m2.predict_row(fmp.row(i))).epsilon(1e-9));
}

TEST_CASE("model JSON round trip preserves predictions") {
  CityRecipe r;
  r.n_rows = 8;
  r.n_cols = 8;
  r.seed = 55;
  const SyntheticCity city = generate(r);
  GbtHyperParams hp;
  hp.n_trees = 25;
  const auto ids = iota_ids(64);
  const GbtModel m = gbt_train(city.features, city.demand.values, ids, hp);
  const GbtModel back = GbtModel::from_json(m.to_json());
  for (int i = 0; i < 64; ++i)
    CHECK(m.predict_row(city.features.row(i)) == back.predict_row(city.features.row(i)));
  CHECK(m.sum_squared_leaf_values() == doctest::Approx(back.sum_squared_leaf_values()));
}

TEST_CASE("evaluate: exact fits, mean predictor, hand-computed MAE, oracle") {
  const std::vector<double> y = {1.0, 2.0, 3.0};
  const std::vector<int> ids = {0, 1, 2};

  EvalReport r = evaluate(y, std::vector<double>{1.0, 2.0, 3.0}, ids, {});
  CHECK(r.mae == doctest::Approx(0.0));
  CHECK(*r.r2 == doctest::Approx(1.0));

  const double mean = 2.0;
  r = evaluate(y, std::vector<double>{mean, mean, mean}, ids, {});
  CHECK(*r.r2 == doctest::Approx(0.0));

  r = evaluate(y, std::vector<double>{1.0, 1.0, 4.0}, ids, {});
  CHECK(r.mae == doctest::Approx(2.0 / 3.0));

  // Zero-variance held-out target: r2 undefined.
  const std::vector<double> yc = {5.0, 5.0};
  r = evaluate(yc, std::vector<double>{5.0, 6.0}, std::vector<int>{0, 1}, {});
  CHECK_FALSE(r.r2.has_value());

  // Single-pass oracle agreement on random vectors.
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> yt(50), yp(50);
    for (int i = 0; i < 50; ++i) {
      yt[i] = rng.uniform(-10, 10);
      yp[i] = rng.uniform(-10, 10);
    }
    const EvalReport rep = evaluate(yt, yp, iota_ids(50), {});
    double mae = 0.0, sse = 0.0, sst = 0.0, mu = 0.0;
    for (double v : yt) mu += v;
    mu /= 50.0;
    for (int i = 0; i < 50; ++i) {
      mae += std::fabs(yt[i] - yp[i]);
      sse += (yt[i] - yp[i]) * (yt[i] - yp[i]);
      sst += (yt[i] - mu) * (yt[i] - mu);
    }
    mae /= 50.0;
    CHECK(rep.mae == doctest::Approx(mae).epsilon(1e-10));
    CHECK(*rep.r2 == doctest::Approx(1.0 - sse / sst).epsilon(1e-10));
  }
}

TEST_CASE("cross_validate: exchangeable halves learn the mapping") {
  const GridIndex g({0, 0}, 1.0, 10, 10);
  std::vector<double> x(100), y(100);
  std::vector<int> fold(100);
  for (int i = 0; i < 100; ++i) {
    x[i] = (i % 50) / 50.0;
    y[i] = 3.0 * x[i] + 1.0;
    fold[i] = i < 50 ? 0 : 1;
  }
  const FeatureMatrix fm = matrix_from(g, {x});
  FoldAssignment folds;
  folds.n_folds = 2;
  folds.fold = fold;
  folds.stage1.assign(100, -1);
  folds.stage2.assign(100, -1);
  folds.context_class.assign(100, -1);

  GbtHyperParams hp;
  hp.n_trees = 120;
  hp.subsample = 1.0;
  hp.min_leaf = 2;
  const CvResult cv = cross_validate(fm, y, folds, hp);
  double train_mae = 0.0;
  for (double e : cv.train_residuals_per_fold[0]) train_mae += std::fabs(e);
  train_mae /= cv.train_residuals_per_fold[0].size();
  // Identical distributions and a learnable mapping: val tracks train.
  CHECK(cv.report.mae < 0.05);
  CHECK(std::fabs(cv.report.mae - train_mae) < 0.05);
}

TEST_CASE("leakage signature: random-split val MAE below two-stage val MAE") {
  CityRecipe r;
  r.n_rows = 24;
  r.n_cols = 24;
  r.seed = 1234;
  r.smoothing_radius = 3.0;
  r.hidden_amplitude = 0.5;
  const SyntheticCity city = generate(r);

  const SpatialClustering stage1 = kmeans_centroids(city.grid, 8, 21);
  RefineParams rp;
  rp.context_columns = city.context_columns;
  const SubClustering sub = refine_context(stage1, city.features, city.context_class, rp);
  const FoldAssignment two = build_folds(stage1, sub, city.grid, {});
  const FoldAssignment rnd = random_split(city.grid, two.n_folds, 22);

  GbtHyperParams hp;
  hp.n_trees = 120;
  hp.seed = 3;
  const CvResult cv_two = cross_validate(city.features, city.demand.values, two, hp);
  const CvResult cv_rnd = cross_validate(city.features, city.demand.values, rnd, hp);
  CHECK(cv_rnd.report.mae < cv_two.report.mae);
}

TEST_CASE("leave-one-city-out: identical generators transfer within 2x pooled MAE") {
  std::vector<CityRecipe> recipes(2);
  for (int c = 0; c < 2; ++c) {
    recipes[c].n_rows = 16;
    recipes[c].n_cols = 16;
    recipes[c].seed = 900 + c;
    recipes[c].smoothing_radius = 2.0;
  }
  const auto cities = multi_city(recipes);

  const int n_each = 256;
  std::vector<MappedColumn> cols;
  for (int c = 0; c < cities[0].features.n_cols(); ++c) {
    MappedColumn col;
    col.name = cities[0].features.schema().columns[c].name;
    col.values.reserve(2 * n_each);
    for (const SyntheticCity& city : cities)
      for (int i = 0; i < n_each; ++i) col.values.push_back(city.features.at(i, c));
    cols.push_back(std::move(col));
  }
  const GridIndex pooled_grid({0, 0}, 1500.0, 32, 16);
  const FeatureMatrix pooled = assemble_features(pooled_grid, cols);
  std::vector<double> y;
  for (const SyntheticCity& city : cities)
    y.insert(y.end(), city.demand.values.begin(), city.demand.values.end());

  GbtHyperParams hp;
  hp.n_trees = 150;
  hp.seed = 5;

  std::vector<int> train_ids, test_ids;
  for (int i = 0; i < n_each; ++i) train_ids.push_back(i);
  for (int i = n_each; i < 2 * n_each; ++i) test_ids.push_back(i);
  const GbtModel m = gbt_train(pooled, y, train_ids, hp);
  const std::vector<double> pred = m.predict(pooled, test_ids);
  const EvalReport held_out = evaluate(y, pred, test_ids, {});

  const FoldAssignment folds = random_split(pooled_grid, 3, 7);
  const CvResult cv = cross_validate(pooled, y, folds, hp);
  CHECK(held_out.mae <= 2.0 * cv.report.mae);
}

TEST_CASE("learning curve: size 1.0 reproduces cross-validation fold MAEs") {
  CityRecipe r;
  r.n_rows = 12;
  r.n_cols = 12;
  r.seed = 4;
  const SyntheticCity city = generate(r);
  const FoldAssignment folds = random_split(city.grid, 3, 10);
  GbtHyperParams hp;
  hp.n_trees = 40;
  hp.seed = 11;

  const CvResult cv = cross_validate(city.features, city.demand.values, folds, hp);
  const std::vector<double> sizes = {1.0};
  const auto curve = learning_curve(city.features, city.demand.values, folds, sizes, hp);
  REQUIRE(curve.size() == 1);
  double fold_mean = 0.0;
  for (const FoldScore& f : cv.report.per_fold) fold_mean += f.mae;
  fold_mean /= cv.report.per_fold.size();
  CHECK(curve[0].val_mae_mean == doctest::Approx(fold_mean).epsilon(1e-12));
  CHECK(curve[0].val_mae_sd >= 0.0);
}

TEST_CASE("learning curve: validation MAE improves with training size on a clean fixture") {
  const GridIndex g({0, 0}, 1.0, 14, 14);
  const int n = 196;
  Rng rng(15);
  std::vector<double> x1(n), x2(n), y(n);
  for (int i = 0; i < n; ++i) {
    x1[i] = rng.uniform();
    x2[i] = rng.uniform();
    y[i] = std::sin(3.0 * x1[i]) + 2.0 * x2[i] * x2[i];
  }
  const FeatureMatrix fm = matrix_from(g, {x1, x2});
  const FoldAssignment folds = random_split(g, 3, 2);
  GbtHyperParams hp;
  hp.n_trees = 80;
  hp.min_leaf = 3;
  hp.seed = 9;
  const std::vector<double> sizes = {0.2, 0.5, 1.0};
  const auto curve = learning_curve(fm, y, folds, sizes, hp);
  REQUIRE(curve.size() == 3);
  // Allow 5% jitter on the monotone trend.
  CHECK(curve[2].val_mae_mean <= curve[0].val_mae_mean * 1.05);
  CHECK(curve[0].train_mae_mean >= 0.0);

  const std::vector<double> bad = {1.5};
  CHECK_THROWS(learning_curve(fm, y, folds, bad, hp));
}

TEST_CASE("training rejects bad input") {
  const GridIndex g({0, 0}, 1.0, 2, 2);
  std::vector<double> x = {1, 2, 3, 4};
  std::vector<double> y = {1, 2, 3, std::numeric_limits<double>::quiet_NaN()};
  const FeatureMatrix fm = matrix_from(g, {x});
  GbtHyperParams hp;
  hp.min_leaf = 1;
  CHECK_THROWS(gbt_train(fm, y, iota_ids(4), hp));
  std::vector<double> y2 = {1, 2, 3, 4};
  CHECK_THROWS(gbt_train(fm, y2, {}, hp));  // empty training set
}
