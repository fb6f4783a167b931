#include "gridcast/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gridcast/io.hpp"
#include "gridcast/morans.hpp"
#include "gridcast/rng.hpp"

namespace gridcast {

namespace {

using nlohmann::json;

json recipe_to_json(const CityRecipe& r) {
  json j;
  j["n_rows"] = r.n_rows;
  j["n_cols"] = r.n_cols;
  j["cell_size"] = r.cell_size;
  j["seed"] = r.seed;
  j["smoothing_radius"] = r.smoothing_radius;
  j["mu"] = r.mu;
  j["sigma"] = r.sigma;
  j["n_context_classes"] = r.n_context_classes;
  j["layout"] = r.layout == ContextLayout::kBlocks    ? "blocks"
                : r.layout == ContextLayout::kRadial  ? "radial"
                                                      : "voronoi";
  j["context_block_cells"] = r.context_block_cells;
  j["context_multipliers"] = r.context_multipliers;
  j["feature_noise"] = r.feature_noise;
  j["n_noise_features"] = r.n_noise_features;
  j["hidden_amplitude"] = r.hidden_amplitude;
  j["hidden_radius"] = r.hidden_radius;
  j["hotspot_count"] = r.hotspot_count;
  j["hotspot_amplitude"] = r.hotspot_amplitude;
  j["hotspot_radius"] = r.hotspot_radius;
  return j;
}

CityRecipe recipe_from_json(const json& j) {
  CityRecipe r;
  r.n_rows = j.value("n_rows", r.n_rows);
  r.n_cols = j.value("n_cols", r.n_cols);
  r.cell_size = j.value("cell_size", r.cell_size);
  r.seed = j.value("seed", r.seed);
  r.smoothing_radius = j.value("smoothing_radius", r.smoothing_radius);
  r.mu = j.value("mu", r.mu);
  r.sigma = j.value("sigma", r.sigma);
  r.n_context_classes = j.value("n_context_classes", r.n_context_classes);
  const std::string layout = j.value("layout", std::string("blocks"));
  r.layout = layout == "radial"    ? ContextLayout::kRadial
             : layout == "voronoi" ? ContextLayout::kVoronoi
                                   : ContextLayout::kBlocks;
  r.context_block_cells = j.value("context_block_cells", r.context_block_cells);
  if (j.contains("context_multipliers"))
    r.context_multipliers = j.at("context_multipliers").get<std::vector<double>>();
  r.feature_noise = j.value("feature_noise", r.feature_noise);
  r.n_noise_features = j.value("n_noise_features", r.n_noise_features);
  r.hidden_amplitude = j.value("hidden_amplitude", r.hidden_amplitude);
  r.hidden_radius = j.value("hidden_radius", r.hidden_radius);
  r.hotspot_count = j.value("hotspot_count", r.hotspot_count);
  r.hotspot_amplitude = j.value("hotspot_amplitude", r.hotspot_amplitude);
  r.hotspot_radius = j.value("hotspot_radius", r.hotspot_radius);
  return r;
}

}  // namespace

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  if (synth) j["synth"] = recipe_to_json(*synth);
  if (features_csv) j["features_csv"] = *features_csv;
  j["weights"] = {{"kind", weights.kind == WeightsKind::kKnn ? "knn" : "distance_threshold"},
                  {"distance_m", weights.distance_m},
                  {"k", weights.k}};
  j["morans"] = {{"thresholds_cells", morans.thresholds_cells},
                 {"range_cutoff", morans.range_cutoff}};
  j["split"] = {{"min_folds", split.min_folds},
                {"stage1_k", split.stage1_k},
                {"n_folds", split.n_folds},
                {"context_columns", split.context_columns}};
  if (split.context_radius) j["split"]["context_radius"] = *split.context_radius;
  j["regressor"] = {{"n_trees", regressor.n_trees},
                    {"learning_rate", regressor.learning_rate},
                    {"max_depth", regressor.max_depth},
                    {"min_leaf", regressor.min_leaf},
                    {"l2_leaf", regressor.l2_leaf},
                    {"subsample", regressor.subsample},
                    {"seed", regressor.seed}};
  j["sem"] = {{"enabled", sem.enabled},
              {"kind", sem.kind == WeightsKind::kKnn ? "knn" : "distance_threshold"},
              {"distance_cells", sem.distance_cells},
              {"k", sem.k}};
  j["planning"] = {{"kappa", planning.kappa},
                   {"rho_oh", planning.rho_oh},
                   {"delta", planning.delta},
                   {"eta", planning.eta},
                   {"etas", planning.etas},
                   {"candidate_bandwidths_mhz", planning.candidate_bandwidths_mhz}};
  if (planning.fixed_mae) j["planning"]["fixed_mae"] = *planning.fixed_mae;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("synth")) c.synth = recipe_from_json(j.at("synth"));
  if (j.contains("features_csv")) c.features_csv = j.at("features_csv").get<std::string>();
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    c.weights.kind = w.value("kind", std::string("distance_threshold")) == "knn"
                         ? WeightsKind::kKnn
                         : WeightsKind::kDistanceThreshold;
    c.weights.distance_m = w.value("distance_m", 0.0);
    c.weights.k = w.value("k", 0);
  }
  if (j.contains("morans")) {
    const auto& m = j.at("morans");
    if (m.contains("thresholds_cells"))
      c.morans.thresholds_cells = m.at("thresholds_cells").get<std::vector<double>>();
    c.morans.range_cutoff = m.value("range_cutoff", c.morans.range_cutoff);
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    c.split.min_folds = s.value("min_folds", c.split.min_folds);
    c.split.stage1_k = s.value("stage1_k", c.split.stage1_k);
    c.split.n_folds = s.value("n_folds", c.split.n_folds);
    if (s.contains("context_columns"))
      c.split.context_columns = s.at("context_columns").get<std::vector<std::string>>();
    if (s.contains("context_radius"))
      c.split.context_radius = s.at("context_radius").get<double>();
  }
  if (j.contains("regressor")) {
    const auto& r = j.at("regressor");
    c.regressor.n_trees = r.value("n_trees", c.regressor.n_trees);
    c.regressor.learning_rate = r.value("learning_rate", c.regressor.learning_rate);
    c.regressor.max_depth = r.value("max_depth", c.regressor.max_depth);
    c.regressor.min_leaf = r.value("min_leaf", c.regressor.min_leaf);
    c.regressor.l2_leaf = r.value("l2_leaf", c.regressor.l2_leaf);
    c.regressor.subsample = r.value("subsample", c.regressor.subsample);
    c.regressor.seed = r.value("seed", c.regressor.seed);
  }
  if (j.contains("sem")) {
    c.sem.enabled = j.at("sem").value("enabled", c.sem.enabled);
    c.sem.kind = j.at("sem").value("kind", std::string("distance_threshold")) == "knn"
                     ? WeightsKind::kKnn
                     : WeightsKind::kDistanceThreshold;
    c.sem.distance_cells = j.at("sem").value("distance_cells", c.sem.distance_cells);
    c.sem.k = j.at("sem").value("k", c.sem.k);
  }
  if (j.contains("planning")) {
    const auto& p = j.at("planning");
    c.planning.kappa = p.value("kappa", c.planning.kappa);
    c.planning.rho_oh = p.value("rho_oh", c.planning.rho_oh);
    c.planning.delta = p.value("delta", c.planning.delta);
    c.planning.eta = p.value("eta", c.planning.eta);
    if (p.contains("etas")) c.planning.etas = p.at("etas").get<std::vector<double>>();
    if (p.contains("candidate_bandwidths_mhz"))
      c.planning.candidate_bandwidths_mhz =
          p.at("candidate_bandwidths_mhz").get<std::vector<double>>();
    if (p.contains("fixed_mae"))
      c.planning.fixed_mae = p.at("fixed_mae").get<std::vector<double>>();
  }
  return c;
}

std::uint64_t RunConfig::hash() const {
  // The output directory does not affect the computation; runs into
  // different directories must stay byte-comparable.
  RunConfig c = *this;
  c.out_dir.clear();
  return io::fnv1a(c.to_json());
}

std::vector<int> context_column_indices(const FeatureMatrix& features,
                                        const std::vector<std::string>& context_columns) {
  std::vector<int> cols;
  if (context_columns.empty()) {
    for (int c = 0; c < features.n_cols(); ++c)
      if (features.schema().columns[c].name.rfind("landuse=", 0) == 0) cols.push_back(c);
  } else {
    for (const std::string& name : context_columns) {
      const int idx = features.schema().index_of(name);
      if (idx < 0)
        throw std::invalid_argument("context column '" + name + "' not found in features");
      cols.push_back(idx);
    }
  }
  return cols;
}

std::vector<int> context_classes_from_features(const FeatureMatrix& features,
                                               const std::vector<std::string>& context_columns) {
  const std::vector<int> cols = context_column_indices(features, context_columns);
  std::vector<int> cls(static_cast<std::size_t>(features.n_rows()), 0);
  if (cols.empty()) return cls;
  for (int i = 0; i < features.n_rows(); ++i) {
    double best = -1.0;
    int best_c = 0;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = features.at(i, cols[c]);
      if (v > best) {
        best = v;
        best_c = static_cast<int>(c);
      }
    }
    cls[i] = best_c;
  }
  return cls;
}

namespace {

// Training-side weights for the residual fit. kNN graphs are symmetrized by
// union so (I - lambda W) stays well conditioned.
SpatialWeights sem_fit_weights(const GridIndex& grid, std::span<const int> cells,
                               const SemNeighborhood& nb) {
  if (nb.kind == WeightsKind::kKnn) {
    std::vector<std::pair<double, int>> cand;
    std::vector<int> row_counts;
    // kNN over the training subset.
    const int n = static_cast<int>(cells.size());
    std::vector<int> row_ptr{0};
    std::vector<int> col;
    std::vector<double> w;
    for (int a = 0; a < n; ++a) {
      const Point pa = grid.centroid(cells[a]);
      cand.clear();
      for (int b = 0; b < n; ++b) {
        if (b == a) continue;
        const Point pb = grid.centroid(cells[b]);
        const double dx = pa.x - pb.x;
        const double dy = pa.y - pb.y;
        cand.emplace_back(dx * dx + dy * dy, b);
      }
      const int k = std::min<int>(nb.k, static_cast<int>(cand.size()));
      std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
      std::vector<int> cols_sorted;
      for (int m = 0; m < k; ++m) cols_sorted.push_back(cand[m].second);
      std::sort(cols_sorted.begin(), cols_sorted.end());
      for (int c : cols_sorted) {
        col.push_back(c);
        w.push_back(1.0);
      }
      row_ptr.push_back(static_cast<int>(col.size()));
    }
    const SpatialWeights knn(n, std::move(row_ptr), std::move(col), std::move(w),
                             WeightsKind::kKnn, false);
    return knn.symmetrize_union().row_standardize();
  }
  return SpatialWeights::distance_threshold_subset(grid, cells, nb.distance_m)
      .row_standardize();
}

// Cross weights from test cells to training cells. In kNN mode a test
// cell's neighborhood is its k nearest cells over the whole grid; only the
// training cells among them are available, so interior test cells (whose
// nearest cells are all held out) pass through unchanged.
CrossWeights sem_cross_weights(const GridIndex& grid, std::span<const int> test_ids,
                               std::span<const int> train_ids, const SemNeighborhood& nb) {
  if (nb.kind != WeightsKind::kKnn)
    return build_cross_weights(grid, test_ids, train_ids, nb.distance_m);

  std::vector<int> train_pos(static_cast<std::size_t>(grid.n_cells()), -1);
  for (std::size_t j = 0; j < train_ids.size(); ++j)
    train_pos[train_ids[j]] = static_cast<int>(j);

  CrossWeights out;
  out.n_test = static_cast<int>(test_ids.size());
  std::vector<std::pair<double, int>> cand;
  for (int t = 0; t < out.n_test; ++t) {
    const Point pt = grid.centroid(test_ids[t]);
    cand.clear();
    for (int j = 0; j < grid.n_cells(); ++j) {
      if (j == test_ids[t]) continue;
      const Point pj = grid.centroid(j);
      const double dx = pt.x - pj.x;
      const double dy = pt.y - pj.y;
      cand.emplace_back(dx * dx + dy * dy, j);
    }
    const int k = std::min<int>(nb.k, static_cast<int>(cand.size()));
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    const int start = static_cast<int>(out.col.size());
    for (int m = 0; m < k; ++m)
      if (train_pos[cand[m].second] >= 0) {
        out.col.push_back(train_pos[cand[m].second]);
        out.w.push_back(1.0);
      }
    const int deg = static_cast<int>(out.col.size()) - start;
    if (deg > 0)
      for (int e = start; e < start + deg; ++e) out.w[e] /= deg;
    out.row_ptr.push_back(static_cast<int>(out.col.size()));
  }
  return out;
}

}  // namespace

SemCvOutcome sem_correct_cv(const CvResult& cv, const FoldAssignment& folds,
                            const GridIndex& grid, std::span<const double> y,
                            const SemNeighborhood& neighborhood) {
  SemCvOutcome out;
  const int n = static_cast<int>(y.size());
  std::vector<int> eval_ids;
  std::vector<double> eval_pred;
  for (int f = 0; f < folds.n_folds; ++f) {
    const std::vector<int>& train_ids = cv.train_ids_per_fold[f];
    const std::vector<double>& train_res = cv.train_residuals_per_fold[f];
    std::vector<int> test_ids;
    for (int i = 0; i < n; ++i)
      if (folds.fold[i] == f) test_ids.push_back(i);

    const SpatialWeights w_train = sem_fit_weights(grid, train_ids, neighborhood);
    const SemModel sem = fit_lambda(train_res, w_train);

    std::vector<double> yhat_test;
    yhat_test.reserve(test_ids.size());
    for (int id : test_ids) yhat_test.push_back(cv.report.predictions[id]);
    const CrossWeights cross = sem_cross_weights(grid, test_ids, train_ids, neighborhood);
    const std::vector<double> corrected =
        correct_predictions(sem, yhat_test, train_res, cross);

    eval_ids.insert(eval_ids.end(), test_ids.begin(), test_ids.end());
    eval_pred.insert(eval_pred.end(), corrected.begin(), corrected.end());
    out.per_fold.push_back(sem);
    out.fold_sizes.push_back(static_cast<int>(train_ids.size()));
  }
  out.corrected = evaluate(y, eval_pred, eval_ids, folds.fold);
  return out;
}

SemCvOutcome sem_correct_cv(const CvResult& cv, const FoldAssignment& folds,
                            const GridIndex& grid, std::span<const double> y,
                            double distance_m) {
  SemNeighborhood nb;
  nb.distance_m = distance_m;
  return sem_correct_cv(cv, folds, grid, y, nb);
}

namespace {

struct StageRunner {
  std::vector<StageTiming>& timings;
  std::vector<std::string>& files;

  template <typename Fn>
  void operator()(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const io::InputError& e) {
      cleanup();
      throw io::InputError("stage " + name + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      cleanup();
      throw std::invalid_argument("stage " + name + ": " + e.what());
    } catch (const std::exception& e) {
      cleanup();
      throw std::runtime_error("stage " + name + ": " + e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    timings.push_back({name, std::chrono::duration<double>(t1 - t0).count()});
  }

  void cleanup() {
    // Remove partial outputs before propagating.
    for (const std::string& f : files) std::filesystem::remove(f);
  }
};

}  // namespace

RunManifest run_pipeline(const RunConfig& config) {
  RunManifest manifest;
  manifest.config_hash = config.hash();
  const std::uint64_t hash = manifest.config_hash;
  StageRunner stage{manifest.timings, manifest.files};

  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  auto path = [&](const std::string& name) { return config.out_dir + "/" + name; };
  auto track = [&](const std::string& p) {
    manifest.files.push_back(p);
    return p;
  };

  // --- ingest or generate ---
  GridIndex grid({0.0, 0.0}, GridIndex::kDefaultCellSize, 1, 1);
  FeatureMatrix features;
  std::vector<double> y;
  std::vector<int> cell_class;
  stage("ingest", [&] {
    if (config.synth) {
      CityRecipe recipe = *config.synth;
      recipe.seed = derive_seed(config.seed, 0xc17fULL);
      const SyntheticCity city = generate(recipe);
      grid = city.grid;
      features = city.features;
      y = city.demand.values;
      cell_class = city.context_class;
    } else if (config.features_csv) {
      io::FeaturesCsv fc = io::read_features_csv(*config.features_csv);
      if (!fc.y) throw std::runtime_error("features file lacks the y column");
      grid = fc.grid;
      features = std::move(fc.features);
      y = std::move(*fc.y);
      cell_class = context_classes_from_features(features, config.split.context_columns);
    } else {
      throw std::invalid_argument("config needs either synth or features_csv");
    }
    io::write_features_csv(track(path("features.csv")), grid, features, &y, hash);
  });

  // --- spatial dependency profile ---
  MoranProfile profile;
  stage("morans", [&] {
    profile = morans_profile(y, grid, config.morans.thresholds_cells,
                             config.morans.range_cutoff);
    io::write_profile_csv(track(path("morans_profile.csv")), profile, hash);
    const double d1 = config.weights.distance_m > 0.0 ? config.weights.distance_m
                                                      : 1.5 * grid.cell_size();
    const SpatialWeights w = config.weights.kind == WeightsKind::kKnn
                                 ? SpatialWeights::knn(grid, config.weights.k)
                                 : SpatialWeights::distance_threshold(grid, d1);
    io::write_local_csv(track(path("local_morans.csv")), local_morans_i(y, w), hash);
  });

  // --- splits ---
  const double range_cells = std::max(profile.range_cells, 1.0);
  FoldAssignment folds_two_stage, folds_random, folds_kmeans;
  stage("split", [&] {
    const int stage1_k =
        config.split.stage1_k > 0
            ? config.split.stage1_k
            : choose_stage1_k(grid, range_cells, config.split.min_folds);
    const SpatialClustering stage1 =
        kmeans_centroids(grid, stage1_k, derive_seed(config.seed, 0x57a6e1ULL));
    RefineParams rp;
    rp.context_columns = context_column_indices(features, config.split.context_columns);
    rp.context_radius = config.split.context_radius;
    const SubClustering sub = refine_context(stage1, features, cell_class, rp);
    BuildFoldParams bp;
    bp.min_folds = config.split.min_folds;
    bp.separation_r_cells = range_cells;
    folds_two_stage = build_folds(stage1, sub, grid, bp);

    const int n_folds = config.split.n_folds > 0 ? config.split.n_folds
                                                 : folds_two_stage.n_folds;
    folds_random = random_split(grid, n_folds, derive_seed(config.seed, 0x7a2d03ULL));
    folds_random.context_class = cell_class;
    const SpatialClustering loc =
        kmeans_centroids(grid, n_folds, derive_seed(config.seed, 0x10ca7eULL));
    folds_kmeans = folds_from_clusters(loc, cell_class);

    io::write_folds_csv(track(path("folds_two_stage.csv")), folds_two_stage, hash);
    io::write_folds_csv(track(path("folds_random.csv")), folds_random, hash);
    io::write_folds_csv(track(path("folds_kmeans_location.csv")), folds_kmeans, hash);
    io::write_audit_json(track(path("audit_two_stage.json")),
                         audit_leakage(folds_two_stage, grid, range_cells), hash);
    io::write_audit_json(track(path("audit_random.json")),
                         audit_leakage(folds_random, grid, range_cells), hash);
    io::write_audit_json(track(path("audit_kmeans_location.json")),
                         audit_leakage(folds_kmeans, grid, range_cells), hash);
  });

  // --- cross-validation + SEM ---
  CvResult cv_two_stage, cv_random, cv_kmeans;
  SemCvOutcome sem_outcome;
  stage("train", [&] {
    cv_two_stage = cross_validate(features, y, folds_two_stage, config.regressor);
    cv_random = cross_validate(features, y, folds_random, config.regressor);
    cv_kmeans = cross_validate(features, y, folds_kmeans, config.regressor);
    manifest.metrics["two_stage"] = {cv_two_stage.report.mae, cv_two_stage.report.r2};
    manifest.metrics["random"] = {cv_random.report.mae, cv_random.report.r2};
    manifest.metrics["kmeans_location"] = {cv_kmeans.report.mae, cv_kmeans.report.r2};
  });
  stage("sem", [&] {
    if (!config.sem.enabled) return;
    SemNeighborhood nb;
    nb.kind = config.sem.kind;
    nb.distance_m = config.sem.distance_cells * grid.cell_size();
    nb.k = config.sem.k;
    sem_outcome = sem_correct_cv(cv_two_stage, folds_two_stage, grid, y, nb);
    manifest.metrics["two_stage_sem"] = {sem_outcome.corrected.mae, sem_outcome.corrected.r2};

    // Size-weighted aggregate over per-fold fits.
    SemModel agg;
    double wsum = 0.0;
    for (std::size_t f = 0; f < sem_outcome.per_fold.size(); ++f) {
      const double w = sem_outcome.fold_sizes[f];
      agg.lambda += w * sem_outcome.per_fold[f].lambda;
      agg.innovation_sse += sem_outcome.per_fold[f].innovation_sse;
      agg.moran_before += w * sem_outcome.per_fold[f].moran_before;
      agg.moran_after += w * sem_outcome.per_fold[f].moran_after;
      agg.moran_defined = agg.moran_defined || sem_outcome.per_fold[f].moran_defined;
      for (const SemComponentFit& c : sem_outcome.per_fold[f].components)
        agg.components.push_back(c);
      wsum += w;
    }
    if (wsum > 0) {
      agg.lambda /= wsum;
      agg.moran_before /= wsum;
      agg.moran_after /= wsum;
    }
    io::write_sem_json(track(path("sem_report.json")), agg, hash);
  });

  // --- planning outputs ---
  stage("plan", [&] {
    PlanningConfig pc;
    pc.kappa = config.planning.kappa;
    pc.rho_oh = config.planning.rho_oh;
    pc.delta = config.planning.delta;
    pc.eta = config.planning.eta;
    for (double mhz : config.planning.candidate_bandwidths_mhz)
      pc.candidate_bandwidths_hz.push_back(mhz * 1e6);

    const std::vector<std::string> methods = {"k_means", "two_stage", "two_stage_sem"};
    std::vector<double> maes;
    if (config.planning.fixed_mae) {
      maes = *config.planning.fixed_mae;
      if (maes.size() != methods.size())
        throw std::invalid_argument("fixed_mae must list one MAE per method");
    } else {
      maes = {manifest.metrics.at("kmeans_location").mae,
              manifest.metrics.at("two_stage").mae,
              config.sem.enabled ? manifest.metrics.at("two_stage_sem").mae
                                 : manifest.metrics.at("two_stage").mae};
    }
    std::vector<std::vector<double>> table;
    for (double eta : config.planning.etas) {
      std::vector<double> row;
      for (double mae : maes) row.push_back(bde(mae, pc.kappa, eta));
      table.push_back(std::move(row));
    }
    io::write_bde_table_csv(track(path("bde_sensitivity.csv")), config.planning.etas,
                            methods, table, hash);

    // Congestion curves from the observed field and each method's held-out
    // predictions (negative predictions clamp to zero demand).
    std::vector<CongestionCurve> curves;
    curves.push_back(
        congestion_curve(bandwidth_required(y, pc), pc.candidate_bandwidths_hz, "observed"));
    auto curve_for = [&](const EvalReport& rep, const std::string& label) {
      std::vector<double> pred(rep.predictions.size());
      for (std::size_t i = 0; i < pred.size(); ++i)
        pred[i] = std::isfinite(rep.predictions[i]) ? std::max(0.0, rep.predictions[i]) : 0.0;
      curves.push_back(congestion_curve(bandwidth_required(pred, pc),
                                        pc.candidate_bandwidths_hz, "predicted:" + label));
    };
    curve_for(cv_kmeans.report, "k_means");
    curve_for(cv_two_stage.report, "two_stage");
    if (config.sem.enabled) curve_for(sem_outcome.corrected, "two_stage_sem");
    io::write_congestion_csv(track(path("congestion_curves.csv")), curves, hash);

    // Methods-comparison table, one row for the evaluated area.
    std::ostringstream cmp;
    cmp << "# config " << std::hex << hash << std::dec << "\n";
    cmp << "area,mae_k_means,mae_two_stage,mae_two_stage_sem,r2_k_means,r2_two_stage,"
           "r2_two_stage_sem\n";
    char buf[64];
    auto fmt1 = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.1f", v);
      return std::string(buf);
    };
    auto fmt4 = [&](const std::optional<double>& v) {
      if (!v) return std::string("NA");
      std::snprintf(buf, sizeof(buf), "%.4f", *v);
      return std::string(buf);
    };
    const MethodMetrics& km = manifest.metrics.at("kmeans_location");
    const MethodMetrics& ts = manifest.metrics.at("two_stage");
    const MethodMetrics& sm = config.sem.enabled ? manifest.metrics.at("two_stage_sem") : ts;
    cmp << "all," << fmt1(km.mae) << "," << fmt1(ts.mae) << "," << fmt1(sm.mae) << ","
        << fmt4(km.r2) << "," << fmt4(ts.r2) << "," << fmt4(sm.r2) << "\n";
    io::spit(track(path("methods_comparison.csv")), cmp.str());
  });

  // --- metrics + manifest ---
  stage("finalize", [&] {
    json metrics;
    for (const auto& [name, m] : manifest.metrics) {
      metrics["methods"][name]["mae"] = m.mae;
      if (m.r2) metrics["methods"][name]["r2"] = *m.r2;
    }
    // Pairwise R^2 gain matrix (row minus column, in percent).
    for (const auto& [a, ma] : manifest.metrics)
      for (const auto& [b, mb] : manifest.metrics)
        if (ma.r2 && mb.r2)
          metrics["r2_gain_pct"][a][b] = 100.0 * (*ma.r2 - *mb.r2);
    metrics["config_hash"] = hash;
    io::spit(track(path("metrics.json")), metrics.dump(2) + "\n");

    json man;
    man["config_hash"] = hash;
    man["config"] = json::parse(config.to_json());
    for (const StageTiming& t : manifest.timings)
      man["timings"].push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    man["files"] = manifest.files;
    man["metrics"] = metrics;
    io::spit(path("manifest.json"), man.dump(2) + "\n");
  });

  return manifest;
}

}  // namespace gridcast
