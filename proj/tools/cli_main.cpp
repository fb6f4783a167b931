// gridcast: spatial traffic-demand mapping, leakage-aware splitting,
// boosted-tree prediction with spatial error correction, and 5G bandwidth
// planning tables. Subcommands compose through the CSV/JSON formats, so any
// stage can run standalone on saved artifacts.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridcast/gbt.hpp"
#include "gridcast/io.hpp"
#include "gridcast/morans.hpp"
#include "gridcast/planning.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/run.hpp"
#include "gridcast/sem.hpp"
#include "gridcast/split.hpp"
#include "gridcast/synth.hpp"

using namespace gridcast;

namespace {

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::uint64_t hash_args(const std::string& tag, std::uint64_t seed) {
  return io::fnv1a(tag + ":" + std::to_string(seed));
}

struct SynthArgs {
  std::string recipe_path;
  std::string out = "features.csv";
  std::uint64_t seed = 0;
  int rows = 0, cols = 0;
};

int cmd_synth(const SynthArgs& a) {
  CityRecipe recipe;
  if (!a.recipe_path.empty())
    recipe = RunConfig::from_json("{\"synth\":" + io::slurp(a.recipe_path) + "}").synth.value();
  recipe.seed = a.seed;
  if (a.rows > 0) recipe.n_rows = a.rows;
  if (a.cols > 0) recipe.n_cols = a.cols;
  const SyntheticCity city = generate(recipe);
  io::write_features_csv(a.out, city.grid, city.features, &city.demand.values,
                         hash_args("synth", a.seed));
  std::cout << "wrote " << a.out << " (" << city.grid.n_cells() << " cells, "
            << city.features.n_cols() << " features)\n";
  return 0;
}

struct MapArgs {
  int rows = 0, cols = 0;
  double cell_size = GridIndex::kDefaultCellSize;
  double origin_x = 0.0, origin_y = 0.0;
  std::vector<std::string> areal;        // name=path:extensive|intensive
  std::vector<std::string> categorical;  // name=path
  std::vector<std::string> points;       // name=path[:density]
  std::string y_points;                  // optional demand-proxy point layer
  std::string out = "features.csv";
};

std::pair<std::string, std::string> split_once(const std::string& s, char sep,
                                               const std::string& what) {
  const std::size_t at = s.find(sep);
  if (at == std::string::npos)
    throw std::invalid_argument("map: expected '" + std::string(1, sep) + "' in " + what +
                                " spec '" + s + "'");
  return {s.substr(0, at), s.substr(at + 1)};
}

int cmd_map(const MapArgs& a) {
  if (a.rows <= 0 || a.cols <= 0)
    throw std::invalid_argument("map: --rows and --cols are required");
  const GridIndex grid({a.origin_x, a.origin_y}, a.cell_size, a.rows, a.cols);
  std::vector<MappedColumn> columns;

  for (const std::string& spec : a.areal) {
    auto [name, rest] = split_once(spec, '=', "areal layer");
    auto [path, mode_str] = split_once(rest, ':', "areal layer");
    const io::GeometryLayer layer = io::read_geometry_json(path);
    if (!layer.polygons) throw io::InputError("map: " + path + " is not a polygon layer");
    const ArealMode mode = mode_str == "extensive" ? ArealMode::kExtensive
                         : mode_str == "intensive" ? ArealMode::kIntensive
                         : throw std::invalid_argument("map: mode must be extensive|intensive");
    const ArealMapResult r = map_areal_layer(grid, *layer.polygons, mode);
    if (r.degenerate_skipped > 0)
      std::cerr << "warning: " << name << ": skipped " << r.degenerate_skipped
                << " degenerate polygon(s)\n";
    columns.push_back({name,
                       mode == ArealMode::kExtensive ? FeatureKind::kExtensive
                                                     : FeatureKind::kIntensive,
                       r.values});
  }

  for (const std::string& spec : a.categorical) {
    auto [name, path] = split_once(spec, '=', "categorical layer");
    const io::GeometryLayer layer = io::read_geometry_json(path);
    if (!layer.polygons) throw io::InputError("map: " + path + " is not a polygon layer");
    const CategoricalMapResult r = map_categorical_layer(grid, *layer.polygons);
    for (std::size_t c = 0; c < r.classes.size(); ++c)
      columns.push_back({name + "=" + r.classes[c], FeatureKind::kCategorical, r.one_hot[c]});
  }

  for (const std::string& spec : a.points) {
    auto [name, rest] = split_once(spec, '=', "point layer");
    bool density = false;
    std::string path = rest;
    if (const std::size_t at = rest.rfind(":density"); at != std::string::npos &&
                                                       at == rest.size() - 8) {
      density = true;
      path = rest.substr(0, at);
    }
    const io::GeometryLayer layer = io::read_geometry_json(path);
    if (!layer.points) throw io::InputError("map: " + path + " is not a point layer");
    const PointMapResult r = map_point_layer(grid, *layer.points, density);
    if (r.ignored_outside > 0)
      std::cerr << "warning: " << name << ": ignored " << r.ignored_outside
                << " out-of-bounds point(s)\n";
    columns.push_back({name, FeatureKind::kExtensive, r.values});
  }

  if (columns.empty()) throw std::invalid_argument("map: no layers given");
  const FeatureMatrix fm = assemble_features(grid, columns);

  std::vector<double> y;
  const std::vector<double>* y_ptr = nullptr;
  if (!a.y_points.empty()) {
    const io::GeometryLayer layer = io::read_geometry_json(a.y_points);
    if (!layer.points) throw io::InputError("map: " + a.y_points + " is not a point layer");
    y = map_point_layer(grid, *layer.points, false).values;
    y_ptr = &y;
  }
  io::write_features_csv(a.out, grid, fm, y_ptr, io::fnv1a(a.out));
  std::cout << "wrote " << a.out << " (" << grid.n_cells() << " cells, " << fm.n_cols()
            << " features)\n";
  return 0;
}

struct MoransArgs {
  std::string features;
  std::string thresholds = "1,1.5,2,3,4,5,6,8";
  double cutoff = 0.2;
  double local_distance_cells = 1.0;
  std::string out_profile;
  std::string out_local;
  std::string out_pvalues;
  int permutation_draws = 999;
  std::uint64_t pvalue_seed = 1;
};

int cmd_morans(const MoransArgs& a) {
  const io::FeaturesCsv fc = io::read_features_csv(a.features);
  if (!fc.y) throw io::InputError("morans: features file lacks the y column");
  const std::uint64_t h = io::fnv1a(a.features + a.thresholds);
  const std::vector<double> thresholds = parse_list(a.thresholds);
  const MoranProfile profile = morans_profile(*fc.y, fc.grid, thresholds, a.cutoff);
  if (!a.out_profile.empty()) {
    io::write_profile_csv(a.out_profile, profile, h);
    std::cout << "wrote " << a.out_profile << "\n";
  }
  for (const MoranProfilePoint& p : profile.points)
    std::printf("I(%.2f cells) = %.6f\n", p.distance_cells, p.i);
  std::printf("range = %.2f cells\n", profile.range_cells);
  if (!a.out_local.empty() || !a.out_pvalues.empty()) {
    const SpatialWeights w = SpatialWeights::distance_threshold(
        fc.grid, a.local_distance_cells * fc.grid.cell_size());
    if (!a.out_local.empty()) {
      io::write_local_csv(a.out_local, local_morans_i(*fc.y, w), h);
      std::cout << "wrote " << a.out_local << "\n";
    }
    if (!a.out_pvalues.empty()) {
      const std::vector<double> p =
          local_moran_permutation_pvalues(*fc.y, w, a.permutation_draws, a.pvalue_seed);
      std::ostringstream out;
      out << "cell_id,p_value\n";
      char buf[48];
      for (std::size_t i = 0; i < p.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", i, p[i]);
        out << buf;
      }
      io::spit(a.out_pvalues, out.str());
      std::cout << "wrote " << a.out_pvalues << "\n";
    }
  }
  return 0;
}

struct SplitArgs {
  std::string features;
  std::string method = "two_stage";
  std::uint64_t seed = 0;
  int n_folds = 0;
  int stage1_k = 0;
  int min_folds = 3;
  double separation_r = 0.0;
  std::string out = "folds.csv";
  std::string audit_path;
};

int cmd_split(const SplitArgs& a) {
  const io::FeaturesCsv fc = io::read_features_csv(a.features);
  const std::uint64_t h = hash_args("split:" + a.method + a.features, a.seed);
  const std::vector<int> cls = context_classes_from_features(fc.features, {});

  double range = a.separation_r;
  if (range <= 0.0 && fc.y) {
    const std::vector<double> thresholds = {1, 2, 3, 4, 5, 6};
    range = std::max(1.0, morans_profile(*fc.y, fc.grid, thresholds).range_cells);
  }
  if (range <= 0.0) range = 1.0;

  FoldAssignment folds;
  if (a.method == "random") {
    const int nf = a.n_folds > 0 ? a.n_folds : a.min_folds;
    folds = random_split(fc.grid, nf, a.seed);
    folds.context_class = cls;
  } else if (a.method == "kmeans_location") {
    const int nf = a.n_folds > 0 ? a.n_folds : a.min_folds;
    folds = folds_from_clusters(kmeans_centroids(fc.grid, nf, a.seed), cls);
  } else if (a.method == "two_stage") {
    const int k = a.stage1_k > 0 ? a.stage1_k
                                 : choose_stage1_k(fc.grid, range, a.min_folds);
    const SpatialClustering stage1 = kmeans_centroids(fc.grid, k, a.seed);
    RefineParams rp;
    rp.context_columns = context_column_indices(fc.features, {});
    const SubClustering sub = refine_context(stage1, fc.features, cls, rp);
    BuildFoldParams bp;
    bp.min_folds = a.min_folds;
    bp.separation_r_cells = range;
    folds = build_folds(stage1, sub, fc.grid, bp);
  } else {
    throw std::invalid_argument("split: unknown method '" + a.method + "'");
  }

  io::write_folds_csv(a.out, folds, h);
  std::cout << "wrote " << a.out << " (" << folds.n_folds << " folds)\n";
  if (!a.audit_path.empty()) {
    io::write_audit_json(a.audit_path, audit_leakage(folds, fc.grid, range), h);
    std::cout << "wrote " << a.audit_path << "\n";
  }
  return 0;
}

struct TrainArgs {
  std::string features;
  std::string folds;
  GbtHyperParams hp;
  std::string out_eval = "eval.json";
  std::string out_model;
  std::string curve_sizes;
  std::string out_curve = "learning_curve.csv";
};

nlohmann::json eval_to_json(const EvalReport& rep) {
  nlohmann::json j;
  j["mae"] = rep.mae;
  if (rep.r2) j["r2"] = *rep.r2;
  for (const FoldScore& f : rep.per_fold) {
    nlohmann::json fj;
    fj["fold"] = f.fold;
    fj["mae"] = f.mae;
    if (f.r2) fj["r2"] = *f.r2;
    j["per_fold"].push_back(fj);
  }
  return j;
}

int cmd_train(const TrainArgs& a) {
  const io::FeaturesCsv fc = io::read_features_csv(a.features);
  if (!fc.y) throw io::InputError("train: features file lacks the y column");
  const FoldAssignment folds = io::read_folds_csv(a.folds);
  const CvResult cv = cross_validate(fc.features, *fc.y, folds, a.hp);

  nlohmann::json out = eval_to_json(cv.report);
  io::spit(a.out_eval, out.dump(2) + "\n");
  std::cout << "wrote " << a.out_eval << " (mae " << cv.report.mae << ")\n";

  if (!a.out_model.empty()) {
    // Model refit on all cells for deployment-style export.
    std::vector<int> all(fc.grid.n_cells());
    for (int i = 0; i < fc.grid.n_cells(); ++i) all[i] = i;
    const GbtModel full = gbt_train(fc.features, *fc.y, all, a.hp);
    io::spit(a.out_model, full.to_json());
    std::cout << "wrote " << a.out_model << "\n";
  }

  if (!a.curve_sizes.empty()) {
    const std::vector<double> sizes = parse_list(a.curve_sizes);
    const auto curve = learning_curve(fc.features, *fc.y, folds, sizes, a.hp);
    std::ostringstream cs;
    cs << "size,train_mae_mean,train_mae_sd,val_mae_mean,val_mae_sd\n";
    char buf[160];
    for (const LearningCurvePoint& p : curve) {
      std::snprintf(buf, sizeof(buf), "%g,%.17g,%.17g,%.17g,%.17g\n", p.size,
                    p.train_mae_mean, p.train_mae_sd, p.val_mae_mean, p.val_mae_sd);
      cs << buf;
    }
    io::spit(a.out_curve, cs.str());
    std::cout << "wrote " << a.out_curve << "\n";
  }
  return 0;
}

struct SemArgs {
  std::string features;
  std::string folds;
  GbtHyperParams hp;
  double distance_cells = 2.0;
  int knn = 0;  // 0: distance-threshold neighborhoods
  std::string out_eval = "eval_sem.json";
  std::string out_report = "sem_report.json";
};

int cmd_sem(const SemArgs& a) {
  const io::FeaturesCsv fc = io::read_features_csv(a.features);
  if (!fc.y) throw io::InputError("sem: features file lacks the y column");
  const FoldAssignment folds = io::read_folds_csv(a.folds);
  const CvResult cv = cross_validate(fc.features, *fc.y, folds, a.hp);
  SemNeighborhood nb;
  if (a.knn > 0) {
    nb.kind = WeightsKind::kKnn;
    nb.k = a.knn;
  } else {
    nb.distance_m = a.distance_cells * fc.grid.cell_size();
  }
  const SemCvOutcome outcome = sem_correct_cv(cv, folds, fc.grid, *fc.y, nb);

  nlohmann::json out = eval_to_json(outcome.corrected);
  out["uncorrected_mae"] = cv.report.mae;
  io::spit(a.out_eval, out.dump(2) + "\n");

  SemModel agg;
  double wsum = 0.0;
  for (std::size_t f = 0; f < outcome.per_fold.size(); ++f) {
    const double w = outcome.fold_sizes[f];
    agg.lambda += w * outcome.per_fold[f].lambda;
    agg.innovation_sse += outcome.per_fold[f].innovation_sse;
    agg.moran_before += w * outcome.per_fold[f].moran_before;
    agg.moran_after += w * outcome.per_fold[f].moran_after;
    agg.moran_defined = agg.moran_defined || outcome.per_fold[f].moran_defined;
    for (const SemComponentFit& c : outcome.per_fold[f].components)
      agg.components.push_back(c);
    wsum += w;
  }
  if (wsum > 0) {
    agg.lambda /= wsum;
    agg.moran_before /= wsum;
    agg.moran_after /= wsum;
  }
  io::write_sem_json(a.out_report, agg, io::fnv1a(a.features + a.folds));
  std::cout << "wrote " << a.out_eval << " (mae " << cv.report.mae << " -> "
            << outcome.corrected.mae << ", lambda " << agg.lambda << ")\n";
  return 0;
}

struct PlanArgs {
  double mae = -1.0;
  double eta = 2.0;
  double kappa = 50e3;
  std::string mae_list;
  std::string etas = "2.0,3.0,3.5";
  std::string methods = "k_means,two_stage,two_stage_sem";
  std::string out_bde;
  std::string features;
  std::string bandwidths = "0,10,20,30,40,50,60,70,80,90,100,120,150,200";
  std::string out_curves;
  bool case_study = false;
  std::uint64_t seed = 7;
};

int cmd_plan(const PlanArgs& a) {
  const std::uint64_t h = io::fnv1a(a.mae_list + a.etas + std::to_string(a.mae));

  if (a.mae >= 0.0) {
    std::printf("%.1f MHz\n", bde(a.mae, a.kappa, a.eta) / 1e6);
    return 0;
  }

  if (!a.mae_list.empty() && !a.case_study) {
    const std::vector<double> maes = parse_list(a.mae_list);
    const std::vector<double> etas = parse_list(a.etas);
    std::vector<std::string> methods;
    std::stringstream ss(a.methods);
    std::string item;
    while (std::getline(ss, item, ',')) methods.push_back(item);
    if (methods.size() != maes.size())
      throw std::invalid_argument("plan: --methods must match --mae-list length");
    std::vector<std::vector<double>> table;
    for (double eta : etas) {
      std::vector<double> row;
      for (double mae : maes) row.push_back(bde(mae, a.kappa, eta));
      table.push_back(row);
    }
    if (!a.out_bde.empty()) {
      io::write_bde_table_csv(a.out_bde, etas, methods, table, h);
      std::cout << "wrote " << a.out_bde << "\n";
    } else {
      for (std::size_t r = 0; r < etas.size(); ++r) {
        std::printf("eta=%.1f:", etas[r]);
        for (double v : table[r]) std::printf(" %.1f", v / 1e6);
        std::printf("\n");
      }
    }
    return 0;
  }

  if (a.case_study) {
    CaseStudyConfig study;
    study.seed = a.seed;
    study.mae_targets = parse_list(a.mae_list);
    std::stringstream ss(a.methods);
    std::string item;
    while (std::getline(ss, item, ',')) study.method_labels.push_back(item);
    study.method_labels.resize(study.mae_targets.size(), "method");
    PlanningConfig pc;
    pc.kappa = a.kappa;
    pc.eta = a.eta;
    for (double mhz : parse_list(a.bandwidths)) pc.candidate_bandwidths_hz.push_back(mhz * 1e6);
    const CaseStudyResult r = case_study_all_cities(study, pc);
    std::vector<CongestionCurve> curves = {r.observed};
    for (const CongestionCurve& c : r.predicted) curves.push_back(c);
    if (a.out_curves.empty()) throw std::invalid_argument("plan: case study needs --out-curves");
    io::write_congestion_csv(a.out_curves, curves, h);
    std::cout << "wrote " << a.out_curves << "\n";
    return 0;
  }

  if (!a.features.empty()) {
    const io::FeaturesCsv fc = io::read_features_csv(a.features);
    if (!fc.y) throw io::InputError("plan: features file lacks the y column");
    PlanningConfig pc;
    pc.kappa = a.kappa;
    pc.eta = a.eta;
    for (double mhz : parse_list(a.bandwidths)) pc.candidate_bandwidths_hz.push_back(mhz * 1e6);
    const DemandMap dm = bandwidth_required(*fc.y, pc);
    const CongestionCurve curve = congestion_curve(dm, pc.candidate_bandwidths_hz, "observed");
    if (!a.out_curves.empty()) {
      io::write_congestion_csv(a.out_curves, {curve}, h);
      std::cout << "wrote " << a.out_curves << "\n";
    } else {
      for (const CongestionPoint& p : curve.points)
        std::printf("P_cong(%.0f MHz) = %.4f\n", p.bandwidth_hz / 1e6, p.p_cong);
    }
    return 0;
  }

  throw std::invalid_argument("plan: provide --mae, --mae-list, --case-study, or --features");
}

int cmd_pipeline(const std::string& config_path, const std::string& out_dir_override) {
  RunConfig config = RunConfig::from_json(io::slurp(config_path));
  if (!out_dir_override.empty()) config.out_dir = out_dir_override;
  const RunManifest manifest = run_pipeline(config);
  std::cout << "pipeline complete: " << manifest.files.size() << " artifacts in "
            << config.out_dir << "\n";
  for (const auto& [name, m] : manifest.metrics)
    std::cout << "  " << name << ": mae " << m.mae
              << (m.r2 ? " r2 " + std::to_string(*m.r2) : "") << "\n";
  return 0;
}

void add_hyperparam_flags(CLI::App* cmd, GbtHyperParams& hp) {
  cmd->add_option("--n-trees", hp.n_trees);
  cmd->add_option("--learning-rate", hp.learning_rate);
  cmd->add_option("--max-depth", hp.max_depth);
  cmd->add_option("--min-leaf", hp.min_leaf);
  cmd->add_option("--l2-leaf", hp.l2_leaf);
  cmd->add_option("--subsample", hp.subsample);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridcast: spatial cellular traffic-demand prediction and 5G planning"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic city features CSV");
  synth_cmd->add_option("--recipe", synth_args.recipe_path, "Recipe JSON path");
  synth_cmd->add_option("--seed", synth_args.seed)->required();
  synth_cmd->add_option("--rows", synth_args.rows);
  synth_cmd->add_option("--cols", synth_args.cols);
  synth_cmd->add_option("--out", synth_args.out);

  MapArgs map_args;
  CLI::App* map_cmd = app.add_subcommand("map", "Map geometry JSON layers onto a grid");
  map_cmd->add_option("--rows", map_args.rows)->required();
  map_cmd->add_option("--cols", map_args.cols)->required();
  map_cmd->add_option("--cell-size", map_args.cell_size);
  map_cmd->add_option("--origin-x", map_args.origin_x);
  map_cmd->add_option("--origin-y", map_args.origin_y);
  map_cmd->add_option("--areal", map_args.areal, "name=path:extensive|intensive");
  map_cmd->add_option("--categorical", map_args.categorical, "name=path");
  map_cmd->add_option("--points", map_args.points, "name=path[:density]");
  map_cmd->add_option("--y-points", map_args.y_points, "point layer counted as the proxy y");
  map_cmd->add_option("--out", map_args.out);

  MoransArgs morans_args;
  CLI::App* morans_cmd = app.add_subcommand("morans", "Moran profile and local cluster map");
  morans_cmd->add_option("--features", morans_args.features)->required();
  morans_cmd->add_option("--thresholds", morans_args.thresholds);
  morans_cmd->add_option("--cutoff", morans_args.cutoff);
  morans_cmd->add_option("--local-distance-cells", morans_args.local_distance_cells);
  morans_cmd->add_option("--out-profile", morans_args.out_profile);
  morans_cmd->add_option("--out-local", morans_args.out_local);
  morans_cmd->add_option("--out-pvalues", morans_args.out_pvalues,
                         "conditional-permutation pseudo p-values per cell");
  morans_cmd->add_option("--permutation-draws", morans_args.permutation_draws);
  morans_cmd->add_option("--pvalue-seed", morans_args.pvalue_seed);

  SplitArgs split_args;
  CLI::App* split_cmd = app.add_subcommand("split", "Build cross-validation folds");
  split_cmd->add_option("--features", split_args.features)->required();
  split_cmd->add_option("--method", split_args.method)
      ->check(CLI::IsMember({"random", "kmeans_location", "two_stage"}));
  split_cmd->add_option("--seed", split_args.seed)->required();
  split_cmd->add_option("--n-folds", split_args.n_folds);
  split_cmd->add_option("--stage1-k", split_args.stage1_k);
  split_cmd->add_option("--min-folds", split_args.min_folds);
  split_cmd->add_option("--separation-r", split_args.separation_r);
  split_cmd->add_option("--out", split_args.out);
  split_cmd->add_option("--audit", split_args.audit_path);

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Cross-validate the boosted-tree model");
  train_cmd->add_option("--features", train_args.features)->required();
  train_cmd->add_option("--folds", train_args.folds)->required();
  train_cmd->add_option("--seed", train_args.hp.seed)->required();
  add_hyperparam_flags(train_cmd, train_args.hp);
  train_cmd->add_option("--out-eval", train_args.out_eval);
  train_cmd->add_option("--out-model", train_args.out_model);
  train_cmd->add_option("--learning-curve", train_args.curve_sizes,
                        "Comma list of training-size fractions");
  train_cmd->add_option("--out-curve", train_args.out_curve);

  SemArgs sem_args;
  CLI::App* sem_cmd = app.add_subcommand("sem", "Cross-validate with SEM correction");
  sem_cmd->add_option("--features", sem_args.features)->required();
  sem_cmd->add_option("--folds", sem_args.folds)->required();
  sem_cmd->add_option("--seed", sem_args.hp.seed)->required();
  add_hyperparam_flags(sem_cmd, sem_args.hp);
  sem_cmd->add_option("--distance-cells", sem_args.distance_cells);
  sem_cmd->add_option("--knn", sem_args.knn, "use k-nearest-neighbor weights instead");
  sem_cmd->add_option("--out-eval", sem_args.out_eval);
  sem_cmd->add_option("--out-report", sem_args.out_report);

  PlanArgs plan_args;
  CLI::App* plan_cmd = app.add_subcommand("plan", "Bandwidth planning tables and curves");
  plan_cmd->add_option("--mae", plan_args.mae);
  plan_cmd->add_option("--eta", plan_args.eta);
  plan_cmd->add_option("--kappa", plan_args.kappa);
  plan_cmd->add_option("--mae-list", plan_args.mae_list);
  plan_cmd->add_option("--etas", plan_args.etas);
  plan_cmd->add_option("--methods", plan_args.methods);
  plan_cmd->add_option("--out-bde", plan_args.out_bde);
  plan_cmd->add_option("--features", plan_args.features);
  plan_cmd->add_option("--bandwidths", plan_args.bandwidths);
  plan_cmd->add_option("--out-curves", plan_args.out_curves);
  plan_cmd->add_flag("--case-study", plan_args.case_study);
  plan_cmd->add_option("--seed", plan_args.seed);

  std::string config_path, out_dir_override;
  CLI::App* pipe_cmd = app.add_subcommand("pipeline", "Run the full pipeline from a config");
  pipe_cmd->add_option("--config", config_path)->required();
  pipe_cmd->add_option("--out-dir", out_dir_override);

  try {
    app.parse(argc, argv);
    if (plan_args.case_study && plan_cmd->count("--seed") == 0)
      throw std::invalid_argument("plan: --seed is required for the case study");
    if (*synth_cmd) return cmd_synth(synth_args);
    if (*map_cmd) return cmd_map(map_args);
    if (*morans_cmd) return cmd_morans(morans_args);
    if (*split_cmd) return cmd_split(split_args);
    if (*train_cmd) return cmd_train(train_args);
    if (*sem_cmd) return cmd_sem(sem_args);
    if (*plan_cmd) return cmd_plan(plan_args);
    if (*pipe_cmd) return cmd_pipeline(config_path, out_dir_override);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const io::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
