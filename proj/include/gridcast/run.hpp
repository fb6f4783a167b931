#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridcast/gbt.hpp"
#include "gridcast/planning.hpp"
#include "gridcast/sem.hpp"
#include "gridcast/synth.hpp"

namespace gridcast {

struct MoransRunConfig {
  std::vector<double> thresholds_cells = {1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0};
  double range_cutoff = 0.2;
};

struct SplitRunConfig {
  int min_folds = 3;
  int stage1_k = 0;   // 0: derived from the Moran range
  int n_folds = 0;    // 0: use the two-stage fold count for all methods
  std::vector<std::string> context_columns;  // empty: all "landuse=" columns
  std::optional<double> context_radius;
};

struct SemRunConfig {
  bool enabled = true;
  WeightsKind kind = WeightsKind::kDistanceThreshold;
  double distance_cells = 2.0;
  int k = 6;  // kNN mode; symmetrized by union for the fit
};

struct PlanningRunConfig {
  double kappa = 50e3;
  double rho_oh = 0.0;
  double delta = 0.05;
  double eta = 2.0;
  std::vector<double> etas = {2.0, 3.0, 3.5};
  std::vector<double> candidate_bandwidths_mhz = {0.0,  10.0, 20.0, 30.0, 40.0,
                                                  50.0, 60.0, 70.0, 80.0, 90.0,
                                                  100.0, 120.0, 150.0, 200.0};
  std::optional<std::vector<double>> fixed_mae;  // overrides measured MAEs in the BDE table
};

/// A run is reproducible from this structure alone.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "run_out";
  std::optional<CityRecipe> synth;
  std::optional<std::string> features_csv;
  WeightsParam weights{WeightsKind::kDistanceThreshold, 0.0, 0};  // 0: 1.5 cells default
  MoransRunConfig morans;
  SplitRunConfig split;
  GbtHyperParams regressor;
  SemRunConfig sem;
  PlanningRunConfig planning;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  std::uint64_t hash() const;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct MethodMetrics {
  double mae = 0.0;
  std::optional<double> r2;
};

struct RunManifest {
  std::uint64_t config_hash = 0;
  std::vector<StageTiming> timings;
  std::vector<std::string> files;
  std::map<std::string, MethodMetrics> metrics;  // by method label
};

/// Full pipeline: ingest/generate, map, profile, split three ways,
/// cross-validate, SEM-correct, and emit planning tables. Throws with the
/// failing stage name; partial outputs are removed on error.
RunManifest run_pipeline(const RunConfig& config);

// Stage-wise helpers shared by the CLI subcommands.
std::vector<int> context_classes_from_features(const FeatureMatrix& features,
                                               const std::vector<std::string>& context_columns);
std::vector<int> context_column_indices(const FeatureMatrix& features,
                                        const std::vector<std::string>& context_columns);

struct SemCvOutcome {
  EvalReport corrected;
  std::vector<SemModel> per_fold;
  std::vector<int> fold_sizes;
};

struct SemNeighborhood {
  WeightsKind kind = WeightsKind::kDistanceThreshold;
  double distance_m = 0.0;
  int k = 0;
};

/// Per-fold SEM post-processing of a cross-validation result.
SemCvOutcome sem_correct_cv(const CvResult& cv, const FoldAssignment& folds,
                            const GridIndex& grid, std::span<const double> y,
                            const SemNeighborhood& neighborhood);
SemCvOutcome sem_correct_cv(const CvResult& cv, const FoldAssignment& folds,
                            const GridIndex& grid, std::span<const double> y,
                            double distance_m);

}  // namespace gridcast
