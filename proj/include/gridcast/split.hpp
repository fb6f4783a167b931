#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridcast/grid.hpp"
#include "gridcast/layers.hpp"

namespace gridcast {

struct SpatialClustering {
  int k = 0;
  std::vector<int> assignment;   // cell -> cluster id
  std::vector<Point> centroids;  // one per cluster
  double objective = 0.0;        // within-cluster sum of squared distances
  std::vector<double> objective_trace;  // per Lloyd iteration, non-increasing
};

/// Lloyd's algorithm over grid-cell centroids with k-means++ seeding.
/// Deterministic under seed; empty clusters are re-seeded at the farthest
/// point from its centroid assignment.
SpatialClustering kmeans_centroids(const GridIndex& grid, int k, std::uint64_t seed);

/// Normalized L1 dissimilarity between two feature rows over the selected
/// columns: sum_l |a_l - b_l| / sigma_l. Zero-variance columns are skipped.
double context_dissimilarity(std::span<const double> a, std::span<const double> b,
                             const FeatureSchema& schema, std::span<const int> columns);

struct SubClustering {
  int n_subclusters = 0;
  std::vector<int> sub_of_cell;       // cell -> global sub-cluster id (-1 allowed pre-fill)
  std::vector<int> parent_cluster;    // sub-cluster -> stage-1 cluster
  std::vector<int> dominant_class;    // sub-cluster -> context class
  std::vector<std::vector<int>> members;  // sub-cluster -> cells
};

struct RefineParams {
  std::vector<int> context_columns;       // schema indices used by the dissimilarity
  std::optional<double> context_radius;   // default: median pairwise d per cluster
};

/// Agglomerative average-linkage refinement of each stage-1 cluster under
/// the normalized context dissimilarity. Sub-clusters never cross stage-1
/// boundaries.
SubClustering refine_context(const SpatialClustering& stage1, const FeatureMatrix& features,
                             std::span<const int> cell_class, const RefineParams& params);

enum class SplitMethod { kRandom, kKmeansLocation, kTwoStage };

std::string to_string(SplitMethod m);

struct FoldAssignment {
  int n_folds = 0;
  std::vector<int> fold;           // cell -> fold id
  std::vector<int> stage1;         // cell -> stage-1 cluster (-1 for random)
  std::vector<int> stage2;         // cell -> sub-cluster (-1 when absent)
  std::vector<int> context_class;  // cell -> context class (-1 when unknown)
  SplitMethod method = SplitMethod::kRandom;
};

struct BuildFoldParams {
  int min_folds = 3;
  double separation_r_cells = 0.0;  // informative; spatial separation is inherited
  double size_balance = 2.0;        // max fold size / min fold size allowed
};

/// Greedy merge of stage-1 clusters into the smallest fold count >= min_folds
/// whose folds are context-diverse and size-balanced. Stage-1 clusters are
/// never split.
FoldAssignment build_folds(const SpatialClustering& stage1, const SubClustering& sub,
                           const GridIndex& grid, const BuildFoldParams& params);

/// Uniform seeded partition into n_folds near-equal folds.
FoldAssignment random_split(const GridIndex& grid, int n_folds, std::uint64_t seed);

/// Location-only folds: one fold per spatial k-means cluster.
FoldAssignment folds_from_clusters(const SpatialClustering& stage1,
                                   std::span<const int> cell_class);

struct LeakageAudit {
  double min_interfold_distance_m = 0.0;
  long long boundary_pair_count = 0;
  double fraction_boundary = 0.0;  // cells with a cross-fold neighbor within r
};

/// Counts cross-fold cell pairs with centroid distance <= r cells.
LeakageAudit audit_leakage(const FoldAssignment& folds, const GridIndex& grid,
                           double r_cells);

/// Stage-1 k from the Moran correlation range: largest k whose mean cluster
/// diameter still spans at least twice the range.
int choose_stage1_k(const GridIndex& grid, double range_cells, int min_folds);

}  // namespace gridcast
