#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridcast/grid.hpp"
#include "gridcast/layers.hpp"
#include "gridcast/morans.hpp"
#include "gridcast/planning.hpp"
#include "gridcast/sem.hpp"
#include "gridcast/split.hpp"

namespace gridcast::io {

/// Bad or missing input (maps to CLI exit code 2).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse failure with a 1-based line number.
class ParseError : public InputError {
 public:
  ParseError(const std::string& path, int line, const std::string& what)
      : InputError(path + ":" + std::to_string(line) + ": " + what) {}
};

std::string slurp(const std::string& path);
void spit(const std::string& path, const std::string& content);
std::uint64_t fnv1a(std::string_view text);

// --- features CSV: cell_id,row,col,cx,cy,<feature columns...>[,y] ---

void write_features_csv(const std::string& path, const GridIndex& grid,
                        const FeatureMatrix& features, const std::vector<double>* y,
                        std::uint64_t config_hash);

struct FeaturesCsv {
  GridIndex grid{{0.0, 0.0}, GridIndex::kDefaultCellSize, 1, 1};
  FeatureMatrix features;
  std::optional<std::vector<double>> y;
};

FeaturesCsv read_features_csv(const std::string& path);

// --- folds CSV: cell_id,fold,stage1,stage2,context_class ---

void write_folds_csv(const std::string& path, const FoldAssignment& folds,
                     std::uint64_t config_hash);
FoldAssignment read_folds_csv(const std::string& path);

// --- plot-ready stats outputs ---

void write_profile_csv(const std::string& path, const MoranProfile& profile,
                       std::uint64_t config_hash);
void write_local_csv(const std::string& path, const LocalMoranMap& map,
                     std::uint64_t config_hash);
void write_audit_json(const std::string& path, const LeakageAudit& audit,
                      std::uint64_t config_hash);
void write_sem_json(const std::string& path, const SemModel& sem, std::uint64_t config_hash);

void write_congestion_csv(const std::string& path,
                          const std::vector<CongestionCurve>& curves,
                          std::uint64_t config_hash);

/// Rows are eta values, columns methods; entries in MHz at one decimal.
void write_bde_table_csv(const std::string& path, const std::vector<double>& etas,
                         const std::vector<std::string>& methods,
                         const std::vector<std::vector<double>>& bde_hz,
                         std::uint64_t config_hash);

// --- geometry layer JSON ---
// {"type":"polygon"|"point","features":[{"geometry":..., "value":v | "class":s, "weight":w?}]}

struct GeometryLayer {
  std::optional<PolygonLayer> polygons;
  std::optional<PointLayer> points;
};

GeometryLayer read_geometry_json(const std::string& path);

}  // namespace gridcast::io
