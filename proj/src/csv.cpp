#include "gridcast/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gridcast::io {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& path, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path, line, "expected a number, got '" + s + "'");
  }
}

int parse_int(const std::string& s, const std::string& path, int line) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path, line, "expected an integer, got '" + s + "'");
  }
}

struct CsvDoc {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> row_lines;
};

CsvDoc read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path);
  CsvDoc doc;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      doc.header = split_line(line);
      have_header = true;
      continue;
    }
    doc.rows.push_back(split_line(line));
    doc.row_lines.push_back(line_no);
    if (doc.rows.back().size() != doc.header.size())
      throw ParseError(path, line_no,
                       "expected " + std::to_string(doc.header.size()) + " fields, got " +
                           std::to_string(doc.rows.back().size()));
  }
  if (!have_header) throw ParseError(path, line_no, "missing header row");
  return doc;
}

}  // namespace

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path);
  out << content;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_features_csv(const std::string& path, const GridIndex& grid,
                        const FeatureMatrix& features, const std::vector<double>* y,
                        std::uint64_t config_hash) {
  std::ostringstream out;
  out << "# config " << std::hex << config_hash << std::dec << "\n";
  out << "cell_id,row,col,cx,cy";
  for (const FeatureColumn& c : features.schema().columns) out << "," << c.name;
  if (y) out << ",y";
  out << "\n";
  for (int i = 0; i < grid.n_cells(); ++i) {
    const GridCell& cell = grid.cell(i);
    out << cell.id << "," << cell.row << "," << cell.col << "," << fmt(cell.centroid.x)
        << "," << fmt(cell.centroid.y);
    for (int c = 0; c < features.n_cols(); ++c) out << "," << fmt(features.at(i, c));
    if (y) out << "," << fmt((*y)[i]);
    out << "\n";
  }
  spit(path, out.str());
}

FeaturesCsv read_features_csv(const std::string& path) {
  const CsvDoc doc = read_csv(path);
  const std::vector<std::string> required = {"cell_id", "row", "col", "cx", "cy"};
  for (std::size_t i = 0; i < required.size(); ++i)
    if (i >= doc.header.size() || doc.header[i] != required[i])
      throw ParseError(path, 1, "features header must start with cell_id,row,col,cx,cy");

  const bool has_y = !doc.header.empty() && doc.header.back() == "y";
  const int first_feature = 5;
  const int n_features = static_cast<int>(doc.header.size()) - first_feature - (has_y ? 1 : 0);
  if (n_features < 0) throw ParseError(path, 1, "no feature columns");

  const int n = static_cast<int>(doc.rows.size());
  if (n == 0) throw ParseError(path, 2, "no data rows");

  int n_rows_grid = 0, n_cols_grid = 0;
  for (int i = 0; i < n; ++i) {
    n_rows_grid = std::max(n_rows_grid, parse_int(doc.rows[i][1], path, doc.row_lines[i]) + 1);
    n_cols_grid = std::max(n_cols_grid, parse_int(doc.rows[i][2], path, doc.row_lines[i]) + 1);
  }
  if (n != n_rows_grid * n_cols_grid)
    throw ParseError(path, 1, "rows do not form a dense grid");

  // Recover cell size and origin from the centroid lattice.
  double cell_size = GridIndex::kDefaultCellSize;
  const int r0 = parse_int(doc.rows[0][1], path, doc.row_lines[0]);
  const int c0 = parse_int(doc.rows[0][2], path, doc.row_lines[0]);
  const double cx0 = parse_double(doc.rows[0][3], path, doc.row_lines[0]);
  const double cy0 = parse_double(doc.rows[0][4], path, doc.row_lines[0]);
  for (int i = 1; i < n; ++i) {
    const int c = parse_int(doc.rows[i][2], path, doc.row_lines[i]);
    if (c != c0) {
      cell_size = (parse_double(doc.rows[i][3], path, doc.row_lines[i]) - cx0) / (c - c0);
      break;
    }
    const int r = parse_int(doc.rows[i][1], path, doc.row_lines[i]);
    if (r != r0) {
      cell_size = (parse_double(doc.rows[i][4], path, doc.row_lines[i]) - cy0) / (r - r0);
      break;
    }
  }

  FeaturesCsv out;
  const double origin_x = cx0 - (c0 + 0.5) * cell_size;
  const double origin_y = cy0 - (r0 + 0.5) * cell_size;
  out.grid = GridIndex({origin_x, origin_y}, cell_size, n_rows_grid, n_cols_grid);

  std::vector<MappedColumn> columns(static_cast<std::size_t>(n_features));
  for (int f = 0; f < n_features; ++f) {
    columns[f].name = doc.header[first_feature + f];
    columns[f].kind = columns[f].name.rfind("landuse=", 0) == 0 ? FeatureKind::kCategorical
                                                                : FeatureKind::kIntensive;
    columns[f].values.assign(static_cast<std::size_t>(n), 0.0);
  }
  std::vector<double> y_values(static_cast<std::size_t>(n), 0.0);

  for (int i = 0; i < n; ++i) {
    const int id = parse_int(doc.rows[i][0], path, doc.row_lines[i]);
    if (id < 0 || id >= n) throw ParseError(path, doc.row_lines[i], "cell_id out of range");
    for (int f = 0; f < n_features; ++f)
      columns[f].values[id] = parse_double(doc.rows[i][first_feature + f], path,
                                           doc.row_lines[i]);
    if (has_y)
      y_values[id] = parse_double(doc.rows[i][doc.header.size() - 1], path, doc.row_lines[i]);
  }

  out.features = assemble_features(out.grid, columns);
  if (has_y) out.y = std::move(y_values);
  return out;
}

void write_folds_csv(const std::string& path, const FoldAssignment& folds,
                     std::uint64_t config_hash) {
  std::ostringstream out;
  out << "# config " << std::hex << config_hash << std::dec << "\n";
  out << "# method " << to_string(folds.method) << "\n";
  out << "cell_id,fold,stage1,stage2,context_class\n";
  for (std::size_t i = 0; i < folds.fold.size(); ++i)
    out << i << "," << folds.fold[i] << "," << folds.stage1[i] << "," << folds.stage2[i]
        << "," << folds.context_class[i] << "\n";
  spit(path, out.str());
}

FoldAssignment read_folds_csv(const std::string& path) {
  // Method comment survives the round trip when present.
  SplitMethod method = SplitMethod::kRandom;
  {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line) && !line.empty() && line[0] == '#') {
      if (line.rfind("# method ", 0) == 0) {
        const std::string m = line.substr(9);
        if (m == "two_stage") method = SplitMethod::kTwoStage;
        else if (m == "kmeans_location") method = SplitMethod::kKmeansLocation;
      }
    }
  }
  const CsvDoc doc = read_csv(path);
  const std::vector<std::string> expect = {"cell_id", "fold", "stage1", "stage2",
                                           "context_class"};
  if (doc.header != expect)
    throw ParseError(path, 1, "folds header must be cell_id,fold,stage1,stage2,context_class");
  const int n = static_cast<int>(doc.rows.size());
  FoldAssignment folds;
  folds.method = method;
  folds.fold.assign(n, 0);
  folds.stage1.assign(n, -1);
  folds.stage2.assign(n, -1);
  folds.context_class.assign(n, -1);
  int max_fold = -1;
  for (int i = 0; i < n; ++i) {
    const int id = parse_int(doc.rows[i][0], path, doc.row_lines[i]);
    if (id < 0 || id >= n) throw ParseError(path, doc.row_lines[i], "cell_id out of range");
    folds.fold[id] = parse_int(doc.rows[i][1], path, doc.row_lines[i]);
    folds.stage1[id] = parse_int(doc.rows[i][2], path, doc.row_lines[i]);
    folds.stage2[id] = parse_int(doc.rows[i][3], path, doc.row_lines[i]);
    folds.context_class[id] = parse_int(doc.rows[i][4], path, doc.row_lines[i]);
    max_fold = std::max(max_fold, folds.fold[id]);
  }
  folds.n_folds = max_fold + 1;
  return folds;
}

void write_profile_csv(const std::string& path, const MoranProfile& profile,
                       std::uint64_t config_hash) {
  std::ostringstream out;
  out << "# config " << std::hex << config_hash << std::dec << "\n";
  out << "# range_cells " << fmt(profile.range_cells) << "\n";
  out << "distance,I\n";
  for (const MoranProfilePoint& p : profile.points)
    out << fmt(p.distance_cells) << "," << fmt(p.i) << "\n";
  spit(path, out.str());
}

void write_local_csv(const std::string& path, const LocalMoranMap& map,
                     std::uint64_t config_hash) {
  std::ostringstream out;
  out << "# config " << std::hex << config_hash << std::dec << "\n";
  out << "cell_id,Ii,category\n";
  for (std::size_t i = 0; i < map.i.size(); ++i)
    out << i << "," << fmt(map.i[i]) << "," << to_string(map.category[i]) << "\n";
  spit(path, out.str());
}

void write_audit_json(const std::string& path, const LeakageAudit& audit,
                      std::uint64_t config_hash) {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["min_interfold_distance_m"] = audit.min_interfold_distance_m;
  j["boundary_pair_count"] = audit.boundary_pair_count;
  j["fraction_boundary"] = audit.fraction_boundary;
  spit(path, j.dump(2) + "\n");
}

void write_sem_json(const std::string& path, const SemModel& sem, std::uint64_t config_hash) {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["lambda"] = sem.lambda;
  j["innovation_sse"] = sem.innovation_sse;
  j["moran_before"] = sem.moran_defined ? nlohmann::json(sem.moran_before) : nlohmann::json();
  j["moran_after"] = sem.moran_defined ? nlohmann::json(sem.moran_after) : nlohmann::json();
  nlohmann::json comps = nlohmann::json::array();
  for (const SemComponentFit& c : sem.components)
    comps.push_back({{"size", c.size}, {"lambda", c.lambda}, {"innovation_sse", c.innovation_sse}});
  j["per_component"] = std::move(comps);
  spit(path, j.dump(2) + "\n");
}

void write_congestion_csv(const std::string& path,
                          const std::vector<CongestionCurve>& curves,
                          std::uint64_t config_hash) {
  std::ostringstream out;
  out << "# config " << std::hex << config_hash << std::dec << "\n";
  out << "B_MHz,label,p_cong\n";
  for (const CongestionCurve& c : curves)
    for (const CongestionPoint& p : c.points)
      out << fmt(p.bandwidth_hz / 1e6) << "," << c.label << "," << fmt(p.p_cong) << "\n";
  spit(path, out.str());
}

void write_bde_table_csv(const std::string& path, const std::vector<double>& etas,
                         const std::vector<std::string>& methods,
                         const std::vector<std::vector<double>>& bde_hz,
                         std::uint64_t config_hash) {
  std::ostringstream out;
  out << "# config " << std::hex << config_hash << std::dec << "\n";
  out << "eta_bps_hz";
  for (const std::string& m : methods) out << "," << m;
  out << "\n";
  char buf[32];
  for (std::size_t r = 0; r < etas.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%.1f", etas[r]);
    out << buf;
    for (std::size_t c = 0; c < methods.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.1f", bde_hz[r][c] / 1e6);
      out << "," << buf;
    }
    out << "\n";
  }
  spit(path, out.str());
}

GeometryLayer read_geometry_json(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, static_cast<int>(e.byte), std::string("invalid JSON: ") + e.what());
  }
  const std::string type = j.at("type").get<std::string>();
  GeometryLayer out;
  if (type == "polygon") {
    PolygonLayer layer;
    for (const auto& f : j.at("features")) {
      PolygonFeature poly;
      for (const auto& pt : f.at("geometry"))
        poly.ring.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
      if (f.contains("value")) poly.value = f.at("value").get<double>();
      if (f.contains("class")) poly.cls = f.at("class").get<std::string>();
      layer.polygons.push_back(std::move(poly));
    }
    out.polygons = std::move(layer);
  } else if (type == "point") {
    PointLayer layer;
    for (const auto& f : j.at("features")) {
      PointFeature pf;
      const auto& geom = f.at("geometry");
      pf.p = {geom.at(0).get<double>(), geom.at(1).get<double>()};
      if (f.contains("weight")) pf.weight = f.at("weight").get<double>();
      layer.points.push_back(pf);
    }
    out.points = std::move(layer);
  } else {
    throw ParseError(path, 1, "layer type must be 'polygon' or 'point'");
  }
  return out;
}

}  // namespace gridcast::io
