#include "gridcast/layers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "gridcast/kernels.hpp"

namespace gridcast {

namespace {

constexpr double kClipToleranceM2 = 1e-9;

// Signed shoelace area; positive for counter-clockwise rings.
double signed_area(std::span<const Point> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

enum class Edge { kLeft, kRight, kBottom, kTop };

bool inside(const Point& p, Edge e, const CellBounds& r) {
  switch (e) {
    case Edge::kLeft: return p.x >= r.x_min;
    case Edge::kRight: return p.x <= r.x_max;
    case Edge::kBottom: return p.y >= r.y_min;
    case Edge::kTop: return p.y <= r.y_max;
  }
  return false;
}

Point intersect(const Point& a, const Point& b, Edge e, const CellBounds& r) {
  double t;
  switch (e) {
    case Edge::kLeft: t = (r.x_min - a.x) / (b.x - a.x); return {r.x_min, a.y + t * (b.y - a.y)};
    case Edge::kRight: t = (r.x_max - a.x) / (b.x - a.x); return {r.x_max, a.y + t * (b.y - a.y)};
    case Edge::kBottom: t = (r.y_min - a.y) / (b.y - a.y); return {a.x + t * (b.x - a.x), r.y_min};
    case Edge::kTop: t = (r.y_max - a.y) / (b.y - a.y); return {a.x + t * (b.x - a.x), r.y_max};
  }
  return a;
}

std::vector<Point> clip_edge(std::span<const Point> poly, Edge e, const CellBounds& r) {
  std::vector<Point> out;
  const std::size_t n = poly.size();
  out.reserve(n + 4);
  for (std::size_t i = 0; i < n; ++i) {
    const Point& cur = poly[i];
    const Point& prev = poly[(i + n - 1) % n];
    const bool cur_in = inside(cur, e, r);
    const bool prev_in = inside(prev, e, r);
    if (cur_in) {
      if (!prev_in) out.push_back(intersect(prev, cur, e, r));
      out.push_back(cur);
    } else if (prev_in) {
      out.push_back(intersect(prev, cur, e, r));
    }
  }
  return out;
}

struct BBox {
  double x_min, y_min, x_max, y_max;
};

BBox ring_bbox(std::span<const Point> ring) {
  BBox b{ring[0].x, ring[0].y, ring[0].x, ring[0].y};
  for (const Point& p : ring) {
    b.x_min = std::min(b.x_min, p.x);
    b.x_max = std::max(b.x_max, p.x);
    b.y_min = std::min(b.y_min, p.y);
    b.y_max = std::max(b.y_max, p.y);
  }
  return b;
}

// Row/col index window of cells a polygon bbox can touch.
struct CellWindow {
  int r0, r1, c0, c1;  // inclusive
  bool empty;
};

CellWindow cell_window(const GridIndex& grid, const BBox& b) {
  const double cs = grid.cell_size();
  const Point o = grid.origin();
  int c0 = static_cast<int>(std::floor((b.x_min - o.x) / cs));
  int c1 = static_cast<int>(std::floor((b.x_max - o.x) / cs));
  int r0 = static_cast<int>(std::floor((b.y_min - o.y) / cs));
  int r1 = static_cast<int>(std::floor((b.y_max - o.y) / cs));
  c0 = std::max(c0, 0);
  r0 = std::max(r0, 0);
  c1 = std::min(c1, grid.n_cols() - 1);
  r1 = std::min(r1, grid.n_rows() - 1);
  return {r0, r1, c0, c1, r0 > r1 || c0 > c1};
}

// Intersection area of a polygon with every cell it touches.
// Visits O(bbox cells) and clips against each.
template <typename Fn>
void for_each_overlap(const GridIndex& grid, const PolygonFeature& poly, Fn&& fn) {
  const BBox b = ring_bbox(poly.ring);
  const CellWindow w = cell_window(grid, b);
  if (w.empty) return;
  for (int r = w.r0; r <= w.r1; ++r) {
    for (int c = w.c0; c <= w.c1; ++c) {
      const int id = r * grid.n_cols() + c;
      const CellBounds rect = grid.bounds(id);
      std::vector<Point> clipped = clip_to_rect(poly.ring, rect);
      const double a = polygon_area(clipped);
      if (a > kClipToleranceM2) fn(id, a);
    }
  }
}

}  // namespace

double polygon_area(std::span<const Point> ring) { return std::fabs(signed_area(ring)); }

std::vector<Point> clip_to_rect(std::span<const Point> ring, const CellBounds& rect) {
  std::vector<Point> poly(ring.begin(), ring.end());
  for (Edge e : {Edge::kLeft, Edge::kRight, Edge::kBottom, Edge::kTop}) {
    if (poly.size() < 3) return {};
    poly = clip_edge(poly, e, rect);
  }
  if (poly.size() < 3) return {};
  return poly;
}

ArealMapResult map_areal_layer(const GridIndex& grid, const PolygonLayer& layer,
                               ArealMode mode) {
  const int n = grid.n_cells();
  ArealMapResult out;
  out.values.assign(n, 0.0);
  out.flagged.assign(n, 0);

  std::vector<double> weight_sum;  // intensive: sum of a_ip per cell
  if (mode == ArealMode::kIntensive) weight_sum.assign(n, 0.0);

  for (const PolygonFeature& poly : layer.polygons) {
    const double total = polygon_area(poly.ring);
    if (total <= kClipToleranceM2) {
      ++out.degenerate_skipped;
      continue;
    }
    for_each_overlap(grid, poly, [&](int cell, double a) {
      if (mode == ArealMode::kExtensive) {
        out.values[cell] += poly.value * (a / total);
      } else {
        out.values[cell] += poly.value * a;
        weight_sum[cell] += a;
      }
    });
  }

  if (mode == ArealMode::kIntensive) {
    for (int i = 0; i < n; ++i) {
      if (weight_sum[i] > 0.0) {
        out.values[i] /= weight_sum[i];
      } else {
        out.values[i] = 0.0;  // default for uncovered cells
        out.flagged[i] = 1;
      }
    }
  }
  return out;
}

CategoricalMapResult map_categorical_layer(const GridIndex& grid, const PolygonLayer& layer) {
  const int n = grid.n_cells();

  std::vector<std::string> class_names;
  for (const PolygonFeature& p : layer.polygons) class_names.push_back(p.cls);
  std::sort(class_names.begin(), class_names.end());
  class_names.erase(std::unique(class_names.begin(), class_names.end()), class_names.end());

  std::map<std::string, int> class_index;
  for (std::size_t i = 0; i < class_names.size(); ++i)
    class_index[class_names[i]] = static_cast<int>(i);

  // Accumulate intersected area per (cell, class).
  std::vector<std::vector<double>> area(static_cast<std::size_t>(n),
                                        std::vector<double>(class_names.size(), 0.0));
  int degenerate = 0;
  for (const PolygonFeature& poly : layer.polygons) {
    if (polygon_area(poly.ring) <= kClipToleranceM2) {
      ++degenerate;
      continue;
    }
    const int ci = class_index[poly.cls];
    for_each_overlap(grid, poly, [&](int cell, double a) { area[cell][ci] += a; });
  }
  (void)degenerate;

  CategoricalMapResult out;
  bool any_none = false;
  out.label.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    double best = 0.0;
    int best_class = -1;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      if (area[i][c] > best + kClipToleranceM2) {  // strict improvement keeps lowest index on ties
        best = area[i][c];
        best_class = static_cast<int>(c);
      }
    }
    if (best_class < 0) {
      any_none = true;
    }
    out.label[i] = best_class;  // -1 marks "none" until classes are finalized
  }

  out.classes = class_names;
  if (any_none) out.classes.push_back("none");
  const int none_index = static_cast<int>(out.classes.size()) - 1;
  for (int i = 0; i < n; ++i)
    if (out.label[i] < 0) out.label[i] = none_index;

  out.one_hot.assign(out.classes.size(), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) out.one_hot[out.label[i]][i] = 1.0;
  return out;
}

PointMapResult map_point_layer(const GridIndex& grid, const PointLayer& layer,
                               bool normalize_by_area) {
  PointMapResult out;
  out.values.assign(grid.n_cells(), 0.0);
  for (const PointFeature& pf : layer.points) {
    const int cell = grid.cell_at(pf.p);
    if (cell < 0) {
      ++out.ignored_outside;
      continue;
    }
    out.values[cell] += pf.weight;
  }
  if (normalize_by_area) {
    const double inv_area = 1.0 / grid.cell_area_km2();
    for (double& v : out.values) v *= inv_area;
  }
  return out;
}

FeatureMatrix assemble_features(const GridIndex& grid, const std::vector<MappedColumn>& columns) {
  const int n = grid.n_cells();
  FeatureSchema schema;
  for (const MappedColumn& col : columns) {
    if (static_cast<int>(col.values.size()) != n)
      throw std::invalid_argument("assemble_features: column '" + col.name +
                                  "' length does not match grid cell count");
    FeatureColumn fc;
    fc.name = col.name;
    fc.kind = col.kind;
    schema.columns.push_back(fc);
  }

  FeatureMatrix fm(schema, n);
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (int r = 0; r < n; ++r) fm.at(r, static_cast<int>(c)) = columns[c].values[r];

  // Population sigma per column; zero-variance columns stay in the matrix
  // but are excluded from dissimilarity computations.
  for (int c = 0; c < fm.n_cols(); ++c) {
    std::vector<double> col = fm.column(c);
    const double mean = kern::sum(col) / n;
    const double sse = kern::sse_about(col, mean);
    const double sigma = std::sqrt(sse / n);
    fm.schema().columns[c].sigma = sigma;
    fm.schema().columns[c].in_dissimilarity = sigma > 0.0;
  }
  return fm;
}

}  // namespace gridcast
