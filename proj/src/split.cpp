#include "gridcast/split.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "gridcast/kernels.hpp"
#include "gridcast/rng.hpp"

namespace gridcast {

std::string to_string(SplitMethod m) {
  switch (m) {
    case SplitMethod::kRandom: return "random";
    case SplitMethod::kKmeansLocation: return "kmeans_location";
    case SplitMethod::kTwoStage: return "two_stage";
  }
  return "random";
}

SpatialClustering kmeans_centroids(const GridIndex& grid, int k, std::uint64_t seed) {
  const int n = grid.n_cells();
  if (k < 1 || k > n) throw std::invalid_argument("kmeans_centroids: need 1 <= k <= n");

  std::vector<double> px(static_cast<std::size_t>(n)), py(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Point p = grid.centroid(i);
    px[i] = p.x;
    py[i] = p.y;
  }

  // k-means++ seeding.
  Rng rng(seed);
  std::vector<double> cx, cy;
  cx.reserve(k);
  cy.reserve(k);
  {
    const int first = static_cast<int>(rng.uniform_int(n));
    cx.push_back(px[first]);
    cy.push_back(py[first]);
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double dx = px[i] - cx[0];
      const double dy = py[i] - cy[0];
      d2[i] = dx * dx + dy * dy;
    }
    while (static_cast<int>(cx.size()) < k) {
      const double total = kern::sum(d2);
      int pick = 0;
      if (total <= 0.0) {
        // All remaining distances zero (duplicate centroids impossible on a
        // grid unless k > distinct points); fall back to the first unchosen.
        for (int i = 0; i < n; ++i)
          if (d2[i] > 0.0 || std::find(cx.begin(), cx.end(), px[i]) == cx.end()) {
            pick = i;
            break;
          }
      } else {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        pick = n - 1;
        for (int i = 0; i < n; ++i) {
          acc += d2[i];
          if (acc >= target) {
            pick = i;
            break;
          }
        }
      }
      cx.push_back(px[pick]);
      cy.push_back(py[pick]);
      for (int i = 0; i < n; ++i) {
        const double dx = px[i] - cx.back();
        const double dy = py[i] - cy.back();
        d2[i] = std::min(d2[i], dx * dx + dy * dy);
      }
    }
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  std::vector<int> next(static_cast<std::size_t>(n));
  std::vector<double> dist2(static_cast<std::size_t>(n));
  std::vector<double> trace;
  constexpr int kMaxIterations = 300;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    kern::nearest_centroid(px, py, cx, cy, next, dist2);
    trace.push_back(kern::sum(dist2));

    // Re-seed empty clusters at the point farthest from its centroid.
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) ++count[next[i]];
    bool reseeded = false;
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) continue;
      int far = 0;
      double best = -1.0;
      for (int i = 0; i < n; ++i) {
        if (count[next[i]] <= 1) continue;  // keep donor clusters nonempty
        if (dist2[i] > best) {
          best = dist2[i];
          far = i;
        }
      }
      --count[next[far]];
      cx[c] = px[far];
      cy[c] = py[far];
      next[far] = c;
      count[c] = 1;
      reseeded = true;
    }

    const bool stable = !reseeded && assign == next;
    assign = next;
    if (stable) break;

    // Update step.
    std::vector<double> sx(static_cast<std::size_t>(k), 0.0), sy(static_cast<std::size_t>(k), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (int i = 0; i < n; ++i) {
      sx[assign[i]] += px[i];
      sy[assign[i]] += py[i];
      ++count[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] == 0) continue;
      cx[c] = sx[c] / count[c];
      cy[c] = sy[c] / count[c];
    }
  }

  SpatialClustering out;
  out.k = k;
  out.assignment = assign;
  out.objective_trace = std::move(trace);
  // Final centroids and the objective evaluated at the returned assignment.
  std::vector<double> sx(static_cast<std::size_t>(k), 0.0), sy(static_cast<std::size_t>(k), 0.0);
  std::vector<int> count(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < n; ++i) {
    sx[assign[i]] += px[i];
    sy[assign[i]] += py[i];
    ++count[assign[i]];
  }
  out.centroids.resize(k);
  for (int c = 0; c < k; ++c) {
    if (count[c] == 0) throw std::runtime_error("kmeans_centroids: empty cluster persisted");
    out.centroids[c] = {sx[c] / count[c], sy[c] / count[c]};
  }
  double obj = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dx = px[i] - out.centroids[assign[i]].x;
    const double dy = py[i] - out.centroids[assign[i]].y;
    obj += dx * dx + dy * dy;
  }
  out.objective = obj;
  return out;
}

double context_dissimilarity(std::span<const double> a, std::span<const double> b,
                             const FeatureSchema& schema, std::span<const int> columns) {
  double d = 0.0;
  for (int c : columns) {
    const FeatureColumn& fc = schema.columns.at(static_cast<std::size_t>(c));
    if (!fc.in_dissimilarity || fc.sigma <= 0.0) continue;
    d += std::fabs(a[c] - b[c]) / fc.sigma;
  }
  return d;
}

namespace {

// Gathered context vectors enable the vectorized weighted-L1 kernel.
struct ContextView {
  std::vector<double> rows;       // n x m_used, row-major
  std::vector<double> inv_sigma;  // m_used
  int m_used = 0;

  std::span<const double> row(int i) const {
    return {rows.data() + static_cast<std::size_t>(i) * m_used,
            static_cast<std::size_t>(m_used)};
  }
};

ContextView gather_context(const FeatureMatrix& features, std::span<const int> columns) {
  ContextView v;
  std::vector<int> used;
  for (int c : columns) {
    const FeatureColumn& fc = features.schema().columns.at(static_cast<std::size_t>(c));
    if (fc.in_dissimilarity && fc.sigma > 0.0) {
      used.push_back(c);
      v.inv_sigma.push_back(1.0 / fc.sigma);
    }
  }
  v.m_used = static_cast<int>(used.size());
  v.rows.resize(static_cast<std::size_t>(features.n_rows()) * v.m_used);
  for (int i = 0; i < features.n_rows(); ++i) {
    const auto row = features.row(i);
    for (int j = 0; j < v.m_used; ++j)
      v.rows[static_cast<std::size_t>(i) * v.m_used + j] = row[used[j]];
  }
  return v;
}

int majority_class(std::span<const int> cells, std::span<const int> cell_class) {
  std::map<int, int> votes;
  for (int c : cells) ++votes[cell_class[c]];
  int best_class = -1, best_votes = -1;
  for (const auto& [cls, cnt] : votes) {
    if (cnt > best_votes) {  // map iterates ascending: ties keep smaller class
      best_votes = cnt;
      best_class = cls;
    }
  }
  return best_class;
}

double entropy(std::span<const int> counts) {
  double total = 0.0;
  for (int c : counts) total += c;
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (int c : counts) {
    if (c <= 0) continue;
    const double p = c / total;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

SubClustering refine_context(const SpatialClustering& stage1, const FeatureMatrix& features,
                             std::span<const int> cell_class, const RefineParams& params) {
  const int n = static_cast<int>(stage1.assignment.size());
  if (features.n_rows() != n)
    throw std::invalid_argument("refine_context: feature rows do not match clustering");

  const ContextView ctx = gather_context(features, params.context_columns);

  SubClustering out;
  out.sub_of_cell.assign(static_cast<std::size_t>(n), -1);

  for (int cluster = 0; cluster < stage1.k; ++cluster) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i)
      if (stage1.assignment[i] == cluster) members.push_back(i);
    const int m = static_cast<int>(members.size());
    if (m == 0) continue;

    // Pairwise dissimilarities within the cluster.
    std::vector<double> d(static_cast<std::size_t>(m) * m, 0.0);
    std::vector<double> upper;  // for the default radius
    for (int a = 0; a < m; ++a) {
      for (int b = a + 1; b < m; ++b) {
        const double dv = ctx.m_used == 0
                              ? 0.0
                              : kern::weighted_l1(ctx.row(members[a]), ctx.row(members[b]),
                                                  ctx.inv_sigma);
        d[static_cast<std::size_t>(a) * m + b] = dv;
        d[static_cast<std::size_t>(b) * m + a] = dv;
        upper.push_back(dv);
      }
    }

    double radius;
    if (params.context_radius) {
      radius = *params.context_radius;
    } else if (upper.empty()) {
      radius = 0.0;
    } else {
      // Half the median pairwise dissimilarity. The raw median equals the
      // cross-context distance whenever cross pairs dominate, which would
      // let two pure context blocks collapse into one sub-cluster.
      std::vector<double> sorted = upper;
      std::sort(sorted.begin(), sorted.end());
      radius = 0.5 * sorted[sorted.size() / 2];
    }

    // Average-linkage agglomeration; a merge is allowed while the merged
    // group's mean internal dissimilarity stays within the radius.
    struct Group {
      std::vector<int> local;  // indices into members
      double internal_sum = 0.0;
      bool alive = true;
    };
    std::vector<Group> groups(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) groups[i].local = {i};
    // linkage[a][b] = average pairwise distance between groups a and b
    std::vector<double> linkage = d;

    int alive = m;
    while (alive > 1) {
      int best_a = -1, best_b = -1;
      double best_link = std::numeric_limits<double>::infinity();
      for (int a = 0; a < m; ++a) {
        if (!groups[a].alive) continue;
        for (int b = a + 1; b < m; ++b) {
          if (!groups[b].alive) continue;
          const double l = linkage[static_cast<std::size_t>(a) * m + b];
          if (l < best_link) {
            best_link = l;
            best_a = a;
            best_b = b;
          }
        }
      }
      const double na = static_cast<double>(groups[best_a].local.size());
      const double nb = static_cast<double>(groups[best_b].local.size());
      const double merged_sum =
          groups[best_a].internal_sum + groups[best_b].internal_sum + best_link * na * nb;
      const double merged_pairs = 0.5 * (na + nb) * (na + nb - 1.0);
      const double merged_mean = merged_pairs > 0.0 ? merged_sum / merged_pairs : 0.0;
      if (merged_mean > radius + 1e-12) break;

      // Lance-Williams average-linkage update into best_a.
      for (int cidx = 0; cidx < m; ++cidx) {
        if (!groups[cidx].alive || cidx == best_a || cidx == best_b) continue;
        const double la = linkage[static_cast<std::size_t>(std::min(cidx, best_a)) * m +
                                  std::max(cidx, best_a)];
        const double lb = linkage[static_cast<std::size_t>(std::min(cidx, best_b)) * m +
                                  std::max(cidx, best_b)];
        const double lnew = (na * la + nb * lb) / (na + nb);
        linkage[static_cast<std::size_t>(std::min(cidx, best_a)) * m +
                std::max(cidx, best_a)] = lnew;
        linkage[static_cast<std::size_t>(std::max(cidx, best_a)) * m +
                std::min(cidx, best_a)] = lnew;
      }
      groups[best_a].internal_sum = merged_sum;
      groups[best_a].local.insert(groups[best_a].local.end(), groups[best_b].local.begin(),
                                  groups[best_b].local.end());
      groups[best_b].alive = false;
      groups[best_b].local.clear();
      --alive;
    }

    for (const Group& g : groups) {
      if (!g.alive) continue;
      const int sub_id = out.n_subclusters++;
      std::vector<int> cells;
      for (int local : g.local) cells.push_back(members[local]);
      std::sort(cells.begin(), cells.end());
      for (int c : cells) out.sub_of_cell[c] = sub_id;
      out.parent_cluster.push_back(cluster);
      out.dominant_class.push_back(majority_class(cells, cell_class));
      out.members.push_back(std::move(cells));
    }
  }
  return out;
}

FoldAssignment build_folds(const SpatialClustering& stage1, const SubClustering& sub,
                           const GridIndex& grid, const BuildFoldParams& params) {
  (void)grid;  // spatial separation is inherited from unsplit stage-1 blocks
  const int n = static_cast<int>(stage1.assignment.size());
  const int k = stage1.k;
  if (k < params.min_folds)
    throw std::runtime_error(
        "build_folds: target unreachable; " + std::to_string(k) +
        " stage-1 cluster(s) cannot form " + std::to_string(params.min_folds) + " folds");

  // Distinct context classes present in the study area.
  int n_classes = 0;
  for (int s = 0; s < sub.n_subclusters; ++s)
    n_classes = std::max(n_classes, sub.dominant_class[s] + 1);
  std::vector<int> cell_ctx(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const int s = sub.sub_of_cell[i];
    cell_ctx[i] = s >= 0 ? sub.dominant_class[s] : 0;
  }
  std::vector<bool> class_present(static_cast<std::size_t>(std::max(n_classes, 1)), false);
  for (int i = 0; i < n; ++i) class_present[cell_ctx[i]] = true;
  int area_classes = 0;
  for (bool b : class_present) area_classes += b ? 1 : 0;

  // Fold state: context-class counts and sizes, starting one fold per cluster.
  struct FoldState {
    std::vector<int> clusters;
    std::vector<int> class_count;
    int size = 0;
    bool alive_size() const { return size > 0; }  // merged-away folds are zeroed
  };
  std::vector<FoldState> folds(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    folds[c].clusters = {c};
    folds[c].class_count.assign(static_cast<std::size_t>(std::max(n_classes, 1)), 0);
  }
  for (int i = 0; i < n; ++i) {
    FoldState& f = folds[stage1.assignment[i]];
    ++f.class_count[cell_ctx[i]];
    ++f.size;
  }

  auto diverse = [&](const FoldState& f) {
    int classes = 0;
    for (int c : f.class_count) classes += c > 0 ? 1 : 0;
    return classes >= 2;
  };
  auto snapshot_ok = [&](const std::vector<FoldState>& fs) {
    int min_size = std::numeric_limits<int>::max(), max_size = 0;
    for (const FoldState& f : fs) {
      if (!f.alive_size()) continue;
      min_size = std::min(min_size, f.size);
      max_size = std::max(max_size, f.size);
      if (area_classes >= 2 && !diverse(f)) return false;
    }
    return max_size <= params.size_balance * min_size;
  };

  // Greedy merge path from k folds down to min_folds, keeping a snapshot at
  // every count.
  std::vector<std::vector<FoldState>> snapshots;
  snapshots.push_back(folds);
  std::vector<FoldState> cur = folds;
  auto alive_count = [](const std::vector<FoldState>& fs) {
    int c = 0;
    for (const FoldState& f : fs) c += f.alive_size() ? 1 : 0;
    return c;
  };
  // A fold larger than beta*n/(min_folds + beta - 1) can never end within the
  // beta-times size-balance contract at min_folds folds; merges creating one
  // are inadmissible while alternatives exist.
  const double size_cap =
      params.size_balance * n / (params.min_folds + params.size_balance - 1.0);
  while (alive_count(cur) > params.min_folds) {
    const int m = static_cast<int>(cur.size());
    double best_min_entropy = -1.0, best_merged_entropy = -1.0;
    double best_imbalance = std::numeric_limits<double>::infinity();
    int best_a = -1, best_b = -1;
    for (int pass = 0; pass < 2 && best_a < 0; ++pass) {
      const bool capped = pass == 0;
      for (int a = 0; a < m; ++a) {
        if (!cur[a].alive_size()) continue;
        for (int b = a + 1; b < m; ++b) {
          if (!cur[b].alive_size()) continue;
          if (capped && cur[a].size + cur[b].size > size_cap) continue;
          // Evaluate the post-merge state.
          std::vector<int> merged_counts = cur[a].class_count;
          for (std::size_t c = 0; c < merged_counts.size(); ++c)
            merged_counts[c] += cur[b].class_count[c];
          const double merged_h = entropy(merged_counts);
          double min_h = merged_h;
          int min_size = cur[a].size + cur[b].size, max_size = min_size;
          for (int f = 0; f < m; ++f) {
            if (!cur[f].alive_size() || f == a || f == b) continue;
            min_h = std::min(min_h, entropy(cur[f].class_count));
            min_size = std::min(min_size, cur[f].size);
            max_size = std::max(max_size, cur[f].size);
          }
          const double imbalance = static_cast<double>(max_size) / std::max(min_size, 1);
          // Objective order: raise the worst fold's context entropy, then
          // keep sizes balanced, then prefer the most diverse union.
          // Balancing before union entropy stops the greedy from piling
          // everything onto one already-diverse fold.
          const bool better =
              min_h > best_min_entropy + 1e-12 ||
              (std::fabs(min_h - best_min_entropy) <= 1e-12 &&
               (imbalance < best_imbalance - 1e-12 ||
                (std::fabs(imbalance - best_imbalance) <= 1e-12 &&
                 merged_h > best_merged_entropy + 1e-12)));
          if (better) {
            best_min_entropy = min_h;
            best_merged_entropy = merged_h;
            best_imbalance = imbalance;
            best_a = a;
            best_b = b;
          }
        }
      }
    }
    // Merge b into a.
    for (std::size_t c = 0; c < cur[best_a].class_count.size(); ++c)
      cur[best_a].class_count[c] += cur[best_b].class_count[c];
    cur[best_a].size += cur[best_b].size;
    cur[best_a].clusters.insert(cur[best_a].clusters.end(), cur[best_b].clusters.begin(),
                                cur[best_b].clusters.end());
    cur[best_b] = FoldState{};
    cur[best_b].class_count.assign(static_cast<std::size_t>(std::max(n_classes, 1)), 0);
    snapshots.push_back(cur);
  }

  // Smallest fold count >= min_folds whose snapshot meets the contracts.
  const std::vector<FoldState>* chosen = nullptr;
  for (auto it = snapshots.rbegin(); it != snapshots.rend(); ++it) {
    if (alive_count(*it) < params.min_folds) continue;
    if (snapshot_ok(*it)) {
      chosen = &*it;
      break;
    }
  }
  if (!chosen) {
    // Fall back to the most-merged state that is still context-diverse.
    for (auto it = snapshots.rbegin(); it != snapshots.rend(); ++it) {
      bool all_diverse = true;
      for (const FoldState& f : *it)
        if (f.alive_size() && area_classes >= 2 && !diverse(f)) all_diverse = false;
      if (alive_count(*it) >= params.min_folds && all_diverse) {
        chosen = &*it;
        break;
      }
    }
  }
  if (!chosen)
    throw std::runtime_error(
        "build_folds: target unreachable; no fold count >= " +
        std::to_string(params.min_folds) +
        " yields context-diverse folds (context concentrated in single clusters)");

  // Fold ids ordered by smallest cluster id for determinism.
  std::vector<std::pair<int, const FoldState*>> ordered;
  for (const FoldState& f : *chosen)
    if (f.alive_size())
      ordered.emplace_back(*std::min_element(f.clusters.begin(), f.clusters.end()), &f);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  FoldAssignment out;
  out.method = SplitMethod::kTwoStage;
  out.n_folds = static_cast<int>(ordered.size());
  out.fold.assign(static_cast<std::size_t>(n), -1);
  out.stage1 = stage1.assignment;
  out.stage2 = sub.sub_of_cell;
  out.context_class = cell_ctx;
  std::vector<int> cluster_to_fold(static_cast<std::size_t>(k), -1);
  for (std::size_t f = 0; f < ordered.size(); ++f)
    for (int c : ordered[f].second->clusters) cluster_to_fold[c] = static_cast<int>(f);
  for (int i = 0; i < n; ++i) out.fold[i] = cluster_to_fold[stage1.assignment[i]];
  return out;
}

FoldAssignment random_split(const GridIndex& grid, int n_folds, std::uint64_t seed) {
  const int n = grid.n_cells();
  if (n_folds < 1 || n_folds > n)
    throw std::invalid_argument("random_split: need 1 <= n_folds <= n");
  Rng rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);

  FoldAssignment out;
  out.method = SplitMethod::kRandom;
  out.n_folds = n_folds;
  out.fold.assign(static_cast<std::size_t>(n), 0);
  out.stage1.assign(static_cast<std::size_t>(n), -1);
  out.stage2.assign(static_cast<std::size_t>(n), -1);
  out.context_class.assign(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) out.fold[order[i]] = i % n_folds;
  return out;
}

FoldAssignment folds_from_clusters(const SpatialClustering& stage1,
                                   std::span<const int> cell_class) {
  FoldAssignment out;
  out.method = SplitMethod::kKmeansLocation;
  out.n_folds = stage1.k;
  out.fold = stage1.assignment;
  out.stage1 = stage1.assignment;
  out.stage2.assign(stage1.assignment.size(), -1);
  out.context_class.assign(cell_class.begin(), cell_class.end());
  if (out.context_class.empty())
    out.context_class.assign(stage1.assignment.size(), -1);
  return out;
}

LeakageAudit audit_leakage(const FoldAssignment& folds, const GridIndex& grid,
                           double r_cells) {
  const int n = grid.n_cells();
  if (static_cast<int>(folds.fold.size()) != n)
    throw std::invalid_argument("audit_leakage: fold assignment does not match grid");
  const double cs = grid.cell_size();
  const double r_m = r_cells * cs;
  const double r2 = r_m * r_m;

  LeakageAudit out;
  std::vector<std::uint8_t> has_cross(static_cast<std::size_t>(n), 0);
  const int reach = static_cast<int>(std::floor(r_cells)) + 1;
  for (int i = 0; i < n; ++i) {
    const GridCell& ci = grid.cell(i);
    for (int dr = -reach; dr <= reach; ++dr) {
      const int r = ci.row + dr;
      if (r < 0 || r >= grid.n_rows()) continue;
      for (int dc = -reach; dc <= reach; ++dc) {
        const int c = ci.col + dc;
        if (c < 0 || c >= grid.n_cols()) continue;
        const int j = r * grid.n_cols() + c;
        if (j <= i) continue;
        const double d2 = (dr * cs) * (dr * cs) + (dc * cs) * (dc * cs);
        if (d2 > r2) continue;
        if (folds.fold[i] != folds.fold[j]) {
          ++out.boundary_pair_count;
          has_cross[i] = has_cross[j] = 1;
        }
      }
    }
  }
  int boundary_cells = 0;
  for (auto b : has_cross) boundary_cells += b;
  out.fraction_boundary = n > 0 ? static_cast<double>(boundary_cells) / n : 0.0;

  // Minimum cross-fold distance; widen the search window until found.
  double min_d2 = std::numeric_limits<double>::infinity();
  if (folds.n_folds > 1) {
    int search = reach;
    while (!std::isfinite(min_d2) && search <= grid.n_rows() + grid.n_cols()) {
      for (int i = 0; i < n; ++i) {
        const GridCell& ci = grid.cell(i);
        for (int dr = -search; dr <= search; ++dr) {
          const int r = ci.row + dr;
          if (r < 0 || r >= grid.n_rows()) continue;
          for (int dc = -search; dc <= search; ++dc) {
            const int c = ci.col + dc;
            if (c < 0 || c >= grid.n_cols()) continue;
            const int j = r * grid.n_cols() + c;
            if (j <= i || folds.fold[i] == folds.fold[j]) continue;
            const double d2 = (dr * cs) * (dr * cs) + (dc * cs) * (dc * cs);
            min_d2 = std::min(min_d2, d2);
          }
        }
      }
      search *= 2;
    }
  }
  out.min_interfold_distance_m = std::isfinite(min_d2) ? std::sqrt(min_d2) : 0.0;
  return out;
}

int choose_stage1_k(const GridIndex& grid, double range_cells, int min_folds) {
  const double r = std::max(range_cells, 1.0);
  const int n = grid.n_cells();
  // Mean cluster diameter 2*sqrt(area/(pi*k)) >= 2r  =>  k <= n / (pi r^2).
  int k = static_cast<int>(std::floor(n / (M_PI * r * r)));
  // The merge step needs spare clusters to balance contexts; on grids small
  // relative to their correlation range this overrides the diameter rule.
  k = std::max(k, min_folds + 2);
  k = std::min({k, 16, n});
  return k;
}

}  // namespace gridcast
