#include "gridcast/sem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gridcast/kernels.hpp"
#include "gridcast/morans.hpp"

namespace gridcast {

namespace {

constexpr int kTraceOrder = 30;

// Diagonal traces tr(W^k), k = 1..K, by exact per-node walks (K sparse
// matvecs per basis vector). Feeds the power-series log-determinant
// ln|I - lambda W| = -sum_k lambda^k tr(W^k) / k.
std::vector<double> weight_traces(const SpatialWeights& w, int order) {
  const int n = w.n();
  std::vector<double> tr(static_cast<std::size_t>(order) + 1, 0.0);
  std::vector<double> basis(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    basis[i] = 1.0;
    std::vector<double> cur = basis;
    for (int k = 1; k <= order; ++k) {
      cur = w.lag(cur);
      tr[k] += cur[i];
    }
    basis[i] = 0.0;
  }
  return tr;
}

// Profile-likelihood objective for the residual process, up to constants:
//   g(lambda) = (n/2) ln(SSE(lambda)/n) - ln|I - lambda W|.
// SSE(lambda) = ||eps - lambda W eps||^2 collapses to a quadratic via the
// precomputed moments. The truncated log-determinant degrades only as
// |lambda| -> 1, where the grid fallback still brackets the optimum.
struct LambdaObjective {
  double n;
  double ee, cross, ll;  // ||eps||^2, eps'W eps, ||W eps||^2
  const std::vector<double>& traces;

  double sse(double lambda) const { return ee - 2.0 * lambda * cross + lambda * lambda * ll; }

  double operator()(double lambda) const {
    double log_det = 0.0;
    double pow_l = 1.0;
    for (int k = 1; k < static_cast<int>(traces.size()); ++k) {
      pow_l *= lambda;
      log_det -= pow_l * traces[k] / k;
    }
    return 0.5 * n * std::log(std::max(sse(lambda) / n, 1e-300)) - log_det;
  }
};

// Golden-section minimizer over (-0.99, 0.99) with a 1e-3 grid-scan
// fallback that wins on disagreement.
double minimize_lambda(const LambdaObjective& obj) {
  double lo = -0.99, hi = 0.99;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - gr * (hi - lo);
  double b = lo + gr * (hi - lo);
  double fa = obj(a);
  double fb = obj(b);
  while (hi - lo > 1e-8) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - gr * (hi - lo);
      fa = obj(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + gr * (hi - lo);
      fb = obj(b);
    }
  }
  double best = 0.5 * (lo + hi);
  double best_f = obj(best);
  for (double l = -0.989; l < 0.99; l += 1e-3) {
    const double f = obj(l);
    if (f < best_f - 1e-12) {
      best_f = f;
      best = l;
    }
  }
  return best;
}

}  // namespace

SemModel fit_lambda(std::span<const double> residuals, const SpatialWeights& w) {
  const int n = static_cast<int>(residuals.size());
  if (n != w.n()) throw std::invalid_argument("fit_lambda: size mismatch");
  if (n < 10) throw std::invalid_argument("fit_lambda: need at least 10 cells");
  if (!w.row_standardized())
    throw std::invalid_argument("fit_lambda: weights must be row-standardized");

  SemModel out;
  out.residual_sse = kern::sse_about(residuals, 0.0);
  if (out.residual_sse <= 0.0) {
    // All-zero residuals: lambda = 0 by contract.
    out.innovations.assign(static_cast<std::size_t>(n), 0.0);
    out.components.push_back({n, 0.0, 0.0});
    return out;
  }

  const auto [comp, n_comp] = w.connected_components();
  const std::vector<double> lag = w.lag(residuals);

  double lambda_acc = 0.0;
  for (int c = 0; c < n_comp; ++c) {
    std::vector<int> nodes;
    std::vector<double> eps_c, lag_c;
    for (int i = 0; i < n; ++i) {
      if (comp[i] != c) continue;
      nodes.push_back(i);
      eps_c.push_back(residuals[i]);
      lag_c.push_back(lag[i]);  // lag stays inside the component
    }
    SemComponentFit fit;
    fit.size = static_cast<int>(eps_c.size());
    const double sse0 = kern::sse_about(eps_c, 0.0);
    if (sse0 <= 0.0 || fit.size < 2) {
      fit.lambda = 0.0;
      fit.innovation_sse = sse0;
    } else {
      const SpatialWeights w_c = w.subgraph(nodes);
      const std::vector<double> traces = weight_traces(w_c, kTraceOrder);
      LambdaObjective obj{static_cast<double>(fit.size), sse0,
                          kern::dot(eps_c, lag_c), kern::dot(lag_c, lag_c), traces};
      fit.lambda = minimize_lambda(obj);
      fit.innovation_sse = obj.sse(fit.lambda);
    }
    lambda_acc += fit.lambda * fit.size;
    out.components.push_back(fit);
  }
  out.lambda = lambda_acc / n;

  out.innovations.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.innovations[i] = residuals[i] - out.lambda * lag[i];
  out.innovation_sse = kern::sse_about(out.innovations, 0.0);

  // Residual Moran before/after filtering, when defined.
  const double mean_eps = kern::sum(residuals) / n;
  const double var_eps = kern::sse_about(residuals, mean_eps);
  const double mean_u = kern::sum(out.innovations) / n;
  const double var_u = kern::sse_about(out.innovations, mean_u);
  if (var_eps > 0.0 && var_u > 0.0 && w.total_weight() > 0.0) {
    out.moran_before = global_morans_i(residuals, w).i;
    out.moran_after = global_morans_i(out.innovations, w).i;
    out.moran_defined = true;
  }
  return out;
}

CrossWeights build_cross_weights(const GridIndex& grid, std::span<const int> test_ids,
                                 std::span<const int> train_ids, double d_meters) {
  CrossWeights out;
  out.n_test = static_cast<int>(test_ids.size());
  const double d2 = d_meters * d_meters;
  for (int t = 0; t < out.n_test; ++t) {
    const Point pt = grid.centroid(test_ids[t]);
    const int start = static_cast<int>(out.col.size());
    for (std::size_t j = 0; j < train_ids.size(); ++j) {
      const Point pj = grid.centroid(train_ids[j]);
      const double dx = pt.x - pj.x;
      const double dy = pt.y - pj.y;
      if (dx * dx + dy * dy <= d2) {
        out.col.push_back(static_cast<int>(j));
        out.w.push_back(1.0);
      }
    }
    const int deg = static_cast<int>(out.col.size()) - start;
    if (deg > 0)
      for (int e = start; e < start + deg; ++e) out.w[e] /= deg;  // row-standardize
    out.row_ptr.push_back(static_cast<int>(out.col.size()));
  }
  return out;
}

std::vector<double> correct_predictions(const SemModel& sem,
                                        std::span<const double> yhat_test,
                                        std::span<const double> train_residuals,
                                        const CrossWeights& cross) {
  if (static_cast<int>(yhat_test.size()) != cross.n_test)
    throw std::invalid_argument("correct_predictions: size mismatch");
  std::vector<double> out(yhat_test.begin(), yhat_test.end());
  for (int t = 0; t < cross.n_test; ++t) {
    double lag = 0.0;
    bool any = false;
    for (int e = cross.row_ptr[t]; e < cross.row_ptr[t + 1]; ++e) {
      lag += cross.w[e] * train_residuals[cross.col[e]];
      any = true;
    }
    if (any) out[t] += sem.lambda * lag;
  }
  return out;
}

std::vector<double> solve_filtered(const SpatialWeights& w, double lambda,
                                   std::span<const double> rhs, double tol) {
  const int n = w.n();
  if (static_cast<int>(rhs.size()) != n)
    throw std::invalid_argument("solve_filtered: size mismatch");

  // Fixed-point iteration z <- rhs + lambda * W z; contraction for
  // |lambda| * ||W||_inf < 1 (row-standardized W has ||W||_inf = 1).
  std::vector<double> z(rhs.begin(), rhs.end());
  const long long max_iter = 10LL * std::max(n, 1);
  for (long long it = 0; it < max_iter; ++it) {
    const std::vector<double> lag = w.lag(z);
    double delta = 0.0;
    for (int i = 0; i < n; ++i) {
      const double next = rhs[i] + lambda * lag[i];
      delta = std::max(delta, std::fabs(next - z[i]));
      z[i] = next;
    }
    if (delta <= tol) return z;
  }
  throw std::runtime_error("solve_filtered: no convergence at lambda = " +
                           std::to_string(lambda) +
                           " (spectral bound too close to 1)");
}

SemObjective evaluate_objective(const GbtModel& model, std::span<const double> residuals,
                                const SpatialWeights& w, double lambda, double alpha,
                                double beta) {
  SemObjective obj;
  obj.alpha = alpha;
  obj.beta = beta;
  const double n = static_cast<double>(residuals.size());
  obj.mse = kern::sse_about(residuals, 0.0) / n;
  obj.l2_theta = alpha * model.sum_squared_leaf_values();

  if (beta != 0.0) {
    const std::vector<double> filtered = solve_filtered(w, lambda, residuals);
    obj.spatial_penalty = beta * kern::sse_about(filtered, 0.0);
    std::vector<double> whitened(residuals.begin(), residuals.end());
    const std::vector<double> lag = w.lag(residuals);
    for (std::size_t i = 0; i < whitened.size(); ++i) whitened[i] -= lambda * lag[i];
    obj.whitened_penalty = beta * kern::sse_about(whitened, 0.0);
  }
  obj.value = obj.mse + obj.l2_theta + obj.spatial_penalty;
  return obj;
}

}  // namespace gridcast
