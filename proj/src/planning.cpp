#include "gridcast/planning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gridcast/kernels.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/synth.hpp"

namespace gridcast {

double spectral_efficiency(double gamma_linear, double rho_oh) {
  if (gamma_linear < 0.0)
    throw std::invalid_argument("spectral_efficiency: SINR must be nonnegative");
  if (rho_oh < 0.0 || rho_oh >= 1.0)
    throw std::invalid_argument("spectral_efficiency: rho_oh must lie in [0, 1)");
  return (1.0 - rho_oh) * std::log2(1.0 + gamma_linear);
}

std::vector<std::vector<double>> sample_sinr_linear(
    std::span<const int> cell_class, std::span<const double> mean_db,
    std::span<const double> sd_db, int n_samples, std::uint64_t seed) {
  if (mean_db.size() != sd_db.size())
    throw std::invalid_argument("sample_sinr_linear: per-class parameter size mismatch");
  std::vector<std::vector<double>> out(cell_class.size());
  for (std::size_t i = 0; i < cell_class.size(); ++i) {
    const int cls = cell_class[i];
    if (cls < 0 || cls >= static_cast<int>(mean_db.size()))
      throw std::invalid_argument("sample_sinr_linear: class without SINR parameters");
    Rng rng(derive_seed(seed, 0x51a7 + i));
    out[i].resize(static_cast<std::size_t>(n_samples));
    for (double& v : out[i]) {
      const double db = rng.normal(mean_db[cls], sd_db[cls]);
      v = std::pow(10.0, db / 10.0);
    }
  }
  return out;
}

namespace {

// Type-7 quantile (linear interpolation between order statistics).
double quantile_type7(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

}  // namespace

std::vector<double> effective_eta(std::span<const std::vector<double>> sinr_samples_per_cell,
                                  double delta, double rho_oh, bool literal_quantile) {
  if (delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("effective_eta: delta must lie in (0, 1)");
  std::vector<double> out;
  out.reserve(sinr_samples_per_cell.size());
  const double q = literal_quantile ? 1.0 - delta : delta;
  for (const std::vector<double>& samples : sinr_samples_per_cell) {
    if (samples.size() < 20)
      throw std::invalid_argument("effective_eta: need >= 20 SINR samples per cell");
    std::vector<double> etas;
    etas.reserve(samples.size());
    for (double g : samples) etas.push_back(spectral_efficiency(g, rho_oh));
    out.push_back(quantile_type7(std::move(etas), q));
  }
  return out;
}

DemandMap bandwidth_required(std::span<const double> proxy, const PlanningConfig& config) {
  const std::vector<double> eta(proxy.size(), config.eta);
  return bandwidth_required(proxy, eta, config);
}

DemandMap bandwidth_required(std::span<const double> proxy,
                             std::span<const double> eta_per_cell,
                             const PlanningConfig& config) {
  if (proxy.size() != eta_per_cell.size())
    throw std::invalid_argument("bandwidth_required: size mismatch");
  if (config.kappa <= 0.0) throw std::invalid_argument("bandwidth_required: kappa must be positive");

  DemandMap out;
  out.demand_bps.resize(proxy.size());
  out.eta_bps_hz.assign(eta_per_cell.begin(), eta_per_cell.end());
  out.b_req_hz.resize(proxy.size());
  out.infeasible.assign(proxy.size(), 0);
  for (std::size_t i = 0; i < proxy.size(); ++i) {
    out.demand_bps[i] = config.kappa * proxy[i];
    if (eta_per_cell[i] <= 0.0) {
      out.infeasible[i] = 1;
      out.b_req_hz[i] = 0.0;
    } else {
      out.b_req_hz[i] = out.demand_bps[i] / eta_per_cell[i];
    }
  }
  return out;
}

double bde(double mae_proxy_units, double kappa, double eta) {
  if (eta <= 0.0) throw std::invalid_argument("bde: eta must be positive");
  return kappa / eta * mae_proxy_units;
}

std::vector<double> bde_per_cell(std::span<const double> y, std::span<const double> yhat,
                                 std::span<const double> eta_per_cell, double kappa) {
  if (y.size() != yhat.size() || y.size() != eta_per_cell.size())
    throw std::invalid_argument("bde_per_cell: size mismatch");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (eta_per_cell[i] <= 0.0) throw std::invalid_argument("bde_per_cell: eta must be positive");
    out[i] = kappa / eta_per_cell[i] * std::fabs(yhat[i] - y[i]);
  }
  return out;
}

CongestionCurve congestion_curve(const DemandMap& demand,
                                 std::span<const double> candidate_bandwidths_hz,
                                 const std::string& label) {
  const std::size_t n = demand.demand_bps.size();
  if (n == 0) throw std::invalid_argument("congestion_curve: no cells");

  CongestionCurve curve;
  curve.label = label;
  const bool const_eta =
      std::all_of(demand.eta_bps_hz.begin(), demand.eta_bps_hz.end(),
                  [&](double e) { return e == demand.eta_bps_hz.front(); });
  for (double b : candidate_bandwidths_hz) {
    std::size_t congested;
    if (const_eta) {
      // One capacity threshold: vectorized strict count.
      congested = kern::count_greater(demand.demand_bps, b * demand.eta_bps_hz.front());
    } else {
      congested = 0;
      for (std::size_t i = 0; i < n; ++i)
        congested += demand.demand_bps[i] > b * demand.eta_bps_hz[i] ? 1 : 0;
    }
    curve.points.push_back({b, static_cast<double>(congested) / static_cast<double>(n)});
  }
  return curve;
}

CaseStudyResult case_study_all_cities(const CaseStudyConfig& study,
                                      const PlanningConfig& planning) {
  if (study.mae_targets.size() != study.method_labels.size())
    throw std::invalid_argument("case_study: one label per MAE target required");

  // Observed proxy field: log-normal over a smoothed latent driver.
  CityRecipe recipe;
  recipe.n_rows = study.n_rows;
  recipe.n_cols = study.n_cols;
  recipe.seed = study.seed;
  recipe.smoothing_radius = study.smoothing_radius;
  recipe.mu = study.mu;
  recipe.sigma = study.sigma;
  recipe.n_context_classes = 1;
  recipe.context_multipliers = {1.0};
  recipe.hidden_amplitude = 0.0;
  recipe.hotspot_count = 0;
  const SyntheticCity city = generate(recipe);
  const std::vector<double>& y = city.demand.values;
  const int n = static_cast<int>(y.size());

  CaseStudyResult out;
  const DemandMap observed = bandwidth_required(y, planning);
  out.observed = congestion_curve(observed, planning.candidate_bandwidths_hz, "observed");

  // One spatially correlated unit error field per study; per-method scales
  // are calibrated so the realized MAE (after clamping predictions at zero)
  // hits each target.
  CityRecipe err_recipe = recipe;
  err_recipe.seed = derive_seed(study.seed, 0xe44);
  err_recipe.smoothing_radius = study.error_radius;
  const SyntheticCity err_city = generate(err_recipe);
  const std::vector<double>& err_field = err_city.latent;  // standardized field

  const double y_mean_abs = kern::sum(y) / n;  // demand is strictly positive

  auto realized_mae = [&](double scale) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double pred = std::max(0.0, y[i] + scale * err_field[i]);
      acc += std::fabs(pred - y[i]);
    }
    return acc / n;
  };

  for (std::size_t m = 0; m < study.mae_targets.size(); ++m) {
    const double target = study.mae_targets[m];
    if (target < 0.0) throw std::invalid_argument("case_study: negative MAE target");
    if (target > 0.8 * y_mean_abs)
      throw std::runtime_error("case_study: MAE target " + std::to_string(target) +
                               " exceeds the demand field scale");

    double scale = 0.0;
    if (target > 0.0) {
      double err_mean_abs = 0.0;
      for (double e : err_field) err_mean_abs += std::fabs(e);
      err_mean_abs /= n;
      // realized_mae is monotone nondecreasing in scale; bisection.
      double lo = 0.0, hi = 2.0 * target / err_mean_abs;
      while (realized_mae(hi) < target) hi *= 2.0;
      for (int it = 0; it < 200; ++it) {
        scale = 0.5 * (lo + hi);
        const double v = realized_mae(scale);
        if (std::fabs(v - target) <= study.calibration_tolerance * target) break;
        (v < target ? lo : hi) = scale;
      }
      const double check = realized_mae(scale);
      if (std::fabs(check - target) > study.calibration_tolerance * target)
        throw std::runtime_error("case_study: calibration failed for target " +
                                 std::to_string(target));
    }

    std::vector<double> pred(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pred[i] = std::max(0.0, y[i] + scale * err_field[i]);
    out.realized_mae.push_back(realized_mae(scale));

    const DemandMap dm = bandwidth_required(pred, planning);
    CongestionCurve curve = congestion_curve(dm, planning.candidate_bandwidths_hz,
                                             "predicted:" + study.method_labels[m]);
    double gap = 0.0;
    for (std::size_t p = 0; p < curve.points.size(); ++p)
      gap = std::max(gap, std::fabs(curve.points[p].p_cong - out.observed.points[p].p_cong));
    out.max_abs_gap.push_back(gap);
    out.predicted.push_back(std::move(curve));
  }
  return out;
}

}  // namespace gridcast
