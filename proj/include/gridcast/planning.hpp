#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gridcast {

/// 5G NR mid-band planning knobs. All bandwidths are carried in Hz
/// internally; MHz appears only at the presentation boundary.
struct PlanningConfig {
  double kappa = 50e3;      // busy-hour traffic per proxy unit, bps/unit
  double rho_oh = 0.0;      // overhead fraction in [0, 1)
  double delta = 0.05;      // allowable outage probability
  bool literal_quantile = false;  // true: (1-delta)-quantile as printed
  double eta = 2.0;         // constant-mode spectral efficiency, bps/Hz
  std::vector<double> candidate_bandwidths_hz;  // e.g. 40e6 .. 100e6
};

struct DemandMap {
  std::vector<double> demand_bps;   // D_i = kappa * y_i
  std::vector<double> eta_bps_hz;   // per-cell effective spectral efficiency
  std::vector<double> b_req_hz;     // D_i / eta_i
  std::vector<std::uint8_t> infeasible;  // eta_i == 0
};

struct CongestionPoint {
  double bandwidth_hz = 0.0;
  double p_cong = 0.0;
};

struct CongestionCurve {
  std::string label;  // "observed" or "predicted:<method>"
  std::vector<CongestionPoint> points;
};

/// eta(gamma) = (1 - rho_oh) * log2(1 + gamma).
double spectral_efficiency(double gamma_linear, double rho_oh);

/// Per-class SINR distribution for the per-cell eta mode: log-normal in dB,
/// i.e. SINR_dB ~ Normal(mean_db[class], sd_db[class]), returned in linear
/// units. One sample vector per cell, seed-deterministic.
std::vector<std::vector<double>> sample_sinr_linear(
    std::span<const int> cell_class, std::span<const double> mean_db,
    std::span<const double> sd_db, int n_samples, std::uint64_t seed);

/// Outage-constrained effective spectral efficiency per cell from SINR
/// samples: the delta-quantile of eta(gamma) by default (demand is then met
/// with probability 1 - delta); the literal (1-delta)-quantile sits behind
/// the config flag. Type-7 linear interpolation; >= 20 samples per cell.
std::vector<double> effective_eta(std::span<const std::vector<double>> sinr_samples_per_cell,
                                  double delta, double rho_oh, bool literal_quantile = false);

/// D_i = kappa * y_i and B_req = D_i / eta_i with a constant eta.
DemandMap bandwidth_required(std::span<const double> proxy, const PlanningConfig& config);

/// Same, with per-cell eta values.
DemandMap bandwidth_required(std::span<const double> proxy, std::span<const double> eta_per_cell,
                             const PlanningConfig& config);

/// Bandwidth dimensioning error in Hz: (kappa / eta) * MAE.
double bde(double mae_proxy_units, double kappa, double eta);

/// Per-cell bandwidth error magnitudes (kappa/eta_i) * |yhat_i - y_i|.
std::vector<double> bde_per_cell(std::span<const double> y, std::span<const double> yhat,
                                 std::span<const double> eta_per_cell, double kappa);

/// P_cong(B) = (1/N) sum I(D_i > B * eta_i), strict inequality.
CongestionCurve congestion_curve(const DemandMap& demand,
                                 std::span<const double> candidate_bandwidths_hz,
                                 const std::string& label);

struct CaseStudyConfig {
  int n_rows = 40;
  int n_cols = 40;
  std::uint64_t seed = 7;
  double smoothing_radius = 3.0;
  double mu = 8.0;
  double sigma = 1.0;
  double error_radius = 3.0;  // correlation length of the error fields, cells
  std::vector<double> mae_targets;     // per method, proxy units
  std::vector<std::string> method_labels;
  double calibration_tolerance = 0.01;  // relative
};

struct CaseStudyResult {
  CongestionCurve observed;
  std::vector<CongestionCurve> predicted;      // one per method
  std::vector<double> realized_mae;           // per method
  std::vector<double> max_abs_gap;            // max_B |P_pred - P_obs| per method
};

/// "All Cities" style case study: a heavy-tailed log-normal demand field plus
/// spatially correlated error fields rescaled until the realized MAE matches
/// each method's target. Emits the observed curve and one predicted curve
/// per method.
CaseStudyResult case_study_all_cities(const CaseStudyConfig& study,
                                      const PlanningConfig& planning);

}  // namespace gridcast
