#pragma once

// Parameter sweeps: flux sweeps, SNR maps over the readout angles, and the
// data-acceptance vetoes applied to their rows.
//
// Seed policy: the seed of grid point (i, j), trial t is
//   base_seed XOR h,  h = mix(mix(mix(mix(K) ^ i) ^ j) ^ t)
// with mix the SplitMix64 finalizer and K a fixed constant. Within a point the
// four input quadratures draw from derive_seed(seed, 0..3); a self-calibration
// record, when requested, uses derive_seed(seed, 16).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcl/bounds.hpp"
#include "hcl/estimator.hpp"
#include "hcl/mzi.hpp"
#include "hcl/parallel.hpp"
#include "hcl/spectra.hpp"
#include "hcl/synth.hpp"
#include "hcl/welch.hpp"

namespace hcl {

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr int kSweepSchemaVersion = 1;

enum class TransferModel { exact, linearized };
enum class Normalization { known, calibrated };

inline std::string to_string(TransferModel m) { return m == TransferModel::exact ? "exact" : "linearized"; }
inline std::string to_string(Normalization n) { return n == Normalization::known ? "known" : "calibrated"; }

inline TransferModel transfer_model_from_string(const std::string& s) {
  if (s == "exact") return TransferModel::exact;
  if (s == "linearized") return TransferModel::linearized;
  throw std::invalid_argument("unknown transfer model '" + s + "'");
}

inline Normalization normalization_from_string(const std::string& s) {
  if (s == "known") return Normalization::known;
  if (s == "calibrated") return Normalization::calibrated;
  throw std::invalid_argument("unknown normalization '" + s + "'");
}

/// Everything that turns one seed into one phase-estimate PSD.
struct PipelineSettings {
  double fs = 7.0e6;
  std::size_t samples = std::size_t{1} << 24;
  WelchOptions welch{};
  TransferModel model = TransferModel::exact;
  Normalization normalization = Normalization::known;
  /// Multiplies the estimator output. 1 except when injecting a calibration fault.
  double normalization_scale = 1.0;

  void validate() const {
    if (!(fs > 0.0) || !std::isfinite(fs)) throw std::invalid_argument("PipelineSettings: fs must be positive");
    if (!is_power_of_two(samples) || samples < 2) throw std::invalid_argument("PipelineSettings: samples must be a power of two");
    if (welch.segment_length > samples) throw std::invalid_argument("PipelineSettings: Welch segment longer than record");
    if (!(normalization_scale > 0.0) || !std::isfinite(normalization_scale))
      throw std::invalid_argument("PipelineSettings: normalization_scale must be positive");
  }
};

struct PointSetup {
  SqueezingSpec spec1;
  SqueezingSpec spec2;
  InterferometerConfig config = InterferometerConfig::optimal();
  PhaseSignal signal = PhaseSignal::zero();
};

struct PointOutcome {
  FloorAndTone metrics;
  double floor_sigma;         // statistical standard error of metrics.floor
  double measured_n_flux;     // (var q~1 + var q~2) / K - 1 of the filtered outputs
  EstimatorConfig estimator;  // normalization actually used
  PsdEstimate phase_psd;
  std::optional<PsdEstimate> out1_psd, out2_psd;
};

namespace detail {

inline double sample_variance(std::span<const double> x) {
  long double s = 0.0L, ss = 0.0L;
  for (double v : x) {
    s += v;
    ss += static_cast<long double>(v) * v;
  }
  const long double n = static_cast<long double>(x.size());
  return static_cast<double>((ss - s * s / n) / (n - 1.0L));
}

inline HomodynePair propagate(const PointSetup& setup, const PipelineSettings& settings, std::uint64_t seed,
                              const PhaseSignal& signal) {
  const auto fields = synth_squeezed_pair_n(setup.spec1, setup.spec2, settings.samples, settings.fs, seed);
  if (settings.model == TransferModel::linearized) return transfer_linearized(fields, signal);
  return transfer_exact(fields, setup.config, signal);
}

}  // namespace detail

/// synthesize -> interferometer -> homodyne -> band filter -> estimator -> Welch.
inline PointOutcome simulate_point(const PointSetup& setup, const PipelineSettings& settings, std::uint64_t seed,
                                   bool keep_homodyne_psd = false) {
  settings.validate();
  if (!(setup.spec1.band() == setup.spec2.band()))
    throw std::invalid_argument("simulate_point: both inputs must share one squeezing band");
  const Band band = setup.spec1.band();
  const double fs = settings.fs;
  const std::size_t n = settings.samples;

  EstimatorConfig est = settings.normalization == Normalization::known
                            ? EstimatorConfig::from_specs(setup.spec1, setup.spec2, fs)
                            : calibrate_estimator(detail::propagate(setup, settings, derive_seed(seed, 16), PhaseSignal::zero()), band);

  std::optional<PsdEstimate> psd1, psd2;
  std::vector<double> f1, f2;
  {
    auto pair = detail::propagate(setup, settings, seed, setup.signal);
    if (keep_homodyne_psd) {
      psd1 = welch_psd(pair.out1.samples(), fs, settings.welch);
      psd2 = welch_psd(pair.out2.samples(), fs, settings.welch);
    }
    f1 = band_filter(pair.out1.samples(), band, fs);
    f2 = band_filter(pair.out2.samples(), band, fs);
  }
  const double frac = band_variance_fraction(band, n, fs);
  const double measured_flux = (detail::sample_variance(f1) + detail::sample_variance(f2)) / frac - 1.0;

  const double norm = (est.v_plus() - est.v_minus()) * frac / settings.normalization_scale;
  for (std::size_t k = 0; k < n; ++k) f1[k] = (f1[k] * f1[k] - f2[k] * f2[k]) / norm;
  f2 = {};

  WelchOptions wopt = settings.welch;
  wopt.tracked_bands.insert(wopt.tracked_bands.begin(), kFloorBand);
  auto psd = welch_psd(f1, fs, wopt);
  const double f_mod = setup.signal.kind() == PhaseSignal::Kind::sinusoid ? setup.signal.frequency_hz() : 0.0;
  const auto metrics = analyze_phase_psd(psd, f_mod, downmix_shape(rad_to_hz(band.width())));
  const double sigma = band_mean(psd, 0).sigma;
  return {metrics, sigma, measured_flux, est, std::move(psd), std::move(psd1), std::move(psd2)};
}

// ---------------------------------------------------------------------------

struct SweepPlan {
  PipelineSettings pipeline{};
  std::size_t trials = 3;
  std::uint64_t base_seed = 1;
  unsigned threads = 1;

  void validate() const {
    pipeline.validate();
    if (trials == 0) throw std::invalid_argument("SweepPlan: trials must be >= 1");
  }
};

inline std::uint64_t point_seed(std::uint64_t base, std::size_t i, std::size_t j, std::size_t trial) {
  std::uint64_t h = mix_seed(0x48434c5357454550ull);
  h = mix_seed(h ^ static_cast<std::uint64_t>(i));
  h = mix_seed(h ^ static_cast<std::uint64_t>(j));
  h = mix_seed(h ^ static_cast<std::uint64_t>(trial));
  return base ^ h;
}

enum class VetoStatus { pass, fail, not_applicable };

inline std::string to_string(VetoStatus v) {
  switch (v) {
    case VetoStatus::pass:
      return "pass";
    case VetoStatus::fail:
      return "fail";
    case VetoStatus::not_applicable:
      return "na";
  }
  return "na";
}

struct SweepRow {
  std::size_t index_a = 0, index_b = 0, trial = 0;
  std::uint64_t seed = 0;
  double r1 = 0, eta1 = 0, r2 = 0, eta2 = 0;
  InterferometerConfig config{};
  double amplitude = 0, f_mod_hz = 0;
  double n_pure = 0, n_flux = 0, measured_n_flux = 0;
  double noise_floor = 0, floor_sigma = 0, tone_amplitude = 0, snr = 0;
  double setpoint_psd = 0;  // analytic estimator PSD at this setpoint
  BoundsReport bounds{};
  double loss = 0;      // worst input power loss
  double mean_loss = 0;
  double symmetry = 0;  // see squeezer_asymmetry
  std::array<VetoStatus, 5> vetoes{VetoStatus::not_applicable, VetoStatus::not_applicable,
                                   VetoStatus::not_applicable, VetoStatus::not_applicable,
                                   VetoStatus::not_applicable};
  bool accepted = true;
};

struct SweepResult {
  std::string kind;  // "flux_sweep" or "snr_map"
  SweepPlan plan;
  std::vector<double> axis_a, axis_b;
  std::string axis_a_name, axis_b_name;
  std::vector<SweepRow> rows;  // grid order, trial fastest
};

/// Fractional residual angle dependence that two mismatched squeezers leave in
/// the homodyne-1 variance: min over theta_s of the spread over theta_1,
/// divided by the largest variance. Equal squeezers give 0.
inline double squeezer_asymmetry(const SqueezingSpec& spec1, const SqueezingSpec& spec2, std::size_t grid = 32) {
  const auto map = scan_output_variance(spec1, spec2, ScanAxes::theta_s_theta_1, periodic_grid(-kPi / 2, kPi / 2, grid),
                                        periodic_grid(-kPi / 2, kPi / 2, grid));
  const double vmax = *std::max_element(map.values.begin(), map.values.end());
  double best = vmax;
  for (std::size_t i = 0; i < map.first.size(); ++i) {
    double m = 0.0, s = 0.0;
    for (std::size_t j = 0; j < map.second.size(); ++j) m += map.at(i, j);
    m /= static_cast<double>(map.second.size());
    for (std::size_t j = 0; j < map.second.size(); ++j) s += (map.at(i, j) - m) * (map.at(i, j) - m);
    best = std::min(best, std::sqrt(s / static_cast<double>(map.second.size())));
  }
  return best / vmax;
}

namespace detail {

inline SweepRow make_row(const PointSetup& setup, const PointOutcome& out, std::size_t a, std::size_t b,
                         std::size_t trial, std::uint64_t seed) {
  SweepRow row;
  row.index_a = a;
  row.index_b = b;
  row.trial = trial;
  row.seed = seed;
  row.r1 = setup.spec1.r();
  row.eta1 = setup.spec1.eta();
  row.r2 = setup.spec2.r();
  row.eta2 = setup.spec2.eta();
  row.config = setup.config;
  if (setup.signal.kind() == PhaseSignal::Kind::sinusoid) {
    row.amplitude = setup.signal.amplitude();
    row.f_mod_hz = setup.signal.frequency_hz();
  }
  const auto flux = photon_flux(setup.spec1);
  row.n_pure = flux.n_pure;
  row.n_flux = flux.n_flux;
  row.measured_n_flux = out.measured_n_flux;
  row.noise_floor = out.metrics.floor;
  row.floor_sigma = out.floor_sigma;
  row.tone_amplitude = out.metrics.tone_amplitude;
  row.snr = out.metrics.snr;
  const auto sens = phase_sensitivity(setup.spec1, setup.spec2, setup.config);
  row.setpoint_psd = sens.gain != 0.0 ? sens.phase_noise_psd(setup.spec1.band()) : HUGE_VAL;
  row.bounds = bounds_for(setup.spec1);
  row.loss = std::max(setup.spec1.loss(), setup.spec2.loss());
  row.mean_loss = 0.5 * (setup.spec1.loss() + setup.spec2.loss());
  row.symmetry = squeezer_asymmetry(setup.spec1, setup.spec2);
  return row;
}

inline SweepResult run_grid(std::string kind, const std::vector<PointSetup>& setups, std::size_t na, std::size_t nb,
                            const SweepPlan& plan) {
  plan.validate();
  SweepResult result;
  result.kind = std::move(kind);
  result.plan = plan;
  const std::size_t total = setups.size() * plan.trials;
  result.rows.resize(total);
  parallel_for(total, plan.threads, [&](std::size_t job) {
    const std::size_t point = job / plan.trials, trial = job % plan.trials;
    const std::size_t a = point / nb, b = point % nb;
    const std::uint64_t seed = point_seed(plan.base_seed, a, b, trial);
    const auto out = simulate_point(setups[point], plan.pipeline, seed);
    result.rows[job] = make_row(setups[point], out, a, b, trial, seed);
  });
  (void)na;
  return result;
}

}  // namespace detail

/// Equal squeezers at the optimal setpoint, one grid point per r.
inline SweepResult run_flux_sweep(const std::vector<double>& r_values, double eta, const Band& band,
                                  const PhaseSignal& signal, const SweepPlan& plan) {
  if (r_values.empty()) throw std::invalid_argument("run_flux_sweep: empty r grid");
  std::vector<PointSetup> setups;
  for (double r : r_values) {
    if (!(r > 0.0)) throw std::invalid_argument("run_flux_sweep: all r must be > 0");
    const SqueezingSpec spec(r, eta, band);
    setups.push_back({spec, spec, InterferometerConfig::optimal(), signal});
  }
  auto result = detail::run_grid("flux_sweep", setups, r_values.size(), 1, plan);
  result.axis_a = r_values;
  result.axis_a_name = "r";
  return result;
}

/// SNR statistic over (theta_s, theta_1) with theta_2 fixed at 0.
inline SweepResult run_snr_map(const std::vector<double>& theta_s_grid, const std::vector<double>& theta_1_grid,
                               const SqueezingSpec& spec1, const SqueezingSpec& spec2, const PhaseSignal& signal,
                               const SweepPlan& plan, double theta_2 = 0.0) {
  if (theta_s_grid.empty() || theta_1_grid.empty()) throw std::invalid_argument("run_snr_map: empty angle grid");
  std::vector<PointSetup> setups;
  for (double ts : theta_s_grid) {
    for (double t1 : theta_1_grid) {
      InterferometerConfig c;
      c.theta_s = ts;
      c.theta_1 = t1;
      c.theta_2 = theta_2;
      setups.push_back({spec1, spec2, c, signal});
    }
  }
  auto result = detail::run_grid("snr_map", setups, theta_s_grid.size(), theta_1_grid.size(), plan);
  result.axis_a = theta_s_grid;
  result.axis_b = theta_1_grid;
  result.axis_a_name = "theta_s";
  result.axis_b_name = "theta_1";
  return result;
}

struct GridArgmax {
  std::size_t index_a, index_b;
  double value_a, value_b;
  double snr;  // trial-averaged
};

inline GridArgmax snr_argmax(const SweepResult& result) {
  if (result.rows.empty()) throw std::invalid_argument("snr_argmax: empty result");
  const std::size_t nb = std::max<std::size_t>(result.axis_b.size(), 1);
  std::vector<double> sum(result.axis_a.size() * nb, 0.0);
  std::vector<std::size_t> count(sum.size(), 0);
  for (const auto& row : result.rows) {
    sum[row.index_a * nb + row.index_b] += row.snr;
    ++count[row.index_a * nb + row.index_b];
  }
  std::size_t best = 0;
  for (std::size_t k = 0; k < sum.size(); ++k) {
    sum[k] /= static_cast<double>(std::max<std::size_t>(count[k], 1));
    if (sum[k] > sum[best]) best = k;
  }
  const std::size_t a = best / nb, b = best % nb;
  return {a, b, result.axis_a[a], result.axis_b.empty() ? 0.0 : result.axis_b[b], sum[best]};
}

// ---------------------------------------------------------------------------

struct VetoThresholds {
  double tone_tolerance = 0.30;   // |tone - injected| / injected
  double floor_stability = 0.30;  // |floor - point median| / median across trials
  double flux_drift = 0.30;       // (max - min) / min measured flux across trials
  double max_loss = 0.30;         // per input, strict
  double max_mean_loss = 0.35;    // average of the inputs, strict
  double max_asymmetry = 0.15;    // squeezer_asymmetry, strict
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline VetoStatus flag(bool ok) { return ok ? VetoStatus::pass : VetoStatus::fail; }

}  // namespace detail

/// Flags every row against five acceptance criteria:
///   1 recovered tone amplitude close to the injected one (na without a tone)
///   2 noise floor stable across the trials of a point (na for one trial)
///   3 measured photon flux stable across trials (na for one trial)
///   4 optical loss below the per-input and mean limits
///   5 squeezers matched closely enough to cancel the angle dependence
/// A row is accepted when no criterion fails.
inline SweepResult apply_vetoes(SweepResult result, const VetoThresholds& t = {}) {
  std::vector<std::size_t> start;
  for (std::size_t k = 0; k < result.rows.size(); ++k) {
    if (k == 0 || result.rows[k].index_a != result.rows[k - 1].index_a ||
        result.rows[k].index_b != result.rows[k - 1].index_b)
      start.push_back(k);
  }
  start.push_back(result.rows.size());
  for (std::size_t g = 0; g + 1 < start.size(); ++g) {
    const auto first = result.rows.begin() + static_cast<std::ptrdiff_t>(start[g]);
    const auto last = result.rows.begin() + static_cast<std::ptrdiff_t>(start[g + 1]);
    const bool multi = (last - first) >= 2;
    std::vector<double> floors, fluxes;
    for (auto it = first; it != last; ++it) {
      floors.push_back(it->noise_floor);
      fluxes.push_back(it->measured_n_flux);
    }
    const double floor_median = detail::median(floors);
    const auto [fmin, fmax] = std::minmax_element(fluxes.begin(), fluxes.end());
    const bool flux_ok = *fmin > 0.0 && (*fmax - *fmin) / *fmin <= t.flux_drift;
    for (auto it = first; it != last; ++it) {
      auto& row = *it;
      row.vetoes[0] = row.amplitude != 0.0
                          ? detail::flag(std::abs(row.tone_amplitude - std::abs(row.amplitude)) / std::abs(row.amplitude) <=
                                         t.tone_tolerance)
                          : VetoStatus::not_applicable;
      row.vetoes[1] = multi ? detail::flag(std::abs(row.noise_floor - floor_median) / floor_median <= t.floor_stability)
                            : VetoStatus::not_applicable;
      row.vetoes[2] = multi ? detail::flag(flux_ok) : VetoStatus::not_applicable;
      row.vetoes[3] = detail::flag(row.loss < t.max_loss && row.mean_loss < t.max_mean_loss);
      row.vetoes[4] = detail::flag(row.symmetry < t.max_asymmetry);
      row.accepted = std::none_of(row.vetoes.begin(), row.vetoes.end(), [](VetoStatus v) { return v == VetoStatus::fail; });
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Output: one CSV row per grid point and trial, plus a JSON manifest.

inline void write_sweep_csv(std::ostream& os, const SweepResult& result) {
  os << "index_a,index_b,trial,seed,r1,eta1,r2,eta2,phi_d,theta_s,theta_1,theta_2,amplitude,f_mod_hz,"
        "n_pure,n_flux,measured_n_flux,noise_floor,floor_sigma,tone_amplitude,snr,setpoint_psd,"
        "qcrb,lossy_psd,sql,sqz_coh_qcrb,sqz_coh_homodyne,veto1,veto2,veto3,veto4,veto5,accepted\n";
  for (const auto& r : result.rows) {
    os << r.index_a << ',' << r.index_b << ',' << r.trial << ',' << r.seed;
    for (double v : {r.r1, r.eta1, r.r2, r.eta2, r.config.phi_d, r.config.theta_s, r.config.theta_1, r.config.theta_2,
                     r.amplitude, r.f_mod_hz, r.n_pure, r.n_flux, r.measured_n_flux, r.noise_floor, r.floor_sigma,
                     r.tone_amplitude, r.snr, r.setpoint_psd, r.bounds.qcrb_two_sqz, r.bounds.lossy_estimator_psd,
                     r.bounds.sql, r.bounds.sqz_coherent_qcrb, r.bounds.sqz_coherent_homodyne})
      os << ',' << format_double(v);
    for (auto v : r.vetoes) os << ',' << to_string(v);
    os << ',' << (r.accepted ? 1 : 0) << '\n';
  }
}

inline nlohmann::json sweep_manifest(const SweepResult& result) {
  const auto& p = result.plan;
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& r : result.rows) seeds.push_back(r.seed);
  return {{"schema_version", kSweepSchemaVersion},
          {"code_version", kCodeVersion},
          {"kind", result.kind},
          {"axes", {{result.axis_a_name, result.axis_a}, {result.axis_b_name.empty() ? "none" : result.axis_b_name, result.axis_b}}},
          {"plan",
           {{"sample_rate_hz", p.pipeline.fs},
            {"samples", p.pipeline.samples},
            {"duration_s", static_cast<double>(p.pipeline.samples) / p.pipeline.fs},
            {"segment_length", p.pipeline.welch.segment_length},
            {"overlap", p.pipeline.welch.overlap},
            {"window", to_string(p.pipeline.welch.window)},
            {"transfer_model", to_string(p.pipeline.model)},
            {"normalization", to_string(p.pipeline.normalization)},
            {"trials", p.trials},
            {"base_seed", p.base_seed}}},
          {"seed_policy", "base_seed XOR mix(mix(mix(mix(K) ^ index_a) ^ index_b) ^ trial), SplitMix64 finalizer"},
          {"seeds", seeds},
          {"units", {{"noise_floor", "two-sided rad^2/Hz"}, {"tone_amplitude", "rad"}}},
          {"error_bars",
           "purely statistical: the simulation has no calibration drift, so floor_sigma and trial scatter are the only "
           "uncertainties"}};
}

}  // namespace hcl
