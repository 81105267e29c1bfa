#pragma once

// Band-filtered squared-difference phase estimator for the dual homodyne readout:
//
//   dphi~(t) = (q~1(t)^2 - q~2(t)^2) / ((V+ - V-) * K)
//
// where q~i are the outputs passed through the ideal band filter and K is the
// variance of a band-filtered unit-PSD process on the discrete frequency grid
// (the sampled counterpart of DeltaOmega/pi in shot-noise units).

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "hcl/fft.hpp"
#include "hcl/mzi.hpp"
#include "hcl/record.hpp"
#include "hcl/spectra.hpp"

namespace hcl {

/// Pass mask over the n/2 + 1 non-negative DFT bins.
inline std::vector<std::uint8_t> band_mask(const Band& band, std::size_t n, double fs) {
  std::vector<std::uint8_t> mask(n / 2 + 1);
  const double bin_omega = kTwoPi * fs / static_cast<double>(n);
  for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = band.contains(bin_omega * static_cast<double>(k)) ? 1 : 0;
  return mask;
}

/// Fraction of the full DFT circle passed by the band; equals the variance of a
/// filtered process whose two-sided PSD is 1 everywhere.
inline double band_variance_fraction(const Band& band, std::size_t n, double fs) {
  const auto mask = band_mask(band, n, fs);
  double count = mask.front() + mask.back();
  for (std::size_t k = 1; k + 1 < mask.size(); ++k) count += 2.0 * mask[k];
  return count / static_cast<double>(n);
}

/// Zero-phase FFT-domain multiplication by H[Omega].
inline std::vector<double> band_filter(std::span<const double> x, const Band& band, double fs) {
  if (!(fs > 2.0 * band.upper_hz())) throw std::invalid_argument("band_filter: band exceeds Nyquist");
  const std::size_t n = x.size();
  if (!is_power_of_two(n) || n < 2) throw std::invalid_argument("band_filter: length must be a power of two");
  const RealFft& fft = cached_fft(n);
  auto spectrum = fft.forward(x);
  const auto mask = band_mask(band, n, fs);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] *= mask[k] ? scale : 0.0;
  std::vector<double> y(n);
  fft.inverse(spectrum, y);
  return y;
}

inline QuadratureRecord band_filter(const QuadratureRecord& record, const Band& band) {
  RecordLabel label = record.label();
  label.stage = Stage::filtered;
  return QuadratureRecord(band_filter(record.samples(), band, record.sample_rate()), record.sample_rate(), label);
}

class EstimatorConfig {
 public:
  EstimatorConfig(Band band, double v_plus, double v_minus, double fs)
      : band_(band), v_plus_(v_plus), v_minus_(v_minus), fs_(fs) {
    if (!std::isfinite(v_plus) || !std::isfinite(v_minus) || !(v_plus > v_minus))
      throw std::invalid_argument("EstimatorConfig: degenerate normalization, need V+ > V-");
    if (!(fs > 2.0 * band.upper_hz())) throw std::invalid_argument("EstimatorConfig: band exceeds Nyquist");
  }

  /// Known-truth normalization. At the optimal setpoint the gain mixes p1 (V- of
  /// input 1) with q2 (V+ of input 2).
  static EstimatorConfig from_specs(const SqueezingSpec& spec1, const SqueezingSpec& spec2, double fs) {
    return EstimatorConfig(spec1.band(), effective_variances(spec2).plus, effective_variances(spec1).minus, fs);
  }

  const Band& band() const { return band_; }
  double v_plus() const { return v_plus_; }
  double v_minus() const { return v_minus_; }
  double sample_rate() const { return fs_; }

 private:
  Band band_;
  double v_plus_;
  double v_minus_;
  double fs_;
};

/// Self-calibration from a zero-signal record at the optimal setpoint:
/// q~1 + q~2 = sqrt2 p~1 and q~2 - q~1 = sqrt2 q~2 expose V- and V+ directly.
inline EstimatorConfig calibrate_estimator(const HomodynePair& zero_signal, const Band& band) {
  const double fs = zero_signal.sample_rate();
  const auto f1 = band_filter(zero_signal.out1.samples(), band, fs);
  const auto f2 = band_filter(zero_signal.out2.samples(), band, fs);
  std::vector<double> sum(f1.size()), diff(f1.size());
  for (std::size_t k = 0; k < f1.size(); ++k) {
    sum[k] = f1[k] + f2[k];
    diff[k] = f2[k] - f1[k];
  }
  const double frac = band_variance_fraction(band, f1.size(), fs);
  return EstimatorConfig(band, variance(diff) / (2.0 * frac), variance(sum) / (2.0 * frac), fs);
}

struct PhaseEstimate {
  std::vector<double> samples;  // rad
  double fs;
  EstimatorConfig config;

  std::span<const double> view() const { return samples; }
  std::size_t size() const { return samples.size(); }
};

inline PhaseEstimate estimate_phase(const HomodynePair& pair, const EstimatorConfig& config) {
  const double fs = pair.sample_rate();
  if (std::abs(fs - config.sample_rate()) > 1e-9 * fs)
    throw std::invalid_argument("estimate_phase: sample rate differs from estimator config");
  const std::size_t n = pair.size();
  const double filter_length = std::ceil(fs / rad_to_hz(config.band().width()));
  if (static_cast<double>(n) < 8.0 * filter_length)
    throw std::invalid_argument("estimate_phase: record shorter than 8 filter lengths");

  const auto f1 = band_filter(pair.out1.samples(), config.band(), fs);
  const auto f2 = band_filter(pair.out2.samples(), config.band(), fs);
  const double norm = (config.v_plus() - config.v_minus()) * band_variance_fraction(config.band(), n, fs);
  std::vector<double> est(n);
  for (std::size_t k = 0; k < n; ++k) est[k] = (f1[k] * f1[k] - f2[k] * f2[k]) / norm;
  return {std::move(est), fs, config};
}

/// 4 pi V+ V- / ((V+ - V-)^2 DeltaOmega): two-sided rad^2/Hz at Omega << DeltaOmega.
inline double estimator_noise_psd_theory(double v_plus, double v_minus, const Band& band) {
  if (!(v_plus > v_minus)) throw std::invalid_argument("estimator_noise_psd_theory: need V+ > V-");
  const double d = v_plus - v_minus;
  return 4.0 * kPi * v_plus * v_minus / (d * d * band.width());
}

inline double estimator_noise_psd_theory(const SqueezingSpec& spec, const Band& band) {
  if (!(spec.r() > 0.0)) throw std::invalid_argument("estimator_noise_psd_theory: r must be > 0");
  const auto v = effective_variances(spec);
  return estimator_noise_psd_theory(v.plus, v.minus, band);
}

}  // namespace hcl
