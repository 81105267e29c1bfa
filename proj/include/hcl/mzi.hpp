#pragma once

// Mach-Zehnder interferometer acting on quadrature records.
//
// The complex mode transfer is
//
//   M = [ cos(phi/2) e^{i th1}        i sin(phi/2) e^{i(th1+ths)} ]
//       [ i sin(phi/2) e^{i th2}      cos(phi/2) e^{i(th2+ths)}   ]
//
// with phi = phi_d - dphi(t). Homodyne detector j reads the q quadrature of
// output mode j. With a = (q + i p)/sqrt(2) the action on (q1, p1, q2, p2) is
// real and orthogonal-symplectic; only that real form is evaluated here.
//
// Sign convention: the phase signal lowers phi_d. With that choice the
// optimal-setpoint outputs are
//   out1 = (p1 - q2)/sqrt2 - dphi/(2 sqrt2) (p1 + q2)
//   out2 = (p1 + q2)/sqrt2 + dphi/(2 sqrt2) (p1 - q2)
// to first order, and the squared-difference estimator has positive gain.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hcl/record.hpp"
#include "hcl/spectra.hpp"
#include "hcl/synth.hpp"

namespace hcl {

struct InterferometerConfig {
  double phi_d = -kPi / 2;
  double theta_s = 0.0;
  double theta_1 = -kPi / 2;
  double theta_2 = 0.0;

  static InterferometerConfig optimal() { return {}; }

  void validate() const {
    for (double a : {phi_d, theta_s, theta_1, theta_2})
      if (!std::isfinite(a)) throw std::invalid_argument("InterferometerConfig: non-finite angle");
  }
};

/// Differential phase signal dphi(t).
class PhaseSignal {
 public:
  enum class Kind { zero, sinusoid, arbitrary };

  static PhaseSignal zero() { return PhaseSignal(Kind::zero, 0.0, 0.0, 0.0, {}); }

  /// A sin(2 pi f t + phase)
  static PhaseSignal sinusoid(double amplitude, double frequency_hz, double phase = 0.0) {
    if (!std::isfinite(amplitude) || !std::isfinite(frequency_hz) || !std::isfinite(phase) || frequency_hz < 0.0)
      throw std::invalid_argument("PhaseSignal: bad sinusoid parameters");
    return PhaseSignal(Kind::sinusoid, amplitude, frequency_hz, phase, {});
  }

  static PhaseSignal arbitrary(std::vector<double> samples) {
    for (double v : samples)
      if (!std::isfinite(v)) throw std::invalid_argument("PhaseSignal: non-finite sample");
    return PhaseSignal(Kind::arbitrary, 0.0, 0.0, 0.0, std::move(samples));
  }

  Kind kind() const { return kind_; }
  double amplitude() const { return amplitude_; }
  double frequency_hz() const { return frequency_hz_; }
  double phase() const { return phase_; }

  double peak() const {
    if (kind_ == Kind::sinusoid) return std::abs(amplitude_);
    double m = 0.0;
    for (double v : samples_) m = std::max(m, std::abs(v));
    return m;
  }

  double at(std::size_t k, double fs) const {
    switch (kind_) {
      case Kind::zero:
        return 0.0;
      case Kind::sinusoid:
        return amplitude_ * std::sin(kTwoPi * frequency_hz_ * static_cast<double>(k) / fs + phase_);
      case Kind::arbitrary:
        return samples_[k];
    }
    return 0.0;
  }

  void check_length(std::size_t n) const {
    if (kind_ == Kind::arbitrary && samples_.size() != n)
      throw std::invalid_argument("PhaseSignal: sample count does not match record length");
  }

 private:
  PhaseSignal(Kind kind, double a, double f, double ph, std::vector<double> s)
      : kind_(kind), amplitude_(a), frequency_hz_(f), phase_(ph), samples_(std::move(s)) {}

  Kind kind_;
  double amplitude_;
  double frequency_hz_;
  double phase_;
  std::vector<double> samples_;
};

inline constexpr double kLinearizedAmplitudeLimit = 0.1;

struct HomodynePair {
  QuadratureRecord out1, out2;

  HomodynePair(QuadratureRecord a, QuadratureRecord b) : out1(std::move(a)), out2(std::move(b)) {
    if (out1.size() != out2.size() || out1.sample_rate() != out2.sample_rate())
      throw std::invalid_argument("HomodynePair: records differ in length or sample rate");
  }

  std::size_t size() const { return out1.size(); }
  double sample_rate() const { return out1.sample_rate(); }
};

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<Vec4, 4>;
using Mat2 = std::array<std::array<double, 2>, 2>;

namespace detail {

// Measured rows split by their dependence on c = cos(phi/2), s = sin(phi/2):
//   out1 = c * a1 + s * b1,   out2 = s * a2 + c * b2   (over q1, p1, q2, p2).
struct HomodyneRows {
  Vec4 a1, b1, a2, b2;
};

inline HomodyneRows homodyne_rows(const InterferometerConfig& c) {
  const double t1s = c.theta_1 + c.theta_s;
  const double t2s = c.theta_2 + c.theta_s;
  return {
      {std::cos(c.theta_1), -std::sin(c.theta_1), 0.0, 0.0},
      {0.0, 0.0, -std::sin(t1s), -std::cos(t1s)},
      {-std::sin(c.theta_2), -std::cos(c.theta_2), 0.0, 0.0},
      {0.0, 0.0, std::cos(t2s), -std::sin(t2s)},
  };
}

inline double dot4(const Vec4& a, const Vec4& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]; }

inline Vec4 combine(double x, const Vec4& a, double y, const Vec4& b) {
  return {x * a[0] + y * b[0], x * a[1] + y * b[1], x * a[2] + y * b[2], x * a[3] + y * b[3]};
}

}  // namespace detail

/// Full 4x4 quadrature transfer: rows (q1o, p1o, q2o, p2o), columns (q1, p1, q2, p2).
inline Mat4 quadrature_transfer(const InterferometerConfig& config, double delta_phi = 0.0) {
  const double half = 0.5 * (config.phi_d - delta_phi);
  const double c = std::cos(half), s = std::sin(half);
  // Complex entries of M.
  const std::array<std::array<std::complex<double>, 2>, 2> m = {{
      {c * std::polar(1.0, config.theta_1), std::complex<double>(0.0, s) * std::polar(1.0, config.theta_1 + config.theta_s)},
      {std::complex<double>(0.0, s) * std::polar(1.0, config.theta_2), c * std::polar(1.0, config.theta_2 + config.theta_s)},
  }};
  Mat4 t{};
  for (int j = 0; j < 2; ++j) {
    for (int k = 0; k < 2; ++k) {
      t[2 * j][2 * k] = m[j][k].real();
      t[2 * j][2 * k + 1] = -m[j][k].imag();
      t[2 * j + 1][2 * k] = m[j][k].imag();
      t[2 * j + 1][2 * k + 1] = m[j][k].real();
    }
  }
  return t;
}

namespace detail {

inline void check_fields(const FieldPair& f, const PhaseSignal& signal) { signal.check_length(f.size()); }

inline RecordLabel output_label(int port) { return {Quadrature::q, port, Stage::output}; }

}  // namespace detail

/// Exact propagation with phi_d -> phi_d - dphi(t) applied per sample.
inline HomodynePair transfer_exact(const FieldPair& fields, const InterferometerConfig& config,
                                   const PhaseSignal& signal) {
  config.validate();
  detail::check_fields(fields, signal);
  const auto rows = detail::homodyne_rows(config);
  const std::size_t n = fields.size();
  const double fs = fields.sample_rate();
  const auto q1 = fields.q1.samples(), p1 = fields.p1.samples(), q2 = fields.q2.samples(), p2 = fields.p2.samples();

  std::vector<double> o1(n), o2(n);
  const bool constant = signal.kind() == PhaseSignal::Kind::zero;
  double c = std::cos(0.5 * config.phi_d), s = std::sin(0.5 * config.phi_d);
  for (std::size_t k = 0; k < n; ++k) {
    if (!constant) {
      const double half = 0.5 * (config.phi_d - signal.at(k, fs));
      c = std::cos(half);
      s = std::sin(half);
    }
    const Vec4 x{q1[k], p1[k], q2[k], p2[k]};
    o1[k] = c * detail::dot4(rows.a1, x) + s * detail::dot4(rows.b1, x);
    o2[k] = s * detail::dot4(rows.a2, x) + c * detail::dot4(rows.b2, x);
  }
  return {QuadratureRecord(std::move(o1), fs, detail::output_label(1)),
          QuadratureRecord(std::move(o2), fs, detail::output_label(2))};
}

/// First-order small-signal outputs at the optimal setpoint.
inline HomodynePair transfer_linearized(const FieldPair& fields, const PhaseSignal& signal) {
  detail::check_fields(fields, signal);
  if (signal.peak() > kLinearizedAmplitudeLimit)
    throw std::invalid_argument("transfer_linearized: |dphi| exceeds 0.1 rad");
  const std::size_t n = fields.size();
  const double fs = fields.sample_rate();
  const auto p1 = fields.p1.samples(), q2 = fields.q2.samples();
  const double r2 = 1.0 / std::numbers::sqrt2;
  std::vector<double> o1(n), o2(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double d = signal.at(k, fs);
    const double diff = p1[k] - q2[k], sum = p1[k] + q2[k];
    o1[k] = r2 * diff - d * 0.5 * r2 * sum;
    o2[k] = r2 * sum + d * 0.5 * r2 * diff;
  }
  return {QuadratureRecord(std::move(o1), fs, detail::output_label(1)),
          QuadratureRecord(std::move(o2), fs, detail::output_label(2))};
}

// ---------------------------------------------------------------------------
// Analytic covariance propagation of in-band quadrature levels.

inline Vec4 input_levels(const SqueezingSpec& spec1, const SqueezingSpec& spec2) {
  const auto v1 = effective_variances(spec1), v2 = effective_variances(spec2);
  return {v1.plus, v1.minus, v2.plus, v2.minus};
}

namespace detail {

inline double quad_form(const Vec4& a, const Vec4& levels, const Vec4& b) {
  return a[0] * levels[0] * b[0] + a[1] * levels[1] * b[1] + a[2] * levels[2] * b[2] + a[3] * levels[3] * b[3];
}

}  // namespace detail

/// In-band covariance of the two homodyne outputs (shot-noise units, vacuum 1/2).
inline Mat2 output_covariance(const SqueezingSpec& spec1, const SqueezingSpec& spec2,
                              const InterferometerConfig& config, double delta_phi = 0.0) {
  const auto levels = input_levels(spec1, spec2);
  const auto rows = detail::homodyne_rows(config);
  const double half = 0.5 * (config.phi_d - delta_phi);
  const double c = std::cos(half), s = std::sin(half);
  const Vec4 r1 = detail::combine(c, rows.a1, s, rows.b1);
  const Vec4 r2 = detail::combine(s, rows.a2, c, rows.b2);
  const double c12 = detail::quad_form(r1, levels, r2);
  return {{{detail::quad_form(r1, levels, r1), c12}, {c12, detail::quad_form(r2, levels, r2)}}};
}

/// Small-signal response of the squared-difference statistic at a setpoint.
struct PhaseSensitivity {
  double gain;         // d(C11 - C22)/d(dphi)
  double noise;        // C11^2 + C22^2 - 2 C12^2
  Mat2 covariance;

  /// gain^2 / noise; proportional to the tone SNR of the estimator.
  double snr_density() const { return noise > 0.0 ? gain * gain / noise : 0.0; }

  /// Two-sided low-frequency PSD (rad^2/Hz) of the phase estimate, gain-corrected.
  double phase_noise_psd(const Band& band) const { return 2.0 * kPi * noise / (gain * gain * band.width()); }
};

inline PhaseSensitivity phase_sensitivity(const SqueezingSpec& spec1, const SqueezingSpec& spec2,
                                          const InterferometerConfig& config) {
  const auto levels = input_levels(spec1, spec2);
  const auto rows = detail::homodyne_rows(config);
  const double half = 0.5 * config.phi_d;
  const double c = std::cos(half), s = std::sin(half);
  const Vec4 r1 = detail::combine(c, rows.a1, s, rows.b1);
  const Vec4 r2 = detail::combine(s, rows.a2, c, rows.b2);
  // d/d(dphi) of (c, s) is (s/2, -c/2).
  const Vec4 d1 = detail::combine(0.5 * s, rows.a1, -0.5 * c, rows.b1);
  const Vec4 d2 = detail::combine(-0.5 * c, rows.a2, 0.5 * s, rows.b2);
  const double c11 = detail::quad_form(r1, levels, r1);
  const double c22 = detail::quad_form(r2, levels, r2);
  const double c12 = detail::quad_form(r1, levels, r2);
  const double gain = 2.0 * detail::quad_form(d1, levels, r1) - 2.0 * detail::quad_form(d2, levels, r2);
  return {gain, c11 * c11 + c22 * c22 - 2.0 * c12 * c12, {{{c11, c12}, {c12, c22}}}};
}

enum class ScanAxes { theta_s_theta_1, theta_s_theta_2 };

/// values[i * second.size() + j] at (first[i], second[j]).
struct VarianceMap {
  ScanAxes axes;
  std::vector<double> first;   // theta_s grid
  std::vector<double> second;  // theta_1 or theta_2 grid
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * second.size() + j]; }
};

/// In-band variance of homodyne 1 (theta_1 scans) or 2 (theta_2 scans) over an
/// angle grid, other angles taken from `base`, no phase signal.
inline VarianceMap scan_output_variance(const SqueezingSpec& spec1, const SqueezingSpec& spec2, ScanAxes axes,
                                        std::vector<double> theta_s_grid, std::vector<double> theta_grid,
                                        const InterferometerConfig& base = InterferometerConfig::optimal()) {
  if (theta_s_grid.empty() || theta_grid.empty()) throw std::invalid_argument("scan_output_variance: empty grid");
  VarianceMap map{axes, std::move(theta_s_grid), std::move(theta_grid), {}};
  map.values.reserve(map.first.size() * map.second.size());
  for (double ts : map.first) {
    for (double th : map.second) {
      InterferometerConfig c = base;
      c.theta_s = ts;
      if (axes == ScanAxes::theta_s_theta_1)
        c.theta_1 = th;
      else
        c.theta_2 = th;
      const auto cov = output_covariance(spec1, spec2, c);
      map.values.push_back(axes == ScanAxes::theta_s_theta_1 ? cov[0][0] : cov[1][1]);
    }
  }
  return map;
}

/// n evenly spaced points on [lo, hi) (endpoint excluded; suited to periodic angles).
inline std::vector<double> periodic_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  return g;
}

}  // namespace hcl
