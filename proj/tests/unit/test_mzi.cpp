#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "hcl/estimator.hpp"
#include "hcl/mzi.hpp"
#include "hcl/synth.hpp"
#include "hcl/welch.hpp"

using namespace hcl;

namespace {

constexpr double kFs = 7e6;
const Band kBand = Band::from_hz(200e3, 700e3);
const double kR2 = 1.0 / std::numbers::sqrt2;

FieldPair fields(double r, std::size_t n, std::uint64_t seed, double eta = 1.0) {
  const SqueezingSpec s(r, eta, kBand);
  return synth_squeezed_pair_n(s, s, n, kFs, seed);
}

double rms_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

double rms(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s / static_cast<double>(a.size()));
}

// 2 <x sin(2 pi f t)>: signed in-phase amplitude.
double in_phase(std::span<const double> x, double f) {
  long double s = 0.0L;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * std::sin(kTwoPi * f * static_cast<double>(k) / kFs);
  return static_cast<double>(2.0L * s / static_cast<long double>(x.size()));
}

InterferometerConfig random_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-kPi, kPi);
  return {u(rng), u(rng), u(rng), u(rng)};
}

}  // namespace

TEST(mzi, identity_fringe) {
  const auto f = fields(0.7, 1024, 1);
  const auto out = transfer_exact(f, {0.0, 0.0, 0.0, 0.0}, PhaseSignal::zero());
  for (std::size_t k = 0; k < f.size(); ++k) {
    EXPECT_NEAR(out.out1[k], f.q1[k], 1e-12);
    EXPECT_NEAR(out.out2[k], f.q2[k], 1e-12);
  }
}

TEST(mzi, optimal_setpoint_outputs) {
  const auto f = fields(0.7, 1024, 2);
  const auto out = transfer_exact(f, InterferometerConfig::optimal(), PhaseSignal::zero());
  for (std::size_t k = 0; k < f.size(); ++k) {
    EXPECT_NEAR(out.out1[k], kR2 * (f.p1[k] - f.q2[k]), 1e-12);
    EXPECT_NEAR(out.out2[k], kR2 * (f.p1[k] + f.q2[k]), 1e-12);
  }
}

TEST(mzi, exact_rows_match_complex_transfer) {
  std::mt19937_64 rng(3);
  const auto f = fields(0.5, 256, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cfg = random_config(rng);
    const double dphi = 0.3 * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    std::vector<double> sig(f.size(), dphi);
    const auto out = transfer_exact(f, cfg, PhaseSignal::arbitrary(sig));
    const auto t = quadrature_transfer(cfg, dphi);
    for (std::size_t k = 0; k < f.size(); ++k) {
      const Vec4 x{f.q1[k], f.p1[k], f.q2[k], f.p2[k]};
      EXPECT_NEAR(out.out1[k], detail::dot4(t[0], x), 1e-12);
      EXPECT_NEAR(out.out2[k], detail::dot4(t[2], x), 1e-12);
    }
  }
}

TEST(mzi, transfer_is_orthogonal_symplectic) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = quadrature_transfer(random_config(rng), 0.1);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        double tt = 0.0, sym = 0.0;
        for (int k = 0; k < 4; ++k) tt += t[i][k] * t[j][k];
        // T J T^T with J = diag(w, w), w = [[0, 1], [-1, 0]].
        for (int m = 0; m < 2; ++m) sym += t[i][2 * m] * t[j][2 * m + 1] - t[i][2 * m + 1] * t[j][2 * m];
        EXPECT_NEAR(tt, i == j ? 1.0 : 0.0, 1e-12);
        const double jij = (i / 2 == j / 2) ? (j == i + 1 ? 1.0 : (i == j + 1 ? -1.0 : 0.0)) : 0.0;
        EXPECT_NEAR(sym, jij, 1e-12);
      }
    }
  }
}

TEST(mzi, passive_optics_conserves_total_variance) {
  std::mt19937_64 rng(5);
  const auto f = fields(1.0, 1 << 14, 5, 0.9);
  double in_sum = 0.0;
  for (const auto* r : {&f.q1, &f.p1, &f.q2, &f.p2}) in_sum += variance(r->samples());
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = quadrature_transfer(random_config(rng));
    std::array<std::vector<double>, 4> out;
    for (auto& o : out) o.resize(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
      const Vec4 x{f.q1[k], f.p1[k], f.q2[k], f.p2[k]};
      for (int i = 0; i < 4; ++i) out[i][k] = detail::dot4(t[i], x);
    }
    double out_sum = 0.0;
    for (const auto& o : out) out_sum += variance(o);
    EXPECT_NEAR(out_sum, in_sum, 1e-10 * in_sum);
  }
}

TEST(mzi, exact_matches_linearized_for_small_constant_phase) {
  const auto f = fields(0.7, 1 << 14, 6);
  std::vector<double> sig(f.size(), 0.01);
  const auto ex = transfer_exact(f, InterferometerConfig::optimal(), PhaseSignal::arbitrary(sig));
  const auto li = transfer_linearized(f, PhaseSignal::arbitrary(sig));
  EXPECT_LT(rms_diff(ex.out1.samples(), li.out1.samples()) / rms(ex.out1.samples()), 1e-4);
  EXPECT_LT(rms_diff(ex.out2.samples(), li.out2.samples()) / rms(ex.out2.samples()), 1e-4);
}

TEST(mzi, linearization_error_is_second_order) {
  const auto f = fields(0.7, 1 << 14, 7);
  auto err = [&](double a) {
    const auto sig = PhaseSignal::sinusoid(a, 2000.0);
    const auto ex = transfer_exact(f, InterferometerConfig::optimal(), sig);
    const auto li = transfer_linearized(f, sig);
    return rms_diff(ex.out1.samples(), li.out1.samples());
  };
  const double ratio = err(0.08) / err(0.04);
  EXPECT_NEAR(ratio, 4.0, 0.8);
}

TEST(mzi, linearized_rejects_large_signal) {
  const auto f = fields(0.7, 1024, 8);
  EXPECT_THROW(transfer_linearized(f, PhaseSignal::sinusoid(0.2, 2000.0)), std::invalid_argument);
  EXPECT_THROW(transfer_exact(f, InterferometerConfig::optimal(), PhaseSignal::arbitrary(std::vector<double>(10))),
               std::invalid_argument);
}

TEST(mzi, linearized_zero_signal_preserves_norm) {
  const auto f = fields(0.7, 1024, 9);
  const auto out = transfer_linearized(f, PhaseSignal::zero());
  for (std::size_t k = 0; k < f.size(); ++k)
    EXPECT_NEAR(out.out1[k] * out.out1[k] + out.out2[k] * out.out2[k], f.p1[k] * f.p1[k] + f.q2[k] * f.q2[k], 1e-12);
}

TEST(mzi, squared_difference_expectation) {
  // Gaussian moment oracle: E[out1^2 - out2^2] = dphi (var q2 - var p1) to first order,
  // with full-band variances K V + (1 - K)/2.
  const std::size_t n = std::size_t{1} << 22;
  const double r = 1.5, a = 0.1, f_mod = 2000.0;
  const auto f = fields(r, n, 10);
  const auto out = transfer_linearized(f, PhaseSignal::sinusoid(a, f_mod));
  std::vector<double> d(n);
  for (std::size_t k = 0; k < n; ++k) d[k] = out.out1[k] * out.out1[k] - out.out2[k] * out.out2[k];
  const auto v = effective_variances(SqueezingSpec(r, 1.0, kBand));
  const double frac = band_variance_fraction(kBand, n, kFs);
  const double var_q2 = frac * v.plus + (1.0 - frac) * 0.5, var_p1 = frac * v.minus + (1.0 - frac) * 0.5;
  EXPECT_NEAR(in_phase(d, f_mod) / (a * (var_q2 - var_p1)), 1.0, 0.05);
}

TEST(mzi, swapping_p1_and_q2_flips_estimator_sign) {
  const std::size_t n = std::size_t{1} << 21;
  const SqueezingSpec s(1.2, 1.0, kBand);
  const auto f = synth_squeezed_pair_n(s, s, n, kFs, 11);
  const FieldPair swapped(f.q1, f.q2, f.p1, f.p2);
  const auto sig = PhaseSignal::sinusoid(0.05, 2000.0);
  const auto cfg = EstimatorConfig::from_specs(s, s, kFs);
  const double a = in_phase(estimate_phase(transfer_exact(f, InterferometerConfig::optimal(), sig), cfg).view(), 2000.0);
  const double b =
      in_phase(estimate_phase(transfer_exact(swapped, InterferometerConfig::optimal(), sig), cfg).view(), 2000.0);
  EXPECT_GT(a, 0.04);
  EXPECT_LT(b, -0.04);
}

TEST(scan_output_variance, vacuum_is_flat) {
  const SqueezingSpec vac(0.0, 1.0, kBand);
  const auto g = periodic_grid(-kPi, kPi, 12);
  const auto map = scan_output_variance(vac, vac, ScanAxes::theta_s_theta_1, g, g);
  for (double v : map.values) EXPECT_NEAR(v, 0.5, 1e-14);
}

TEST(scan_output_variance, extrema_and_epr_point) {
  const SqueezingSpec s(std::log(2.0), 1.0, kBand);
  const auto v = effective_variances(s);
  const auto g = periodic_grid(-kPi, kPi, 64);
  for (auto axes : {ScanAxes::theta_s_theta_1, ScanAxes::theta_s_theta_2}) {
    const auto map = scan_output_variance(s, s, axes, g, g);
    EXPECT_NEAR(*std::min_element(map.values.begin(), map.values.end()), v.minus, 1e-12);
    EXPECT_NEAR(*std::max_element(map.values.begin(), map.values.end()), v.plus, 1e-12);
  }
  const auto at_opt = scan_output_variance(s, s, ScanAxes::theta_s_theta_1, {0.0}, {-kPi / 2});
  EXPECT_NEAR(at_opt.values[0], 0.5 * (v.plus + v.minus), 1e-14);
  const auto out2 = scan_output_variance(s, s, ScanAxes::theta_s_theta_2, {0.0}, {0.0});
  EXPECT_NEAR(out2.values[0], 0.5 * (v.plus + v.minus), 1e-14);
}

TEST(scan_output_variance, periodic_in_pi) {
  const SqueezingSpec s1(0.9, 0.95, kBand), s2(0.6, 0.85, kBand);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int k = 0; k < 50; ++k) {
    const double ts = u(rng), t1 = u(rng);
    const auto a = scan_output_variance(s1, s2, ScanAxes::theta_s_theta_1, {ts}, {t1});
    const auto b = scan_output_variance(s1, s2, ScanAxes::theta_s_theta_1, {ts + kPi}, {t1 + kPi});
    EXPECT_NEAR(a.values[0], b.values[0], 1e-12);
  }
}

TEST(phase_sensitivity, optimum_reaches_estimator_theory) {
  const SqueezingSpec s(r_for_photon_number(8.0), 1.0, kBand);
  const auto v = effective_variances(s);
  const auto sens = phase_sensitivity(s, s, InterferometerConfig::optimal());
  EXPECT_GT(sens.gain, 0.0);
  EXPECT_NEAR(sens.snr_density(), 160.0, 1e-9);
  EXPECT_NEAR(sens.snr_density(), (v.plus - v.minus) * (v.plus - v.minus) / (2.0 * v.plus * v.minus), 1e-9);
  EXPECT_NEAR(sens.phase_noise_psd(kBand) / estimator_noise_psd_theory(s, kBand), 1.0, 1e-12);
}

TEST(phase_sensitivity, gain_matches_finite_difference) {
  const SqueezingSpec s1(1.0, 0.9, kBand), s2(0.8, 1.0, kBand);
  std::mt19937_64 rng(13);
  for (int k = 0; k < 20; ++k) {
    const auto cfg = random_config(rng);
    const double h = 1e-5;
    const auto p = output_covariance(s1, s2, cfg, h), m = output_covariance(s1, s2, cfg, -h);
    const double fd = ((p[0][0] - p[1][1]) - (m[0][0] - m[1][1])) / (2.0 * h);
    EXPECT_NEAR(phase_sensitivity(s1, s2, cfg).gain, fd, 1e-6);
  }
}

TEST(phase_sensitivity, snr_landscape_symmetries) {
  // The squared-difference SNR is invariant under theta_s -> theta_s + pi and
  // under theta_1 -> theta_1 + pi separately (each flips signs of whole rows).
  const SqueezingSpec s(1.0, 1.0, kBand);
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int k = 0; k < 50; ++k) {
    InterferometerConfig c;
    c.theta_s = u(rng);
    c.theta_1 = u(rng);
    const double base = phase_sensitivity(s, s, c).snr_density();
    auto shifted = c;
    shifted.theta_s += kPi;
    EXPECT_NEAR(phase_sensitivity(s, s, shifted).snr_density(), base, 1e-9 * (1.0 + base));
    shifted = c;
    shifted.theta_1 += kPi;
    EXPECT_NEAR(phase_sensitivity(s, s, shifted).snr_density(), base, 1e-9 * (1.0 + base));
  }
}

TEST(phase_sensitivity, optimum_is_global_maximum) {
  const SqueezingSpec s(r_for_photon_number(8.0), 1.0, kBand);
  const double best = phase_sensitivity(s, s, InterferometerConfig::optimal()).snr_density();
  const auto g = periodic_grid(-kPi, kPi, 96);
  for (double ts : g) {
    for (double t1 : g) {
      InterferometerConfig c;
      c.theta_s = ts;
      c.theta_1 = t1;
      EXPECT_LE(phase_sensitivity(s, s, c).snr_density(), best * (1.0 + 1e-12));
    }
  }
}
