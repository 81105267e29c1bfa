#pragma once

// Wigner-sampled Gaussian quadrature processes for band-limited squeezed vacuum.
//
// Each record is drawn in the frequency domain: independent complex Gaussian
// coefficients with variance proportional to the target two-sided PSD,
// Hermitian symmetry implied by the real inverse transform. The target is
// V+ (q) or V- (p) inside the band and the vacuum level 1/2 elsewhere; loss
// enters through V+- as PSD mixing of squeezed and vacuum noise.
//
// Per-sample variance of a record equals the mean of its discrete two-sided
// PSD, so a vacuum record has variance 1/2.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "hcl/fft.hpp"
#include "hcl/record.hpp"
#include "hcl/spectra.hpp"

namespace hcl {

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(seed ^ mix_seed(stream + 0x5851f42d4c957f2dull));
}

/// Target two-sided PSD of the q or p quadrature at angular frequency omega.
inline double psd_shape(const SqueezingSpec& spec, Quadrature quadrature, double omega) {
  if (!(omega >= 0.0)) throw std::invalid_argument("psd_shape: omega must be >= 0");
  if (!spec.band().contains(omega)) return kVacuumLevel;
  const auto v = effective_variances(spec);
  return quadrature == Quadrature::q ? v.plus : v.minus;
}

/// Smallest power-of-two sample count covering `duration` seconds at `fs`.
inline std::size_t samples_for_duration(double duration, double fs) {
  if (!(duration > 0.0) || !(fs > 0.0)) throw std::invalid_argument("samples_for_duration: bad arguments");
  const double exact = duration * fs;
  std::size_t n = 2;
  while (static_cast<double>(n) < exact * (1.0 - 1e-12)) n <<= 1;
  return n;
}

inline void check_nyquist(const Band& band, double fs) {
  if (!(fs > 2.0 * band.upper_hz()))
    throw std::invalid_argument("sample rate violates Nyquist for the squeezing band");
}

/// One quadrature record of length n (power of two).
inline QuadratureRecord synth_quadrature(const SqueezingSpec& spec, Quadrature quadrature, std::size_t n,
                                         double fs, std::uint64_t seed, RecordLabel label) {
  if (!is_power_of_two(n) || n < 2) throw std::invalid_argument("synth: length must be a power of two");
  check_nyquist(spec.band(), fs);
  label.quadrature = quadrature;

  const auto v = effective_variances(spec);
  const double in_band = quadrature == Quadrature::q ? v.plus : v.minus;
  const double nd = static_cast<double>(n);
  const double bin_omega = kTwoPi * fs / nd;
  const std::size_t half = n / 2;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<std::complex<double>> spectrum(half + 1);
  spectrum[0] = std::sqrt(nd * kVacuumLevel) * gauss(rng);
  for (std::size_t k = 1; k < half; ++k) {
    const double level = spec.band().contains(bin_omega * static_cast<double>(k)) ? in_band : kVacuumLevel;
    const double s = std::sqrt(0.5 * nd * level);
    const double re = gauss(rng);
    const double im = gauss(rng);
    spectrum[k] = {s * re, s * im};
  }
  spectrum[half] = std::sqrt(nd * kVacuumLevel) * gauss(rng);

  std::vector<double> samples(n);
  cached_fft(n).inverse(spectrum, samples);
  for (auto& x : samples) x /= nd;
  return QuadratureRecord(std::move(samples), fs, label);
}

/// The four input quadratures of the two interferometer ports.
struct FieldPair {
  QuadratureRecord q1, p1, q2, p2;

  FieldPair(QuadratureRecord q1_, QuadratureRecord p1_, QuadratureRecord q2_, QuadratureRecord p2_)
      : q1(std::move(q1_)), p1(std::move(p1_)), q2(std::move(q2_)), p2(std::move(p2_)) {
    for (const auto* r : {&p1, &q2, &p2}) {
      if (r->size() != q1.size() || r->sample_rate() != q1.sample_rate())
        throw std::invalid_argument("FieldPair: records differ in length or sample rate");
    }
  }

  std::size_t size() const { return q1.size(); }
  double sample_rate() const { return q1.sample_rate(); }
};

inline FieldPair synth_squeezed_pair_n(const SqueezingSpec& spec1, const SqueezingSpec& spec2, std::size_t n,
                                       double fs, std::uint64_t seed) {
  check_nyquist(spec1.band(), fs);
  check_nyquist(spec2.band(), fs);
  return FieldPair(synth_quadrature(spec1, Quadrature::q, n, fs, derive_seed(seed, 0), {Quadrature::q, 1}),
                   synth_quadrature(spec1, Quadrature::p, n, fs, derive_seed(seed, 1), {Quadrature::p, 1}),
                   synth_quadrature(spec2, Quadrature::q, n, fs, derive_seed(seed, 2), {Quadrature::q, 2}),
                   synth_quadrature(spec2, Quadrature::p, n, fs, derive_seed(seed, 3), {Quadrature::p, 2}));
}

/// duration * fs must be a power of two.
inline FieldPair synth_squeezed_pair(const SqueezingSpec& spec1, const SqueezingSpec& spec2, double duration,
                                     double fs, std::uint64_t seed) {
  const double exact = duration * fs;
  const double rounded = std::round(exact);
  if (!(exact >= 2.0) || std::abs(exact - rounded) > 1e-6 * exact ||
      !is_power_of_two(static_cast<std::size_t>(rounded)))
    throw std::invalid_argument("synth_squeezed_pair: duration * fs must be a power of two");
  return synth_squeezed_pair_n(spec1, spec2, static_cast<std::size_t>(rounded), fs, seed);
}

}  // namespace hcl
