#pragma once

// Welch spectral estimation and the scalar metrics derived from it.
//
// PsdEstimate::psd is one-sided: white noise of variance s^2 sampled at fs reads
// 2 s^2 / fs. Scalar densities returned by noise_floor() and band_mean() are
// two-sided (half the one-sided level), the convention of the analytic bounds.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcl/fft.hpp"
#include "hcl/spectra.hpp"

namespace hcl {

enum class Window { hann, boxcar };

inline std::string to_string(Window w) { return w == Window::hann ? "hann" : "boxcar"; }

inline Window window_from_string(const std::string& s) {
  if (s == "hann") return Window::hann;
  if (s == "boxcar") return Window::boxcar;
  throw std::invalid_argument("unknown window '" + s + "'");
}

struct FrequencyRange {
  double lo_hz;
  double hi_hz;

  bool contains(double f) const { return f >= lo_hz && f <= hi_hz; }
};

/// Floor band excluding the 2 kHz tone; tone neighbourhood for the SNR.
inline constexpr FrequencyRange kFloorBand{2800.0, 40000.0};
inline constexpr FrequencyRange kToneBand{1200.0, 2800.0};

struct WelchOptions {
  std::size_t segment_length = std::size_t{1} << 16;
  double overlap = 0.5;
  Window window = Window::hann;
  bool detrend_mean = true;
  /// Bands whose per-segment mean PSD is kept for error estimates.
  std::vector<FrequencyRange> tracked_bands{};
};

struct BandTrack {
  FrequencyRange range;
  std::vector<double> segment_means;  // one-sided
};

struct PsdEstimate {
  std::vector<double> frequencies;  // Hz
  std::vector<double> psd;          // one-sided, units^2/Hz
  double fs = 0.0;
  std::size_t segment_length = 0;
  double overlap = 0.0;
  Window window = Window::hann;
  std::size_t n_segments = 0;
  double enbw_hz = 0.0;
  std::vector<BandTrack> tracks;

  double resolution() const { return fs / static_cast<double>(segment_length); }
};

namespace detail {

inline std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> win(n, 1.0);
  if (w == Window::hann) {
    for (std::size_t j = 0; j < n; ++j)
      win[j] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(j) / static_cast<double>(n));
  }
  return win;
}

inline std::vector<std::size_t> bins_in(const PsdEstimate& p, FrequencyRange r) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < p.frequencies.size(); ++k)
    if (r.contains(p.frequencies[k])) out.push_back(k);
  return out;
}

inline void require_coverage(const PsdEstimate& p, FrequencyRange r, const char* who) {
  if (p.frequencies.empty() || r.hi_hz > p.frequencies.back() || r.lo_hz < 0.0 || !(r.hi_hz > r.lo_hz))
    throw std::invalid_argument(std::string(who) + ": frequency range not covered by the PSD");
}

}  // namespace detail

inline PsdEstimate welch_psd(std::span<const double> x, double fs, const WelchOptions& opt = {}) {
  const std::size_t L = opt.segment_length;
  if (!is_power_of_two(L) || L < 2) throw std::invalid_argument("welch_psd: segment length must be a power of two");
  if (L > x.size()) throw std::invalid_argument("welch_psd: segment longer than record");
  if (!(opt.overlap >= 0.0 && opt.overlap < 1.0)) throw std::invalid_argument("welch_psd: overlap must be in [0, 1)");
  if (!(fs > 0.0)) throw std::invalid_argument("welch_psd: sample rate must be positive");

  const std::size_t hop = std::max<std::size_t>(1, L - static_cast<std::size_t>(std::llround(opt.overlap * L)));
  const std::size_t n_seg = (x.size() - L) / hop + 1;
  const auto win = detail::make_window(opt.window, L);
  const double u = std::inner_product(win.begin(), win.end(), win.begin(), 0.0);
  const double wsum = std::accumulate(win.begin(), win.end(), 0.0);

  PsdEstimate est;
  est.fs = fs;
  est.segment_length = L;
  est.overlap = opt.overlap;
  est.window = opt.window;
  est.n_segments = n_seg;
  est.enbw_hz = fs * u / (wsum * wsum);
  const std::size_t nb = L / 2 + 1;
  est.frequencies.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) est.frequencies[k] = static_cast<double>(k) * fs / static_cast<double>(L);

  std::vector<double> scale(nb, 2.0 / (fs * u));
  scale.front() = scale.back() = 1.0 / (fs * u);

  std::vector<std::vector<std::size_t>> track_bins;
  for (const auto& r : opt.tracked_bands) {
    est.tracks.push_back({r, {}});
    est.tracks.back().segment_means.reserve(n_seg);
    track_bins.push_back(detail::bins_in(est, r));
    if (track_bins.back().empty()) throw std::invalid_argument("welch_psd: tracked band contains no bins");
  }

  const RealFft& fft = cached_fft(L);
  std::vector<double> seg(L);
  std::vector<std::complex<double>> spec(nb);
  std::vector<double> acc(nb, 0.0), current(nb);
  for (std::size_t s = 0; s < n_seg; ++s) {
    const auto* src = x.data() + s * hop;
    double m = 0.0;
    if (opt.detrend_mean) {
      for (std::size_t j = 0; j < L; ++j) m += src[j];
      m /= static_cast<double>(L);
    }
    for (std::size_t j = 0; j < L; ++j) seg[j] = (src[j] - m) * win[j];
    fft.forward(seg, spec);
    for (std::size_t k = 0; k < nb; ++k) {
      current[k] = std::norm(spec[k]) * scale[k];
      acc[k] += current[k];
    }
    for (std::size_t t = 0; t < track_bins.size(); ++t) {
      double sum = 0.0;
      for (auto k : track_bins[t]) sum += current[k];
      est.tracks[t].segment_means.push_back(sum / static_cast<double>(track_bins[t].size()));
    }
  }
  est.psd.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) est.psd[k] = acc[k] / static_cast<double>(n_seg);
  return est;
}

/// Mean two-sided density over `range`, dropping bins within `exclusion_rbw`
/// resolution bandwidths of any listed tone.
inline double noise_floor(const PsdEstimate& psd, FrequencyRange range = kFloorBand,
                          std::span<const double> exclude_tones = {}, double exclusion_rbw = 3.0) {
  detail::require_coverage(psd, range, "noise_floor");
  const double guard = exclusion_rbw * psd.resolution();
  double sum = 0.0;
  std::size_t count = 0;
  for (auto k : detail::bins_in(psd, range)) {
    const double f = psd.frequencies[k];
    if (std::any_of(exclude_tones.begin(), exclude_tones.end(), [&](double t) { return std::abs(f - t) <= guard; }))
      continue;
    sum += psd.psd[k];
    ++count;
  }
  if (count == 0) throw std::invalid_argument("noise_floor: no bins left in the analysis band");
  return 0.5 * sum / static_cast<double>(count);
}

struct MeanWithError {
  double mean;
  double sigma;
};

/// Two-sided band mean of a tracked band with its standard error, taken from
/// the scatter of per-segment means (lag-1 correlation of overlapping
/// segments included).
inline MeanWithError band_mean(const PsdEstimate& psd, std::size_t track) {
  if (track >= psd.tracks.size()) throw std::out_of_range("band_mean: no such tracked band");
  const auto& s = psd.tracks[track].segment_means;
  const double k = static_cast<double>(s.size());
  if (s.size() < 3) throw std::invalid_argument("band_mean: need at least 3 segments");
  const double m = std::accumulate(s.begin(), s.end(), 0.0) / k;
  double var = 0.0, lag1 = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    var += (s[i] - m) * (s[i] - m);
    if (i + 1 < s.size()) lag1 += (s[i] - m) * (s[i + 1] - m);
  }
  const double rho = var > 0.0 ? lag1 / var : 0.0;
  var /= (k - 1.0);
  const double inflation = std::max(1.0, 1.0 + 2.0 * rho);
  return {0.5 * m, 0.5 * std::sqrt(var * inflation / k)};
}

/// Floor-subtracted power (one-sided integral) within +-half_width_rbw
/// resolution bandwidths of `f_hz`. The local floor is the mean PSD between 4
/// and 24 resolution bandwidths away on either side, skipping bins within
/// half_width_rbw of any tone in `other_tones`.
inline double tone_power(const PsdEstimate& psd, double f_hz, std::span<const double> other_tones = {},
                         double half_width_rbw = 3.0) {
  const double res = psd.resolution();
  if (!(f_hz > 0.0) || f_hz + 24.0 * res > psd.frequencies.back())
    throw std::invalid_argument("tone_power: tone too close to the PSD edges");
  double in_sum = 0.0, floor_sum = 0.0;
  std::size_t in_count = 0, floor_count = 0;
  for (std::size_t k = 1; k < psd.frequencies.size(); ++k) {
    const double d = std::abs(psd.frequencies[k] - f_hz);
    if (d <= half_width_rbw * res) {
      in_sum += psd.psd[k];
      ++in_count;
    } else if (d > (half_width_rbw + 1.0) * res && d <= 24.0 * res) {
      const double f = psd.frequencies[k];
      if (std::any_of(other_tones.begin(), other_tones.end(),
                      [&](double t) { return std::abs(f - t) <= (half_width_rbw + 1.0) * res; }))
        continue;
      floor_sum += psd.psd[k];
      ++floor_count;
    }
  }
  if (in_count == 0 || floor_count == 0) throw std::invalid_argument("tone_power: empty bin set");
  const double local_floor = floor_sum / static_cast<double>(floor_count);
  return (in_sum - local_floor * static_cast<double>(in_count)) * res;
}

/// Sinusoid amplitude from the tone power (power = A^2 / 2).
inline double tone_amplitude(const PsdEstimate& psd, double f_hz) {
  return std::sqrt(2.0 * std::max(0.0, tone_power(psd, f_hz)));
}

struct LockInResult {
  double amplitude;
  double phase;  // of A sin(2 pi f t + phase)
};

/// Digital lock-in: project onto sin/cos at f_hz over the whole record.
inline LockInResult lock_in(std::span<const double> x, double fs, double f_hz) {
  if (x.empty() || !(fs > 0.0)) throw std::invalid_argument("lock_in: empty record");
  long double s = 0.0L, c = 0.0L;
  const double w = kTwoPi * f_hz / fs;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double arg = w * static_cast<double>(k);
    s += x[k] * std::sin(arg);
    c += x[k] * std::cos(arg);
  }
  const double in_phase = static_cast<double>(2.0L * s / static_cast<long double>(x.size()));
  const double quad = static_cast<double>(2.0L * c / static_cast<long double>(x.size()));
  return {std::hypot(in_phase, quad), std::atan2(quad, in_phase)};
}

/// Expected relative noise level versus frequency; an empty shape means flat.
using NoiseShape = std::function<double(double)>;

/// Low-frequency PSD shape of a product of two flat band-limited processes of
/// bandwidth B: the overlap of the band with its shifted copy, 1 - f/B.
inline NoiseShape downmix_shape(double bandwidth_hz) {
  if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("downmix_shape: bandwidth must be > 0");
  return [bandwidth_hz](double f) { return std::max(0.0, 1.0 - std::abs(f) / bandwidth_hz); };
}

/// Integrated PSD over the tone neighbourhood divided by the noise expected
/// there, extrapolated from the reference band through `shape`.
inline double snr_statistic(const PsdEstimate& psd, FrequencyRange tone_band = kToneBand,
                            FrequencyRange reference = kFloorBand, std::span<const double> exclude_tones = {},
                            const NoiseShape& shape = {}, double exclusion_rbw = 3.0) {
  detail::require_coverage(psd, tone_band, "snr_statistic");
  detail::require_coverage(psd, reference, "snr_statistic");
  auto weight = [&](double f) {
    if (!shape) return 1.0;
    const double w = shape(f);
    if (!(w > 0.0)) throw std::invalid_argument("snr_statistic: noise shape must be positive in the bands used");
    return w;
  };
  const auto bins = detail::bins_in(psd, tone_band);
  if (bins.empty()) throw std::invalid_argument("snr_statistic: tone band contains no bins");
  double num = 0.0, expected = 0.0;
  for (auto k : bins) {
    num += psd.psd[k];
    expected += weight(psd.frequencies[k]);
  }
  const double guard = exclusion_rbw * psd.resolution();
  double ref = 0.0;
  std::size_t count = 0;
  for (auto k : detail::bins_in(psd, reference)) {
    const double f = psd.frequencies[k];
    if (std::any_of(exclude_tones.begin(), exclude_tones.end(), [&](double t) { return std::abs(f - t) <= guard; }))
      continue;
    ref += psd.psd[k] / weight(f);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("snr_statistic: no reference bins left");
  return num / (ref / static_cast<double>(count) * expected);
}

struct FloorAndTone {
  double floor;           // two-sided rad^2/Hz over kFloorBand
  double tone_amplitude;  // rad
  double snr;
};

inline FloorAndTone analyze_phase_psd(const PsdEstimate& psd, double f_mod_hz, const NoiseShape& shape = {}) {
  std::vector<double> tones;
  if (f_mod_hz > 0.0) tones.push_back(f_mod_hz);
  FloorAndTone out{noise_floor(psd, kFloorBand, tones), 0.0, snr_statistic(psd, kToneBand, kFloorBand, tones, shape)};
  if (f_mod_hz > 0.0) out.tone_amplitude = tone_amplitude(psd, f_mod_hz);
  return out;
}

// ---------------------------------------------------------------------------
// Export: CSV `frequency_hz,psd` (one-sided) plus a JSON metadata sidecar.

inline constexpr int kPsdSchemaVersion = 1;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_psd_csv(std::ostream& os, const PsdEstimate& psd) {
  os << "frequency_hz,psd\n";
  for (std::size_t k = 0; k < psd.frequencies.size(); ++k)
    os << format_double(psd.frequencies[k]) << ',' << format_double(psd.psd[k]) << '\n';
}

inline nlohmann::json psd_metadata(const PsdEstimate& psd) {
  return {{"schema_version", kPsdSchemaVersion},
          {"sidedness", "one-sided"},
          {"sample_rate_hz", psd.fs},
          {"segment_length", psd.segment_length},
          {"overlap", psd.overlap},
          {"window", to_string(psd.window)},
          {"n_segments", psd.n_segments},
          {"resolution_hz", psd.resolution()},
          {"enbw_hz", psd.enbw_hz}};
}

}  // namespace hcl
