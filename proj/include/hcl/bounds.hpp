#pragma once

// Closed-form phase-PSD reference curves (two-sided, rad^2/Hz) and power-law fits.
// This layer owns no Monte Carlo; tests use it as the oracle for simulations.

#include <cmath>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "hcl/spectra.hpp"
#include "hcl/welch.hpp"

namespace hcl {

namespace detail {

inline void require_photons(double n, double width) {
  if (!std::isfinite(n) || !(n > 0.0)) throw std::invalid_argument("bounds: photon number must be > 0");
  if (!std::isfinite(width) || !(width > 0.0)) throw std::invalid_argument("bounds: bandwidth must be > 0");
}

}  // namespace detail

/// Spectral QCRB for two squeezed inputs: pi / (DeltaOmega n (n + 2)).
inline double qcrb_two_squeezed(double n, double width) {
  detail::require_photons(n, width);
  return kPi / (width * n * (n + 2.0));
}

/// Shot-noise reference pi / (DeltaOmega n); exactly (n + 2) times the QCRB.
inline double sql_line(double n, double width) {
  detail::require_photons(n, width);
  return kPi / (width * n);
}

/// One squeezed plus one coherent input, same flux per port: pi / (DeltaOmega n (n + 3/2)).
inline double sqz_coherent_qcrb(double n, double width) {
  detail::require_photons(n, width);
  return kPi / (width * n * (n + 1.5));
}

/// Same inputs read out on a dark fringe with one homodyne: pi / (DeltaOmega n (n + 1)).
inline double sqz_coherent_homodyne(double n, double width) {
  detail::require_photons(n, width);
  return kPi / (width * n * (n + 1.0));
}

/// Estimator PSD with loss, 4 pi V+ V- / ((V+ - V-)^2 DeltaOmega), with
/// V+- = (eta^2 e^{+-2r} + 1 - eta^2) / 2.
inline double lossy_estimator_psd(double r, double eta, double width) {
  if (!(r > 0.0)) throw std::invalid_argument("lossy_estimator_psd: r must be > 0");
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("lossy_estimator_psd: eta must lie in (0, 1]");
  detail::require_photons(1.0, width);
  const double t = eta * eta;
  const double vp = 0.5 * (t * std::exp(2.0 * r) + 1.0 - t);
  const double vm = 0.5 * (t * std::exp(-2.0 * r) + 1.0 - t);
  return 4.0 * kPi * vp * vm / ((vp - vm) * (vp - vm) * width);
}

/// The main-text form written with the power loss L:
///   (1 + 2 L (1-L)^2 n) / ((DeltaOmega/pi) (1-L)^3 n ((1-L) n + 2)).
/// It coincides with lossy_estimator_psd when n = 2 sinh^2(r) / (1 - L).
inline double lossy_psd_loss_form(double n, double loss, double width) {
  detail::require_photons(n, width);
  if (!(loss >= 0.0 && loss < 1.0)) throw std::invalid_argument("lossy_psd_loss_form: loss must lie in [0, 1)");
  const double t = 1.0 - loss;
  return (1.0 + 2.0 * loss * t * t * n) / (width / kPi * t * t * t * n * (t * n + 2.0));
}

/// Both closed forms side by side for one (r, loss) pair, with the loss form
/// evaluated at three photon-number readings.
struct LossFormCrossCheck {
  double closed_form;     // lossy_estimator_psd
  double at_n_pure;       // n = 2 sinh^2 r
  double at_n_flux;       // n = V+ + V- - 1
  double at_n_matching;   // n = 2 sinh^2 r / (1 - L)
  double relative_mismatch() const { return std::abs(at_n_matching - closed_form) / closed_form; }
};

inline LossFormCrossCheck cross_check_loss_forms(double r, double loss, double width) {
  const double eta = eta_for_loss(loss);
  const SqueezingSpec spec(r, eta, Band(width, width));
  const auto flux = photon_flux(spec);
  return {lossy_estimator_psd(r, eta, width), lossy_psd_loss_form(flux.n_pure, loss, width),
          lossy_psd_loss_form(flux.n_flux, loss, width), lossy_psd_loss_form(flux.n_pure / (1.0 - loss), loss, width)};
}

struct BoundsReport {
  double n_flux;
  double qcrb_two_sqz;
  double lossy_estimator_psd;
  double sql;
  double sqz_coherent_qcrb;
  double sqz_coherent_homodyne;
};

/// All reference values for one squeezed input spec, evaluated at its
/// post-loss flux n = V+ + V- - 1.
inline BoundsReport bounds_for(const SqueezingSpec& spec) {
  const auto f = photon_flux(spec);
  const double w = spec.band().width();
  return {f.n_flux,
          qcrb_two_squeezed(f.n_flux, w),
          lossy_estimator_psd(spec.r(), spec.eta(), w),
          sql_line(f.n_flux, w),
          sqz_coherent_qcrb(f.n_flux, w),
          sqz_coherent_homodyne(f.n_flux, w)};
}

struct ScalingPoint {
  double n;
  double psd;
};

struct ScalingFit {
  std::vector<ScalingPoint> points;
  double exponent;   // d log(psd) / d log(n)
  double intercept;  // log(psd) at n = 1
  double residual;   // rms of log residuals
};

/// Least-squares slope of log(psd) against log(n).
inline ScalingFit fit_scaling(std::vector<ScalingPoint> points) {
  if (points.size() < 3) throw std::invalid_argument("fit_scaling: need at least 3 points");
  double lo = points.front().n, hi = lo;
  for (const auto& p : points) {
    if (!(p.n > 0.0) || !(p.psd > 0.0) || !std::isfinite(p.n) || !std::isfinite(p.psd))
      throw std::invalid_argument("fit_scaling: values must be positive and finite");
    lo = std::min(lo, p.n);
    hi = std::max(hi, p.n);
  }
  if (hi < 4.0 * lo) throw std::invalid_argument("fit_scaling: n must span at least a factor of 4");
  const double k = static_cast<double>(points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : points) {
    const double x = std::log(p.n), y = std::log(p.psd);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / k;
  double rss = 0;
  for (const auto& p : points) {
    const double e = std::log(p.psd) - (icpt + slope * std::log(p.n));
    rss += e * e;
  }
  return {std::move(points), slope, icpt, std::sqrt(rss / k)};
}

inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) throw std::invalid_argument("log_grid: need 0 < lo < hi, count >= 2");
  std::vector<double> g(count);
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
  g.back() = hi;
  return g;
}

/// CSV `n,qcrb,sql,sqz_coh_qcrb,sqz_coh_homodyne,lossy_psd`. n is the flux
/// reaching the interferometer, so lossy_psd uses 2 sinh^2 r = n / (1 - loss).
inline void write_bounds_csv(std::ostream& os, std::span<const double> n_values, double width, double loss) {
  const double eta = eta_for_loss(loss);
  os << "n,qcrb,sql,sqz_coh_qcrb,sqz_coh_homodyne,lossy_psd\n";
  for (double n : n_values) {
    os << format_double(n) << ',' << format_double(qcrb_two_squeezed(n, width)) << ','
       << format_double(sql_line(n, width)) << ',' << format_double(sqz_coherent_qcrb(n, width)) << ','
       << format_double(sqz_coherent_homodyne(n, width)) << ','
       << format_double(lossy_estimator_psd(r_for_photon_number(n / (eta * eta)), eta, width)) << '\n';
  }
}

}  // namespace hcl
