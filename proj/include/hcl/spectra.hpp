#pragma once

// Squeezed-field parameters, frequency bands and photon-flux bookkeeping.
//
// Conventions used throughout the library:
//  * quadrature noise is referenced to shot noise with the vacuum two-sided
//    PSD equal to 1/2, so V+ and V- are in-band PSD levels directly;
//  * all internal frequencies are angular (rad/s); Hz only at the I/O edge.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hcl {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kVacuumLevel = 0.5;

inline constexpr double hz_to_rad(double hz) { return kTwoPi * hz; }
inline constexpr double rad_to_hz(double omega) { return omega / kTwoPi; }

/// Ideal two-sided brick-wall filter H[Omega]: unity for ||Omega| - center| <= width/2.
class Band {
 public:
  Band(double center, double width) : center_(center), width_(width) {
    if (!std::isfinite(center) || !std::isfinite(width))
      throw std::invalid_argument("Band: non-finite parameters");
    if (width <= 0.0) throw std::invalid_argument("Band: width must be positive");
    if (center - 0.5 * width < 0.0)
      throw std::invalid_argument("Band: band must not cross zero frequency");
  }

  static Band from_hz(double lo_hz, double hi_hz) {
    if (!(hi_hz > lo_hz)) throw std::invalid_argument("Band: upper edge must exceed lower edge");
    return Band(hz_to_rad(0.5 * (lo_hz + hi_hz)), hz_to_rad(hi_hz - lo_hz));
  }

  double center() const { return center_; }
  double width() const { return width_; }
  double lower() const { return center_ - 0.5 * width_; }
  double upper() const { return center_ + 0.5 * width_; }
  double lower_hz() const { return rad_to_hz(lower()); }
  double upper_hz() const { return rad_to_hz(upper()); }

  /// H[omega] for either sign of omega.
  bool contains(double omega) const {
    const double a = std::abs(omega);
    return a >= lower() && a <= upper();
  }

  friend bool operator==(const Band&, const Band&) = default;

 private:
  double center_;
  double width_;
};

/// One squeezed input: squeezing parameter r, amplitude transmission eta
/// (1 - eta^2 is the power loss) and the band over which squeezing exists.
class SqueezingSpec {
 public:
  SqueezingSpec(double r, double eta, Band band) : r_(r), eta_(eta), band_(band) {
    if (!std::isfinite(r) || r < 0.0) throw std::invalid_argument("SqueezingSpec: r must be >= 0");
    if (!std::isfinite(eta) || eta <= 0.0 || eta > 1.0)
      throw std::invalid_argument("SqueezingSpec: eta must lie in (0, 1]");
  }

  double r() const { return r_; }
  double eta() const { return eta_; }
  double loss() const { return 1.0 - eta_ * eta_; }
  const Band& band() const { return band_; }

  friend bool operator==(const SqueezingSpec&, const SqueezingSpec&) = default;

 private:
  double r_;
  double eta_;
  Band band_;
};

struct Variances {
  double plus;
  double minus;
};

/// V+- = (eta^2 e^{+-2r} + 1 - eta^2) / 2.
inline Variances effective_variances(const SqueezingSpec& spec) {
  const double t = spec.eta() * spec.eta();
  return {0.5 * (t * std::exp(2.0 * spec.r()) + 1.0 - t),
          0.5 * (t * std::exp(-2.0 * spec.r()) + 1.0 - t)};
}

struct FluxReport {
  double n_flux;  // V+ + V- - 1, photons per frequency mode after loss
  double n_pure;  // 2 sinh^2 r, before loss
  double v_plus;
  double v_minus;
};

inline FluxReport photon_flux(const SqueezingSpec& spec) {
  const auto v = effective_variances(spec);
  const double s = std::sinh(spec.r());
  return {v.plus + v.minus - 1.0, 2.0 * s * s, v.plus, v.minus};
}

/// Squeezing in dB (variance ratio 10^{-dB/10} = e^{-2r}) to r.
inline double db_to_r(double squeeze_db) {
  if (!std::isfinite(squeeze_db) || squeeze_db < 0.0)
    throw std::invalid_argument("db_to_r: squeezing in dB must be >= 0");
  return std::log(10.0) / 20.0 * squeeze_db;
}

/// Inverse of n = 2 sinh^2 r.
inline double r_for_photon_number(double n_pure) {
  if (!std::isfinite(n_pure) || n_pure < 0.0)
    throw std::invalid_argument("r_for_photon_number: n must be >= 0");
  return std::asinh(std::sqrt(0.5 * n_pure));
}

inline double eta_for_loss(double power_loss) {
  if (!std::isfinite(power_loss) || power_loss < 0.0 || power_loss >= 1.0)
    throw std::invalid_argument("eta_for_loss: loss must lie in [0, 1)");
  return std::sqrt(1.0 - power_loss);
}

}  // namespace hcl
