#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hcl/bounds.hpp"

using namespace hcl;

namespace {

const double kWidth = kTwoPi * 500e3;

ScalingFit fit_curve(double (*f)(double, double), const std::vector<double>& ns) {
  std::vector<ScalingPoint> pts;
  for (double n : ns) pts.push_back({n, f(n, kWidth)});
  return fit_scaling(pts);
}

}  // namespace

TEST(bounds, closed_form_values) {
  EXPECT_NEAR(qcrb_two_squeezed(2.0, kPi), 0.125, 1e-15);
  EXPECT_NEAR(sql_line(2.0, kPi), 0.5, 1e-15);
  EXPECT_NEAR(sqz_coherent_qcrb(2.0, kPi), 1.0 / 7.0, 1e-15);
  EXPECT_NEAR(sqz_coherent_homodyne(2.0, kPi), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(sql_line(1.0, kWidth), kPi / kWidth, 1e-25);
}

TEST(bounds, sql_is_n_plus_two_times_qcrb) {
  for (double n : log_grid(0.1, 100.0, 15))
    EXPECT_NEAR(sql_line(n, kWidth) / qcrb_two_squeezed(n, kWidth), n + 2.0, 1e-12 * (n + 2.0));
}

TEST(bounds, ordering_of_reference_curves) {
  for (double n : log_grid(0.5, 32.0, 20)) {
    const double q = qcrb_two_squeezed(n, kWidth);
    EXPECT_LT(q, sqz_coherent_qcrb(n, kWidth));
    EXPECT_LT(sqz_coherent_qcrb(n, kWidth), sqz_coherent_homodyne(n, kWidth));
    EXPECT_LT(sqz_coherent_homodyne(n, kWidth), sql_line(n, kWidth));
  }
}

TEST(bounds, rejects_nonpositive_inputs) {
  EXPECT_THROW(qcrb_two_squeezed(0.0, kWidth), std::invalid_argument);
  EXPECT_THROW(sql_line(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(sqz_coherent_qcrb(-1.0, kWidth), std::invalid_argument);
  EXPECT_THROW(sqz_coherent_homodyne(NAN, kWidth), std::invalid_argument);
}

TEST(bounds, lossless_estimator_saturates_qcrb) {
  for (double r : {0.2, 0.7, 1.3, 2.0}) {
    const double n = 2.0 * std::sinh(r) * std::sinh(r);
    EXPECT_NEAR(lossy_estimator_psd(r, 1.0, kWidth) / qcrb_two_squeezed(n, kWidth), 1.0, 1e-12);
  }
}

TEST(bounds, lossy_estimator_oracle) {
  EXPECT_NEAR(lossy_estimator_psd(std::log(2.0), 0.9, 1.0), 1.83362732362304072, 1e-13);
  EXPECT_THROW(lossy_estimator_psd(0.0, 0.9, kWidth), std::invalid_argument);
}

TEST(bounds, lossy_monotone_in_efficiency) {
  for (double r : {0.3, 1.0, 1.8}) {
    double prev = HUGE_VAL;
    for (double eta : {0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0}) {
      const double v = lossy_estimator_psd(r, eta, kWidth);
      EXPECT_LT(v, prev);
      prev = v;
    }
  }
}

// n is the post-loss flux, the photon number that reaches the interferometer.
TEST(bounds, lossy_between_qcrb_and_sql) {
  for (double eta2 : {0.65, 0.7, 0.75, 0.8}) {
    for (double n : log_grid(0.5, 8.0, 12)) {
      const double v = lossy_estimator_psd(r_for_photon_number(n / eta2), std::sqrt(eta2), kWidth);
      EXPECT_GT(v, qcrb_two_squeezed(n, kWidth)) << "n=" << n << " eta2=" << eta2;
      EXPECT_LT(v, sql_line(n, kWidth)) << "n=" << n << " eta2=" << eta2;
    }
  }
}

TEST(bounds, loss_form_matches_closed_form_at_matching_n) {
  for (double r : {0.3, std::log(2.0), 1.5}) {
    for (double loss : {0.05, 0.19, 0.3}) {
      const auto c = cross_check_loss_forms(r, loss, kWidth);
      EXPECT_LT(c.relative_mismatch(), 1e-9);
      EXPECT_NEAR(c.closed_form, lossy_estimator_psd(r, std::sqrt(1.0 - loss), kWidth), 1e-12 * c.closed_form);
    }
  }
}

TEST(bounds, loss_form_reduces_to_qcrb_without_loss) {
  for (double n : {0.5, 2.0, 10.0})
    EXPECT_NEAR(lossy_psd_loss_form(n, 0.0, kWidth), qcrb_two_squeezed(n, kWidth), 1e-12 * qcrb_two_squeezed(n, kWidth));
}

TEST(bounds, report_uses_post_loss_flux) {
  const SqueezingSpec spec(std::log(2.0), 0.9, Band::from_hz(200e3, 700e3));
  const auto b = bounds_for(spec);
  EXPECT_NEAR(b.n_flux, 0.91125, 1e-12);
  EXPECT_NEAR(b.qcrb_two_sqz, qcrb_two_squeezed(0.91125, kWidth), 1e-20);
  EXPECT_NEAR(b.sql, sql_line(0.91125, kWidth), 1e-20);
  EXPECT_NEAR(b.lossy_estimator_psd, lossy_estimator_psd(std::log(2.0), 0.9, kWidth), 1e-20);
}

TEST(fit_scaling, exact_power_laws) {
  const std::vector<double> ns{4, 8, 16, 32};
  EXPECT_NEAR(fit_curve([](double n, double w) { return 3.0 / (w * n * n); }, ns).exponent, -2.0, 1e-12);
  EXPECT_NEAR(fit_curve(sql_line, ns).exponent, -1.0, 1e-12);
  EXPECT_NEAR(fit_curve(qcrb_two_squeezed, ns).exponent, -1.83554979, 1e-7);
  EXPECT_LT(fit_curve(sql_line, ns).residual, 1e-12);
}

TEST(fit_scaling, approaches_heisenberg_at_large_n) {
  const double slope = fit_curve(qcrb_two_squeezed, log_grid(100.0, 1000.0, 8)).exponent;
  EXPECT_LT(slope, -1.99);
  EXPECT_GE(slope, -2.0);
}

TEST(fit_scaling, rejects_bad_input) {
  EXPECT_THROW(fit_scaling({{1, 1}, {2, 1}}), std::invalid_argument);
  EXPECT_THROW(fit_scaling({{1, 1}, {2, 1}, {3, 1}}), std::invalid_argument);
  EXPECT_THROW(fit_scaling({{1, 1}, {2, -1}, {8, 1}}), std::invalid_argument);
}

TEST(log_grid, endpoints_and_ratio) {
  const auto g = log_grid(0.5, 32.0, 20);
  ASSERT_EQ(g.size(), 20u);
  EXPECT_DOUBLE_EQ(g.front(), 0.5);
  EXPECT_DOUBLE_EQ(g.back(), 32.0);
  for (std::size_t i = 1; i + 1 < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], g[i + 1] / g[i], 1e-12);
  EXPECT_THROW(log_grid(0.0, 1.0, 5), std::invalid_argument);
}

TEST(bounds_csv, header_rows_and_order) {
  const auto g = log_grid(0.5, 32.0, 20);
  std::ostringstream os;
  write_bounds_csv(os, g, kWidth, 0.3);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "n,qcrb,sql,sqz_coh_qcrb,sqz_coh_homodyne,lossy_psd");
  std::size_t rows = 0;
  double prev_q = HUGE_VAL;
  while (std::getline(is, line)) {
    std::vector<double> v;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) v.push_back(std::stod(cell));
    ASSERT_EQ(v.size(), 6u);
    EXPECT_NEAR(v[0], g[rows], 1e-12 * g[rows]);
    EXPECT_LT(v[1], v[3]);
    EXPECT_LT(v[3], v[4]);
    EXPECT_LT(v[4], v[2]);
    EXPECT_GT(v[5], v[1]);
    EXPECT_LT(v[1], prev_q);
    prev_q = v[1];
    ++rows;
  }
  EXPECT_EQ(rows, 20u);
}
