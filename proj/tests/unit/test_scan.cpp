#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hcl/scan.hpp"

using namespace hcl;

namespace {

const Band kBand = Band::from_hz(200e3, 700e3);

SweepPlan small_plan(std::size_t samples = std::size_t{1} << 19, std::size_t trials = 2) {
  SweepPlan plan;
  plan.pipeline.samples = samples;
  plan.pipeline.welch.segment_length = std::size_t{1} << 14;
  plan.trials = trials;
  plan.base_seed = 7;
  return plan;
}

std::size_t csv_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST(point_seed, distinct_and_base_dependent) {
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      for (std::size_t t = 0; t < 3; ++t) seen.insert(point_seed(1, i, j, t));
  EXPECT_EQ(seen.size(), 8u * 8u * 3u);
  EXPECT_NE(point_seed(1, 0, 0, 0), point_seed(2, 0, 0, 0));
  EXPECT_EQ(point_seed(5, 3, 2, 1), point_seed(5, 3, 2, 1));
  EXPECT_NE(point_seed(5, 3, 2, 1), point_seed(5, 2, 3, 1));
}

TEST(pipeline_settings, validation) {
  PipelineSettings s;
  s.samples = 1000;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.samples = std::size_t{1} << 12;
  EXPECT_THROW(s.validate(), std::invalid_argument);  // segment longer than record
  s.samples = std::size_t{1} << 18;
  s.normalization_scale = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(simulate_point, deterministic_for_seed) {
  const SqueezingSpec spec(1.0, 1.0, kBand);
  const PointSetup setup{spec, spec, InterferometerConfig::optimal(), PhaseSignal::sinusoid(0.02, 2000.0)};
  const auto plan = small_plan();
  const auto a = simulate_point(setup, plan.pipeline, 3);
  const auto b = simulate_point(setup, plan.pipeline, 3);
  const auto c = simulate_point(setup, plan.pipeline, 4);
  EXPECT_EQ(a.phase_psd.psd, b.phase_psd.psd);
  EXPECT_EQ(a.metrics.floor, b.metrics.floor);
  EXPECT_NE(a.metrics.floor, c.metrics.floor);
}

TEST(simulate_point, floor_near_bound_and_below_sql) {
  const double r = r_for_photon_number(4.0);
  const SqueezingSpec spec(r, 1.0, kBand);
  const PointSetup setup{spec, spec, InterferometerConfig::optimal(), PhaseSignal::zero()};
  const auto out = simulate_point(setup, small_plan(std::size_t{1} << 21).pipeline, 11);
  const double q = qcrb_two_squeezed(4.0, kBand.width());
  EXPECT_GE(out.metrics.floor, q * 0.94 - 3.0 * out.floor_sigma);
  EXPECT_LE(out.metrics.floor, q * 1.02 + 3.0 * out.floor_sigma);
  EXPECT_LE(out.metrics.floor / sql_line(4.0, kBand.width()), 1.1 / 6.0);
  EXPECT_NEAR(out.measured_n_flux, 4.0, 0.1);
}

TEST(simulate_point, calibrated_normalization_tracks_known) {
  const SqueezingSpec spec(0.8, 0.9, kBand);
  const PointSetup setup{spec, spec, InterferometerConfig::optimal(), PhaseSignal::sinusoid(0.05, 2000.0)};
  auto plan = small_plan(std::size_t{1} << 20);
  const auto known = simulate_point(setup, plan.pipeline, 5);
  plan.pipeline.normalization = Normalization::calibrated;
  const auto cal = simulate_point(setup, plan.pipeline, 5);
  EXPECT_NEAR(cal.estimator.v_plus() - cal.estimator.v_minus(), known.estimator.v_plus() - known.estimator.v_minus(),
              0.03 * (known.estimator.v_plus() - known.estimator.v_minus()));
  EXPECT_NEAR(cal.metrics.tone_amplitude, known.metrics.tone_amplitude, 0.03 * known.metrics.tone_amplitude);
}

TEST(simulate_point, linearized_model_matches_exact_for_small_signal) {
  const SqueezingSpec spec(1.0, 1.0, kBand);
  const PointSetup setup{spec, spec, InterferometerConfig::optimal(), PhaseSignal::sinusoid(0.01, 2000.0)};
  auto plan = small_plan();
  const auto exact = simulate_point(setup, plan.pipeline, 2);
  plan.pipeline.model = TransferModel::linearized;
  const auto lin = simulate_point(setup, plan.pipeline, 2);
  EXPECT_NEAR(lin.metrics.floor, exact.metrics.floor, 1e-3 * exact.metrics.floor);
  EXPECT_NEAR(lin.metrics.tone_amplitude, exact.metrics.tone_amplitude, 1e-3 * exact.metrics.tone_amplitude);
}

TEST(simulate_point, rejects_mismatched_bands) {
  const PointSetup setup{SqueezingSpec(1.0, 1.0, kBand), SqueezingSpec(1.0, 1.0, Band::from_hz(100e3, 700e3))};
  EXPECT_THROW(simulate_point(setup, small_plan().pipeline, 1), std::invalid_argument);
}

TEST(squeezer_asymmetry, zero_for_equal_and_grows_with_mismatch) {
  const SqueezingSpec a(1.0, 1.0, kBand);
  EXPECT_NEAR(squeezer_asymmetry(a, a), 0.0, 1e-12);
  const double small = squeezer_asymmetry(a, SqueezingSpec(0.95, 1.0, kBand));
  const double large = squeezer_asymmetry(a, SqueezingSpec(0.5, 1.0, kBand));
  EXPECT_GT(small, 0.0);
  EXPECT_LT(small, 0.15);
  EXPECT_GT(large, small);
  EXPECT_GT(large, 0.15);
}

TEST(flux_sweep, rows_seeds_and_determinism) {
  const auto plan = small_plan(std::size_t{1} << 18, 2);
  const auto a = run_flux_sweep({0.5, 1.0}, 1.0, kBand, PhaseSignal::sinusoid(0.05, 2000.0), plan);
  ASSERT_EQ(a.rows.size(), 4u);
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    EXPECT_EQ(a.rows[k].index_a, k / 2);
    EXPECT_EQ(a.rows[k].trial, k % 2);
    EXPECT_EQ(a.rows[k].seed, point_seed(7, k / 2, 0, k % 2));
  }
  auto threaded = plan;
  threaded.threads = 3;
  const auto b = run_flux_sweep({0.5, 1.0}, 1.0, kBand, PhaseSignal::sinusoid(0.05, 2000.0), threaded);
  std::ostringstream sa, sb;
  write_sweep_csv(sa, a);
  write_sweep_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(csv_lines(sa.str()), 5u);
  EXPECT_THROW(run_flux_sweep({}, 1.0, kBand, PhaseSignal::zero(), plan), std::invalid_argument);
  EXPECT_THROW(run_flux_sweep({0.0}, 1.0, kBand, PhaseSignal::zero(), plan), std::invalid_argument);
}

TEST(vetoes, lossless_points_accepted) {
  const auto res =
      apply_vetoes(run_flux_sweep({1.0}, 1.0, kBand, PhaseSignal::sinusoid(0.05, 2000.0), small_plan(std::size_t{1} << 19, 3)));
  for (const auto& row : res.rows) {
    EXPECT_TRUE(row.accepted);
    for (auto v : row.vetoes) EXPECT_EQ(v, VetoStatus::pass);
  }
}

TEST(vetoes, single_trial_marks_stability_na) {
  const auto res =
      apply_vetoes(run_flux_sweep({1.0}, 1.0, kBand, PhaseSignal::zero(), small_plan(std::size_t{1} << 18, 1)));
  ASSERT_EQ(res.rows.size(), 1u);
  EXPECT_EQ(res.rows[0].vetoes[0], VetoStatus::not_applicable);
  EXPECT_EQ(res.rows[0].vetoes[1], VetoStatus::not_applicable);
  EXPECT_EQ(res.rows[0].vetoes[2], VetoStatus::not_applicable);
  EXPECT_TRUE(res.rows[0].accepted);
}

TEST(vetoes, miscalibration_fails_tone_check) {
  auto plan = small_plan(std::size_t{1} << 19, 2);
  plan.pipeline.normalization_scale = 2.0;
  const auto res = apply_vetoes(run_flux_sweep({1.0}, 1.0, kBand, PhaseSignal::sinusoid(0.05, 2000.0), plan));
  for (const auto& row : res.rows) {
    EXPECT_EQ(row.vetoes[0], VetoStatus::fail);
    EXPECT_FALSE(row.accepted);
  }
}

TEST(vetoes, excess_loss_fails_loss_check) {
  const auto res = apply_vetoes(
      run_flux_sweep({1.0}, std::sqrt(0.6), kBand, PhaseSignal::sinusoid(0.05, 2000.0), small_plan(std::size_t{1} << 19, 2)));
  for (const auto& row : res.rows) {
    EXPECT_EQ(row.vetoes[3], VetoStatus::fail);
    EXPECT_FALSE(row.accepted);
  }
}

TEST(vetoes, unstable_floor_fails_stability_check) {
  auto res = run_flux_sweep({1.0}, 1.0, kBand, PhaseSignal::zero(), small_plan(std::size_t{1} << 18, 3));
  res.rows[2].noise_floor *= 2.0;
  res.rows[2].measured_n_flux *= 2.0;
  res = apply_vetoes(res);
  EXPECT_EQ(res.rows[0].vetoes[1], VetoStatus::pass);
  EXPECT_EQ(res.rows[2].vetoes[1], VetoStatus::fail);
  for (const auto& row : res.rows) EXPECT_EQ(row.vetoes[2], VetoStatus::fail);
}

TEST(snr_map, small_grid_peaks_at_setpoint) {
  const double r = r_for_photon_number(4.0);
  const SqueezingSpec spec(r, 1.0, kBand);
  const auto grid = periodic_grid(-kPi / 2, kPi / 2, 4);
  const auto res = run_snr_map(grid, grid, spec, spec, PhaseSignal::sinusoid(0.02, 2000.0), small_plan(std::size_t{1} << 19, 1));
  ASSERT_EQ(res.rows.size(), 16u);
  const auto best = snr_argmax(res);
  EXPECT_NEAR(std::remainder(best.value_a - 0.0, kPi), 0.0, 1e-12);
  EXPECT_NEAR(std::remainder(best.value_b + kPi / 2, kPi), 0.0, 1e-12);
  EXPECT_GT(best.snr, 2.0);  // 1 + (A^2/2) / (2 floor 1.6 kHz) = 2.5
  std::ostringstream os;
  write_sweep_csv(os, res);
  EXPECT_EQ(csv_lines(os.str()), 17u);
}

TEST(sweep_manifest, carries_schema_and_seeds) {
  const auto res = run_flux_sweep({1.0}, 1.0, kBand, PhaseSignal::zero(), small_plan(std::size_t{1} << 18, 2));
  const auto m = sweep_manifest(res);
  EXPECT_EQ(m.at("schema_version"), kSweepSchemaVersion);
  EXPECT_EQ(m.at("kind"), "flux_sweep");
  ASSERT_EQ(m.at("seeds").size(), 2u);
  EXPECT_EQ(m.at("seeds")[1].get<std::uint64_t>(), res.rows[1].seed);
  EXPECT_EQ(m.at("plan").at("base_seed"), 7);
}
