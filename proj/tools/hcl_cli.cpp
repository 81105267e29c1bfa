// hcl: command-line front end for the squeezed-light interferometer simulator.
//
//   hcl simulate --config run.toml [--out DIR] [--seed U64] [--threads N]
//   hcl sweep    --config sweep.toml ...
//   hcl scan     --config scan.toml ...
//   hcl bounds   [--n-min X] [--n-max X] [--points K] [--loss L] [--lo-hz F] [--hi-hz F]
//
// Exit codes: 0 success, 2 configuration or usage error, 3 numeric or I/O failure.

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hcl/bounds.hpp"
#include "hcl/config.hpp"
#include "hcl/scan.hpp"
#include "hcl/welch.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

class OutputDir {
 public:
  explicit OutputDir(const std::string& path) : root_(path) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec || !fs::is_directory(root_)) throw std::runtime_error("cannot create output directory '" + path + "'");
  }

  template <class Writer>
  void write(const std::string& name, Writer&& w) const {
    const auto path = root_ / name;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    w(os);
    os.flush();
    if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
  }

  void write_json(const std::string& name, const nlohmann::json& j) const {
    write(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }

 private:
  fs::path root_;
};

std::optional<unsigned> env_threads() {
  const char* v = std::getenv("HCL_THREADS");
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const unsigned long n = std::stoul(v, &used);
    if (used != std::string(v).size() || n == 0 || n > 256) throw std::invalid_argument(v);
    return static_cast<unsigned>(n);
  } catch (const std::exception&) {
    throw hcl::ConfigError(std::string("HCL_THREADS must be an integer in [1, 256], got '") + v + "'");
  }
}

hcl::RunConfig resolve(const CommonFlags& flags) {
  auto cfg = hcl::load_config(flags.config);
  if (flags.out) cfg.out = *flags.out;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.threads) {
    if (*flags.threads == 0 || *flags.threads > 256) throw hcl::ConfigError("--threads must lie in [1, 256]");
    cfg.threads = *flags.threads;
  } else if (auto t = env_threads()) {
    cfg.threads = *t;
  }
  return cfg;
}

nlohmann::json manifest_base(const hcl::RunConfig& cfg, const char* command) {
  return {{"schema_version", hcl::kSweepSchemaVersion},
          {"code_version", hcl::kCodeVersion},
          {"command", command},
          {"seed", cfg.seed},
          {"config", hcl::config_to_json(cfg)}};
}

void write_psd(const OutputDir& out, const std::string& stem, const hcl::PsdEstimate& psd, const char* units) {
  out.write(stem + ".csv", [&](std::ostream& os) { hcl::write_psd_csv(os, psd); });
  auto meta = hcl::psd_metadata(psd);
  meta["units"] = units;
  out.write_json(stem + ".json", meta);
}

int cmd_simulate(const CommonFlags& flags) {
  const auto cfg = resolve(flags);
  const OutputDir out(cfg.out);
  const hcl::PointSetup setup{cfg.spec1(), cfg.spec2(), cfg.interferometer, cfg.signal};
  const auto result = hcl::simulate_point(setup, cfg.pipeline, cfg.seed, true);

  write_psd(out, "homodyne1_psd", *result.out1_psd, "shot-noise units^2/Hz, one-sided");
  write_psd(out, "homodyne2_psd", *result.out2_psd, "shot-noise units^2/Hz, one-sided");
  write_psd(out, "phase_psd", result.phase_psd, "rad^2/Hz, one-sided");

  const auto bounds = hcl::bounds_for(setup.spec1);
  nlohmann::json metrics = {
      {"schema_version", hcl::kSweepSchemaVersion},
      {"noise_floor", result.metrics.floor},
      {"noise_floor_sigma", result.floor_sigma},
      {"tone_amplitude", result.metrics.tone_amplitude},
      {"snr", result.metrics.snr},
      {"measured_n_flux", result.measured_n_flux},
      {"estimator", {{"v_plus", result.estimator.v_plus()}, {"v_minus", result.estimator.v_minus()}}},
      {"theory",
       {{"n_flux", bounds.n_flux},
        {"qcrb", bounds.qcrb_two_sqz},
        {"lossy_psd", bounds.lossy_estimator_psd},
        {"sql", bounds.sql},
        {"setpoint_psd",
         hcl::phase_sensitivity(setup.spec1, setup.spec2, setup.config).phase_noise_psd(setup.spec1.band())}}},
      {"units", {{"noise_floor", "two-sided rad^2/Hz over 2.8-40 kHz"}, {"tone_amplitude", "rad"}}}};
  out.write_json("metrics.json", metrics);

  auto manifest = manifest_base(cfg, "simulate");
  manifest["files"] = {"homodyne1_psd.csv", "homodyne2_psd.csv", "phase_psd.csv", "metrics.json"};
  out.write_json("manifest.json", manifest);
  std::cout << "noise_floor " << hcl::format_double(result.metrics.floor) << " rad^2/Hz (qcrb "
            << hcl::format_double(bounds.qcrb_two_sqz) << "), tone " << hcl::format_double(result.metrics.tone_amplitude)
            << " rad\n";
  return 0;
}

int cmd_sweep(const CommonFlags& flags) {
  const auto cfg = resolve(flags);
  if (!cfg.sweep) throw hcl::ConfigError("sweep needs a [sweep] table");
  const OutputDir out(cfg.out);
  auto result = hcl::run_flux_sweep(cfg.sweep->r_values(), cfg.squeezer1.eta, cfg.band, cfg.signal, cfg.plan());
  result = hcl::apply_vetoes(std::move(result));
  out.write("sweep.csv", [&](std::ostream& os) { hcl::write_sweep_csv(os, result); });

  std::vector<hcl::ScalingPoint> pts;
  for (const auto& r : result.rows)
    if (r.accepted) pts.push_back({r.n_flux, r.noise_floor});
  auto manifest = manifest_base(cfg, "sweep");
  manifest["sweep"] = hcl::sweep_manifest(result);
  try {
    const auto fit = hcl::fit_scaling(pts);
    manifest["scaling_fit"] = {{"exponent", fit.exponent}, {"intercept", fit.intercept}, {"residual", fit.residual}};
  } catch (const std::invalid_argument& e) {
    manifest["scaling_fit"] = {{"skipped", e.what()}};
  }
  manifest["files"] = {"sweep.csv"};
  out.write_json("manifest.json", manifest);
  std::cout << result.rows.size() << " rows written to " << cfg.out << "/sweep.csv\n";
  return 0;
}

void write_variance_map(const OutputDir& out, const std::string& name, const hcl::VarianceMap& map) {
  out.write(name, [&](std::ostream& os) {
    os << "theta_s," << (map.axes == hcl::ScanAxes::theta_s_theta_1 ? "theta_1" : "theta_2") << ",variance\n";
    for (std::size_t i = 0; i < map.first.size(); ++i)
      for (std::size_t j = 0; j < map.second.size(); ++j)
        os << hcl::format_double(map.first[i]) << ',' << hcl::format_double(map.second[j]) << ','
           << hcl::format_double(map.at(i, j)) << '\n';
  });
}

int cmd_scan(const CommonFlags& flags) {
  const auto cfg = resolve(flags);
  if (!cfg.scan) throw hcl::ConfigError("scan needs a [scan] table");
  const OutputDir out(cfg.out);
  const auto ts = cfg.scan->theta_s.grid(), t1 = cfg.scan->theta_1.grid();
  auto result = hcl::run_snr_map(ts, t1, cfg.spec1(), cfg.spec2(), cfg.signal, cfg.plan(), cfg.interferometer.theta_2);
  result = hcl::apply_vetoes(std::move(result));
  out.write("snr_map.csv", [&](std::ostream& os) { hcl::write_sweep_csv(os, result); });

  auto manifest = manifest_base(cfg, "scan");
  manifest["sweep"] = hcl::sweep_manifest(result);
  const auto best = hcl::snr_argmax(result);
  manifest["argmax"] = {{"theta_s", best.value_a}, {"theta_1", best.value_b}, {"snr", best.snr}};
  std::vector<std::string> files{"snr_map.csv"};
  if (cfg.scan->variance_map) {
    const auto full = hcl::periodic_grid(-hcl::kPi, hcl::kPi, 64);
    write_variance_map(out, "variance_theta_1.csv",
                       hcl::scan_output_variance(cfg.spec1(), cfg.spec2(), hcl::ScanAxes::theta_s_theta_1, full, full,
                                                 cfg.interferometer));
    write_variance_map(out, "variance_theta_2.csv",
                       hcl::scan_output_variance(cfg.spec1(), cfg.spec2(), hcl::ScanAxes::theta_s_theta_2, full, full,
                                                 cfg.interferometer));
    files.push_back("variance_theta_1.csv");
    files.push_back("variance_theta_2.csv");
  }
  manifest["files"] = files;
  out.write_json("manifest.json", manifest);
  std::cout << result.rows.size() << " rows written; SNR maximum at theta_s = " << hcl::format_double(best.value_a)
            << ", theta_1 = " << hcl::format_double(best.value_b) << '\n';
  return 0;
}

struct BoundsFlags {
  double n_min = 0.5;
  double n_max = 32.0;
  std::size_t points = 20;
  double loss = 0.3;
  double lo_hz = 200e3;
  double hi_hz = 700e3;
};

int cmd_bounds(const BoundsFlags& b) {
  std::vector<double> grid;
  double width = 0.0;
  try {
    if (!(b.loss >= 0.0 && b.loss < 1.0)) throw std::invalid_argument("--loss must lie in [0, 1)");
    width = hcl::Band::from_hz(b.lo_hz, b.hi_hz).width();
    grid = hcl::log_grid(b.n_min, b.n_max, b.points);
  } catch (const std::invalid_argument& e) {
    throw hcl::ConfigError(e.what());
  }
  std::ostringstream os;
  hcl::write_bounds_csv(os, grid, width, b.loss);
  std::cout << os.str();
  return 0;
}

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "Run configuration (TOML or JSON)")->required();
  sub->add_option("--out", f.out, "Output directory (overrides config)");
  sub->add_option("--seed", f.seed, "Base seed (overrides config)");
  sub->add_option("--threads", f.threads, "Worker threads (overrides config and HCL_THREADS)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Squeezed-light Mach-Zehnder simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hcl::kCodeVersion);

  CommonFlags sim_flags, sweep_flags, scan_flags;
  BoundsFlags bounds_flags;
  auto* sim = app.add_subcommand("simulate", "Simulate one setpoint and write PSDs and metrics");
  add_common(sim, sim_flags);
  auto* sweep = app.add_subcommand("sweep", "Photon-flux sweep with theory columns");
  add_common(sweep, sweep_flags);
  auto* scan = app.add_subcommand("scan", "SNR map over (theta_s, theta_1) and analytic variance maps");
  add_common(scan, scan_flags);
  auto* bounds = app.add_subcommand("bounds", "Analytic reference curves as CSV on stdout");
  bounds->add_option("--n-min", bounds_flags.n_min, "Smallest photon number")->capture_default_str();
  bounds->add_option("--n-max", bounds_flags.n_max, "Largest photon number")->capture_default_str();
  bounds->add_option("--points", bounds_flags.points, "Log-spaced grid points")->capture_default_str();
  bounds->add_option("--loss", bounds_flags.loss, "Power loss for the lossy column")->capture_default_str();
  bounds->add_option("--lo-hz", bounds_flags.lo_hz, "Squeezing band lower edge")->capture_default_str();
  bounds->add_option("--hi-hz", bounds_flags.hi_hz, "Squeezing band upper edge")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_flags);
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*scan) return cmd_scan(scan_flags);
    if (*bounds) return cmd_bounds(bounds_flags);
  } catch (const hcl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitConfig;
}
