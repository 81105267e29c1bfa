#pragma once

// Run configuration: TOML or JSON text -> validated RunConfig.
//
// Frequencies are given in Hz and angles in radians. Every table rejects keys
// it does not know, and all physics objects are constructed (and therefore
// validated) before any simulation starts.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcl/mzi.hpp"
#include "hcl/scan.hpp"
#include "hcl/spectra.hpp"
#include "hcl/synth.hpp"
#include "hcl/toml_lite.hpp"
#include "hcl/welch.hpp"

namespace hcl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SqueezerParams {
  double r = 1.0;
  double eta = 1.0;

  SqueezingSpec spec(const Band& band) const { return SqueezingSpec(r, eta, band); }
};

enum class SweepAxis { r, n, squeeze_db };

struct SweepSection {
  SweepAxis axis = SweepAxis::n;
  std::vector<double> values;

  /// Grid converted to squeezing parameters.
  std::vector<double> r_values() const {
    std::vector<double> out;
    for (double v : values) {
      switch (axis) {
        case SweepAxis::r: out.push_back(v); break;
        case SweepAxis::n: out.push_back(r_for_photon_number(v)); break;
        case SweepAxis::squeeze_db: out.push_back(db_to_r(v)); break;
      }
    }
    return out;
  }
};

struct AngleAxis {
  double lo = -kPi / 2;
  double hi = kPi / 2;
  std::size_t points = 16;

  std::vector<double> grid() const { return periodic_grid(lo, hi, points); }
};

struct ScanSection {
  AngleAxis theta_s{};
  AngleAxis theta_1{};
  bool variance_map = true;
};

struct RunConfig {
  SqueezerParams squeezer1{};
  SqueezerParams squeezer2{};
  Band band = Band::from_hz(200e3, 700e3);
  InterferometerConfig interferometer = InterferometerConfig::optimal();
  PhaseSignal signal = PhaseSignal::sinusoid(0.02, 2000.0);
  PipelineSettings pipeline{};
  std::size_t trials = 1;
  std::optional<SweepSection> sweep;
  std::optional<ScanSection> scan;
  std::uint64_t seed = 1;
  std::string out = "out";
  unsigned threads = 1;

  SqueezingSpec spec1() const { return squeezer1.spec(band); }
  SqueezingSpec spec2() const { return squeezer2.spec(band); }

  SweepPlan plan() const { return {pipeline, trials, seed, threads}; }
};

namespace detail {

class Table {
 public:
  Table(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be a table");
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items())
      if (!ok.count(k)) throw ConfigError("unknown key '" + where(k) + "'");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const nlohmann::json& raw(const char* key) const { return j_.at(key); }

  std::optional<Table> sub(const char* key) const {
    if (!has(key)) return std::nullopt;
    return Table(j_.at(key), where(key));
  }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError("'" + where(key) + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError("'" + where(key) + "' must be finite");
    return d;
  }

  std::uint64_t unsigned_int(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError("'" + where(key) + "' must be a non-negative integer");
  }

  std::string string(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError("'" + where(key) + "' must be a string");
    return v.get<std::string>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError("'" + where(key) + "' must be true or false");
    return v.get<bool>();
  }

  std::vector<double> numbers(const char* key) const {
    const auto& v = j_.at(key);
    if (!v.is_array() || v.empty()) throw ConfigError("'" + where(key) + "' must be a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>()))
        throw ConfigError("'" + where(key) + "' must contain finite numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

 private:
  const nlohmann::json& j_;
  std::string name_;
};

inline SqueezerParams parse_squeezer(const Table& t) {
  t.allow({"r", "squeeze_db", "n", "eta", "loss"});
  const int given = t.has("r") + t.has("squeeze_db") + t.has("n");
  if (given != 1) throw ConfigError("'" + t.where("") + "' needs exactly one of r, squeeze_db, n");
  if (t.has("eta") && t.has("loss")) throw ConfigError("'" + t.where("") + "' takes eta or loss, not both");
  SqueezerParams p;
  if (t.has("r")) {
    p.r = t.number("r", 0.0);
  } else if (t.has("squeeze_db")) {
    const double db = t.number("squeeze_db", 0.0);
    if (db < 0.0) throw ConfigError("'" + t.where("squeeze_db") + "' must be >= 0");
    p.r = db_to_r(db);
  } else {
    const double n = t.number("n", 0.0);
    if (n < 0.0) throw ConfigError("'" + t.where("n") + "' must be >= 0");
    p.r = r_for_photon_number(n);
  }
  if (t.has("loss")) {
    const double loss = t.number("loss", 0.0);
    if (!(loss >= 0.0 && loss < 1.0)) throw ConfigError("'" + t.where("loss") + "' must lie in [0, 1)");
    p.eta = eta_for_loss(loss);
  } else {
    p.eta = t.number("eta", 1.0);
  }
  if (p.r < 0.0) throw ConfigError("'" + t.where("r") + "' must be >= 0");
  if (!(p.r > 0.0))
    throw ConfigError("'" + t.where("r") + "' = 0: estimator normalization degenerate (V+ = V-)");
  if (!(p.eta > 0.0 && p.eta <= 1.0)) throw ConfigError("'" + t.where("eta") + "' must lie in (0, 1]");
  return p;
}

inline AngleAxis parse_axis(const Table& t) {
  t.allow({"lo", "hi", "points"});
  AngleAxis a;
  a.lo = t.number("lo", a.lo);
  a.hi = t.number("hi", a.hi);
  a.points = t.unsigned_int("points", a.points);
  if (!(a.hi > a.lo)) throw ConfigError("'" + t.where("hi") + "' must exceed lo");
  if (a.points == 0 || a.points > 4096) throw ConfigError("'" + t.where("points") + "' must lie in [1, 4096]");
  return a;
}

template <class F>
auto wrap(F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace detail

/// Builds a RunConfig from parsed TOML/JSON. Throws ConfigError on any
/// unknown key, type mismatch or physically invalid value.
inline RunConfig config_from_json(const nlohmann::json& j) {
  return detail::wrap([&] {
    RunConfig c;
    const detail::Table root(j, "");
    root.allow({"seed", "threads", "out", "squeezer1", "squeezer2", "band", "interferometer", "signal", "acquisition",
                "welch", "estimator", "sweep", "scan"});
    c.seed = root.unsigned_int("seed", c.seed);
    c.threads = static_cast<unsigned>(root.unsigned_int("threads", c.threads));
    if (c.threads == 0 || c.threads > 256) throw ConfigError("'threads' must lie in [1, 256]");
    c.out = root.string("out", c.out);

    if (!root.has("squeezer1")) throw ConfigError("missing table 'squeezer1'");
    c.squeezer1 = detail::parse_squeezer(*root.sub("squeezer1"));
    c.squeezer2 = root.has("squeezer2") ? detail::parse_squeezer(*root.sub("squeezer2")) : c.squeezer1;

    if (auto t = root.sub("band")) {
      t->allow({"lo_hz", "hi_hz"});
      c.band = Band::from_hz(t->number("lo_hz", 200e3), t->number("hi_hz", 700e3));
    }
    if (auto t = root.sub("interferometer")) {
      t->allow({"phi_d", "theta_s", "theta_1", "theta_2"});
      auto& i = c.interferometer;
      i.phi_d = t->number("phi_d", i.phi_d);
      i.theta_s = t->number("theta_s", i.theta_s);
      i.theta_1 = t->number("theta_1", i.theta_1);
      i.theta_2 = t->number("theta_2", i.theta_2);
    }
    if (auto t = root.sub("signal")) {
      t->allow({"kind", "amplitude", "frequency_hz", "phase"});
      const auto kind = t->string("kind", "sinusoid");
      if (kind == "none") {
        if (t->has("amplitude") || t->has("frequency_hz") || t->has("phase"))
          throw ConfigError("'signal' of kind none takes no parameters");
        c.signal = PhaseSignal::zero();
      } else if (kind == "sinusoid") {
        const double f = t->number("frequency_hz", 2000.0);
        if (!(f > 0.0)) throw ConfigError("'signal.frequency_hz' must be > 0");
        c.signal = PhaseSignal::sinusoid(t->number("amplitude", 0.02), f, t->number("phase", 0.0));
      } else {
        throw ConfigError("'signal.kind' must be sinusoid or none");
      }
    }
    if (auto t = root.sub("acquisition")) {
      t->allow({"fs_hz", "duration_s", "samples"});
      c.pipeline.fs = t->number("fs_hz", c.pipeline.fs);
      if (!(c.pipeline.fs > 0.0)) throw ConfigError("'acquisition.fs_hz' must be > 0");
      if (t->has("duration_s") && t->has("samples")) throw ConfigError("'acquisition' takes duration_s or samples, not both");
      if (t->has("samples")) {
        c.pipeline.samples = t->unsigned_int("samples", 0);
        if (!is_power_of_two(c.pipeline.samples) || c.pipeline.samples < 2)
          throw ConfigError("'acquisition.samples' must be a power of two");
      } else if (t->has("duration_s")) {
        const double d = t->number("duration_s", 0.0);
        if (!(d > 0.0)) throw ConfigError("'acquisition.duration_s' must be > 0");
        c.pipeline.samples = samples_for_duration(d, c.pipeline.fs);
      }
    }
    if (auto t = root.sub("welch")) {
      t->allow({"segment_length", "overlap", "window", "detrend"});
      c.pipeline.welch.segment_length = t->unsigned_int("segment_length", c.pipeline.welch.segment_length);
      c.pipeline.welch.overlap = t->number("overlap", c.pipeline.welch.overlap);
      c.pipeline.welch.window = window_from_string(t->string("window", to_string(c.pipeline.welch.window)));
      const auto detrend = t->string("detrend", "mean");
      if (detrend != "mean" && detrend != "none") throw ConfigError("'welch.detrend' must be mean or none");
      c.pipeline.welch.detrend_mean = detrend == "mean";
      if (!is_power_of_two(c.pipeline.welch.segment_length) || c.pipeline.welch.segment_length < 2)
        throw ConfigError("'welch.segment_length' must be a power of two");
      if (!(c.pipeline.welch.overlap >= 0.0 && c.pipeline.welch.overlap < 1.0))
        throw ConfigError("'welch.overlap' must lie in [0, 1)");
    }
    if (auto t = root.sub("estimator")) {
      t->allow({"model", "normalization"});
      c.pipeline.model = transfer_model_from_string(t->string("model", "exact"));
      c.pipeline.normalization = normalization_from_string(t->string("normalization", "known"));
    }
    if (auto t = root.sub("sweep")) {
      t->allow({"axis", "values", "trials"});
      SweepSection s;
      const auto axis = t->string("axis", "n");
      if (axis == "r")
        s.axis = SweepAxis::r;
      else if (axis == "n")
        s.axis = SweepAxis::n;
      else if (axis == "squeeze_db")
        s.axis = SweepAxis::squeeze_db;
      else
        throw ConfigError("'sweep.axis' must be r, n or squeeze_db");
      if (!t->has("values")) throw ConfigError("missing 'sweep.values'");
      s.values = t->numbers("values");
      for (double v : s.values)
        if (!(v > 0.0)) throw ConfigError("'sweep.values' must all be > 0 (r = 0 makes the estimator degenerate)");
      c.trials = t->unsigned_int("trials", 3);
      if (c.trials == 0) throw ConfigError("'sweep.trials' must be >= 1");
      c.sweep = std::move(s);
    }
    if (auto t = root.sub("scan")) {
      t->allow({"theta_s", "theta_1", "variance_map", "trials"});
      ScanSection s;
      if (auto a = t->sub("theta_s")) s.theta_s = detail::parse_axis(*a);
      if (auto a = t->sub("theta_1")) s.theta_1 = detail::parse_axis(*a);
      s.variance_map = t->boolean("variance_map", true);
      if (t->has("trials")) {
        c.trials = t->unsigned_int("trials", 1);
        if (c.trials == 0) throw ConfigError("'scan.trials' must be >= 1");
      }
      c.scan = s;
    }

    const Band& b = c.band;
    if (!(c.pipeline.fs > 2.0 * b.upper_hz())) throw ConfigError("squeezing band exceeds the Nyquist frequency");
    if (c.pipeline.welch.segment_length > c.pipeline.samples)
      throw ConfigError("'welch.segment_length' exceeds the record length");
    if (c.signal.kind() == PhaseSignal::Kind::sinusoid && !(c.signal.frequency_hz() < 0.5 * c.pipeline.fs))
      throw ConfigError("'signal.frequency_hz' exceeds the Nyquist frequency");
    if (c.pipeline.model == TransferModel::linearized && c.signal.peak() > kLinearizedAmplitudeLimit)
      throw ConfigError("linearized model requires |amplitude| <= 0.1 rad");
    const double fres = c.pipeline.fs / static_cast<double>(c.pipeline.welch.segment_length);
    if (kFloorBand.hi_hz + 24.0 * fres > 0.5 * c.pipeline.fs)
      throw ConfigError("Welch resolution too coarse for the 2.8-40 kHz floor band");
    // Construct once so every physics-level check runs before any work.
    (void)EstimatorConfig::from_specs(c.spec1(), c.spec2(), c.pipeline.fs);
    if (c.sweep && !(c.squeezer1.r == c.squeezer2.r && c.squeezer1.eta == c.squeezer2.eta) && root.has("squeezer2"))
      throw ConfigError("a flux sweep uses equal squeezers; drop 'squeezer2'");
    return c;
  });
}

/// Parses TOML, or JSON when the text starts with '{'.
inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("JSON: ") + e.what());
    }
  } else {
    try {
      j = toml_lite::parse(text);
    } catch (const toml_lite::ParseError& e) {
      throw ConfigError(std::string("TOML: ") + e.what());
    }
  }
  return config_from_json(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Normalized echo of a config for manifests.
inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j = {
      {"seed", c.seed},
      {"squeezer1", {{"r", c.squeezer1.r}, {"eta", c.squeezer1.eta}}},
      {"squeezer2", {{"r", c.squeezer2.r}, {"eta", c.squeezer2.eta}}},
      {"band", {{"lo_hz", c.band.lower_hz()}, {"hi_hz", c.band.upper_hz()}}},
      {"interferometer",
       {{"phi_d", c.interferometer.phi_d},
        {"theta_s", c.interferometer.theta_s},
        {"theta_1", c.interferometer.theta_1},
        {"theta_2", c.interferometer.theta_2}}},
      {"acquisition", {{"fs_hz", c.pipeline.fs}, {"samples", c.pipeline.samples}}},
      {"welch",
       {{"segment_length", c.pipeline.welch.segment_length},
        {"overlap", c.pipeline.welch.overlap},
        {"window", to_string(c.pipeline.welch.window)},
        {"detrend", c.pipeline.welch.detrend_mean ? "mean" : "none"}}},
      {"estimator", {{"model", to_string(c.pipeline.model)}, {"normalization", to_string(c.pipeline.normalization)}}},
      {"trials", c.trials},
  };
  if (c.signal.kind() == PhaseSignal::Kind::sinusoid)
    j["signal"] = {{"kind", "sinusoid"},
                   {"amplitude", c.signal.amplitude()},
                   {"frequency_hz", c.signal.frequency_hz()},
                   {"phase", c.signal.phase()}};
  else
    j["signal"] = {{"kind", "none"}};
  if (c.sweep) {
    const char* axis = c.sweep->axis == SweepAxis::r ? "r" : c.sweep->axis == SweepAxis::n ? "n" : "squeeze_db";
    j["sweep"] = {{"axis", axis}, {"values", c.sweep->values}};
  }
  if (c.scan) {
    auto ax = [](const AngleAxis& a) { return nlohmann::json{{"lo", a.lo}, {"hi", a.hi}, {"points", a.points}}; };
    j["scan"] = {{"theta_s", ax(c.scan->theta_s)}, {"theta_1", ax(c.scan->theta_1)}, {"variance_map", c.scan->variance_map}};
  }
  return j;
}

}  // namespace hcl
