#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwhom/correlations.hpp"
#include "cwhom/dephasing.hpp"
#include "cwhom/errors.hpp"
#include "cwhom/estimation.hpp"
#include "cwhom/montecarlo.hpp"

namespace cwhom {

using nlohmann::json;

struct DetectorConfig {
  double fwhm_ps = 428.0;
  double truncation_sigmas = 6.0;
  std::string response_csv;  // optional tabulated response
};

struct GridConfig {
  double step_ps = 5.0;
  double half_range_ps = 25000.0;
};

struct MapConfig {
  std::vector<double> fwhm_ps;
  std::vector<double> tau_c_ps;
};

struct StreamConfig {
  double pump_rate_per_ps = 5.0e-5;
  double duration_ps = 2.08e10;  // about 1e6 emitted photons at the default pump
  std::string mode = "hbt";      // hbt | mzi-parallel | mzi-orthogonal
  double bin_width_ps = 50.0;
  double range_ps = 25000.0;
};

struct FitConfig {
  std::string kind;  // coherence | visibility-decay | hbt-lifetime
  FitSpec spec;
};

struct OutputConfig {
  std::string dir = ".";
  bool events = false;
};

struct RunConfig {
  TrapModelParams trap = line_a_params();
  std::vector<double> currents_ua;
  SourceSpec source{};
  InterferometerSpec interferometer{};
  DetectorConfig detector{};
  GridConfig grid{};
  MapConfig map{};
  StreamConfig stream{};
  FitConfig fit{};
  OutputConfig output{};
  std::uint64_t seed = 1;
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  if (!j.is_object()) throw usage_error("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw usage_error("config: unknown key '" + key + "' in " + where);
  }
}

inline double num(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw usage_error("config: " + where + "." + key + " must be a number");
  return j[key].get<double>();
}

inline std::string str(const json& j, const char* key, std::string fallback,
                       const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw usage_error("config: " + where + "." + key + " must be a string");
  return j[key].get<std::string>();
}

inline std::vector<double> num_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw usage_error("config: " + where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw usage_error("config: " + where + " must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

// Built-in parameter sets. line-A and line-B carry the two published trap
// models; fig3-defaults carries the interference operating point.
inline json preset_json(const std::string& name) {
  if (name.empty()) return json::object();
  if (name == "line-A")
    return json{{"trap",
                 {{"tau1_ps", 200.0},
                  {"tau2_ps", 5.0},
                  {"tau3_ps", 750.0},
                  {"e1_mev", 1.0},
                  {"e2_mev", 30.0},
                  {"beta", 2.0},
                  {"i0_ua", 300.0},
                  {"sigma_s_uev", 188.0},
                  {"temperature_k", 4.0}}}};
  if (name == "line-B")
    return json{{"trap",
                 {{"tau1_ps", 200.0},
                  {"tau2_ps", 5.0},
                  {"tau3_ps", 550.0},
                  {"e1_mev", 1.0},
                  {"e2_mev", 30.0},
                  {"beta", 2.0},
                  {"i0_ua", 200.0},
                  {"sigma_s_uev", 285.0},
                  {"temperature_k", 4.0}}}};
  if (name == "fig3-defaults")
    return json{{"source", {{"tau_r_ps", 800.0}, {"tau_c_ps", 325.0}, {"g2_zero", 0.0}}},
                {"interferometer",
                 {{"r1", 0.5},
                  {"t1", 0.5},
                  {"r2", 0.5},
                  {"t2", 0.5},
                  {"delta_tau2_ps", 10000.0},
                  {"overlap_v", 1.0}}},
                {"detector", {{"fwhm_ps", 428.0}, {"truncation_sigmas", 6.0}}},
                {"grid", {{"step_ps", 5.0}, {"half_range_ps", 25000.0}}}};
  throw usage_error("config: unknown preset '" + name + "'");
}

// Parse the merged JSON document into a validated RunConfig. Unknown keys
// anywhere are rejected.
inline RunConfig config_from_json(const json& doc) {
  detail::check_keys(doc,
                     {"preset", "trap", "currents", "source", "interferometer", "detector", "grid",
                      "map", "stream", "fit", "output", "seed"},
                     "top level");
  RunConfig cfg;

  if (doc.contains("trap")) {
    const auto& j = doc["trap"];
    detail::check_keys(j,
                       {"tau1_ps", "tau2_ps", "tau3_ps", "e1_mev", "e2_mev", "beta", "i0_ua",
                        "sigma_s_uev", "temperature_k"},
                       "trap");
    cfg.trap.tau1_ps = detail::num(j, "tau1_ps", cfg.trap.tau1_ps, "trap");
    cfg.trap.tau2_ps = detail::num(j, "tau2_ps", cfg.trap.tau2_ps, "trap");
    cfg.trap.tau3_ps = detail::num(j, "tau3_ps", cfg.trap.tau3_ps, "trap");
    cfg.trap.e1_mev = detail::num(j, "e1_mev", cfg.trap.e1_mev, "trap");
    cfg.trap.e2_mev = detail::num(j, "e2_mev", cfg.trap.e2_mev, "trap");
    cfg.trap.beta = detail::num(j, "beta", cfg.trap.beta, "trap");
    cfg.trap.i0_ua = detail::num(j, "i0_ua", cfg.trap.i0_ua, "trap");
    cfg.trap.sigma_s_uev = detail::num(j, "sigma_s_uev", cfg.trap.sigma_s_uev, "trap");
    cfg.trap.temperature_k = detail::num(j, "temperature_k", cfg.trap.temperature_k, "trap");
  }
  cfg.trap.validate();

  if (doc.contains("currents")) {
    const auto& j = doc["currents"];
    detail::check_keys(j, {"values_ua", "start_ua", "stop_ua", "step_ua"}, "currents");
    if (j.contains("values_ua")) {
      if (j.contains("start_ua") || j.contains("stop_ua") || j.contains("step_ua"))
        throw usage_error("config: currents takes either values_ua or a range, not both");
      cfg.currents_ua = detail::num_list(j["values_ua"], "currents.values_ua");
    } else if (j.contains("start_ua") || j.contains("stop_ua") || j.contains("step_ua")) {
      const double start = detail::num(j, "start_ua", 0.0, "currents");
      const double stop = detail::num(j, "stop_ua", -1.0, "currents");
      const double step = detail::num(j, "step_ua", 0.0, "currents");
      if (!(step > 0.0) || stop < start)
        throw usage_error("config: currents range needs start_ua <= stop_ua and step_ua > 0");
      for (double v = start; v <= stop + 1e-9 * step; v += step) cfg.currents_ua.push_back(v);
    }
    for (double i : cfg.currents_ua)
      if (i < 0.0) throw usage_error("config: currents must be non-negative");
  }

  if (doc.contains("source")) {
    const auto& j = doc["source"];
    detail::check_keys(j, {"tau_r_ps", "tau_c_ps", "g2_zero"}, "source");
    cfg.source.tau_r_ps = detail::num(j, "tau_r_ps", cfg.source.tau_r_ps, "source");
    cfg.source.tau_c_ps = detail::num(j, "tau_c_ps", cfg.source.tau_c_ps, "source");
    cfg.source.g2_zero = detail::num(j, "g2_zero", cfg.source.g2_zero, "source");
  }
  cfg.source.validate();

  if (doc.contains("interferometer")) {
    const auto& j = doc["interferometer"];
    detail::check_keys(j, {"r1", "t1", "r2", "t2", "delta_tau2_ps", "overlap_v"},
                       "interferometer");
    cfg.interferometer.r1 = detail::num(j, "r1", cfg.interferometer.r1, "interferometer");
    cfg.interferometer.t1 = detail::num(j, "t1", cfg.interferometer.t1, "interferometer");
    cfg.interferometer.r2 = detail::num(j, "r2", cfg.interferometer.r2, "interferometer");
    cfg.interferometer.t2 = detail::num(j, "t2", cfg.interferometer.t2, "interferometer");
    cfg.interferometer.delta_tau2_ps =
        detail::num(j, "delta_tau2_ps", cfg.interferometer.delta_tau2_ps, "interferometer");
    cfg.interferometer.overlap_v =
        detail::num(j, "overlap_v", cfg.interferometer.overlap_v, "interferometer");
  }
  cfg.interferometer.validate();

  if (doc.contains("detector")) {
    const auto& j = doc["detector"];
    detail::check_keys(j, {"fwhm_ps", "truncation_sigmas", "response_csv"}, "detector");
    cfg.detector.fwhm_ps = detail::num(j, "fwhm_ps", cfg.detector.fwhm_ps, "detector");
    cfg.detector.truncation_sigmas =
        detail::num(j, "truncation_sigmas", cfg.detector.truncation_sigmas, "detector");
    cfg.detector.response_csv = detail::str(j, "response_csv", "", "detector");
    if (!(cfg.detector.fwhm_ps > 0.0)) throw usage_error("config: detector.fwhm_ps must be positive");
  }

  if (doc.contains("grid")) {
    const auto& j = doc["grid"];
    detail::check_keys(j, {"step_ps", "half_range_ps"}, "grid");
    cfg.grid.step_ps = detail::num(j, "step_ps", cfg.grid.step_ps, "grid");
    cfg.grid.half_range_ps = detail::num(j, "half_range_ps", cfg.grid.half_range_ps, "grid");
    if (!(cfg.grid.step_ps > 0.0) || !(cfg.grid.half_range_ps > cfg.grid.step_ps))
      throw usage_error("config: grid needs step_ps > 0 and half_range_ps > step_ps");
  }

  if (doc.contains("map")) {
    const auto& j = doc["map"];
    detail::check_keys(j, {"fwhm_ps", "tau_c_ps"}, "map");
    if (j.contains("fwhm_ps")) cfg.map.fwhm_ps = detail::num_list(j["fwhm_ps"], "map.fwhm_ps");
    if (j.contains("tau_c_ps")) cfg.map.tau_c_ps = detail::num_list(j["tau_c_ps"], "map.tau_c_ps");
  }

  if (doc.contains("stream")) {
    const auto& j = doc["stream"];
    detail::check_keys(j, {"pump_rate_per_ps", "duration_ps", "mode", "bin_width_ps", "range_ps"},
                       "stream");
    cfg.stream.pump_rate_per_ps =
        detail::num(j, "pump_rate_per_ps", cfg.stream.pump_rate_per_ps, "stream");
    cfg.stream.duration_ps = detail::num(j, "duration_ps", cfg.stream.duration_ps, "stream");
    cfg.stream.mode = detail::str(j, "mode", cfg.stream.mode, "stream");
    cfg.stream.bin_width_ps = detail::num(j, "bin_width_ps", cfg.stream.bin_width_ps, "stream");
    cfg.stream.range_ps = detail::num(j, "range_ps", cfg.stream.range_ps, "stream");
    if (cfg.stream.mode != "hbt" && cfg.stream.mode != "mzi-parallel" &&
        cfg.stream.mode != "mzi-orthogonal")
      throw usage_error("config: stream.mode must be hbt, mzi-parallel or mzi-orthogonal");
  }

  if (doc.contains("fit")) {
    const auto& j = doc["fit"];
    detail::check_keys(j, {"kind", "free", "fixed"}, "fit");
    cfg.fit.kind = detail::str(j, "kind", "", "fit");
    if (cfg.fit.kind != "coherence" && cfg.fit.kind != "visibility-decay" &&
        cfg.fit.kind != "hbt-lifetime")
      throw usage_error("config: fit.kind must be coherence, visibility-decay or hbt-lifetime");
    if (j.contains("free")) {
      if (!j["free"].is_object()) throw usage_error("config: fit.free must be an object");
      for (const auto& [name, pj] : j["free"].items()) {
        detail::check_keys(pj, {"init", "lo", "hi"}, "fit.free." + name);
        ParamSpec p;
        p.init = detail::num(pj, "init", 0.0, "fit.free." + name);
        p.lo = detail::num(pj, "lo", 0.0, "fit.free." + name);
        p.hi = detail::num(pj, "hi", 0.0, "fit.free." + name);
        cfg.fit.spec.free[name] = p;
      }
    }
    if (j.contains("fixed")) {
      if (!j["fixed"].is_object()) throw usage_error("config: fit.fixed must be an object");
      for (const auto& [name, vj] : j["fixed"].items()) {
        if (!vj.is_number()) throw usage_error("config: fit.fixed." + name + " must be a number");
        cfg.fit.spec.fixed[name] = vj.get<double>();
      }
    }
    cfg.fit.spec.validate();
  }

  if (doc.contains("output")) {
    const auto& j = doc["output"];
    detail::check_keys(j, {"dir", "events"}, "output");
    cfg.output.dir = detail::str(j, "dir", cfg.output.dir, "output");
    if (j.contains("events")) {
      if (!j["events"].is_boolean()) throw usage_error("config: output.events must be a boolean");
      cfg.output.events = j["events"].get<bool>();
    }
  }

  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer())
      throw usage_error("config: seed must be an unsigned integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }

  return cfg;
}

// Apply one dotted-path override, e.g. "trap.tau3_ps=600". The value is
// parsed as JSON when possible and kept as a string otherwise.
inline void apply_override(json& doc, const std::string& entry) {
  const auto eq = entry.find('=');
  if (eq == std::string::npos || eq == 0)
    throw usage_error("--set expects dotted.key=value, got '" + entry + "'");
  const std::string path = entry.substr(0, eq);
  const std::string raw = entry.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t begin = 0;
  for (;;) {
    const auto dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
    if (key.empty()) throw usage_error("--set path has an empty component: '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    begin = dot + 1;
  }
}

// defaults <- preset <- file <- --set overrides.
inline RunConfig load_config(const std::string& config_path,
                             const std::vector<std::string>& overrides) {
  json file_doc = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw usage_error("cannot open config file " + config_path);
    try {
      file_doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw usage_error("config parse error in " + config_path + ": " + e.what());
    }
  }
  for (const auto& entry : overrides) apply_override(file_doc, entry);
  std::string preset;
  if (file_doc.contains("preset")) {
    if (!file_doc["preset"].is_string()) throw usage_error("config: preset must be a string");
    preset = file_doc["preset"].get<std::string>();
  }
  json merged = preset_json(preset);
  merged.merge_patch(file_doc);
  return config_from_json(merged);
}

}  // namespace cwhom
