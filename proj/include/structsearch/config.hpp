#pragma once

// Run configuration: a JSON document with a version field, applied on top of
// the named system's defaults. Unknown keys are errors so typos never pass
// silently.

#include "structsearch/experiments.hpp"

#include <fstream>
#include <set>

namespace structsearch {

inline constexpr int kConfigVersion = 1;

struct RunConfig {
  std::string system = "lj4";
  std::string method = "gss";
  std::size_t trials = 1024;
  std::uint64_t root_seed = 0;
  unsigned threads = 0;
  std::string out;
  std::string references;  // JSONL; training set / evaluation references
  std::string data_dir;
  json schedule = json::object();
  json guidance = json::object();
  json relax = json::object();
};

namespace detail {

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
T get_field(const json& j, const std::string& where, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const json& j, RunConfig base = {}) {
  detail::check_keys(j, "config", {"version", "system", "method", "trials", "seed", "threads", "out",
                                   "references", "data", "schedule", "guidance", "relax"});
  if (!j.contains("version")) throw ConfigError("config.version: required");
  if (detail::get_field<int>(j, "config", "version") != kConfigVersion)
    throw ConfigError("config.version: unsupported (expected " + std::to_string(kConfigVersion) + ")");
  if (j.contains("system")) base.system = detail::get_field<std::string>(j, "config", "system");
  if (j.contains("method")) base.method = detail::get_field<std::string>(j, "config", "method");
  if (j.contains("trials")) {
    const auto t = detail::get_field<long long>(j, "config", "trials");
    if (t < 1) throw ConfigError("config.trials: must be >= 1");
    base.trials = static_cast<std::size_t>(t);
  }
  if (j.contains("seed")) base.root_seed = detail::get_field<std::uint64_t>(j, "config", "seed");
  if (j.contains("threads")) base.threads = detail::get_field<unsigned>(j, "config", "threads");
  if (j.contains("out")) base.out = detail::get_field<std::string>(j, "config", "out");
  if (j.contains("references")) base.references = detail::get_field<std::string>(j, "config", "references");
  if (j.contains("data")) base.data_dir = detail::get_field<std::string>(j, "config", "data");
  if (j.contains("schedule")) {
    detail::check_keys(j["schedule"], "config.schedule",
                       {"steps", "sigma_min", "sigma_max", "beta_min", "beta_max", "lattice_c"});
    base.schedule = j["schedule"];
  }
  if (j.contains("guidance")) {
    detail::check_keys(j["guidance"], "config.guidance",
                       {"t_mid", "t_scale", "lambda", "lambda_frac", "lambda_lattice", "lambda_molecular",
                        "alpha_override", "final_relax", "inject_noise", "force_clip", "drift_cap"});
    base.guidance = j["guidance"];
  }
  if (j.contains("relax")) {
    detail::check_keys(j["relax"], "config.relax", {"f_max", "max_steps", "relax_cell"});
    base.relax = j["relax"];
  }
  return base;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_run_config(j);
}

/// Named system with the config's overrides applied.
inline System configured_system(const RunConfig& c) {
  System sys = make_system(c.system);
  const json& s = c.schedule;
  if (!s.empty()) {
    const std::string w = "config.schedule";
    const int steps = s.contains("steps") ? detail::get_field<int>(s, w, "steps") : sys.schedule.steps();
    sys.schedule = NoiseSchedule::standard(
        steps, s.contains("sigma_min") ? detail::get_field<double>(s, w, "sigma_min") : 0.01,
        s.contains("sigma_max") ? detail::get_field<double>(s, w, "sigma_max") : 1.0,
        s.contains("beta_min") ? detail::get_field<double>(s, w, "beta_min") : 1e-4,
        s.contains("beta_max") ? detail::get_field<double>(s, w, "beta_max") : 2e-2,
        s.contains("lattice_c") ? detail::get_field<double>(s, w, "lattice_c") : 2.0);
    if (s.contains("steps")) {
      // Keep the sigmoid at the same fraction of the run.
      const GuidanceConfig d = GuidanceConfig::for_steps(steps);
      sys.guidance.t_mid = d.t_mid;
      sys.guidance.t_scale = d.t_scale;
    }
  }
  const json& g = c.guidance;
  const std::string w = "config.guidance";
  GuidanceConfig& gc = sys.guidance;
  if (g.contains("t_mid")) gc.t_mid = detail::get_field<double>(g, w, "t_mid");
  if (g.contains("t_scale")) gc.t_scale = detail::get_field<double>(g, w, "t_scale");
  if (g.contains("lambda"))
    gc.lambda_frac = gc.lambda_lattice = gc.lambda_molecular = detail::get_field<double>(g, w, "lambda");
  if (g.contains("lambda_frac")) gc.lambda_frac = detail::get_field<double>(g, w, "lambda_frac");
  if (g.contains("lambda_lattice")) gc.lambda_lattice = detail::get_field<double>(g, w, "lambda_lattice");
  if (g.contains("lambda_molecular")) gc.lambda_molecular = detail::get_field<double>(g, w, "lambda_molecular");
  if (g.contains("alpha_override")) {
    if (g["alpha_override"].is_null()) gc.alpha_override.reset();
    else gc.alpha_override = detail::get_field<double>(g, w, "alpha_override");
  }
  if (g.contains("final_relax")) gc.final_relax = detail::get_field<bool>(g, w, "final_relax");
  if (g.contains("inject_noise")) gc.inject_noise = detail::get_field<bool>(g, w, "inject_noise");
  if (g.contains("force_clip")) gc.force_clip = detail::get_field<double>(g, w, "force_clip");
  if (g.contains("drift_cap")) {
    if (g["drift_cap"].is_null()) gc.drift_cap.reset();
    else gc.drift_cap = detail::get_field<double>(g, w, "drift_cap");
  }
  gc.validate();
  const json& r = c.relax;
  if (r.contains("f_max")) sys.relax.f_max = detail::get_field<double>(r, "config.relax", "f_max");
  if (r.contains("max_steps")) sys.relax.max_steps = detail::get_field<int>(r, "config.relax", "max_steps");
  if (r.contains("relax_cell")) sys.relax.relax_cell = detail::get_field<bool>(r, "config.relax", "relax_cell");
  sys.relax.validate();
  return sys;
}

}  // namespace structsearch
