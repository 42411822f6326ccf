// SPDX-License-Identifier: Apache-2.0
#include "vphr/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace vphr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    // Allow 2e4-style counts when they are exact integers.
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw ConfigError("key '" + key + "': expected an integer");
    return static_cast<long long>(d);
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"preset", [](RunConfig& c, auto&, auto& v) {
         const RunConfig p = preset(v);
         c.preset = p.preset;
         c.spec = p.spec;
         c.reduced_dim = p.reduced_dim;
       }},
      {"benchmark", [](RunConfig& c, auto&, auto& v) { c.spec.kind = benchmark_from_string(v); }},
      {"model", [](RunConfig& c, auto&, auto& v) { c.model = model_from_string(v); }},
      {"wavenumber", [](RunConfig& c, auto& k, auto& v) { c.spec.wavenumber = to_double(k, v); }},
      {"amplitude_lo", [](RunConfig& c, auto& k, auto& v) { c.spec.amplitude_lo = to_double(k, v); }},
      {"amplitude_hi", [](RunConfig& c, auto& k, auto& v) { c.spec.amplitude_hi = to_double(k, v); }},
      {"spread_lo", [](RunConfig& c, auto& k, auto& v) { c.spec.spread_lo = to_double(k, v); }},
      {"spread_hi", [](RunConfig& c, auto& k, auto& v) { c.spec.spread_hi = to_double(k, v); }},
      {"particles", [](RunConfig& c, auto& k, auto& v) { c.spec.particles = to_integer(k, v); }},
      {"cells", [](RunConfig& c, auto& k, auto& v) { c.spec.cells = to_integer(k, v); }},
      {"parameters", [](RunConfig& c, auto& k, auto& v) { c.spec.parameters = to_integer(k, v); }},
      {"final_time", [](RunConfig& c, auto& k, auto& v) { c.spec.final_time = to_double(k, v); }},
      {"time_step", [](RunConfig& c, auto& k, auto& v) { c.spec.time_step = to_double(k, v); }},
      {"n", [](RunConfig& c, auto& k, auto& v) { c.reduced_dim = to_integer(k, v); }},
      {"tol_eim", [](RunConfig& c, auto& k, auto& v) { c.tol_eim = to_double(k, v); }},
      {"eim_interval", [](RunConfig& c, auto& k, auto& v) { c.eim_interval = to_integer(k, v); }},
      {"db_samples", [](RunConfig& c, auto& k, auto& v) { c.db_samples = to_integer(k, v); }},
      {"avg_samples", [](RunConfig& c, auto& k, auto& v) { c.avg_samples = to_integer(k, v); }},
      {"indicator_samples",
       [](RunConfig& c, auto& k, auto& v) { c.indicator_samples = to_integer(k, v); }},
      {"c1", [](RunConfig& c, auto& k, auto& v) { c.c1 = to_double(k, v); }},
      {"c2", [](RunConfig& c, auto& k, auto& v) { c.c2 = to_double(k, v); }},
      {"gamma", [](RunConfig& c, auto& k, auto& v) { c.gamma = static_cast<int>(to_integer(k, v)); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) {
         c.seed = static_cast<std::uint64_t>(to_integer(k, v));
       }},
      {"output_dir", [](RunConfig& c, auto&, auto& v) { c.output_dir = v; }},
      {"snapshot_stride",
       [](RunConfig& c, auto& k, auto& v) { c.snapshot_stride = to_integer(k, v); }},
      {"metric_stride", [](RunConfig& c, auto& k, auto& v) { c.metric_stride = to_integer(k, v); }},
      {"histograms", [](RunConfig& c, auto& k, auto& v) { c.histograms = to_bool(k, v); }},
      {"dump_states", [](RunConfig& c, auto& k, auto& v) { c.dump_states = to_bool(k, v); }},
      {"identity_eim", [](RunConfig& c, auto& k, auto& v) { c.identity_eim = to_bool(k, v); }},
      {"eim_rebuild_on_update",
       [](RunConfig& c, auto& k, auto& v) { c.eim_rebuild_on_update = to_bool(k, v); }},
      {"track_reference",
       [](RunConfig& c, auto& k, auto& v) { c.track_reference = to_bool(k, v); }},
  };
  return table;
}

}  // namespace

std::string to_string(Model model) {
  switch (model) {
    case Model::Fom: return "fom";
    case Model::Rom: return "rom";
    case Model::Hrom: return "hrom";
    case Model::HromAdaptive: return "hrom-ra";
  }
  return "unknown";
}

Model model_from_string(const std::string& name) {
  if (name == "fom") return Model::Fom;
  if (name == "rom") return Model::Rom;
  if (name == "hrom") return Model::Hrom;
  if (name == "hrom-ra") return Model::HromAdaptive;
  throw ConfigError("unknown model '" + name + "' (expected fom, rom, hrom or hrom-ra)");
}

void RunConfig::validate() const {
  spec.validate();
  const Index p = spec.parameters;
  if (model != Model::Fom) {
    if (reduced_dim < 1 || reduced_dim > p) throw ConfigError("need 1 <= n <= p");
    if (reduced_dim > spec.particles) throw ConfigError("need n <= N");
  }
  if (model == Model::Hrom || model == Model::HromAdaptive) {
    if (!(tol_eim > 0.0)) throw ConfigError("tol_eim must be positive");
    if (eim_interval < 1) throw ConfigError("eim_interval must be >= 1");
    if (db_samples < 1 || db_samples > p) throw ConfigError("need 1 <= db_samples <= p");
    if (avg_samples < 1 || avg_samples > p) throw ConfigError("need 1 <= avg_samples <= p");
  }
  if (model == Model::HromAdaptive) {
    if (indicator_samples < 1 || indicator_samples > p) {
      throw ConfigError("need 1 <= indicator_samples <= p");
    }
    if (gamma != 0 && gamma != 1) throw ConfigError("gamma must be 0 or 1");
    if (gamma == 1 && indicator_samples < 6) {
      throw ConfigError("gamma = 1 needs at least 6 indicator samples");
    }
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw ConfigError("c1 and c2 must be positive");
  }
  if (snapshot_stride < 1 || metric_stride < 1) throw ConfigError("strides must be >= 1");
}

std::vector<std::string> preset_names() {
  return {"nlld-desk", "tsi-desk", "nlld-paper", "tsi-paper"};
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  BenchmarkSpec& s = c.spec;
  if (name == "nlld-desk" || name == "nlld-paper") {
    s.kind = Benchmark::LandauDamping;
    s.wavenumber = 0.5;
    s.amplitude_lo = 0.46;
    s.amplitude_hi = 0.5;
    s.spread_lo = 0.96;
    s.spread_hi = 1.0;
  } else if (name == "tsi-desk" || name == "tsi-paper") {
    s.kind = Benchmark::TwoStream;
    s.wavenumber = 0.2;
    s.amplitude_lo = 0.009;
    s.amplitude_hi = 0.011;
    s.spread_lo = 0.98;
    s.spread_hi = 1.02;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  c.reduced_dim = 3;
  if (name == "nlld-desk") {
    s.particles = 20000;
    s.cells = 32;
    s.parameters = 20;
    s.final_time = 20.0;
    s.time_step = 0.01;
  } else if (name == "tsi-desk") {
    s.particles = 30000;
    s.cells = 32;
    s.parameters = 20;
    s.final_time = 20.0;
    s.time_step = 0.01;
  } else if (name == "nlld-paper") {
    // Long-running: hours on one core.
    s.particles = 100000;
    s.cells = 64;
    s.parameters = 100;
    s.final_time = 40.0;
    s.time_step = 0.002;
  } else {
    s.particles = 150000;
    s.cells = 64;
    s.parameters = 100;
    s.final_time = 20.0;
    s.time_step = 0.0025;
  }
  return c;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second(config, key, value);
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

RunConfig parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  const auto has = [&](const std::string& k) {
    return std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.first == k; });
  };
  std::vector<std::string> missing;
  if (!has("model")) missing.emplace_back("model");
  if (!has("preset") && !has("benchmark")) missing.emplace_back("preset (or benchmark)");
  if (!missing.empty()) {
    std::string msg = "missing required keys:";
    for (const auto& m : missing) msg += " " + m;
    throw ConfigError(msg);
  }
  RunConfig config;
  // The preset provides defaults; everything else overrides it.
  for (const auto& [k, v] : entries) {
    if (k == "preset") apply_setting(config, k, v);
  }
  for (const auto& [k, v] : entries) {
    if (k != "preset") apply_setting(config, k, v);
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::map<std::string, std::string> describe(const RunConfig& c) {
  const auto num = [](double d) {
    std::ostringstream o;
    o.precision(17);
    o << d;
    return o.str();
  };
  return {
      {"preset", c.preset},
      {"benchmark", to_string(c.spec.kind)},
      {"model", to_string(c.model)},
      {"wavenumber", num(c.spec.wavenumber)},
      {"amplitude_lo", num(c.spec.amplitude_lo)},
      {"amplitude_hi", num(c.spec.amplitude_hi)},
      {"spread_lo", num(c.spec.spread_lo)},
      {"spread_hi", num(c.spec.spread_hi)},
      {"particles", std::to_string(c.spec.particles)},
      {"cells", std::to_string(c.spec.cells)},
      {"parameters", std::to_string(c.spec.parameters)},
      {"final_time", num(c.spec.final_time)},
      {"time_step", num(c.spec.time_step)},
      {"n", std::to_string(c.reduced_dim)},
      {"tol_eim", num(c.tol_eim)},
      {"eim_interval", std::to_string(c.eim_interval)},
      {"db_samples", std::to_string(c.db_samples)},
      {"avg_samples", std::to_string(c.avg_samples)},
      {"indicator_samples", std::to_string(c.indicator_samples)},
      {"c1", num(c.c1)},
      {"c2", num(c.c2)},
      {"gamma", std::to_string(c.gamma)},
      {"seed", std::to_string(c.seed)},
      {"output_dir", c.output_dir},
      {"snapshot_stride", std::to_string(c.snapshot_stride)},
      {"metric_stride", std::to_string(c.metric_stride)},
      {"histograms", c.histograms ? "true" : "false"},
      {"dump_states", c.dump_states ? "true" : "false"},
      {"identity_eim", c.identity_eim ? "true" : "false"},
      {"eim_rebuild_on_update", c.eim_rebuild_on_update ? "true" : "false"},
      {"track_reference", c.track_reference ? "true" : "false"},
  };
}

}  // namespace vphr
