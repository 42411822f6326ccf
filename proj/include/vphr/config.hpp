// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: flat `key = value` text, benchmark presets and
// validation. Unknown keys are rejected.
#pragma once

#include "vphr/fom.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vphr {

enum class Model { Fom, Rom, Hrom, HromAdaptive };

std::string to_string(Model model);
Model model_from_string(const std::string& name);

struct RunConfig {
  std::string preset = "custom";
  BenchmarkSpec spec;
  Model model = Model::Hrom;
  Index reduced_dim = 3;
  double tol_eim = 1e-4;
  Index eim_interval = 20;
  Index db_samples = 6;
  Index avg_samples = 6;
  Index indicator_samples = 6;
  double c1 = 1.05;
  double c2 = 1.05;
  int gamma = 1;
  std::uint64_t seed = 1;
  std::string output_dir;
  Index snapshot_stride = 20;
  Index metric_stride = 10;
  bool histograms = false;
  bool dump_states = false;
  // Replace the greedy EIM by exact interpolation (all particles).
  bool identity_eim = false;
  // Rebuild the EIM right after each rank update too; the old snapshots never
  // saw the new basis column. false gives the plain every-eim_interval cadence.
  bool eim_rebuild_on_update = true;
  // Advance the full-order model alongside the reduced run for error metrics.
  bool track_reference = true;

  /// Throws ConfigError on inconsistent limits.
  void validate() const;
};

/// Names accepted by preset().
std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
RunConfig preset(const std::string& name);

/// Sets one key; throws ConfigError for unknown keys or malformed values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Every key understood by apply_setting.
std::vector<std::string> known_keys();

/// Parses `key = value` lines ('#' starts a comment). Requires `model` and
/// either `preset` or `benchmark`; the preset is applied first.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

/// key -> value rendering of every setting, for run metadata.
std::map<std::string, std::string> describe(const RunConfig& config);

}  // namespace vphr
