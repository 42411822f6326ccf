// SPDX-License-Identifier: Apache-2.0
//
// vphr: run, compare and time the particle models from the command line.
#include "vphr/config.hpp"
#include "vphr/driver.hpp"
#include "vphr/metrics.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vphr::ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Config file text followed by one line per flag given on the command line,
// so flags override file entries.
vphr::RunConfig assemble_config(const std::string& file,
                                const std::map<std::string, std::string>& flags,
                                const std::vector<std::string>& sets) {
  std::string text = file.empty() ? std::string() : read_text(file);
  text += '\n';
  for (const auto& [k, v] : flags) {
    if (!v.empty()) text += k + " = " + v + '\n';
  }
  for (const auto& s : sets) text += s + '\n';
  return vphr::parse_config_text(text);
}

// step number -> path for files named <prefix>_<step>.bin
std::map<long long, std::string> list_states(const std::string& dir, const std::string& prefix) {
  std::map<long long, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix + "_", 0) != 0 || entry.path().extension() != ".bin") continue;
    const std::string digits = name.substr(prefix.size() + 1, name.size() - prefix.size() - 5);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) continue;
    out[std::stoll(digits)] = entry.path().string();
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced and hyper-reduced particle-in-cell Vlasov-Poisson solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vphr::version_string());
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // run
  auto* run_cmd = app.add_subcommand("run", "Run one model and write its outputs");
  std::string run_config;
  std::vector<std::string> run_sets;
  std::map<std::string, std::string> run_flags;
  for (const auto& key : vphr::known_keys()) run_flags[key];
  run_cmd->add_option("-c,--config", run_config, "key = value configuration file");
  run_cmd->add_option("--set", run_sets, "Extra 'key = value' setting (repeatable)");
  for (auto& [key, value] : run_flags) {
    std::string flag = "--" + key;
    std::replace(flag.begin() + 2, flag.end(), '_', '-');
    run_cmd->add_option(flag, value, "Override '" + key + "'");
  }

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "Compare dumped model and reference states");
  std::string ref_dir, model_dir, ref_prefix = "reference", model_prefix = "model";
  std::string metrics_config, metrics_preset, metrics_out;
  metrics_cmd->add_option("--reference", ref_dir, "Directory with reference state dumps")
      ->required()
      ->check(CLI::ExistingDirectory);
  metrics_cmd->add_option("--model", model_dir, "Directory with model state dumps")
      ->required()
      ->check(CLI::ExistingDirectory);
  metrics_cmd->add_option("--reference-prefix", ref_prefix, "File prefix of reference dumps");
  metrics_cmd->add_option("--model-prefix", model_prefix, "File prefix of model dumps");
  auto* mc = metrics_cmd->add_option("-c,--config", metrics_config, "Run configuration (grid)");
  metrics_cmd->add_option("--preset", metrics_preset, "Preset providing the grid")->excludes(mc);
  metrics_cmd->add_option("-o,--output", metrics_out, "CSV output (stdout if omitted)");

  // scaling
  auto* scaling_cmd = app.add_subcommand("scaling", "Mean per-step wall time against p");
  std::string scaling_config, scaling_preset = "nlld-desk", p_list = "50,100,200,400";
  std::string model_list = "fom,hrom";
  std::vector<std::string> scaling_sets;
  vphr::Index scaling_steps = 100;
  scaling_cmd->add_option("-c,--config", scaling_config, "Base configuration file");
  scaling_cmd->add_option("--preset", scaling_preset, "Base preset when no file is given");
  scaling_cmd->add_option("--set", scaling_sets, "Extra 'key = value' setting (repeatable)");
  scaling_cmd->add_option("--p-list", p_list, "Comma-separated ascending parameter counts");
  scaling_cmd->add_option("--models", model_list, "Comma-separated models");
  scaling_cmd->add_option("--steps", scaling_steps, "Steps per measurement")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  // Tables go to stdout, log lines to stderr.
  spdlog::set_default_logger(spdlog::stderr_color_mt("vphr"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*run_cmd) {
      const vphr::RunConfig config = assemble_config(run_config, run_flags, run_sets);
      spdlog::info("{}: model {}, N = {}, p = {}, {} steps", vphr::version_string(),
                   vphr::to_string(config.model), config.spec.particles, config.spec.parameters,
                   config.spec.steps());
      const vphr::RunResult r = vphr::run(config);
      spdlog::info("done: {:.2f} s in model steps, final error {:.3e}, average error {:.3e}, "
                   "max E_H {:.3e}",
                   r.total_seconds, r.final_solution_error, r.series.average_solution_error(),
                   r.series.max_hamiltonian_error());
      if (config.output_dir.empty()) std::cout << r.series.to_csv();
    } else if (*metrics_cmd) {
      vphr::RunConfig config;
      if (!metrics_config.empty()) {
        config = vphr::load_config(metrics_config);
      } else {
        config = vphr::preset(metrics_preset.empty() ? "nlld-desk" : metrics_preset);
      }
      const vphr::FemGrid grid(config.spec.domain_length(), config.spec.cells);
      const auto refs = list_states(ref_dir, ref_prefix);
      const auto models = list_states(model_dir, model_prefix);
      std::vector<vphr::TrajectoryPoint> ref_traj, model_traj;
      for (const auto& [step, path] : models) {
        const auto it = refs.find(step);
        if (it == refs.end()) {
          throw std::invalid_argument("no reference state for step " + std::to_string(step));
        }
        model_traj.push_back(vphr::read_state(path));
        ref_traj.push_back(vphr::read_state(it->second));
      }
      if (model_traj.empty()) throw std::invalid_argument("no model state dumps found");
      const auto series = vphr::compare_trajectories(grid, ref_traj, model_traj);
      if (metrics_out.empty()) {
        std::cout << series.to_csv();
      } else {
        std::ofstream(metrics_out) << series.to_csv();
      }
      spdlog::info("average relative error {:.4e}", series.average_solution_error());
    } else if (*scaling_cmd) {
      std::map<std::string, std::string> flags{{"preset", scaling_preset}};
      if (!scaling_config.empty()) flags.clear();
      std::vector<std::string> sets = scaling_sets;
      sets.insert(sets.begin(), "model = fom");
      const vphr::RunConfig base = assemble_config(scaling_config, flags, sets);
      std::vector<vphr::Index> ps;
      for (const auto& s : split_list(p_list)) ps.push_back(std::stoll(s));
      std::vector<vphr::Model> ms;
      for (const auto& s : split_list(model_list)) ms.push_back(vphr::model_from_string(s));
      const auto rows = vphr::scaling_probe(base, ps, ms, scaling_steps);
      std::cout << "model,parameters,seconds_per_step\n";
      for (const auto& r : rows) {
        std::cout << vphr::to_string(r.model) << ',' << r.parameters << ',' << r.seconds_per_step
                  << '\n';
      }
      for (auto m : ms) {
        std::cout << "# exponent " << vphr::to_string(m) << ' '
                  << vphr::scaling_exponent(rows, m) << '\n';
      }
    }
  } catch (const vphr::ConfigError& e) {
    spdlog::error("configuration: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
