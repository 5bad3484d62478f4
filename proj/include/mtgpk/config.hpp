#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mtgpk/fit.hpp"
#include "mtgpk/kernel_spec.hpp"
#include "mtgpk/types.hpp"

namespace mtgpk {

struct ConvergenceSettings {
  std::vector<int> widths{64, 512, 4096};
  long n_draws = 50000;
  std::vector<Probe> points;  // empty: default grid, see default_probes
};

struct SimulateSettings {
  std::vector<double> k_values{0.0, 3.0};  // one task per entry
  int n_train = 60;
  int n_dev = 20;
  int n_test = 100;
  double noise_sd = 0.05;
  double x_min = -1.0;
  double x_max = 1.0;
};

struct CompareSettings {
  std::optional<KernelSpec> icm_kernel;  // defaults built when absent
  std::optional<KernelSpec> lmc_kernel;
  int focus_task = -1;  // -1: last task (the roughest under simulate's order)
};

struct ResourceLimits {
  long max_n = 5000;
  long max_width = 16384;
  long max_draws = 200000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<KernelSpec> kernel;
  std::optional<Eigen::VectorXd> noise_vars;
  SearchConfig fit;
  ConvergenceSettings convergence;
  SimulateSettings simulate;
  CompareSettings compare;
  ResourceLimits limits;
  bool standardize = false;
};

/// Strict parsing: unknown fields anywhere raise ConfigError with the JSON
/// path. The kernel spec, when present, is structurally validated.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

KernelSpec kernel_from_json(const nlohmann::json& j);
nlohmann::ordered_json kernel_to_json(const KernelSpec& spec);

/// Default convergence probes: x in {-1, 0, 1} crossed with every task
/// (1-dimensional inputs), capped at 12.
std::vector<Probe> default_probes(int n_tasks);

}  // namespace mtgpk
