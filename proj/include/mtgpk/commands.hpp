#pragma once

#include <string>

#include "mtgpk/config.hpp"

namespace mtgpk::cli {

/// Command bodies shared by the binary and the test suites. Each returns the
/// process exit code: 0 success, 3 when a checked property fails. Usage,
/// config and numerical problems surface as mtgpk::Error (the binary maps
/// them to exit codes 1 and 2).

int cmd_kernel_eval(const ExperimentConfig& cfg, const std::string& pairs_path,
                    const std::string& out_path);

int cmd_verify_converge(const ExperimentConfig& cfg,
                        const std::string& out_path);

int cmd_fit_predict(const ExperimentConfig& cfg, const std::string& train_path,
                    const std::string& test_path, const std::string& pred_path,
                    const std::string& summary_path, bool baseline_independent,
                    bool standardize);

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir);

int cmd_compare(const ExperimentConfig& cfg, const std::string& data_dir,
                const std::string& out_path);

int exit_code_for(ErrorCode code);

}  // namespace mtgpk::cli
