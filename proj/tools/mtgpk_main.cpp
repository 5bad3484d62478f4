#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "mtgpk/commands.hpp"

namespace {

mtgpk::ExperimentConfig load_with_seed(const std::string& config_path,
                                       const std::optional<long>& seed) {
  mtgpk::ExperimentConfig cfg = mtgpk::load_config(config_path);
  if (seed) {
    if (*seed < 0)
      mtgpk::raise(mtgpk::ErrorCode::ConfigError, "--seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(*seed);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multitask Gaussian process kernels with finite-width network "
               "verification"};
  app.require_subcommand(1);

  std::string config_path, pairs_path, out_path, train_path, test_path;
  std::string pred_path, summary_path, data_dir;
  std::string baseline = "joint";
  bool standardize = false;
  std::optional<long> seed;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")
        ->required();
    cmd->add_option("--seed", seed, "override the config seed");
  };

  CLI::App* kernel_eval =
      app.add_subcommand("kernel-eval", "evaluate the kernel on input pairs");
  add_common(kernel_eval);
  kernel_eval->add_option("--pairs", pairs_path, "pairs CSV")->required();
  kernel_eval->add_option("--out", out_path, "output CSV")->required();

  CLI::App* verify = app.add_subcommand(
      "verify-converge", "finite-width convergence study against the kernel");
  add_common(verify);
  verify->add_option("--out", out_path, "report JSON")->required();

  CLI::App* fit_predict =
      app.add_subcommand("fit-predict", "fit hyperparameters and predict");
  add_common(fit_predict);
  fit_predict->add_option("--train", train_path, "training CSV")->required();
  fit_predict->add_option("--test", test_path, "test CSV")->required();
  fit_predict->add_option("--out", pred_path, "predictions CSV")->required();
  fit_predict->add_option("--summary", summary_path, "summary JSON")->required();
  fit_predict
      ->add_option("--baseline", baseline,
                   "'joint' (default) or 'independent' per-task GPs")
      ->check(CLI::IsMember({"joint", "independent"}));
  fit_predict->add_flag("--standardize", standardize,
                        "z-score inputs and per-task targets on train stats");

  CLI::App* simulate =
      app.add_subcommand("simulate", "generate the two-task synthetic benchmark");
  add_common(simulate);
  simulate->add_option("--out", data_dir, "output directory")->required();

  CLI::App* compare = app.add_subcommand(
      "compare", "fit ICM, LMC and independent baselines on a dataset");
  add_common(compare);
  compare->add_option("--data", data_dir, "directory with train/dev/test CSVs")
      ->required();
  compare->add_option("--out", out_path, "comparison JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    mtgpk::ExperimentConfig cfg = load_with_seed(config_path, seed);
    if (kernel_eval->parsed())
      return mtgpk::cli::cmd_kernel_eval(cfg, pairs_path, out_path);
    if (verify->parsed()) return mtgpk::cli::cmd_verify_converge(cfg, out_path);
    if (fit_predict->parsed())
      return mtgpk::cli::cmd_fit_predict(cfg, train_path, test_path, pred_path,
                                         summary_path,
                                         baseline == "independent", standardize);
    if (simulate->parsed()) return mtgpk::cli::cmd_simulate(cfg, data_dir);
    if (compare->parsed())
      return mtgpk::cli::cmd_compare(cfg, data_dir, out_path);
  } catch (const mtgpk::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mtgpk::cli::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
