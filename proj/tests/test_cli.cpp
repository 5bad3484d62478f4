#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtgpk/base_kernels.hpp"
#include "mtgpk/commands.hpp"
#include "mtgpk/dataset_io.hpp"
#include "mtgpk/multitask_kernels.hpp"

using namespace mtgpk;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  fs::path p = fs::temp_directory_path() / "mtgpk_cli_test";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

ExperimentConfig icm_config() {
  nlohmann::json j = nlohmann::json::parse(R"({
    "schema": "mtgpk/v1",
    "seed": 11,
    "kernel": {
      "type": "icm",
      "base": {"activation": "erf", "sigma_u": 1.0, "bias_const": 0.1,
               "input_bias_var": 1.0},
      "task_cov": {"factor": [[1.0, 0.0], [0.8, 0.6]]}
    },
    "noise_vars": [0.01, 0.01]
  })");
  return parse_config(j);
}

}  // namespace

TEST_CASE("config parsing is strict about unknown fields") {
  nlohmann::json j = nlohmann::json::parse(
      R"({"seed": 1, "kernle": {"type": "icm"}})");
  try {
    parse_config(j);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    CHECK(std::string(e.what()).find("kernle") != std::string::npos);
  }

  nlohmann::json nested = nlohmann::json::parse(R"({
    "kernel": {"type": "icm",
               "base": {"activation": "erf", "sugma_u": 1.0},
               "task_cov": {"factor": [[1.0]]}}
  })");
  CHECK_THROWS_AS(parse_config(nested), Error);
}

TEST_CASE("config rejects wrong schema and bad kernels") {
  CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"schema": "x"})")),
                  Error);
  // Indefinite direct matrix for an ICM task covariance.
  nlohmann::json j = nlohmann::json::parse(R"({
    "kernel": {"type": "icm", "base": {"activation": "erf"},
               "task_cov": {"matrix": [[1.0, 2.0], [2.0, 1.0]]}}
  })");
  CHECK_THROWS_AS(parse_config(j), Error);
}

TEST_CASE("kernel specs round-trip through JSON") {
  ExperimentConfig cfg = icm_config();
  nlohmann::ordered_json j = kernel_to_json(*cfg.kernel);
  KernelSpec back = kernel_from_json(j);
  const auto& a = std::get<IcmSpec>(*cfg.kernel);
  const auto& b = std::get<IcmSpec>(back);
  CHECK(a.base.bias_const == b.base.bias_const);
  CHECK(a.task_cov.factor() == b.task_cov.factor());

  // LMC with a one-hot component (zero diagonal entries are legal here).
  nlohmann::json lmc = nlohmann::json::parse(R"({
    "type": "lmc",
    "components": [
      {"base": {"activation": "relu"}, "task_cov": {"factor": [[1.0, 0.0], [0.0, 0.0]]}},
      {"base": {"activation": "erf"}, "task_cov": {"factor": [[0.0, 0.0], [0.0, 1.0]]}}
    ]
  })");
  KernelSpec lspec = kernel_from_json(lmc);
  CHECK(task_count(lspec) == 2);

  nlohmann::json cc = nlohmann::json::parse(R"({
    "type": "cc",
    "bases": [{"activation": "erf"}, {"activation": "erf"}],
    "grid": [[[[1.0]], [[0.5]]], [[[0.5]], [[1.0]]]]
  })");
  KernelSpec cspec = kernel_from_json(cc);
  CHECK(kernel_kind_name(cspec) == std::string("cc"));
}

TEST_CASE("kernel-eval writes golden values") {
  auto dir = work_dir();
  ExperimentConfig cfg;
  nlohmann::json j = nlohmann::json::parse(R"({
    "kernel": {"type": "icm",
               "base": {"activation": "linear", "sigma_u": 1.0, "omega_v2": 2.0,
                        "bias_const": 0.25},
               "task_cov": {"factor": [[2.0, 0.0], [1.0, 1.0]]}}
  })");
  cfg = parse_config(j);

  // Hand values: k = Omega[t1,t2] * (0.25 + 2 * x1.x2); Omega = [[4,2],[2,2]].
  spit(dir / "pairs.csv",
       "t1,x1_0,t2,x2_0\n"
       "0,1.0,0,2.0\n"
       "0,1.0,1,2.0\n"
       "1,0.5,1,-1.0\n");
  int rc = cli::cmd_kernel_eval(cfg, (dir / "pairs.csv").string(),
                                (dir / "k.csv").string());
  CHECK(rc == 0);
  std::istringstream out(slurp(dir / "k.csv"));
  std::string line;
  std::getline(out, line);
  CHECK(line == "k");
  std::getline(out, line);
  CHECK(std::stod(line) == doctest::Approx(4.0 * 4.25));
  std::getline(out, line);
  CHECK(std::stod(line) == doctest::Approx(2.0 * 4.25));
  std::getline(out, line);
  CHECK(std::stod(line) == doctest::Approx(2.0 * (0.25 - 1.0)));
}

TEST_CASE("kernel-eval is deterministic across reruns") {
  auto dir = work_dir();
  ExperimentConfig cfg = icm_config();
  spit(dir / "pairs2.csv", "t1,x1_0,t2,x2_0\n0,0.5,1,-0.5\n0,0.5,1,-0.5\n");
  cli::cmd_kernel_eval(cfg, (dir / "pairs2.csv").string(),
                       (dir / "k_a.csv").string());
  cli::cmd_kernel_eval(cfg, (dir / "pairs2.csv").string(),
                       (dir / "k_b.csv").string());
  std::string a = slurp(dir / "k_a.csv");
  CHECK(a == slurp(dir / "k_b.csv"));
  // Identical rows get identical outputs.
  std::istringstream ss(a);
  std::string h, r1, r2;
  std::getline(ss, h);
  std::getline(ss, r1);
  std::getline(ss, r2);
  CHECK(r1 == r2);
}

TEST_CASE("simulate: deterministic, reloadable, rough task is rougher") {
  auto dir = work_dir();
  ExperimentConfig cfg;
  cfg.simulate.n_train = 40;
  cfg.simulate.n_dev = 4;
  cfg.simulate.n_test = 4;
  cfg.simulate.k_values = {0.0, 3.0};
  cfg.simulate.noise_sd = 0.05;

  SUBCASE("byte-identical reruns under different worker counts") {
    cfg.seed = 123;
    setenv("MTGPK_THREADS", "1", 1);
    cli::cmd_simulate(cfg, (dir / "sim_a").string());
    setenv("MTGPK_THREADS", "4", 1);
    cli::cmd_simulate(cfg, (dir / "sim_b").string());
    unsetenv("MTGPK_THREADS");
    for (const char* f : {"train.csv", "dev.csv", "test.csv"})
      CHECK(slurp(dir / "sim_a" / f) == slurp(dir / "sim_b" / f));
  }

  SUBCASE("output reloads and is well-formed") {
    cfg.seed = 9;
    cli::cmd_simulate(cfg, (dir / "sim_c").string());
    Dataset train = load_dataset((dir / "sim_c" / "train.csv").string());
    CHECK(train.n() == 80);
    CHECK(train.n_tasks() == 2);
    Dataset test = load_dataset((dir / "sim_c" / "test.csv").string());
    CHECK(test.n() == 8);
  }

  SUBCASE("larger k gives visibly rougher grid increments") {
    int rough_wins = 0;
    const int n_seeds = 100;
    for (int s = 0; s < n_seeds; ++s) {
      cfg.seed = static_cast<std::uint64_t>(s);
      auto out = dir / ("sim_r" + std::to_string(s));
      cli::cmd_simulate(cfg, out.string());
      Dataset train = load_dataset((out / "train.csv").string());
      double inc[2] = {0.0, 0.0};
      int cnt[2] = {0, 0};
      // Train rows are emitted per task on an ascending grid.
      for (Eigen::Index i = 1; i < train.n(); ++i) {
        if (train.tasks[static_cast<size_t>(i)] !=
            train.tasks[static_cast<size_t>(i - 1)])
          continue;
        double d = train.y[i] - train.y[i - 1];
        inc[train.tasks[static_cast<size_t>(i)]] += d * d;
        ++cnt[train.tasks[static_cast<size_t>(i)]];
      }
      if (inc[1] / cnt[1] > inc[0] / cnt[0]) ++rough_wins;
      fs::remove_all(out);
    }
    CHECK(rough_wins >= 95);
  }

  SUBCASE("equal k values are statistically indistinguishable") {
    cfg.simulate.k_values = {1.0, 1.0};
    double var_sum[2] = {0.0, 0.0};
    double var_sq[2] = {0.0, 0.0};
    const int n_seeds = 100;
    for (int s = 0; s < n_seeds; ++s) {
      cfg.seed = 1000 + static_cast<std::uint64_t>(s);
      auto out = dir / ("sim_e" + std::to_string(s));
      cli::cmd_simulate(cfg, out.string());
      Dataset train = load_dataset((out / "train.csv").string());
      for (int t = 0; t < 2; ++t) {
        double mean = 0.0, count = 0.0;
        for (Eigen::Index i = 0; i < train.n(); ++i)
          if (train.tasks[static_cast<size_t>(i)] == t) {
            mean += train.y[i];
            count += 1.0;
          }
        mean /= count;
        double v = 0.0;
        for (Eigen::Index i = 0; i < train.n(); ++i)
          if (train.tasks[static_cast<size_t>(i)] == t)
            v += (train.y[i] - mean) * (train.y[i] - mean);
        v /= count - 1.0;
        var_sum[t] += v;
        var_sq[t] += v * v;
      }
      fs::remove_all(out);
    }
    double m0 = var_sum[0] / n_seeds, m1 = var_sum[1] / n_seeds;
    double s0 = std::sqrt((var_sq[0] / n_seeds - m0 * m0) / (n_seeds - 1.0));
    double s1 = std::sqrt((var_sq[1] / n_seeds - m1 * m1) / (n_seeds - 1.0));
    CHECK(std::abs(m0 - m1) <= 4.0 * std::sqrt(s0 * s0 + s1 * s1));
  }
}

TEST_CASE("fit-predict: interpolation and the independent baseline") {
  auto dir = work_dir();

  // Two tasks, diagonal task covariance, no fitting (max_iters = 0).
  nlohmann::json j = nlohmann::json::parse(R"({
    "seed": 3,
    "kernel": {"type": "icm",
               "base": {"activation": "erf", "sigma_u": 1.0, "input_bias_var": 1.0},
               "task_cov": {"factor": [[1.0, 0.0], [0.0, 1.2]]}},
    "noise_vars": [1e-10, 1e-10],
    "fit": {"max_iters": 0}
  })");
  ExperimentConfig cfg = parse_config(j);

  spit(dir / "train.csv",
       "x0,task,y\n"
       "-1.0,0,0.3\n-0.5,0,-0.2\n0.5,0,0.4\n1.0,0,0.1\n"
       "-1.0,1,1.3\n-0.4,1,0.9\n0.6,1,1.1\n1.0,1,0.8\n");
  // Query two training points as tests.
  spit(dir / "test.csv", "x0,task,y\n-0.5,0,-0.2\n0.6,1,1.1\n");

  int rc = cli::cmd_fit_predict(cfg, (dir / "train.csv").string(),
                                (dir / "test.csv").string(),
                                (dir / "pred.csv").string(),
                                (dir / "summary.json").string(),
                                /*baseline_independent=*/false,
                                /*standardize=*/false);
  CHECK(rc == 0);
  {
    std::istringstream ss(slurp(dir / "pred.csv"));
    std::string line;
    std::getline(ss, line);
    CHECK(line == "mean,var");
    std::getline(ss, line);
    CHECK(std::stod(line.substr(0, line.find(','))) ==
          doctest::Approx(-0.2).epsilon(1e-6));
  }
  auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["schema"] == "mtgpk/v1");
  CHECK(summary["per_task_mse"][0].get<double>() <= 1e-10);

  // The independent baseline must agree for a diagonal task covariance.
  int rc2 = cli::cmd_fit_predict(cfg, (dir / "train.csv").string(),
                                 (dir / "test.csv").string(),
                                 (dir / "pred_ind.csv").string(),
                                 (dir / "summary_ind.json").string(),
                                 /*baseline_independent=*/true,
                                 /*standardize=*/false);
  CHECK(rc2 == 0);
  auto s_joint = nlohmann::json::parse(slurp(dir / "summary.json"));
  auto s_ind = nlohmann::json::parse(slurp(dir / "summary_ind.json"));
  for (int t = 0; t < 2; ++t)
    CHECK(std::abs(s_joint["per_task_mse"][t].get<double>() -
                   s_ind["per_task_mse"][t].get<double>()) <= 1e-8);
}

TEST_CASE("fit-predict standardization round-trips to original units") {
  auto dir = work_dir();
  nlohmann::json j = nlohmann::json::parse(R"({
    "kernel": {"type": "icm",
               "base": {"activation": "erf", "sigma_u": 1.0, "input_bias_var": 1.0},
               "task_cov": {"factor": [[1.0]]}},
    "noise_vars": [1e-8],
    "fit": {"max_iters": 0}
  })");
  ExperimentConfig cfg = parse_config(j);
  // Targets far from zero: interpolation still must land on them.
  spit(dir / "tr2.csv", "x0,task,y\n-1.0,0,100.5\n0.0,0,101.5\n1.0,0,99.5\n");
  spit(dir / "te2.csv", "x0,task,y\n0.0,0,101.5\n");
  cli::cmd_fit_predict(cfg, (dir / "tr2.csv").string(), (dir / "te2.csv").string(),
                       (dir / "p2.csv").string(), (dir / "s2.json").string(),
                       false, /*standardize=*/true);
  auto summary = nlohmann::json::parse(slurp(dir / "s2.json"));
  CHECK(summary["standardize"] == true);
  CHECK(summary["per_task_mse"][0].get<double>() <= 1e-8);
}

TEST_CASE("verify-converge emits a report and respects caps") {
  auto dir = work_dir();
  ExperimentConfig cfg = icm_config();
  cfg.convergence.widths = {8};
  cfg.convergence.n_draws = 1500;

  int rc = cli::cmd_verify_converge(cfg, (dir / "report.json").string());
  CHECK(rc == 0);  // single width: check skipped, not failed
  auto rep = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(rep["monotone"]["checked"] == false);
  CHECK(rep["widths"].size() == 1);
  CHECK(rep["widths"][0]["width"] == 8);

  // Byte-identical rerun under a different worker count.
  setenv("MTGPK_THREADS", "2", 1);
  cli::cmd_verify_converge(cfg, (dir / "report_b.json").string());
  unsetenv("MTGPK_THREADS");
  CHECK(slurp(dir / "report.json") == slurp(dir / "report_b.json"));

  cfg.convergence.n_draws = 10000000;
  try {
    cli::cmd_verify_converge(cfg, (dir / "report_c.json").string());
    FAIL("expected ResourceCapExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ResourceCapExceeded);
    CHECK(cli::exit_code_for(e.code()) == 1);
  }
}

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code_for(ErrorCode::ConfigError) == 1);
  CHECK(cli::exit_code_for(ErrorCode::ParseError) == 1);
  CHECK(cli::exit_code_for(ErrorCode::NotPSDAfterJitter) == 2);
  CHECK(cli::exit_code_for(ErrorCode::NonFiniteValue) == 2);
}

TEST_CASE("compare runs end to end on a small simulated dataset") {
  auto dir = work_dir();
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.simulate.n_train = 24;
  cfg.simulate.n_dev = 6;
  cfg.simulate.n_test = 12;
  cfg.simulate.k_values = {0.0, 3.0};
  cli::cmd_simulate(cfg, (dir / "cmp_data").string());

  cfg.fit.max_iters = 40;
  cfg.fit.restarts = 0;
  int rc = cli::cmd_compare(cfg, (dir / "cmp_data").string(),
                            (dir / "cmp.json").string());
  auto rep = nlohmann::json::parse(slurp(dir / "cmp.json"));
  CHECK(rep["models"].contains("icm"));
  CHECK(rep["models"].contains("lmc"));
  CHECK(rep["models"].contains("independent"));
  CHECK(rep["checks"]["diag_equiv_max_abs_err"].get<double>() <= 1e-8);
  CHECK((rc == 0 || rc == 3));
  CHECK(rep["checks"]["lmc_le_icm_on_focus_task"].get<bool>() == (rc == 0));
}
