#include "mtgpk/config.hpp"

#include <fstream>

namespace mtgpk {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& path, const std::string& msg) {
  raise(ErrorCode::ConfigError, path + ": " + msg);
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) config_error(path + "." + it.key(), "unknown field");
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) config_error(path, "expected a number");
  return j.get<double>();
}

long get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) config_error(path, "expected an integer");
  return j.get<long>();
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) config_error(path, "expected a boolean");
  return j.get<bool>();
}

Eigen::VectorXd get_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) config_error(path, "expected a non-empty array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] =
        get_number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Eigen::MatrixXd get_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) config_error(path, "expected a matrix");
  const size_t rows = j.size();
  size_t cols = 0;
  Eigen::MatrixXd m;
  for (size_t r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.empty())
      config_error(path + "[" + std::to_string(r) + "]", "expected an array");
    if (r == 0) {
      cols = row.size();
      m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    } else if (row.size() != cols) {
      config_error(path, "ragged matrix rows");
    }
    for (size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          get_number(row[c], path + "[" + std::to_string(r) + "][" +
                                 std::to_string(c) + "]");
  }
  return m;
}

BaseKernelSpec base_from_json(const json& j, const std::string& path) {
  check_keys(j, path,
             {"activation", "sigma_u", "sigma_b2", "omega_v2", "bias_const",
              "input_bias_var"});
  BaseKernelSpec base;
  if (j.contains("activation")) {
    if (!j["activation"].is_string())
      config_error(path + ".activation", "expected a string");
    base.activation = activation_from_name(j["activation"].get<std::string>());
  }
  if (j.contains("sigma_u")) {
    const json& su = j["sigma_u"];
    if (su.is_number()) {
      base.sigma_u = Eigen::VectorXd::Constant(1, su.get<double>());
    } else {
      base.sigma_u = get_vector(su, path + ".sigma_u");
    }
  }
  if (j.contains("sigma_b2"))
    base.sigma_b2 = get_number(j["sigma_b2"], path + ".sigma_b2");
  if (j.contains("omega_v2"))
    base.omega_v2 = get_number(j["omega_v2"], path + ".omega_v2");
  if (j.contains("bias_const"))
    base.bias_const = get_number(j["bias_const"], path + ".bias_const");
  if (j.contains("input_bias_var"))
    base.input_bias_var = get_number(j["input_bias_var"], path + ".input_bias_var");
  return base;
}

TaskCovariance task_cov_from_json(const json& j, const std::string& path,
                                  bool strict) {
  check_keys(j, path, {"factor", "matrix"});
  if (j.contains("factor") == j.contains("matrix"))
    config_error(path, "give exactly one of 'factor' or 'matrix'");
  if (j.contains("factor"))
    return TaskCovariance::from_factor(get_matrix(j["factor"], path + ".factor"));
  Eigen::MatrixXd m = get_matrix(j["matrix"], path + ".matrix");
  if (strict) return TaskCovariance::from_matrix(m);
  validate_psd(m, path);
  return TaskCovariance::from_factor(psd_lower_factor(m));
}

KernelSpec kernel_from_json_impl(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("type"))
    config_error(path, "kernel needs a 'type' field");
  if (!j["type"].is_string()) config_error(path + ".type", "expected a string");
  const std::string type = j["type"].get<std::string>();
  if (type == "icm") {
    check_keys(j, path, {"type", "base", "task_cov"});
    if (!j.contains("base") || !j.contains("task_cov"))
      config_error(path, "icm needs 'base' and 'task_cov'");
    IcmSpec spec;
    spec.base = base_from_json(j["base"], path + ".base");
    spec.task_cov = task_cov_from_json(j["task_cov"], path + ".task_cov", true);
    return spec;
  }
  if (type == "deep_mt") {
    check_keys(j, path,
               {"type", "depth", "base", "layers", "task_cov", "bias_task_cov"});
    if (!j.contains("depth") || !j.contains("base") || !j.contains("task_cov") ||
        !j.contains("bias_task_cov"))
      config_error(path, "deep_mt needs depth, base, task_cov, bias_task_cov");
    DeepMtSpec spec;
    spec.depth = static_cast<int>(get_integer(j["depth"], path + ".depth"));
    spec.base = base_from_json(j["base"], path + ".base");
    if (j.contains("layers")) {
      const json& layers = j["layers"];
      if (!layers.is_array()) config_error(path + ".layers", "expected an array");
      for (size_t l = 0; l < layers.size(); ++l) {
        const std::string lp = path + ".layers[" + std::to_string(l) + "]";
        check_keys(layers[l], lp, {"sigma_b2", "omega_v2"});
        LayerParams p;
        if (layers[l].contains("sigma_b2"))
          p.sigma_b2 = get_number(layers[l]["sigma_b2"], lp + ".sigma_b2");
        if (layers[l].contains("omega_v2"))
          p.omega_v2 = get_number(layers[l]["omega_v2"], lp + ".omega_v2");
        spec.layers.push_back(p);
      }
    }
    spec.task_cov = task_cov_from_json(j["task_cov"], path + ".task_cov", true);
    spec.bias_task_cov =
        task_cov_from_json(j["bias_task_cov"], path + ".bias_task_cov", false);
    return spec;
  }
  if (type == "lmc") {
    check_keys(j, path, {"type", "components"});
    if (!j.contains("components") || !j["components"].is_array() ||
        j["components"].empty())
      config_error(path, "lmc needs a non-empty 'components' array");
    LmcSpec spec;
    for (size_t m = 0; m < j["components"].size(); ++m) {
      const std::string cp = path + ".components[" + std::to_string(m) + "]";
      const json& comp = j["components"][m];
      check_keys(comp, cp, {"base", "task_cov"});
      if (!comp.contains("base") || !comp.contains("task_cov"))
        config_error(cp, "component needs 'base' and 'task_cov'");
      spec.components.push_back(
          {base_from_json(comp["base"], cp + ".base"),
           task_cov_from_json(comp["task_cov"], cp + ".task_cov", false)});
    }
    return spec;
  }
  if (type == "cc") {
    check_keys(j, path, {"type", "bases", "grid"});
    if (!j.contains("bases") || !j["bases"].is_array() || j["bases"].empty())
      config_error(path, "cc needs a non-empty 'bases' array");
    if (!j.contains("grid") || !j["grid"].is_array())
      config_error(path, "cc needs a 'grid' array of matrix rows");
    CcSpec spec;
    for (size_t m = 0; m < j["bases"].size(); ++m)
      spec.bases.push_back(base_from_json(
          j["bases"][m], path + ".bases[" + std::to_string(m) + "]"));
    const json& grid = j["grid"];
    spec.grid.resize(grid.size());
    for (size_t m = 0; m < grid.size(); ++m) {
      if (!grid[m].is_array())
        config_error(path + ".grid[" + std::to_string(m) + "]",
                     "expected an array of matrices");
      for (size_t n = 0; n < grid[m].size(); ++n)
        spec.grid[m].push_back(
            get_matrix(grid[m][n], path + ".grid[" + std::to_string(m) + "][" +
                                       std::to_string(n) + "]"));
    }
    return spec;
  }
  config_error(path + ".type", "unknown kernel type '" + type + "'");
}

nlohmann::ordered_json task_cov_to_json(const TaskCovariance& tc) {
  nlohmann::ordered_json out;
  nlohmann::ordered_json factor = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < tc.factor().rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < tc.factor().cols(); ++c)
      row.push_back(tc.factor()(r, c));
    factor.push_back(row);
  }
  out["factor"] = factor;
  return out;
}

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

nlohmann::ordered_json base_to_json(const BaseKernelSpec& base) {
  nlohmann::ordered_json out;
  out["activation"] = activation_name(base.activation);
  if (base.sigma_u.size() == 1) {
    out["sigma_u"] = base.sigma_u[0];
  } else {
    nlohmann::ordered_json su = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < base.sigma_u.size(); ++i)
      su.push_back(base.sigma_u[i]);
    out["sigma_u"] = su;
  }
  out["sigma_b2"] = base.sigma_b2;
  out["omega_v2"] = base.omega_v2;
  out["bias_const"] = base.bias_const;
  out["input_bias_var"] = base.input_bias_var;
  return out;
}

}  // namespace

KernelSpec kernel_from_json(const nlohmann::json& j) {
  KernelSpec spec = kernel_from_json_impl(j, "kernel");
  validate_kernel_spec(spec);
  return spec;
}

nlohmann::ordered_json kernel_to_json(const KernelSpec& spec) {
  nlohmann::ordered_json out;
  out["type"] = kernel_kind_name(spec);
  if (const auto* icm = std::get_if<IcmSpec>(&spec)) {
    out["base"] = base_to_json(icm->base);
    out["task_cov"] = task_cov_to_json(icm->task_cov);
  } else if (const auto* deep = std::get_if<DeepMtSpec>(&spec)) {
    out["depth"] = deep->depth;
    out["base"] = base_to_json(deep->base);
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (const auto& l : deep->layers) {
      nlohmann::ordered_json lj;
      lj["sigma_b2"] = l.sigma_b2;
      lj["omega_v2"] = l.omega_v2;
      layers.push_back(lj);
    }
    out["layers"] = layers;
    out["task_cov"] = task_cov_to_json(deep->task_cov);
    out["bias_task_cov"] = task_cov_to_json(deep->bias_task_cov);
  } else if (const auto* lmc = std::get_if<LmcSpec>(&spec)) {
    nlohmann::ordered_json comps = nlohmann::ordered_json::array();
    for (const auto& c : lmc->components) {
      nlohmann::ordered_json cj;
      cj["base"] = base_to_json(c.base);
      cj["task_cov"] = task_cov_to_json(c.task_cov);
      comps.push_back(cj);
    }
    out["components"] = comps;
  } else {
    const auto& cc = std::get<CcSpec>(spec);
    nlohmann::ordered_json bases = nlohmann::ordered_json::array();
    for (const auto& b : cc.bases) bases.push_back(base_to_json(b));
    out["bases"] = bases;
    nlohmann::ordered_json grid = nlohmann::ordered_json::array();
    for (const auto& row : cc.grid) {
      nlohmann::ordered_json rj = nlohmann::ordered_json::array();
      for (const auto& block : row) rj.push_back(matrix_to_json(block));
      grid.push_back(rj);
    }
    out["grid"] = grid;
  }
  return out;
}

std::vector<Probe> default_probes(int n_tasks) {
  std::vector<Probe> probes;
  const double grid[3] = {-1.0, 0.0, 1.0};
  for (double g : grid)
    for (int t = 0; t < n_tasks; ++t) {
      if (probes.size() >= 12) return probes;
      Probe p;
      p.x = Eigen::VectorXd::Constant(1, g);
      p.task = t;
      probes.push_back(p);
    }
  return probes;
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  check_keys(j, "config",
             {"schema", "seed", "kernel", "noise_vars", "fit", "convergence",
              "simulate", "compare", "limits", "standardize"});
  ExperimentConfig cfg;
  if (j.contains("schema")) {
    if (!j["schema"].is_string() || j["schema"].get<std::string>() != "mtgpk/v1")
      config_error("config.schema", "expected \"mtgpk/v1\"");
  }
  if (j.contains("seed")) {
    long s = get_integer(j["seed"], "config.seed");
    if (s < 0) config_error("config.seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (j.contains("kernel")) cfg.kernel = kernel_from_json(j["kernel"]);
  if (j.contains("noise_vars"))
    cfg.noise_vars = get_vector(j["noise_vars"], "config.noise_vars");

  if (j.contains("fit")) {
    const json& f = j["fit"];
    check_keys(f, "config.fit",
               {"max_iters", "restarts", "tol", "fit_noise", "log_lo", "log_hi",
                "factor_bound", "init_step"});
    if (f.contains("max_iters"))
      cfg.fit.max_iters =
          static_cast<int>(get_integer(f["max_iters"], "config.fit.max_iters"));
    if (f.contains("restarts"))
      cfg.fit.restarts =
          static_cast<int>(get_integer(f["restarts"], "config.fit.restarts"));
    if (f.contains("tol")) cfg.fit.tol = get_number(f["tol"], "config.fit.tol");
    if (f.contains("fit_noise"))
      cfg.fit.fit_noise = get_bool(f["fit_noise"], "config.fit.fit_noise");
    if (f.contains("log_lo"))
      cfg.fit.log_lo = get_number(f["log_lo"], "config.fit.log_lo");
    if (f.contains("log_hi"))
      cfg.fit.log_hi = get_number(f["log_hi"], "config.fit.log_hi");
    if (f.contains("factor_bound"))
      cfg.fit.factor_bound =
          get_number(f["factor_bound"], "config.fit.factor_bound");
    if (f.contains("init_step"))
      cfg.fit.init_step = get_number(f["init_step"], "config.fit.init_step");
    validate_search_config(cfg.fit);
  }

  if (j.contains("convergence")) {
    const json& c = j["convergence"];
    check_keys(c, "config.convergence", {"widths", "n_draws", "points"});
    if (c.contains("widths")) {
      if (!c["widths"].is_array() || c["widths"].empty())
        config_error("config.convergence.widths", "expected a non-empty array");
      cfg.convergence.widths.clear();
      for (size_t i = 0; i < c["widths"].size(); ++i)
        cfg.convergence.widths.push_back(static_cast<int>(get_integer(
            c["widths"][i],
            "config.convergence.widths[" + std::to_string(i) + "]")));
    }
    if (c.contains("n_draws"))
      cfg.convergence.n_draws =
          get_integer(c["n_draws"], "config.convergence.n_draws");
    if (c.contains("points")) {
      if (!c["points"].is_array())
        config_error("config.convergence.points", "expected an array");
      for (size_t i = 0; i < c["points"].size(); ++i) {
        const std::string pp =
            "config.convergence.points[" + std::to_string(i) + "]";
        const json& pj = c["points"][i];
        check_keys(pj, pp, {"x", "task"});
        if (!pj.contains("x") || !pj.contains("task"))
          config_error(pp, "probe needs 'x' and 'task'");
        Probe p;
        p.x = get_vector(pj["x"], pp + ".x");
        p.task = static_cast<int>(get_integer(pj["task"], pp + ".task"));
        if (p.task < 0) config_error(pp + ".task", "must be >= 0");
        cfg.convergence.points.push_back(std::move(p));
      }
    }
  }

  if (j.contains("simulate")) {
    const json& s = j["simulate"];
    check_keys(s, "config.simulate",
               {"k_values", "n_train", "n_dev", "n_test", "noise_sd", "x_min",
                "x_max"});
    if (s.contains("k_values")) {
      Eigen::VectorXd ks = get_vector(s["k_values"], "config.simulate.k_values");
      cfg.simulate.k_values.assign(ks.data(), ks.data() + ks.size());
    }
    if (s.contains("n_train"))
      cfg.simulate.n_train =
          static_cast<int>(get_integer(s["n_train"], "config.simulate.n_train"));
    if (s.contains("n_dev"))
      cfg.simulate.n_dev =
          static_cast<int>(get_integer(s["n_dev"], "config.simulate.n_dev"));
    if (s.contains("n_test"))
      cfg.simulate.n_test =
          static_cast<int>(get_integer(s["n_test"], "config.simulate.n_test"));
    if (s.contains("noise_sd"))
      cfg.simulate.noise_sd =
          get_number(s["noise_sd"], "config.simulate.noise_sd");
    if (s.contains("x_min"))
      cfg.simulate.x_min = get_number(s["x_min"], "config.simulate.x_min");
    if (s.contains("x_max"))
      cfg.simulate.x_max = get_number(s["x_max"], "config.simulate.x_max");
    if (cfg.simulate.n_train < 2)
      config_error("config.simulate.n_train", "must be >= 2");
    if (cfg.simulate.n_dev < 1 || cfg.simulate.n_test < 1)
      config_error("config.simulate", "n_dev and n_test must be >= 1");
    if (!(cfg.simulate.x_min < cfg.simulate.x_max))
      config_error("config.simulate", "x_min must be < x_max");
    if (cfg.simulate.noise_sd < 0.0)
      config_error("config.simulate.noise_sd", "must be >= 0");
    if (cfg.simulate.k_values.empty())
      config_error("config.simulate.k_values", "needs >= 1 task");
  }

  if (j.contains("compare")) {
    const json& c = j["compare"];
    check_keys(c, "config.compare", {"icm_kernel", "lmc_kernel", "focus_task"});
    if (c.contains("icm_kernel"))
      cfg.compare.icm_kernel = kernel_from_json(c["icm_kernel"]);
    if (c.contains("lmc_kernel"))
      cfg.compare.lmc_kernel = kernel_from_json(c["lmc_kernel"]);
    if (c.contains("focus_task"))
      cfg.compare.focus_task =
          static_cast<int>(get_integer(c["focus_task"], "config.compare.focus_task"));
  }

  if (j.contains("limits")) {
    const json& l = j["limits"];
    check_keys(l, "config.limits", {"max_n", "max_width", "max_draws"});
    if (l.contains("max_n"))
      cfg.limits.max_n = get_integer(l["max_n"], "config.limits.max_n");
    if (l.contains("max_width"))
      cfg.limits.max_width = get_integer(l["max_width"], "config.limits.max_width");
    if (l.contains("max_draws"))
      cfg.limits.max_draws = get_integer(l["max_draws"], "config.limits.max_draws");
  }

  if (j.contains("standardize"))
    cfg.standardize = get_bool(j["standardize"], "config.standardize");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::ConfigError, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ConfigError,
          "config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace mtgpk
