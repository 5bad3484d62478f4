#include "mtgpk/fit.hpp"

#include <cmath>
#include <limits>

#include "mtgpk/nelder_mead.hpp"

namespace mtgpk {

void validate_search_config(const SearchConfig& cfg) {
  if (cfg.max_iters < 0)
    raise(ErrorCode::InvalidBounds, "max_iters must be >= 0");
  if (cfg.restarts < 0) raise(ErrorCode::InvalidBounds, "restarts must be >= 0");
  if (!(cfg.tol > 0.0)) raise(ErrorCode::InvalidBounds, "tol must be > 0");
  if (!(cfg.log_lo < cfg.log_hi))
    raise(ErrorCode::InvalidBounds, "log bounds must satisfy lo < hi");
  if (!(cfg.factor_bound > 0.0))
    raise(ErrorCode::InvalidBounds, "factor_bound must be > 0");
  if (!(cfg.init_step > 0.0))
    raise(ErrorCode::InvalidBounds, "init_step must be > 0");
}

namespace {

/// One traversal defines the parameter order for both packing and unpacking.
/// The visitor sees each free hyperparameter once, in its natural scale, and
/// returns the (possibly new) value to store.
template <typename Visitor>
void traverse_params(KernelSpec& spec, Eigen::VectorXd& noise,
                     const SearchConfig& cfg, Visitor&& visit) {
  auto do_base = [&](const std::string& p, BaseKernelSpec& b, bool with_c,
                     bool with_layer_vars) {
    for (Eigen::Index i = 0; i < b.sigma_u.size(); ++i)
      b.sigma_u[i] = visit(p + ".sigma_u[" + std::to_string(i) + "]",
                           b.sigma_u[i], true);
    if (b.activation == Activation::Erf && b.input_bias_var > 0.0)
      b.input_bias_var = visit(p + ".input_bias_var", b.input_bias_var, true);
    if (with_c && b.bias_const > 0.0)
      b.bias_const = visit(p + ".bias_const", b.bias_const, true);
    if (with_layer_vars) {
      if (b.sigma_b2 > 0.0) b.sigma_b2 = visit(p + ".sigma_b2", b.sigma_b2, true);
      b.omega_v2 = visit(p + ".omega_v2", b.omega_v2, true);
    }
  };
  auto do_factor = [&](const std::string& p, TaskCovariance& tc) {
    Eigen::MatrixXd L = tc.factor();
    for (Eigen::Index r = 0; r < L.rows(); ++r)
      for (Eigen::Index c = 0; c <= r; ++c)
        L(r, c) = visit(p + ".L[" + std::to_string(r) + "][" +
                            std::to_string(c) + "]",
                        L(r, c), false);
    tc.set_factor(L);
  };

  if (auto* icm = std::get_if<IcmSpec>(&spec)) {
    do_base("base", icm->base, /*with_c=*/true, /*with_layer_vars=*/false);
    do_factor("task_cov", icm->task_cov);
  } else if (auto* deep = std::get_if<DeepMtSpec>(&spec)) {
    do_base("base", deep->base, /*with_c=*/false, /*with_layer_vars=*/true);
    for (size_t l = 0; l < deep->layers.size(); ++l) {
      auto& layer = deep->layers[l];
      std::string p = "layer[" + std::to_string(l) + "]";
      if (layer.sigma_b2 > 0.0)
        layer.sigma_b2 = visit(p + ".sigma_b2", layer.sigma_b2, true);
      layer.omega_v2 = visit(p + ".omega_v2", layer.omega_v2, true);
    }
    do_factor("task_cov", deep->task_cov);
    if (deep->bias_task_cov.matrix().cwiseAbs().maxCoeff() > 0.0)
      do_factor("bias_task_cov", deep->bias_task_cov);
  } else if (auto* lmc = std::get_if<LmcSpec>(&spec)) {
    for (size_t m = 0; m < lmc->components.size(); ++m) {
      std::string p = "component[" + std::to_string(m) + "]";
      do_base(p, lmc->components[m].base, false, false);
      do_factor(p + ".task_cov", lmc->components[m].task_cov);
    }
  } else {
    auto& cc = std::get<CcSpec>(spec);
    for (size_t m = 0; m < cc.bases.size(); ++m)
      do_base("basis[" + std::to_string(m) + "]", cc.bases[m], false, false);
    // The grid is searched through the lower factor of its stacked block
    // matrix, which keeps it PSD by construction.
    Eigen::MatrixXd F = psd_lower_factor(cc_block_matrix(cc));
    for (Eigen::Index r = 0; r < F.rows(); ++r)
      for (Eigen::Index c = 0; c <= r; ++c)
        F(r, c) = visit("grid.F[" + std::to_string(r) + "][" +
                            std::to_string(c) + "]",
                        F(r, c), false);
    Eigen::MatrixXd big = F * F.transpose();
    const Eigen::Index T = cc.grid[0][0].rows();
    for (size_t m = 0; m < cc.bases.size(); ++m)
      for (size_t n = 0; n < cc.bases.size(); ++n)
        cc.grid[m][n] = big.block(static_cast<Eigen::Index>(m) * T,
                                  static_cast<Eigen::Index>(n) * T, T, T);
  }

  if (cfg.fit_noise)
    for (Eigen::Index t = 0; t < noise.size(); ++t)
      if (noise[t] > 0.0)
        noise[t] = visit("noise[" + std::to_string(t) + "]", noise[t], true);
}

}  // namespace

ParamPacker::ParamPacker(const KernelSpec& spec,
                         const Eigen::VectorXd& noise_vars,
                         const SearchConfig& cfg)
    : template_spec_(spec), template_noise_(noise_vars), cfg_(cfg) {
  std::vector<double> init;
  KernelSpec work = template_spec_;
  Eigen::VectorXd noise = template_noise_;
  traverse_params(work, noise, cfg_,
                  [&](const std::string& name, double cur, bool log_scale) {
                    names_.push_back(name);
                    is_log_.push_back(log_scale);
                    init.push_back(log_scale ? std::log(cur) : cur);
                    return cur;
                  });
  initial_ = Eigen::Map<Eigen::VectorXd>(init.data(),
                                         static_cast<Eigen::Index>(init.size()));
}

bool ParamPacker::in_bounds(const Eigen::VectorXd& v) const {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (is_log_[static_cast<size_t>(i)]) {
      if (v[i] < cfg_.log_lo || v[i] > cfg_.log_hi) return false;
    } else if (std::abs(v[i]) > cfg_.factor_bound) {
      return false;
    }
  }
  return true;
}

std::pair<KernelSpec, Eigen::VectorXd> ParamPacker::unpack(
    const Eigen::VectorXd& v) const {
  if (v.size() != size())
    raise(ErrorCode::DimensionMismatch, "parameter vector has wrong length");
  KernelSpec spec = template_spec_;
  Eigen::VectorXd noise = template_noise_;
  Eigen::Index cursor = 0;
  traverse_params(spec, noise, cfg_,
                  [&](const std::string&, double, bool log_scale) {
                    double raw = v[cursor++];
                    return log_scale ? std::exp(raw) : raw;
                  });
  return {std::move(spec), std::move(noise)};
}

FitResult fit(const Dataset& ds, const KernelSpec& initial,
              const SearchConfig& cfg) {
  validate_search_config(cfg);
  validate_kernel_spec(initial);

  ParamPacker packer(initial, ds.noise_vars, cfg);

  auto cost = [&](const Eigen::VectorXd& v) -> double {
    if (!packer.in_bounds(v)) return std::numeric_limits<double>::infinity();
    try {
      auto [spec, noise] = packer.unpack(v);
      Dataset trial = ds;
      trial.noise_vars = noise;
      return -MtgpRegressor(std::move(trial), std::move(spec)).log_marginal();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  FitResult out;
  Eigen::VectorXd best_x = packer.pack();
  double best_f = cost(best_x);
  bool converged = false;
  int used = 0;

  if (packer.size() > 0) {
    int budget = cfg.max_iters;
    for (int run = 0; run <= cfg.restarts && budget > 0; ++run) {
      NelderMeadOptions opts;
      opts.max_evals = std::max(1, cfg.max_iters / (cfg.restarts + 1));
      opts.max_evals = std::min(opts.max_evals, budget);
      opts.tol = cfg.tol;
      Eigen::VectorXd steps = Eigen::VectorXd::Constant(
          packer.size(), cfg.init_step * std::pow(0.5, run));
      auto res = nelder_mead_minimize(cost, best_x, steps, opts);
      used += res.evaluations;
      budget -= res.evaluations;
      if (res.best_f < best_f) {
        best_f = res.best_f;
        best_x = res.best_x;
      }
      converged = res.converged;
    }
  } else {
    converged = true;
  }

  auto [spec, noise] = packer.unpack(best_x);
  out.spec = std::move(spec);
  out.noise_vars = std::move(noise);
  out.log_marginal = -best_f;
  out.iterations = used;
  out.converged = converged && cfg.max_iters > 0;
  if (packer.size() == 0) out.converged = true;
  return out;
}

}  // namespace mtgpk
