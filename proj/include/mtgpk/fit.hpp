#pragma once

#include <string>
#include <vector>

#include "mtgpk/gp.hpp"

namespace mtgpk {

/// Evidence maximization settings. Variance-like hyperparameters are searched
/// in log space within [log_lo, log_hi]; task-covariance factor entries are
/// searched directly within [-factor_bound, factor_bound]. Hyperparameters
/// that start at exactly zero stay fixed (they have no log-space image).
struct SearchConfig {
  int max_iters = 400;  // objective evaluations per simplex run
  int restarts = 2;     // extra runs from the incumbent with shrunken steps
  double tol = 1e-7;
  bool fit_noise = true;
  double log_lo = -12.0;
  double log_hi = 12.0;
  double factor_bound = 1e3;
  double init_step = 0.25;
};

void validate_search_config(const SearchConfig& cfg);

struct FitResult {
  KernelSpec spec;
  Eigen::VectorXd noise_vars;
  double log_marginal = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Flattens a kernel spec (plus noise variances) into an unconstrained
/// vector and back. Positive scalars map through log; factor entries map
/// through the identity, keeping every reconstructed covariance PSD.
class ParamPacker {
 public:
  ParamPacker(const KernelSpec& spec, const Eigen::VectorXd& noise_vars,
              const SearchConfig& cfg);

  Eigen::Index size() const { return static_cast<Eigen::Index>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  Eigen::VectorXd pack() const { return initial_; }
  bool in_bounds(const Eigen::VectorXd& v) const;
  std::pair<KernelSpec, Eigen::VectorXd> unpack(const Eigen::VectorXd& v) const;

 private:
  void add_log(const std::string& name, double value);
  void add_raw(const std::string& name, double value);
  void add_base(const std::string& prefix, const BaseKernelSpec& base,
                bool with_bias_const, bool with_layer_variances);
  void add_factor(const std::string& prefix, const Eigen::MatrixXd& lower);

  KernelSpec template_spec_;
  Eigen::VectorXd template_noise_;
  SearchConfig cfg_;
  std::vector<std::string> names_;
  std::vector<bool> is_log_;
  Eigen::VectorXd initial_;
};

/// Maximizes the log marginal likelihood with Nelder-Mead restarts.
/// Factorization failures inside the search count as infinite cost; the
/// incumbent (including the initial spec) is never lost.
FitResult fit(const Dataset& ds, const KernelSpec& initial,
              const SearchConfig& cfg);

}  // namespace mtgpk
