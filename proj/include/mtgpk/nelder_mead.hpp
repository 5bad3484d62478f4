#pragma once

#include <Eigen/Core>
#include <functional>

namespace mtgpk {

struct NelderMeadOptions {
  int max_evals = 500;
  double tol = 1e-8;  // simplex value spread + diameter threshold
};

struct NelderMeadResult {
  Eigen::VectorXd best_x;
  double best_f = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Derivative-free simplex minimization (reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5). The objective may return +inf to veto a
/// point. Deterministic: ordering ties break on vertex index. Tracks the best
/// point ever evaluated, which is what gets returned.
NelderMeadResult nelder_mead_minimize(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& steps,
    const NelderMeadOptions& opts);

}  // namespace mtgpk
