#pragma once

#include <vector>

#include "mtgpk/multitask_kernels.hpp"

namespace mtgpk {

/// Predictive mean / variance at one query; includes_noise records whether
/// the observation noise variance was added.
struct PosteriorResult {
  double mean = 0.0;
  double variance = 0.0;
  bool includes_noise = false;
};

/// Lower-triangular Cholesky factor of the (possibly jittered) Gram matrix.
struct CholeskyFactor {
  Eigen::MatrixXd L;
  double jitter = 0.0;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  double log_det() const;
};

/// Cholesky with jitter escalation: exact first, then 1e-10 .. 1e-4 times the
/// mean diagonal in decade steps. Throws NotPSDAfterJitter past the cap.
CholeskyFactor cholesky_with_jitter(const Eigen::MatrixXd& K);
CholeskyFactor factorize(const GramMatrix& g);

/// Exact multitask GP regression; builds and factorizes the noisy Gram once,
/// then serves any number of predictions. Immutable after construction.
class MtgpRegressor {
 public:
  MtgpRegressor(Dataset ds, KernelSpec spec);

  PosteriorResult predict(const InputPoint& x, TaskId t,
                          bool include_noise) const;
  /// Cross-covariance vector K* between the query and the training rows.
  Eigen::VectorXd cross_covariances(const InputPoint& x, TaskId t) const;

  const Eigen::VectorXd& weights() const { return alpha_; }
  double log_marginal() const { return log_marginal_; }
  const Dataset& data() const { return ds_; }
  const KernelSpec& spec() const { return spec_; }
  double applied_jitter() const { return chol_.jitter; }

 private:
  Dataset ds_;
  KernelSpec spec_;
  KernelEvaluator eval_;
  std::vector<KernelEvaluator::PointCache> caches_;
  CholeskyFactor chol_;
  Eigen::VectorXd alpha_;
  double log_marginal_ = 0.0;
};

PosteriorResult predict(const Dataset& ds, const KernelSpec& spec,
                        const InputPoint& x, TaskId t, bool include_noise);
Eigen::VectorXd predictive_mean_weights(const Dataset& ds,
                                        const KernelSpec& spec);
double log_marginal(const Dataset& ds, const KernelSpec& spec);

/// One independent single-task GP per task, each trained on that task's rows
/// only. per_task_specs[t] must be a single-task kernel (see
/// restrict_to_task). Throws EmptyTask for tasks without rows.
std::vector<MtgpRegressor> per_task_baseline(
    const Dataset& ds, const std::vector<KernelSpec>& per_task_specs);

}  // namespace mtgpk
