#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "mtgpk/errors.hpp"

namespace mtgpk {

using InputPoint = Eigen::VectorXd;
using TaskId = int;

enum class Activation { Erf, Relu, Linear };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// Odd activations have E[h(z)] = 0 for zero-mean Gaussian z.
inline bool is_odd_activation(Activation a) { return a != Activation::Relu; }

/// Hyperparameters of one first-layer feature map: activation h, diagonal
/// input-weight covariance Sigma_u, bias/weight variances of the linear base
/// kernel, the output-bias constant C, and the variance of the constant input
/// coordinate appended for erf features (0 disables the augmentation).
struct BaseKernelSpec {
  Activation activation = Activation::Erf;
  Eigen::VectorXd sigma_u = Eigen::VectorXd::Ones(1);  // size 1 == isotropic
  double sigma_b2 = 0.0;
  double omega_v2 = 1.0;
  double bias_const = 0.0;
  double input_bias_var = 1.0;
};

void validate_base(const BaseKernelSpec& base);

/// Resolves sigma_u against the input dimension: a 1-entry vector acts as
/// scalar * I, otherwise the length must equal dim.
Eigen::VectorXd sigma_u_diag(const BaseKernelSpec& base, Eigen::Index dim);

inline bool has_input_augmentation(const BaseKernelSpec& base) {
  return base.activation == Activation::Erf && base.input_bias_var > 0.0;
}

/// T x T cross-task covariance, stored through a lower-triangular factor so
/// that Omega = L * L^T is positive semidefinite by construction. Direct
/// matrices are accepted through from_matrix, which validates and factorizes.
class TaskCovariance {
 public:
  TaskCovariance() = default;

  static TaskCovariance from_factor(const Eigen::MatrixXd& lower);
  static TaskCovariance from_matrix(const Eigen::MatrixXd& omega);
  static TaskCovariance identity(int n_tasks);
  static TaskCovariance diagonal(const Eigen::VectorXd& variances);

  int n_tasks() const { return static_cast<int>(factor_.rows()); }
  const Eigen::MatrixXd& factor() const { return factor_; }
  const Eigen::MatrixXd& matrix() const { return omega_; }
  double operator()(TaskId t1, TaskId t2) const { return omega_(t1, t2); }

  /// Replaces the factor (hyperparameter search mutates factors in place).
  void set_factor(const Eigen::MatrixXd& lower);

 private:
  Eigen::MatrixXd factor_{Eigen::MatrixXd::Zero(0, 0)};
  Eigen::MatrixXd omega_{Eigen::MatrixXd::Zero(0, 0)};
};

/// Throws NotSymmetric / NotPSD (detail = most negative eigenvalue) /
/// NonPositiveDiagonal when the invariants fail.
void validate_task_cov(const Eigen::MatrixXd& omega);
void validate_task_cov(const TaskCovariance& tc);

/// Relaxed check used for bias covariances and mixture components: symmetric
/// and PSD, but zero diagonal entries are allowed.
void validate_psd(const Eigen::MatrixXd& m, const std::string& what);

/// Lower-triangular factor L with L*L^T == m for a symmetric PSD matrix.
/// Plain Cholesky when positive definite; a pivoted LDL^T with clamped
/// negative pivots plus re-triangularization otherwise.
Eigen::MatrixXd psd_lower_factor(const Eigen::MatrixXd& m);

/// Observations: inputs X (row per point), the task of each row, targets y,
/// and per-task noise variances. The task count is always inferred from the
/// data as max task index + 1.
struct Dataset {
  Eigen::MatrixXd X;
  std::vector<TaskId> tasks;
  Eigen::VectorXd y;
  Eigen::VectorXd noise_vars;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
  int n_tasks() const { return static_cast<int>(noise_vars.size()); }

  static Dataset create(Eigen::MatrixXd X, std::vector<TaskId> tasks,
                        Eigen::VectorXd y, Eigen::VectorXd noise_vars);
};

/// Rows of one task, remapped to task id 0 with that task's noise variance.
/// Throws EmptyTask when the task has no rows.
Dataset task_subset(const Dataset& ds, TaskId t);

/// A query location: input point plus task.
struct Probe {
  InputPoint x;
  TaskId task = 0;
};

}  // namespace mtgpk
