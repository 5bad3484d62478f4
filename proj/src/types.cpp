#include "mtgpk/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>

namespace mtgpk {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Erf:
      return "erf";
    case Activation::Relu:
      return "relu";
    case Activation::Linear:
      return "linear";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "erf") return Activation::Erf;
  if (name == "relu") return Activation::Relu;
  if (name == "linear" || name == "identity") return Activation::Linear;
  raise(ErrorCode::ConfigError, "unknown activation '" + name + "'");
}

void validate_base(const BaseKernelSpec& base) {
  if (base.sigma_u.size() < 1)
    raise(ErrorCode::InvalidArgument, "sigma_u must have at least one entry");
  for (Eigen::Index i = 0; i < base.sigma_u.size(); ++i) {
    double v = base.sigma_u[i];
    if (!std::isfinite(v) || v <= 0.0)
      raise(ErrorCode::InvalidArgument, "sigma_u entries must be finite and > 0");
  }
  if (!std::isfinite(base.sigma_b2) || base.sigma_b2 < 0.0)
    raise(ErrorCode::InvalidArgument, "sigma_b2 must be finite and >= 0");
  if (!std::isfinite(base.omega_v2) || base.omega_v2 <= 0.0)
    raise(ErrorCode::InvalidArgument, "omega_v2 must be finite and > 0");
  if (!std::isfinite(base.bias_const) || base.bias_const < 0.0)
    raise(ErrorCode::InvalidArgument, "bias_const must be finite and >= 0");
  if (!std::isfinite(base.input_bias_var) || base.input_bias_var < 0.0)
    raise(ErrorCode::InvalidArgument, "input_bias_var must be finite and >= 0");
}

Eigen::VectorXd sigma_u_diag(const BaseKernelSpec& base, Eigen::Index dim) {
  if (base.sigma_u.size() == 1)
    return Eigen::VectorXd::Constant(dim, base.sigma_u[0]);
  if (base.sigma_u.size() != dim)
    raise(ErrorCode::DimensionMismatch,
          "sigma_u has " + std::to_string(base.sigma_u.size()) +
              " entries but inputs have dimension " + std::to_string(dim));
  return base.sigma_u;
}

TaskCovariance TaskCovariance::from_factor(const Eigen::MatrixXd& lower) {
  if (lower.rows() != lower.cols() || lower.rows() < 1)
    raise(ErrorCode::InvalidArgument, "task covariance factor must be square");
  if (!lower.allFinite())
    raise(ErrorCode::NonFiniteValue, "task covariance factor has non-finite entries");
  TaskCovariance tc;
  tc.factor_ = lower.triangularView<Eigen::Lower>();
  tc.omega_ = tc.factor_ * tc.factor_.transpose();
  return tc;
}

TaskCovariance TaskCovariance::from_matrix(const Eigen::MatrixXd& omega) {
  validate_task_cov(omega);
  return from_factor(psd_lower_factor(omega));
}

TaskCovariance TaskCovariance::identity(int n_tasks) {
  return from_factor(Eigen::MatrixXd::Identity(n_tasks, n_tasks));
}

TaskCovariance TaskCovariance::diagonal(const Eigen::VectorXd& variances) {
  return from_factor(variances.cwiseSqrt().asDiagonal().toDenseMatrix());
}

void TaskCovariance::set_factor(const Eigen::MatrixXd& lower) {
  *this = from_factor(lower);
}

void validate_task_cov(const Eigen::MatrixXd& omega) {
  if (omega.rows() != omega.cols() || omega.rows() < 1)
    raise(ErrorCode::InvalidArgument, "task covariance must be square");
  if (!omega.allFinite())
    raise(ErrorCode::NonFiniteValue, "task covariance has non-finite entries");
  double asym = (omega - omega.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12)
    raise(ErrorCode::NotSymmetric,
          "task covariance asymmetric by " + std::to_string(asym), asym);
  for (Eigen::Index t = 0; t < omega.rows(); ++t)
    if (omega(t, t) <= 0.0)
      raise(ErrorCode::NonPositiveDiagonal,
            "task variance for task " + std::to_string(t) + " is not positive",
            omega(t, t));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega,
                                                    Eigen::EigenvaluesOnly);
  double min_eig = es.eigenvalues().minCoeff();
  double scale = omega.cwiseAbs().maxCoeff();
  if (min_eig < -1e-10 * scale)
    raise(ErrorCode::NotPSD,
          "task covariance has negative eigenvalue " + std::to_string(min_eig),
          min_eig);
}

void validate_task_cov(const TaskCovariance& tc) {
  validate_task_cov(tc.factor() * tc.factor().transpose());
}

void validate_psd(const Eigen::MatrixXd& m, const std::string& what) {
  if (m.rows() != m.cols() || m.rows() < 1)
    raise(ErrorCode::InvalidArgument, what + " must be square");
  if (!m.allFinite())
    raise(ErrorCode::NonFiniteValue, what + " has non-finite entries");
  double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (asym > 1e-10 * scale)
    raise(ErrorCode::NotSymmetric, what + " asymmetric by " + std::to_string(asym),
          asym);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -1e-10 * m.cwiseAbs().maxCoeff() && min_eig < -1e-300)
    raise(ErrorCode::NotPSD,
          what + " has negative eigenvalue " + std::to_string(min_eig), min_eig);
}

Eigen::MatrixXd psd_lower_factor(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  // Semidefinite case: pivoted LDL^T with negative pivots clamped to zero,
  // then QR of the transposed square root restores lower-triangular shape.
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd half = ldlt.transpositionsP().transpose() *
                         (Eigen::MatrixXd(ldlt.matrixL()) * d.asDiagonal());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(half.transpose());
  Eigen::MatrixXd r = qr.matrixQR()
                          .topRows(m.rows())
                          .triangularView<Eigen::Upper>();
  Eigen::MatrixXd lower = r.transpose();
  // Fix signs so diagonal entries are non-negative (QR leaves them arbitrary).
  for (Eigen::Index j = 0; j < lower.cols(); ++j)
    if (lower(j, j) < 0.0) lower.col(j) = -lower.col(j);
  return lower;
}

Dataset Dataset::create(Eigen::MatrixXd X, std::vector<TaskId> tasks,
                        Eigen::VectorXd y, Eigen::VectorXd noise_vars) {
  const Eigen::Index n = X.rows();
  if (n < 1) raise(ErrorCode::InvalidArgument, "dataset needs at least one row");
  if (X.cols() < 1) raise(ErrorCode::InvalidArgument, "inputs need dimension >= 1");
  if (static_cast<Eigen::Index>(tasks.size()) != n || y.size() != n)
    raise(ErrorCode::DimensionMismatch, "X, tasks and y lengths disagree");
  if (!X.allFinite() || !y.allFinite())
    raise(ErrorCode::NonFiniteValue, "dataset contains non-finite values");
  TaskId max_task = 0;
  for (TaskId t : tasks) {
    if (t < 0) raise(ErrorCode::InvalidArgument, "task indices must be >= 0");
    max_task = std::max(max_task, t);
  }
  const int T = max_task + 1;
  if (noise_vars.size() == 0) noise_vars = Eigen::VectorXd::Zero(T);
  if (noise_vars.size() != T)
    raise(ErrorCode::DimensionMismatch,
          "noise_vars has " + std::to_string(noise_vars.size()) +
              " entries but data has " + std::to_string(T) + " tasks");
  for (Eigen::Index t = 0; t < noise_vars.size(); ++t)
    if (!std::isfinite(noise_vars[t]) || noise_vars[t] < 0.0)
      raise(ErrorCode::InvalidArgument, "noise variances must be finite and >= 0");
  Dataset ds;
  ds.X = std::move(X);
  ds.tasks = std::move(tasks);
  ds.y = std::move(y);
  ds.noise_vars = std::move(noise_vars);
  return ds;
}

Dataset task_subset(const Dataset& ds, TaskId t) {
  if (t < 0 || t >= ds.n_tasks())
    raise(ErrorCode::TaskIndexOutOfRange, "task " + std::to_string(t));
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    if (ds.tasks[static_cast<size_t>(i)] == t) rows.push_back(i);
  if (rows.empty())
    raise(ErrorCode::EmptyTask, "task " + std::to_string(t) + " has no rows");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), ds.dim());
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = ds.X.row(rows[i]);
    y[static_cast<Eigen::Index>(i)] = ds.y[rows[i]];
  }
  Eigen::VectorXd noise(1);
  noise[0] = ds.noise_vars[t];
  return Dataset::create(std::move(X),
                         std::vector<TaskId>(rows.size(), 0), std::move(y),
                         std::move(noise));
}

}  // namespace mtgpk
