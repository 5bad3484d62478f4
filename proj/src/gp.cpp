#include "mtgpk/gp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

namespace mtgpk {

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd v = L.triangularView<Eigen::Lower>().solve(b);
  return L.transpose().triangularView<Eigen::Upper>().solve(v);
}

double CholeskyFactor::log_det() const {
  return 2.0 * L.diagonal().array().log().sum();
}

CholeskyFactor cholesky_with_jitter(const Eigen::MatrixXd& K) {
  if (!K.allFinite())
    raise(ErrorCode::NonFiniteValue, "Gram matrix has non-finite entries");
  const double mean_diag = K.diagonal().mean();
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() == Eigen::Success) return CholeskyFactor{llt.matrixL(), 0.0};
  for (double scale = 1e-10; scale <= 1.0001e-4; scale *= 10.0) {
    const double jitter = scale * mean_diag;
    llt.compute(K + jitter * Eigen::MatrixXd::Identity(K.rows(), K.cols()));
    if (llt.info() == Eigen::Success)
      return CholeskyFactor{llt.matrixL(), jitter};
  }
  raise(ErrorCode::NotPSDAfterJitter,
        "Gram matrix not positive definite after jitter up to 1e-4 * mean "
        "diagonal");
}

CholeskyFactor factorize(const GramMatrix& g) {
  return cholesky_with_jitter(g.K);
}

MtgpRegressor::MtgpRegressor(Dataset ds, KernelSpec spec)
    : ds_(std::move(ds)), spec_(std::move(spec)), eval_(spec_) {
  caches_.reserve(static_cast<size_t>(ds_.n()));
  for (Eigen::Index i = 0; i < ds_.n(); ++i)
    caches_.push_back(eval_.make_cache(ds_.X.row(i).transpose()));
  GramMatrix g = gram(ds_, spec_, /*add_noise=*/true);
  chol_ = factorize(g);
  alpha_ = chol_.solve(ds_.y);
  const double n = static_cast<double>(ds_.n());
  log_marginal_ = -0.5 * ds_.y.dot(alpha_) - 0.5 * chol_.log_det() -
                  0.5 * n * std::log(2.0 * std::numbers::pi);
}

Eigen::VectorXd MtgpRegressor::cross_covariances(const InputPoint& x,
                                                 TaskId t) const {
  auto cache = eval_.make_cache(x);
  Eigen::VectorXd k_star(ds_.n());
  for (Eigen::Index i = 0; i < ds_.n(); ++i)
    k_star[i] = eval_.eval(t, x, cache, ds_.tasks[static_cast<size_t>(i)],
                           ds_.X.row(i).transpose(),
                           caches_[static_cast<size_t>(i)]);
  return k_star;
}

PosteriorResult MtgpRegressor::predict(const InputPoint& x, TaskId t,
                                       bool include_noise) const {
  if (t < 0 || t >= eval_.n_tasks())
    raise(ErrorCode::TaskIndexOutOfRange, "task " + std::to_string(t));
  Eigen::VectorXd k_star = cross_covariances(x, t);
  double prior = eval_.eval(t, x, t, x);
  if (include_noise && t < ds_.n_tasks()) prior += ds_.noise_vars[t];
  Eigen::VectorXd v = chol_.L.triangularView<Eigen::Lower>().solve(k_star);
  double variance = prior - v.squaredNorm();
  if (variance < 0.0) {
    if (variance < -1e-10)
      raise(ErrorCode::NegativeVariance,
            "predictive variance " + std::to_string(variance), variance);
    variance = 0.0;
  }
  return PosteriorResult{k_star.dot(alpha_), variance, include_noise};
}

PosteriorResult predict(const Dataset& ds, const KernelSpec& spec,
                        const InputPoint& x, TaskId t, bool include_noise) {
  return MtgpRegressor(ds, spec).predict(x, t, include_noise);
}

Eigen::VectorXd predictive_mean_weights(const Dataset& ds,
                                        const KernelSpec& spec) {
  return MtgpRegressor(ds, spec).weights();
}

double log_marginal(const Dataset& ds, const KernelSpec& spec) {
  return MtgpRegressor(ds, spec).log_marginal();
}

std::vector<MtgpRegressor> per_task_baseline(
    const Dataset& ds, const std::vector<KernelSpec>& per_task_specs) {
  if (static_cast<int>(per_task_specs.size()) != ds.n_tasks())
    raise(ErrorCode::DimensionMismatch,
          "need one single-task kernel per task");
  std::vector<MtgpRegressor> models;
  models.reserve(per_task_specs.size());
  for (TaskId t = 0; t < ds.n_tasks(); ++t) {
    if (task_count(per_task_specs[static_cast<size_t>(t)]) != 1)
      raise(ErrorCode::InvalidArgument,
            "baseline kernels must be single-task");
    models.emplace_back(task_subset(ds, t),
                        per_task_specs[static_cast<size_t>(t)]);
  }
  return models;
}

}  // namespace mtgpk
