#include "mtgpk/multitask_kernels.hpp"

#include <cmath>

#include "mtgpk/parallel.hpp"

namespace mtgpk {

KernelEvaluator::KernelEvaluator(const KernelSpec& spec) : spec_(spec) {
  validate_kernel_spec(spec_);
  n_tasks_ = task_count(spec_);
}

void KernelEvaluator::check_task(TaskId t) const {
  if (t < 0 || t >= n_tasks_)
    raise(ErrorCode::TaskIndexOutOfRange,
          "task " + std::to_string(t) + " with " + std::to_string(n_tasks_) +
              " tasks");
}

KernelEvaluator::PointCache KernelEvaluator::make_cache(
    const InputPoint& x) const {
  PointCache c;
  if (const auto* icm = std::get_if<IcmSpec>(&spec_)) {
    c.diag.push_back(preactivation_moments(x, x, icm->base).k11);
  } else if (const auto* deep = std::get_if<DeepMtSpec>(&spec_)) {
    deep_diagonal(x, deep->base, deep->layers, deep->depth - 1, c.diag);
  } else if (const auto* lmc = std::get_if<LmcSpec>(&spec_)) {
    for (const auto& comp : lmc->components)
      c.diag.push_back(preactivation_moments(x, x, comp.base).k11);
  } else {
    const auto& cc = std::get<CcSpec>(spec_);
    for (const auto& base : cc.bases)
      c.diag.push_back(preactivation_moments(x, x, base).k11);
  }
  return c;
}

double KernelEvaluator::eval(TaskId t1, const InputPoint& x1,
                             const PointCache& c1, TaskId t2,
                             const InputPoint& x2,
                             const PointCache& c2) const {
  check_task(t1);
  check_task(t2);

  if (const auto* icm = std::get_if<IcmSpec>(&spec_)) {
    KernelMoments m{c1.diag[0], preactivation_moments(x1, x2, icm->base).k12,
                    c2.diag[0]};
    return icm->task_cov(t1, t2) *
           (icm->base.bias_const + product_mean(icm->base.activation, m));
  }

  if (const auto* deep = std::get_if<DeepMtSpec>(&spec_)) {
    double k12_base = linear_base_kernel(x1, x2, deep->base);
    double k12 = deep_cross_moment(k12_base, c1.diag, c2.diag, deep->base,
                                   deep->layers, deep->depth - 1);
    KernelMoments m{c1.diag[static_cast<size_t>(deep->depth - 1)], k12,
                    c2.diag[static_cast<size_t>(deep->depth - 1)]};
    return deep->bias_task_cov(t1, t2) +
           deep->task_cov(t1, t2) * product_mean(deep->base.activation, m);
  }

  if (const auto* lmc = std::get_if<LmcSpec>(&spec_)) {
    double sum = 0.0;
    for (size_t m = 0; m < lmc->components.size(); ++m) {
      const auto& comp = lmc->components[m];
      KernelMoments mom{c1.diag[m], preactivation_moments(x1, x2, comp.base).k12,
                        c2.diag[m]};
      sum += comp.task_cov(t1, t2) * product_mean(comp.base.activation, mom);
    }
    return sum;
  }

  const auto& cc = std::get<CcSpec>(spec_);
  const size_t K = cc.bases.size();
  double sum = 0.0;
  for (size_t m = 0; m < K; ++m) {
    KernelMoments mom{c1.diag[m],
                      preactivation_moments(x1, x2, cc.bases[m]).k12,
                      c2.diag[m]};
    sum += cc.grid[m][m](t1, t2) * product_mean(cc.bases[m].activation, mom);
    // Cross-basis terms: the two feature maps use independent input weights,
    // so the expectation factorizes into the product of the means.
    for (size_t n = 0; n < K; ++n) {
      if (n == m) continue;
      double w = cc.grid[m][n](t1, t2);
      if (w == 0.0) continue;
      sum += w * activation_mean(cc.bases[m].activation, c1.diag[m]) *
             activation_mean(cc.bases[n].activation, c2.diag[n]);
    }
  }
  return sum;
}

double KernelEvaluator::eval(TaskId t1, const InputPoint& x1, TaskId t2,
                             const InputPoint& x2) const {
  return eval(t1, x1, make_cache(x1), t2, x2, make_cache(x2));
}

double icm_value(const IcmSpec& spec, TaskId t1, const InputPoint& x1,
                 TaskId t2, const InputPoint& x2) {
  return KernelEvaluator(KernelSpec{spec}).eval(t1, x1, t2, x2);
}

double deep_mt_value(const DeepMtSpec& spec, TaskId t1, const InputPoint& x1,
                     TaskId t2, const InputPoint& x2) {
  return KernelEvaluator(KernelSpec{spec}).eval(t1, x1, t2, x2);
}

double lmc_value(const LmcSpec& spec, TaskId t1, const InputPoint& x1,
                 TaskId t2, const InputPoint& x2) {
  return KernelEvaluator(KernelSpec{spec}).eval(t1, x1, t2, x2);
}

double cc_value(const CcSpec& spec, TaskId t1, const InputPoint& x1, TaskId t2,
                const InputPoint& x2) {
  return KernelEvaluator(KernelSpec{spec}).eval(t1, x1, t2, x2);
}

double kernel_value(const KernelSpec& spec, TaskId t1, const InputPoint& x1,
                    TaskId t2, const InputPoint& x2) {
  return KernelEvaluator(spec).eval(t1, x1, t2, x2);
}

GramMatrix gram(const Dataset& ds, const KernelSpec& spec, bool add_noise) {
  KernelEvaluator eval(spec);
  if (eval.n_tasks() < ds.n_tasks())
    raise(ErrorCode::TaskIndexOutOfRange,
          "kernel covers " + std::to_string(eval.n_tasks()) +
              " tasks but data has " + std::to_string(ds.n_tasks()));
  const Eigen::Index n = ds.n();

  std::vector<KernelEvaluator::PointCache> caches;
  caches.reserve(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    caches.push_back(eval.make_cache(ds.X.row(i).transpose()));

  GramMatrix g;
  g.K.resize(n, n);
  g.with_noise = add_noise;
  // Upper triangle by rows; entries land in disjoint slots so the parallel
  // fill is deterministic.
  parallel_chunks(n, [&](long row) {
    const Eigen::Index i = static_cast<Eigen::Index>(row);
    const InputPoint xi = ds.X.row(i).transpose();
    for (Eigen::Index j = i; j < n; ++j) {
      g.K(i, j) = eval.eval(ds.tasks[static_cast<size_t>(i)], xi,
                            caches[static_cast<size_t>(i)],
                            ds.tasks[static_cast<size_t>(j)],
                            ds.X.row(j).transpose(),
                            caches[static_cast<size_t>(j)]);
    }
  });
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) g.K(i, j) = g.K(j, i);
  if (add_noise)
    for (Eigen::Index i = 0; i < n; ++i)
      g.K(i, i) += ds.noise_vars[ds.tasks[static_cast<size_t>(i)]];
  return g;
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec,
                              const std::vector<Probe>& probes) {
  KernelEvaluator eval(spec);
  const Eigen::Index s = static_cast<Eigen::Index>(probes.size());
  std::vector<KernelEvaluator::PointCache> caches;
  caches.reserve(probes.size());
  for (const auto& p : probes) caches.push_back(eval.make_cache(p.x));
  Eigen::MatrixXd K(s, s);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = i; j < s; ++j) {
      const auto& a = probes[static_cast<size_t>(i)];
      const auto& b = probes[static_cast<size_t>(j)];
      K(i, j) = eval.eval(a.task, a.x, caches[static_cast<size_t>(i)], b.task,
                          b.x, caches[static_cast<size_t>(j)]);
      K(j, i) = K(i, j);
    }
  return K;
}

}  // namespace mtgpk
