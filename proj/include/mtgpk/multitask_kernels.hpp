#pragma once

#include <vector>

#include "mtgpk/base_kernels.hpp"
#include "mtgpk/kernel_spec.hpp"
#include "mtgpk/types.hpp"

namespace mtgpk {

/// Kernel matrix over the observations; with_noise marks that per-task noise
/// variances were added on the diagonal.
struct GramMatrix {
  Eigen::MatrixXd K;
  bool with_noise = false;
};

/// Evaluates a multitask kernel with per-point diagonal caches so Gram
/// assembly costs O(N^2) pair evaluations with O(N) diagonal recursion
/// passes. Immutable after construction; safe to share across threads.
class KernelEvaluator {
 public:
  explicit KernelEvaluator(const KernelSpec& spec);

  /// Per-point diagonal data: the diagonal recursion series for deep kernels,
  /// per-component first-layer moments otherwise.
  struct PointCache {
    std::vector<double> diag;
  };

  PointCache make_cache(const InputPoint& x) const;

  double eval(TaskId t1, const InputPoint& x1, const PointCache& c1, TaskId t2,
              const InputPoint& x2, const PointCache& c2) const;
  double eval(TaskId t1, const InputPoint& x1, TaskId t2,
              const InputPoint& x2) const;

  const KernelSpec& spec() const { return spec_; }
  int n_tasks() const { return n_tasks_; }

 private:
  void check_task(TaskId t) const;

  KernelSpec spec_;
  int n_tasks_ = 0;
};

/// One kernel value per variant; thin wrappers over KernelEvaluator.
double icm_value(const IcmSpec& spec, TaskId t1, const InputPoint& x1,
                 TaskId t2, const InputPoint& x2);
double deep_mt_value(const DeepMtSpec& spec, TaskId t1, const InputPoint& x1,
                     TaskId t2, const InputPoint& x2);
double lmc_value(const LmcSpec& spec, TaskId t1, const InputPoint& x1,
                 TaskId t2, const InputPoint& x2);
double cc_value(const CcSpec& spec, TaskId t1, const InputPoint& x1, TaskId t2,
                const InputPoint& x2);
double kernel_value(const KernelSpec& spec, TaskId t1, const InputPoint& x1,
                    TaskId t2, const InputPoint& x2);

/// N x N kernel matrix of the dataset; entry (i,j) is the kernel at
/// ((t_i,x_i),(t_j,x_j)), plus sigma^2_{t_i} on the diagonal when add_noise.
GramMatrix gram(const Dataset& ds, const KernelSpec& spec, bool add_noise);

/// Kernel matrix over arbitrary (x, task) probes, no noise.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec,
                              const std::vector<Probe>& probes);

}  // namespace mtgpk
