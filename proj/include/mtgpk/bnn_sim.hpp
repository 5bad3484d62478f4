#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mtgpk/kernel_spec.hpp"
#include "mtgpk/moments.hpp"
#include "mtgpk/types.hpp"

namespace mtgpk {

/// Finite-width counterparts of the kernel specs. Hidden-unit output weights
/// are drawn with covariance Omega / width (per unit, correlated across
/// tasks), which is exactly the scaling whose wide limit is the matching
/// kernel.
struct SingleLayerNet {
  int width = 1;
  BaseKernelSpec base;
  TaskCovariance task_cov;
  double bias_const = 0.0;  // output bias covariance = bias_const * Omega
};

struct DeepNet {
  std::vector<int> widths;  // one entry per hidden layer
  BaseKernelSpec base;
  std::vector<LayerParams> layers;  // widths.size() - 1 entries
  TaskCovariance task_cov;
  TaskCovariance bias_task_cov;
};

struct AdaptiveNet {
  int width = 1;  // shared by all bases
  std::vector<BaseKernelSpec> bases;
  std::vector<std::vector<Eigen::MatrixXd>> grid;  // KT x KT block covariance
};

using MtbnnSpec = std::variant<SingleLayerNet, DeepNet, AdaptiveNet>;

void validate_mtbnn(const MtbnnSpec& spec);
int mtbnn_task_count(const MtbnnSpec& spec);

/// The finite network whose infinite-width limit is the given kernel; width
/// is applied to every hidden layer.
MtbnnSpec finite_network(const KernelSpec& spec, int width);

/// The kernel this network converges to as widths grow.
KernelSpec limit_kernel(const MtbnnSpec& spec);

/// Explicit weight draw. Weight matrices store one hidden unit per column;
/// output_weights has one row per task (stacked over bases for adaptive
/// networks).
struct NetworkSample {
  MtbnnSpec spec;
  std::vector<Eigen::MatrixXd> input_weights;  // per basis, (d_eff x width)
  Eigen::VectorXd input_bias;                  // deep first layer only
  std::vector<Eigen::MatrixXd> hidden_weights; // deep W^l, (N_l x N_{l+1})
  std::vector<Eigen::VectorXd> hidden_biases;  // deep b^l
  Eigen::MatrixXd output_weights;              // (T x N_L) or (K*T x width)
  Eigen::VectorXd output_bias;                 // T (zero for adaptive)
};

/// input_dim is the raw input dimension (before any erf bias augmentation).
NetworkSample sample_network(const MtbnnSpec& spec, Eigen::Index input_dim,
                             std::uint64_t seed);

/// Exact forward pass returning all T task outputs.
Eigen::VectorXd forward(const NetworkSample& net, const InputPoint& x);

/// Joint prior moments of [f_{t_1}(x_1) ... f_{t_s}(x_s)] over n_draws
/// independent networks. Draw i uses the stream derived from (seed, i), and
/// draws accumulate in fixed chunks merged in index order, so the result is
/// identical for any worker count.
struct EmpiricalMoments {
  std::vector<Probe> points;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::VectorXd mean_std_error;
  Eigen::VectorXd skewness;
  Eigen::VectorXd excess_kurtosis;
  long n_draws = 0;
  std::uint64_t seed = 0;
};

EmpiricalMoments empirical_moments(const MtbnnSpec& spec,
                                   const std::vector<Probe>& points,
                                   long n_draws, std::uint64_t seed);

/// Chunked accumulators behind empirical_moments; exposed for resampling
/// standard errors.
std::vector<MomentAccumulator> empirical_moment_chunks(
    const MtbnnSpec& spec, const std::vector<Probe>& points, long n_draws,
    std::uint64_t seed);

/// Sweep over widths comparing the empirical covariance against the analytic
/// kernel matrix. The deviation standard error comes from a leave-one-chunk-
/// out jackknife. The monotonicity verdict allows one inversion, and only
/// counts an inversion against the pass when it exceeds 4x the combined
/// deviation standard error.
struct WidthDeviation {
  int width = 0;
  double rel_frobenius = 0.0;
  double max_abs = 0.0;
  double std_error = 0.0;
};

struct ConvergenceReport {
  std::vector<Probe> points;
  long n_draws = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd analytic;
  std::vector<WidthDeviation> widths;
  std::vector<Eigen::MatrixXd> empirical;
  bool monotone_checked = false;
  bool monotone_ok = false;
  std::string note;
};

ConvergenceReport convergence_study(const KernelSpec& spec,
                                    const std::vector<int>& widths,
                                    const std::vector<Probe>& points,
                                    long n_draws, std::uint64_t seed);

/// One zero-mean multivariate normal draw with the kernel matrix of the
/// probes as covariance (jitter policy applies).
Eigen::VectorXd sample_gp_prior(const KernelSpec& spec,
                                const std::vector<Probe>& points,
                                std::uint64_t seed);

}  // namespace mtgpk
