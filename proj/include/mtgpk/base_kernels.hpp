#pragma once

#include <cstdint>
#include <span>

#include "mtgpk/kernel_spec.hpp"
#include "mtgpk/types.hpp"

namespace mtgpk {

/// Second moments of a pair of Gaussian pre-activations:
/// k11 = E[z1^2], k12 = E[z1 z2], k22 = E[z2^2].
struct KernelMoments {
  double k11 = 0.0;
  double k12 = 0.0;
  double k22 = 0.0;
};

/// Throws unless k11,k22 >= 0 and |k12| <= sqrt(k11 k22) + slack.
void check_moments(const KernelMoments& m);

/// First-layer pre-activation moments of a single-hidden-layer feature map:
/// m_ij = omega_v2 * (x_i' Sigma_u x_j + input_bias_var for erf features).
/// The linear base kernel's sigma_b2 does not enter here; output-layer bias
/// is handled by the task-level bias term instead.
KernelMoments preactivation_moments(const InputPoint& x1, const InputPoint& x2,
                                    const BaseKernelSpec& base);

/// Base case of the deep recursion:
/// sigma_b2 + omega_v2 * (x1' Sigma_u x2 [+ input_bias_var for erf features]).
double linear_base_kernel(const InputPoint& x1, const InputPoint& x2,
                          const BaseKernelSpec& base);
KernelMoments base_case_moments(const InputPoint& x1, const InputPoint& x2,
                                const BaseKernelSpec& base);

/// E[h(z1) h(z2)] for (z1,z2) zero-mean Gaussian with the given moments.
/// erf: the arcsine form (2/pi) asin(2 k12 / sqrt((1+2 k11)(1+2 k22))).
/// relu: the arc-cosine form (1/2pi) sqrt(k11 k22) (sin t + (pi-t) cos t).
/// linear: k12.
/// asin/acos arguments are clamped to [-1, 1]; round-off overshoot beyond
/// 1e-6 trips an assertion in debug builds.
double erf_product_mean(const KernelMoments& m);
double relu_product_mean(const KernelMoments& m);
double identity_product_mean(const KernelMoments& m);
double product_mean(Activation a, const KernelMoments& m);

/// E[h(z)] for z ~ N(0, k11); zero for odd activations, sqrt(k11 / 2pi) for
/// relu. Needed by cross-basis terms where the two feature maps are
/// independent.
double activation_mean(Activation a, double k11);

/// Moments after `levels` applications of the layer recursion
/// K^l = sigma_b2[l] + omega_v2[l] * F_h(K^{l-1}); levels = 0 returns the
/// base-case moments. All three moments advance jointly in one pass.
KernelMoments deep_moments(const InputPoint& x1, const InputPoint& x2,
                           const BaseKernelSpec& base,
                           std::span<const LayerParams> layers, int levels);

/// Same recursion given precomputed diagonal series K^l(x1,x1), K^l(x2,x2)
/// for l = 0..levels-1 and the base-case cross moment; used by Gram assembly
/// so each point's diagonal recursion runs once, not once per pair.
double deep_cross_moment(double k12_base, std::span<const double> diag1,
                         std::span<const double> diag2,
                         const BaseKernelSpec& base,
                         std::span<const LayerParams> layers, int levels);

/// Diagonal series K^l(x,x) for l = 0..levels.
void deep_diagonal(const InputPoint& x, const BaseKernelSpec& base,
                   std::span<const LayerParams> layers, int levels,
                   std::vector<double>& out);

/// Monte Carlo estimate of E[h(x1'u) h(x2'u)], u ~ N(0, diag(sigma_u_diag)),
/// with its standard error. Deterministic given the seed; samples run in
/// fixed-size chunks with per-chunk derived streams, so the result does not
/// depend on the worker count.
struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};
McEstimate mc_product_mean(const InputPoint& x1, const InputPoint& x2,
                           Activation activation,
                           const Eigen::VectorXd& sigma_u_diag, long n_samples,
                           std::uint64_t seed);

}  // namespace mtgpk
