#include "mtgpk/base_kernels.hpp"

#include <cassert>
#include <cmath>
#include <numbers>
#include <vector>

#include "mtgpk/parallel.hpp"
#include "mtgpk/rng.hpp"

namespace mtgpk {

namespace {

constexpr double kPi = std::numbers::pi;

double clamp_unit(double v) {
  assert(std::abs(v) <= 1.0 + 1e-6 && "moment correlation overshoots 1");
  return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
}

double weighted_dot(const InputPoint& x1, const InputPoint& x2,
                    const Eigen::VectorXd& w) {
  return x1.cwiseProduct(w).dot(x2);
}

}  // namespace

void check_moments(const KernelMoments& m) {
  if (!std::isfinite(m.k11) || !std::isfinite(m.k12) || !std::isfinite(m.k22))
    raise(ErrorCode::NonFiniteValue, "kernel moments are non-finite");
  if (m.k11 < 0.0 || m.k22 < 0.0)
    raise(ErrorCode::InvalidArgument, "diagonal moments must be >= 0");
  if (std::abs(m.k12) > std::sqrt(m.k11 * m.k22) + 1e-9)
    raise(ErrorCode::InvalidArgument,
          "moments violate the Cauchy-Schwarz bound");
}

KernelMoments preactivation_moments(const InputPoint& x1, const InputPoint& x2,
                                    const BaseKernelSpec& base) {
  if (x1.size() != x2.size())
    raise(ErrorCode::DimensionMismatch, "input points differ in dimension");
  Eigen::VectorXd w = sigma_u_diag(base, x1.size());
  double aug = has_input_augmentation(base) ? base.input_bias_var : 0.0;
  KernelMoments m;
  m.k11 = base.omega_v2 * (weighted_dot(x1, x1, w) + aug);
  m.k12 = base.omega_v2 * (weighted_dot(x1, x2, w) + aug);
  m.k22 = base.omega_v2 * (weighted_dot(x2, x2, w) + aug);
  return m;
}

double linear_base_kernel(const InputPoint& x1, const InputPoint& x2,
                          const BaseKernelSpec& base) {
  if (x1.size() != x2.size())
    raise(ErrorCode::DimensionMismatch, "input points differ in dimension");
  Eigen::VectorXd w = sigma_u_diag(base, x1.size());
  double aug = has_input_augmentation(base) ? base.input_bias_var : 0.0;
  return base.sigma_b2 + base.omega_v2 * (weighted_dot(x1, x2, w) + aug);
}

KernelMoments base_case_moments(const InputPoint& x1, const InputPoint& x2,
                                const BaseKernelSpec& base) {
  KernelMoments m = preactivation_moments(x1, x2, base);
  m.k11 += base.sigma_b2;
  m.k12 += base.sigma_b2;
  m.k22 += base.sigma_b2;
  return m;
}

double erf_product_mean(const KernelMoments& m) {
  double denom = std::sqrt((1.0 + 2.0 * m.k11) * (1.0 + 2.0 * m.k22));
  return (2.0 / kPi) * std::asin(clamp_unit(2.0 * m.k12 / denom));
}

double relu_product_mean(const KernelMoments& m) {
  double prod = m.k11 * m.k22;
  if (prod <= 0.0) return 0.0;
  double norm = std::sqrt(prod);
  double theta = std::acos(clamp_unit(m.k12 / norm));
  return (0.5 / kPi) * norm * (std::sin(theta) + (kPi - theta) * std::cos(theta));
}

double identity_product_mean(const KernelMoments& m) { return m.k12; }

double product_mean(Activation a, const KernelMoments& m) {
  switch (a) {
    case Activation::Erf:
      return erf_product_mean(m);
    case Activation::Relu:
      return relu_product_mean(m);
    case Activation::Linear:
      return identity_product_mean(m);
  }
  return 0.0;
}

double activation_mean(Activation a, double k11) {
  if (a == Activation::Relu) return std::sqrt(std::max(k11, 0.0) / (2.0 * kPi));
  return 0.0;
}

KernelMoments deep_moments(const InputPoint& x1, const InputPoint& x2,
                           const BaseKernelSpec& base,
                           std::span<const LayerParams> layers, int levels) {
  if (levels < 0) raise(ErrorCode::InvalidArgument, "levels must be >= 0");
  if (levels > static_cast<int>(layers.size()))
    raise(ErrorCode::InvalidArgument,
          "deep recursion needs layer parameters for every level");
  KernelMoments m = base_case_moments(x1, x2, base);
  for (int l = 0; l < levels; ++l) {
    const LayerParams& p = layers[static_cast<size_t>(l)];
    KernelMoments next;
    next.k11 = p.sigma_b2 +
               p.omega_v2 * product_mean(base.activation,
                                         KernelMoments{m.k11, m.k11, m.k11});
    next.k22 = p.sigma_b2 +
               p.omega_v2 * product_mean(base.activation,
                                         KernelMoments{m.k22, m.k22, m.k22});
    next.k12 = p.sigma_b2 + p.omega_v2 * product_mean(base.activation, m);
    m = next;
  }
  return m;
}

double deep_cross_moment(double k12_base, std::span<const double> diag1,
                         std::span<const double> diag2,
                         const BaseKernelSpec& base,
                         std::span<const LayerParams> layers, int levels) {
  double k12 = k12_base;
  for (int l = 0; l < levels; ++l) {
    const LayerParams& p = layers[static_cast<size_t>(l)];
    KernelMoments m{diag1[static_cast<size_t>(l)], k12,
                    diag2[static_cast<size_t>(l)]};
    k12 = p.sigma_b2 + p.omega_v2 * product_mean(base.activation, m);
  }
  return k12;
}

void deep_diagonal(const InputPoint& x, const BaseKernelSpec& base,
                   std::span<const LayerParams> layers, int levels,
                   std::vector<double>& out) {
  out.resize(static_cast<size_t>(levels) + 1);
  double k = linear_base_kernel(x, x, base);
  out[0] = k;
  for (int l = 0; l < levels; ++l) {
    const LayerParams& p = layers[static_cast<size_t>(l)];
    k = p.sigma_b2 +
        p.omega_v2 * product_mean(base.activation, KernelMoments{k, k, k});
    out[static_cast<size_t>(l) + 1] = k;
  }
}

McEstimate mc_product_mean(const InputPoint& x1, const InputPoint& x2,
                           Activation activation,
                           const Eigen::VectorXd& sigma_u_diag, long n_samples,
                           std::uint64_t seed) {
  if (n_samples < 10000)
    raise(ErrorCode::InvalidArgument, "mc_product_mean needs >= 1e4 samples");
  if (x1.size() != x2.size() || x1.size() != sigma_u_diag.size())
    raise(ErrorCode::DimensionMismatch,
          "inputs and sigma_u disagree on dimension");

  const Eigen::Index d = x1.size();
  const Eigen::VectorXd scale = sigma_u_diag.cwiseSqrt();
  // Pre-scaled projections: u = scale .* z with z standard normal, so
  // x' u = (scale .* x)' z.
  const Eigen::VectorXd a = scale.cwiseProduct(x1);
  const Eigen::VectorXd b = scale.cwiseProduct(x2);

  constexpr long kChunk = 65536;
  const long n_chunks = (n_samples + kChunk - 1) / kChunk;
  std::vector<double> sums(static_cast<size_t>(n_chunks), 0.0);
  std::vector<double> sq_sums(static_cast<size_t>(n_chunks), 0.0);

  parallel_chunks(n_chunks, [&](long c) {
    Rng rng(seed, static_cast<std::uint64_t>(c));
    const long lo = c * kChunk;
    const long hi = std::min(n_samples, lo + kChunk);
    constexpr Eigen::Index kBatch = 256;
    Eigen::MatrixXd z(d, kBatch);
    double sum = 0.0, sq = 0.0;
    for (long i = lo; i < hi;) {
      const Eigen::Index batch =
          static_cast<Eigen::Index>(std::min<long>(kBatch, hi - i));
      rng.fill_normal(z.data(), d * batch);
      for (Eigen::Index j = 0; j < batch; ++j) {
        double z1 = a.dot(z.col(j));
        double z2 = b.dot(z.col(j));
        double h1, h2;
        switch (activation) {
          case Activation::Erf:
            h1 = std::erf(z1);
            h2 = std::erf(z2);
            break;
          case Activation::Relu:
            h1 = z1 > 0.0 ? z1 : 0.0;
            h2 = z2 > 0.0 ? z2 : 0.0;
            break;
          case Activation::Linear:
          default:
            h1 = z1;
            h2 = z2;
            break;
        }
        double p = h1 * h2;
        sum += p;
        sq += p * p;
      }
      i += batch;
    }
    sums[static_cast<size_t>(c)] = sum;
    sq_sums[static_cast<size_t>(c)] = sq;
  });

  double sum = 0.0, sq = 0.0;
  for (long c = 0; c < n_chunks; ++c) {
    sum += sums[static_cast<size_t>(c)];
    sq += sq_sums[static_cast<size_t>(c)];
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
  return McEstimate{mean, std::sqrt(var / n)};
}

}  // namespace mtgpk
