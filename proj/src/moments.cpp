#include "mtgpk/moments.hpp"

#include <cmath>

#include "mtgpk/errors.hpp"

namespace mtgpk {

MomentAccumulator::MomentAccumulator(Eigen::Index dim)
    : mean_(Eigen::VectorXd::Zero(dim)),
      comoment_(Eigen::MatrixXd::Zero(dim, dim)),
      m3_(Eigen::VectorXd::Zero(dim)),
      m4_(Eigen::VectorXd::Zero(dim)) {}

void MomentAccumulator::add(const Eigen::VectorXd& x) {
  if (x.size() != mean_.size())
    raise(ErrorCode::DimensionMismatch, "accumulator dimension mismatch");
  const double n1 = static_cast<double>(n_);
  ++n_;
  const double n = static_cast<double>(n_);
  const Eigen::VectorXd delta = x - mean_;
  const Eigen::VectorXd delta_n = delta / n;

  // Third/fourth central sums advance before the lower moments they read.
  const Eigen::ArrayXd d = delta.array();
  const Eigen::ArrayXd dn = delta_n.array();
  const Eigen::ArrayXd term1 = d * dn * n1;
  const Eigen::ArrayXd m2 = comoment_.diagonal().array();
  m4_.array() += term1 * dn.square() * (n * n - 3.0 * n + 3.0) +
                 6.0 * dn.square() * m2 - 4.0 * dn * m3_.array();
  m3_.array() += term1 * dn * (n - 2.0) - 3.0 * dn * m2;

  // Centered outer-product update; (x - mean_new) = delta * (n-1)/n keeps the
  // matrix symmetric.
  comoment_.noalias() += (n1 / n) * (delta * delta.transpose());
  mean_ += delta_n;
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  if (other.mean_.size() != mean_.size())
    raise(ErrorCode::DimensionMismatch, "accumulator dimension mismatch");
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double n = na + nb;
  const Eigen::VectorXd d = other.mean_ - mean_;
  const Eigen::ArrayXd da = d.array();
  const Eigen::ArrayXd m2a = comoment_.diagonal().array();
  const Eigen::ArrayXd m2b = other.comoment_.diagonal().array();

  m4_.array() += other.m4_.array() +
                 da.pow(4) * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                 6.0 * da.square() * (na * na * m2b + nb * nb * m2a) / (n * n) +
                 4.0 * da * (na * other.m3_.array() - nb * m3_.array()) / n;
  m3_.array() += other.m3_.array() +
                 da.cube() * na * nb * (na - nb) / (n * n) +
                 3.0 * da * (na * m2b - nb * m2a) / n;
  comoment_.noalias() +=
      other.comoment_ + (na * nb / n) * (d * d.transpose());
  mean_ += (nb / n) * d;
  n_ += other.n_;
}

Eigen::MatrixXd MomentAccumulator::covariance() const {
  if (n_ < 2) raise(ErrorCode::InvalidArgument, "covariance needs >= 2 samples");
  return comoment_ / static_cast<double>(n_ - 1);
}

Eigen::VectorXd MomentAccumulator::skewness() const {
  const double n = static_cast<double>(n_);
  Eigen::ArrayXd m2 = comoment_.diagonal().array() / n;
  return (m3_.array() / n / m2.pow(1.5).max(1e-300)).matrix();
}

Eigen::VectorXd MomentAccumulator::excess_kurtosis() const {
  const double n = static_cast<double>(n_);
  Eigen::ArrayXd m2 = comoment_.diagonal().array() / n;
  return (m4_.array() / n / m2.square().max(1e-300) - 3.0).matrix();
}

Eigen::VectorXd MomentAccumulator::mean_std_error() const {
  const double n = static_cast<double>(n_);
  return (comoment_.diagonal().array() / (n - 1.0) / n).sqrt().matrix();
}

}  // namespace mtgpk
