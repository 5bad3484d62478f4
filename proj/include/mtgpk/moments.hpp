#pragma once

#include <Eigen/Core>

namespace mtgpk {

/// One-pass accumulator for the mean, comoment matrix, and per-coordinate
/// third/fourth central moments of a vector stream. Accumulators merge
/// exactly (pairwise update formulas), so chunked parallel accumulation
/// reproduces the serial result when chunks merge in index order.
class MomentAccumulator {
 public:
  MomentAccumulator() = default;
  explicit MomentAccumulator(Eigen::Index dim);

  void add(const Eigen::VectorXd& x);
  void merge(const MomentAccumulator& other);

  long long count() const { return n_; }
  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean_vector() const { return mean_; }

  /// Unbiased sample covariance (n-1 denominator); requires n >= 2.
  Eigen::MatrixXd covariance() const;

  /// Per-coordinate sample skewness and excess kurtosis.
  Eigen::VectorXd skewness() const;
  Eigen::VectorXd excess_kurtosis() const;

  /// Standard error of each mean entry.
  Eigen::VectorXd mean_std_error() const;

 private:
  long long n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd comoment_;  // sum of centered outer products
  Eigen::VectorXd m3_, m4_;   // central sums per coordinate
};

}  // namespace mtgpk
