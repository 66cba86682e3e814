#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "qbvi/random.hpp"

namespace qbvi {

enum class CovStructure { Full, Diagonal };

// Second-moment blocks (precision, lambda2, m2, score w.r.t. m2, ...) share one
// storage convention: a d x d matrix for Full, a d x 1 column for Diagonal.

/// Gaussian variational posterior N(mu, S) stored through its precision S^-1.
///
/// The covariance and both Cholesky factors are computed once at construction,
/// which is also where the SPD / positivity invariant is enforced. Instances are
/// immutable and can be shared across threads.
class GaussianVariational {
 public:
  /// Throws NotSpdError if `precision` is not symmetric positive definite.
  static GaussianVariational full(Eigen::VectorXd mean, Eigen::MatrixXd precision);
  /// Throws NotPositiveError if any precision entry is not strictly positive.
  static GaussianVariational diagonal(Eigen::VectorXd mean, Eigen::VectorXd precision);
  /// Convenience: N(mean, I / tau) in the requested structure.
  static GaussianVariational isotropic(Eigen::VectorXd mean, double tau, CovStructure structure);

  CovStructure structure() const noexcept { return structure_; }
  bool is_full() const noexcept { return structure_ == CovStructure::Full; }
  Eigen::Index dim() const noexcept { return mean_.size(); }

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  /// d x d (Full) or d x 1 (Diagonal).
  const Eigen::MatrixXd& precision() const noexcept { return precision_; }
  /// d x d (Full) or d x 1 (Diagonal).
  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }

  Eigen::MatrixXd precision_dense() const;
  Eigen::MatrixXd covariance_dense() const;

  /// S x, via the precision Cholesky factor.
  Eigen::VectorXd apply_covariance(const Eigen::VectorXd& x) const;
  /// S^-1 x.
  Eigen::VectorXd apply_precision(const Eigen::VectorXd& x) const;
  /// log |S^-1|.
  double log_det_precision() const noexcept { return log_det_precision_; }
  /// Lower-triangular L with L L^T = S (dense d x d; diagonal in Diagonal mode).
  const Eigen::MatrixXd& covariance_factor() const noexcept { return cov_factor_; }

 private:
  GaussianVariational() = default;

  CovStructure structure_ = CovStructure::Full;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd precision_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd cov_factor_;
  Eigen::LLT<Eigen::MatrixXd> precision_llt_;
  double log_det_precision_ = 0.0;
};

struct NaturalParams {
  Eigen::VectorXd lambda1;  // S^-1 mu
  Eigen::MatrixXd lambda2;  // -1/2 S^-1
};

struct ExpectationParams {
  Eigen::VectorXd m1;  // mu
  Eigen::MatrixXd m2;  // S + mu mu^T (Diagonal: s + mu*mu)
};

/// Gradients of log q(theta) with respect to the expectation parameters.
struct ScoreGrad {
  Eigen::VectorXd g_m1;
  Eigen::MatrixXd g_m2;
};

NaturalParams common_to_natural(const GaussianVariational& q);
/// Throws NotSpdError (Full) / NotPositiveError (Diagonal) when -2 lambda2 is invalid.
GaussianVariational natural_to_common(const NaturalParams& lambda, CovStructure structure);

ExpectationParams expectation_params(const GaussianVariational& q);

/// n x d matrix of draws theta = mu + L z.
Eigen::MatrixXd sample(const GaussianVariational& q, Eigen::Index n, Rng& rng);

double log_density(const GaussianVariational& q, const Eigen::VectorXd& theta);

/// v = S^-1 (theta - mu).
Eigen::VectorXd whitened_residual(const GaussianVariational& q, const Eigen::VectorXd& theta);

ScoreGrad score_m(const GaussianVariational& q, const Eigen::VectorXd& theta);

/// (A + A^T) / 2.
inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

}  // namespace qbvi
