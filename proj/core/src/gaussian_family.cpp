#include "qbvi/gaussian_family.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qbvi/error.hpp"

namespace qbvi {
namespace {

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw DimMismatchError(std::string(what) + ": dimension " + std::to_string(a) + " vs " +
                           std::to_string(b));
  }
}

}  // namespace

GaussianVariational GaussianVariational::full(Eigen::VectorXd mean, Eigen::MatrixXd precision) {
  const Eigen::Index d = mean.size();
  if (d < 1) throw DimMismatchError("GaussianVariational: dimension must be at least 1");
  require_same_dim(precision.rows(), d, "GaussianVariational::full rows");
  require_same_dim(precision.cols(), d, "GaussianVariational::full cols");
  if (!mean.allFinite() || !precision.allFinite()) {
    throw NotSpdError("GaussianVariational::full: non-finite parameters");
  }

  GaussianVariational q;
  q.structure_ = CovStructure::Full;
  q.mean_ = std::move(mean);
  q.precision_ = symmetrize(precision);
  q.precision_llt_.compute(q.precision_);
  if (q.precision_llt_.info() != Eigen::Success) {
    throw NotSpdError("GaussianVariational::full: precision is not positive definite");
  }
  const Eigen::MatrixXd& l = q.precision_llt_.matrixLLT();
  q.log_det_precision_ = 2.0 * l.diagonal().array().log().sum();

  q.covariance_ = symmetrize(q.precision_llt_.solve(Eigen::MatrixXd::Identity(d, d)));
  Eigen::LLT<Eigen::MatrixXd> cov_llt(q.covariance_);
  if (cov_llt.info() != Eigen::Success || !q.covariance_.allFinite()) {
    throw NotSpdError("GaussianVariational::full: covariance is numerically indefinite");
  }
  q.cov_factor_ = cov_llt.matrixL();
  return q;
}

GaussianVariational GaussianVariational::diagonal(Eigen::VectorXd mean, Eigen::VectorXd precision) {
  const Eigen::Index d = mean.size();
  if (d < 1) throw DimMismatchError("GaussianVariational: dimension must be at least 1");
  require_same_dim(precision.size(), d, "GaussianVariational::diagonal");
  if (!mean.allFinite() || !precision.allFinite() || !(precision.array() > 0.0).all()) {
    throw NotPositiveError("GaussianVariational::diagonal: precision entries must be positive");
  }

  GaussianVariational q;
  q.structure_ = CovStructure::Diagonal;
  q.mean_ = std::move(mean);
  q.precision_ = precision;
  q.covariance_ = precision.cwiseInverse();
  q.cov_factor_ = q.covariance_.col(0).cwiseSqrt().asDiagonal();
  q.log_det_precision_ = precision.array().log().sum();
  return q;
}

GaussianVariational GaussianVariational::isotropic(Eigen::VectorXd mean, double tau,
                                                   CovStructure structure) {
  const Eigen::Index d = mean.size();
  if (structure == CovStructure::Full) {
    return full(std::move(mean), tau * Eigen::MatrixXd::Identity(d, d));
  }
  return diagonal(std::move(mean), Eigen::VectorXd::Constant(d, tau));
}

Eigen::MatrixXd GaussianVariational::precision_dense() const {
  if (is_full()) return precision_;
  return precision_.col(0).asDiagonal();
}

Eigen::MatrixXd GaussianVariational::covariance_dense() const {
  if (is_full()) return covariance_;
  return covariance_.col(0).asDiagonal();
}

Eigen::VectorXd GaussianVariational::apply_covariance(const Eigen::VectorXd& x) const {
  if (is_full()) return precision_llt_.solve(x);
  return x.cwiseQuotient(precision_.col(0));
}

Eigen::VectorXd GaussianVariational::apply_precision(const Eigen::VectorXd& x) const {
  if (is_full()) return precision_ * x;
  return x.cwiseProduct(precision_.col(0));
}

NaturalParams common_to_natural(const GaussianVariational& q) {
  return {q.apply_precision(q.mean()), -0.5 * q.precision()};
}

GaussianVariational natural_to_common(const NaturalParams& lambda, CovStructure structure) {
  const Eigen::MatrixXd precision = -2.0 * lambda.lambda2;
  if (structure == CovStructure::Full) {
    const Eigen::MatrixXd sym = symmetrize(precision);
    Eigen::LLT<Eigen::MatrixXd> llt(sym);
    if (llt.info() != Eigen::Success) {
      throw NotSpdError("natural_to_common: -2 lambda2 is not positive definite");
    }
    return GaussianVariational::full(llt.solve(lambda.lambda1), sym);
  }
  if (precision.cols() != 1) {
    throw DimMismatchError("natural_to_common: diagonal lambda2 must be a column");
  }
  if (!(precision.array() > 0.0).all()) {
    throw NotPositiveError("natural_to_common: -2 lambda2 has non-positive entries");
  }
  return GaussianVariational::diagonal(lambda.lambda1.cwiseQuotient(precision.col(0)),
                                       precision.col(0));
}

ExpectationParams expectation_params(const GaussianVariational& q) {
  const Eigen::VectorXd& mu = q.mean();
  if (q.is_full()) return {mu, q.covariance() + mu * mu.transpose()};
  return {mu, q.covariance() + mu.cwiseProduct(mu)};
}

Eigen::MatrixXd sample(const GaussianVariational& q, Eigen::Index n, Rng& rng) {
  const Eigen::Index d = q.dim();
  Eigen::MatrixXd draws(n, d);
  const Eigen::MatrixXd& l = q.covariance_factor();
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::VectorXd z = standard_normal(d, rng);
    if (q.is_full()) {
      draws.row(s) = (q.mean() + l.triangularView<Eigen::Lower>() * z).transpose();
    } else {
      draws.row(s) = (q.mean() + l.diagonal().cwiseProduct(z)).transpose();
    }
  }
  return draws;
}

Eigen::VectorXd whitened_residual(const GaussianVariational& q, const Eigen::VectorXd& theta) {
  require_same_dim(theta.size(), q.dim(), "whitened_residual");
  return q.apply_precision(theta - q.mean());
}

double log_density(const GaussianVariational& q, const Eigen::VectorXd& theta) {
  require_same_dim(theta.size(), q.dim(), "log_density");
  const Eigen::VectorXd diff = theta - q.mean();
  const double quad = diff.dot(q.apply_precision(diff));
  const double d = static_cast<double>(q.dim());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) - q.log_det_precision() + quad);
}

ScoreGrad score_m(const GaussianVariational& q, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd v = whitened_residual(q, theta);
  const Eigen::VectorXd& mu = q.mean();
  ScoreGrad g;
  if (q.is_full()) {
    g.g_m1 = q.precision() * theta - v * v.dot(mu);
    g.g_m2 = -0.5 * (q.precision() - v * v.transpose());
  } else {
    const Eigen::VectorXd vv = v.cwiseProduct(v);
    g.g_m1 = q.apply_precision(theta) - vv.cwiseProduct(mu);
    g.g_m2 = -0.5 * (q.precision().col(0) - vv);
  }
  return g;
}

}  // namespace qbvi
