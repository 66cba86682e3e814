#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include "qbvi/gaussian_family.hpp"
#include "qbvi/models.hpp"
#include "qbvi/qbvi_updates.hpp"
#include "qbvi/random.hpp"

namespace qbvi::test {

/// A A^T + d I with A standard normal.
inline Eigen::MatrixXd random_spd(Eigen::Index d, Rng& rng, double ridge = 1.0) {
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index j = 0; j < d; ++j) a.col(j) = standard_normal(d, rng);
  return a * a.transpose() / static_cast<double>(d) + ridge * Eigen::MatrixXd::Identity(d, d);
}

inline Eigen::MatrixXd inverse(const Eigen::MatrixXd& m) { return m.inverse(); }

/// Sample mean and standard error of each column.
struct ColumnStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd se;
  Eigen::VectorXd var;
};

inline ColumnStats column_stats(const Eigen::MatrixXd& x) {
  const double n = static_cast<double>(x.rows());
  ColumnStats s;
  s.mean = x.colwise().mean().transpose();
  s.var = ((x.rowwise() - s.mean.transpose()).array().square().colwise().sum() / (n - 1.0))
              .transpose();
  s.se = (s.var / n).array().sqrt();
  return s;
}

/// Central difference with step 1e-5 max(1, |x|).
inline double central_diff(const std::function<double(double)>& f, double x) {
  const double h = 1e-5 * std::max(1.0, std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

/// Closed-form Gaussian posterior for y = X theta + e, e ~ N(0, sigma2 I),
/// theta ~ N(mu0, prec0^-1).
struct ConjugatePosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd precision;
  double log_evidence = 0.0;
};

inline ConjugatePosterior conjugate_posterior(const Dataset& data, double sigma2,
                                              const PriorSpec& prior) {
  ConjugatePosterior post;
  post.precision = prior.prec0 + data.X.transpose() * data.X / sigma2;
  post.cov = post.precision.inverse();
  post.mean =
      post.cov * (prior.prec0 * prior.mu0 + data.X.transpose() * data.y / sigma2);
  // y ~ N(X mu0, X S0 X^T + sigma2 I).
  const Eigen::Index n = data.rows();
  const Eigen::MatrixXd s0 = prior.prec0.inverse();
  const Eigen::MatrixXd k =
      data.X * s0 * data.X.transpose() + sigma2 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::LLT<Eigen::MatrixXd> llt(k);
  const Eigen::VectorXd r = data.y - data.X * prior.mu0;
  const Eigen::VectorXd w = llt.matrixL().solve(r);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  post.log_evidence =
      -0.5 * (static_cast<double>(n) * std::log(2.0 * M_PI) + logdet + w.squaredNorm());
  return post;
}

/// Regression rows [1, N(0,1) ...] with y = X truth + sqrt(sigma2) N(0,1).
inline Dataset synthetic_regression(Eigen::Index n, const Eigen::VectorXd& truth, double sigma2,
                                    Rng& rng) {
  const Eigen::Index d = truth.size();
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < d; ++j) X(i, j) = standard_normal(1, rng)[0];
  }
  Eigen::VectorXd y = X * truth + std::sqrt(sigma2) * standard_normal(n, rng);
  return Dataset::make(std::move(X), std::move(y));
}

/// Binary targets drawn from the logistic model with an intercept column.
inline Dataset synthetic_logistic(Eigen::Index n, const Eigen::VectorXd& truth, Rng& rng) {
  const Eigen::Index d = truth.size();
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < d; ++j) X(i, j) = standard_normal(1, rng)[0];
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-X.row(i).dot(truth)));
    y[i] = u(rng) < p ? 1.0 : 0.0;
  }
  return Dataset::make(std::move(X), std::move(y));
}

}  // namespace qbvi::test
