#pragma once

#include <functional>
#include <optional>

#include <Eigen/Core>

#include "qbvi/random.hpp"

namespace qbvi {

using LogDensityFn = std::function<double(const Eigen::VectorXd&)>;

struct Chain {
  Eigen::MatrixXd draws;  // retained draws after burn-in, n_draws x d
  double acceptance_rate = 0.0;  // over the retained draws
  Eigen::Index burn_in = 0;
  double step_scale = 0.0;  // frozen value used after burn-in

  Eigen::VectorXd mean() const;
  /// Batch-means Monte Carlo standard error of each coordinate's mean.
  Eigen::VectorXd mean_standard_error(Eigen::Index n_batches = 50) const;
};

struct RwmOptions {
  Eigen::Index n_draws = 50000;
  Eigen::Index burn_in = 10000;
  double step_scale = 0.5;
  /// Proposal theta' = theta + step_scale * L z; identity when unset.
  std::optional<Eigen::MatrixXd> proposal_factor;
  std::optional<Eigen::VectorXd> start;
};

/// min(1, exp(log_ratio)); 0 when the ratio is NaN.
double metropolis_accept_probability(double log_ratio);

/// Random-walk Metropolis. The step scale adapts during burn-in toward an
/// acceptance rate in [0.2, 0.4] and is frozen afterwards.
Chain rwm_sample(const LogDensityFn& log_post, Eigen::Index d, Rng& rng,
                 const RwmOptions& options = {});

struct MleResult {
  Eigen::VectorXd theta_hat;
  double ll_hat = 0.0;
  int evaluations = 0;
};

struct MleOptions {
  int restarts = 3;
  int max_evaluations = 10000;
  double tolerance = 1e-8;
  double initial_step = 0.5;
};

/// Nelder-Mead maximisation of `loglik`, restarted from the incumbent.
MleResult mle_fit(const LogDensityFn& loglik, Eigen::Index d, const Eigen::VectorXd& x0,
                  const MleOptions& options = {});

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double ll = 0.0;
};

/// Threshold 0.5, positive class 1. Ratios with an empty denominator are 0.
ClassificationMetrics metrics_classification(const Eigen::VectorXd& probs,
                                             const Eigen::VectorXd& labels);

struct RegressionMetrics {
  double mse = 0.0;
  double ll = 0.0;
};

/// ll is the Gaussian log-likelihood with variance sigma2.
RegressionMetrics metrics_regression(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets,
                                     double sigma2);

}  // namespace qbvi
