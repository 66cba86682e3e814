#pragma once

#include <functional>
#include <optional>

#include <Eigen/Core>

#include "qbvi/gaussian_family.hpp"
#include "qbvi/gradient_estimator.hpp"
#include "qbvi/qbvi_updates.hpp"
#include "qbvi/random.hpp"

namespace qbvi {

/// Inverse-Gamma IG(alpha, beta) with density
/// beta^alpha / Gamma(alpha) x^(-alpha-1) exp(-beta / x).
struct IGParams {
  double alpha = 1.0;
  double beta = 1.0;

  /// Throws DomainError unless alpha > 0 and beta > 0.
  static IGParams make(double alpha, double beta);
  /// beta / (alpha - 1); throws DomainError when alpha <= 1.
  double mean() const;
};

struct IGGrad {
  double d_alpha = 0.0;
  double d_beta = 0.0;
};

double ig_log_density(double x, const IGParams& p);
/// Gradient of ig_log_density with respect to (alpha, beta).
IGGrad ig_score(double x, const IGParams& p);
/// Fisher information [[trigamma(alpha), -1/beta], [-1/beta, alpha/beta^2]].
Eigen::Matrix2d ig_fim(const IGParams& p);
/// FIM^-1 * score, through the closed-form 2x2 inverse.
IGGrad ig_natgrad_score(double x, const IGParams& p);
double ig_sample(const IGParams& p, Rng& rng);

using NoiseLogLikFn = std::function<double(const Eigen::VectorXd& theta, double sigma2)>;

struct MeanFieldPriors {
  PriorSpec gaussian;
  IGParams noise;
};

struct MeanFieldStepOptions {
  PdStrategy strategy = PdStrategy::plain();
  /// Baselines for both factors estimated from `previous` (when present).
  bool control_variates = false;
  /// Keeps q_theta fixed and only updates the Inverse-Gamma factor.
  bool freeze_gaussian = false;
};

struct MeanFieldStepResult {
  GaussianVariational q_theta;
  IGParams q_noise;
  /// Bound estimated at the input state from the same draws.
  double lb = 0.0;
  double eps_gaussian = 0.0;
  double eps_noise = 0.0;
  /// Draws of theta with their log-likelihoods, reused for baselines.
  GradientEstimate gaussian_estimate;
  Eigen::VectorXd sigma2_draws;
  /// State the draws above were taken from.
  GaussianVariational q_theta_at_draw;
  IGParams q_noise_at_draw;
};

/// One joint step of the Gaussian x Inverse-Gamma mean-field scheme. Draws
/// (theta_s, sigma2_s) from q_theta q_noise, updates the Gaussian factor with
/// the configured strategy and (alpha, beta) with
///   nu <- nu + eps (nu0 - nu + mean_s[ FIM^-1 score(sigma2_s) l_s ]).
/// If that would leave alpha or beta non-positive, eps for the noise factor is
/// halved (repeatedly) for this step.
MeanFieldStepResult mf_step(const GaussianVariational& q_theta, const IGParams& q_noise,
                            const MeanFieldPriors& priors, const NoiseLogLikFn& loglik,
                            Eigen::Index n, Rng& rng, double eps,
                            const MeanFieldStepOptions& options = {},
                            const MeanFieldStepResult* previous = nullptr);

/// Draws and log-likelihoods from (q_theta, q_noise) without a step; usable
/// as `previous` for the first mf_step.
MeanFieldStepResult mf_pilot(const GaussianVariational& q_theta, const IGParams& q_noise,
                             const NoiseLogLikFn& loglik, Eigen::Index n, Rng& rng);

}  // namespace qbvi
