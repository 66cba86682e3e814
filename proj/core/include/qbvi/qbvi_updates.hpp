#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "qbvi/gaussian_family.hpp"
#include "qbvi/gradient_estimator.hpp"

namespace qbvi {

/// Gaussian prior N(mu0, S0) given through its precision S0^-1.
struct PriorSpec {
  Eigen::VectorXd mu0;
  Eigen::MatrixXd prec0;               // d x d, SPD
  std::optional<double> isotropic_tau;  // set when prec0 = tau I and mu0 = 0

  /// N(0, I / tau).
  static PriorSpec isotropic(Eigen::Index d, double tau);
  /// Validates shape and positive definiteness; throws ConfigError.
  static PriorSpec general(Eigen::VectorXd mu0, Eigen::MatrixXd prec0);

  Eigen::Index dim() const noexcept { return mu0.size(); }
  /// Prior precision in the storage convention of `structure`. Throws
  /// ConfigError when a diagonal family is paired with a non-diagonal prior.
  Eigen::MatrixXd precision_block(CovStructure structure) const;
  /// The prior as a GaussianVariational (used for log p(theta) in the bound).
  GaussianVariational distribution(CovStructure structure) const;
};

enum class PdStrategyKind { Plain, BoundedStep, LogTransform, Retraction };

/// How the precision update is kept valid.
///   Plain        - raw update; an invalid result is an error the trainer retries
///   BoundedStep  - diagonal only; step capped at min(beta0, delta * beta*)
///   LogTransform - diagonal only; update on xi = -log(-lambda2)
///   Retraction   - full only; update retracted onto the SPD manifold
struct PdStrategy {
  PdStrategyKind kind = PdStrategyKind::Plain;
  double beta0 = 0.999;
  double delta = 0.9;

  static PdStrategy plain() { return {}; }
  static PdStrategy bounded_step(double beta0, double delta);
  static PdStrategy log_transform() { return {PdStrategyKind::LogTransform}; }
  static PdStrategy retraction() { return {PdStrategyKind::Retraction}; }

  bool supports(CovStructure structure) const noexcept;
};

std::string_view to_string(PdStrategyKind kind);
/// Accepts plain / bounded / logtransform / retraction. Throws ConfigError.
PdStrategyKind parse_pd_strategy(std::string_view name);

/// Natural-gradient direction of the bound in the (mu, S^-1) chart:
///   mu_dir   = S0^-1 (mu0 - mu) + g_mu_term
///   prec_dir = S0^-1 + g_prec_term - S^-1
/// so that the plain update reads S^-1 += beta prec_dir, mu += beta S_new mu_dir.
struct NaturalGradient {
  Eigen::VectorXd mu_dir;
  Eigen::MatrixXd prec_dir;

  /// mu_dir followed by prec_dir in column-major order.
  Eigen::VectorXd flatten() const;
  void assign_flat(const Eigen::VectorXd& flat);
};

NaturalGradient natural_gradient(const GaussianVariational& q, const PriorSpec& prior,
                                 const GradientEstimate& est);

// Direction-based kernels; the trainer feeds them clipped / momentum-averaged
// directions. Precision is updated first, the mean uses the new covariance.
GaussianVariational update_full(const GaussianVariational& q, const NaturalGradient& dir,
                                double beta);
GaussianVariational update_diag(const GaussianVariational& q, const NaturalGradient& dir,
                                double beta);
GaussianVariational update_diag_logxform(const GaussianVariational& q, const NaturalGradient& dir,
                                         double beta);
GaussianVariational update_full_manifold(const GaussianVariational& q, const NaturalGradient& dir,
                                         double beta);

// Estimate-based kernels.
GaussianVariational step_full(const GaussianVariational& q, const PriorSpec& prior,
                              const GradientEstimate& est, double beta);
GaussianVariational step_diag(const GaussianVariational& q, const PriorSpec& prior,
                              const GradientEstimate& est, double beta);
GaussianVariational step_diag_logxform(const GaussianVariational& q, const PriorSpec& prior,
                                       const GradientEstimate& est, double beta);
GaussianVariational step_full_manifold(const GaussianVariational& q, const PriorSpec& prior,
                                       const GradientEstimate& est, double beta);

/// Largest step keeping s_inv + beta (h - s_inv) positive, capped at beta0:
/// min(beta0, delta * min_{i: h_i < s_inv_i} -s_inv_i / (h_i - s_inv_i)).
double safe_beta(const Eigen::VectorXd& s_inv, const Eigen::VectorXd& h, double beta0,
                 double delta);

/// R(xi) = S_inv + xi + 1/2 xi S_inv^-1 xi, evaluated in the congruence form
/// 1/2 [S_inv + (S_inv + xi) S_inv^-1 (S_inv + xi)]. Throws SingularError when
/// the result is not numerically positive definite.
Eigen::MatrixXd retract_spd(const Eigen::MatrixXd& s_inv, const Eigen::MatrixXd& xi);

struct StepOutcome {
  GaussianVariational q;
  double beta_used;
  int halvings;
};

/// Dispatches on the strategy. For Plain and Retraction an invalid result
/// halves beta and retries, up to `max_halvings` times, before rethrowing.
StepOutcome apply_update(const GaussianVariational& q, const NaturalGradient& dir, double beta,
                         const PdStrategy& strategy, int max_halvings = 10);

}  // namespace qbvi
