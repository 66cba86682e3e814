#include "qbvi/inverse_gamma.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "qbvi/error.hpp"
#include "qbvi/special_functions.hpp"

namespace qbvi {
namespace {

void require_positive_x(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(fn) + ": x must be positive, got " + std::to_string(x));
  }
}

constexpr int kMaxNoiseHalvings = 30;

}  // namespace

IGParams IGParams::make(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw DomainError("Inverse-Gamma parameters must be positive");
  }
  return {alpha, beta};
}

double IGParams::mean() const {
  if (!(alpha > 1.0)) throw DomainError("Inverse-Gamma mean needs alpha > 1");
  return beta / (alpha - 1.0);
}

double ig_log_density(double x, const IGParams& p) {
  require_positive_x(x, "ig_log_density");
  return p.alpha * std::log(p.beta) - std::lgamma(p.alpha) - (p.alpha + 1.0) * std::log(x) -
         p.beta / x;
}

IGGrad ig_score(double x, const IGParams& p) {
  require_positive_x(x, "ig_score");
  return {std::log(p.beta) - special::digamma(p.alpha) - std::log(x), p.alpha / p.beta - 1.0 / x};
}

Eigen::Matrix2d ig_fim(const IGParams& p) {
  Eigen::Matrix2d fim;
  fim << special::trigamma(p.alpha), -1.0 / p.beta, -1.0 / p.beta, p.alpha / (p.beta * p.beta);
  return fim;
}

IGGrad ig_natgrad_score(double x, const IGParams& p) {
  const IGGrad s = ig_score(x, p);
  const double psi1 = special::trigamma(p.alpha);
  const double b2 = p.beta * p.beta;
  const double det = (p.alpha * psi1 - 1.0) / b2;
  // [[a/b^2, 1/b], [1/b, psi1]] / det
  return {(p.alpha / b2 * s.d_alpha + s.d_beta / p.beta) / det,
          (s.d_alpha / p.beta + psi1 * s.d_beta) / det};
}

double ig_sample(const IGParams& p, Rng& rng) {
  std::gamma_distribution<double> gamma(p.alpha, 1.0 / p.beta);
  return 1.0 / gamma(rng);
}

namespace {

struct JointDraws {
  Eigen::MatrixXd theta;
  Eigen::VectorXd sigma2;
  Eigen::VectorXd loglik;
};

JointDraws draw_joint(const GaussianVariational& q_theta, const IGParams& q_noise,
                      const NoiseLogLikFn& loglik, Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd draws = sample(q_theta, n, rng);
  Eigen::VectorXd sigma2(n);
  for (Eigen::Index s = 0; s < n; ++s) sigma2[s] = ig_sample(q_noise, rng);

  Eigen::VectorXd values(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::VectorXd theta = draws.row(s).transpose();
    const double l = loglik(theta, sigma2[s]);
    if (!std::isfinite(l)) {
      std::ostringstream msg;
      msg << "log-likelihood is not finite at draw " << s << " (sigma2 = " << sigma2[s] << ")";
      std::vector<double> at(theta.data(), theta.data() + theta.size());
      at.push_back(sigma2[s]);
      throw NonFiniteLoglikError(msg.str(), std::move(at));
    }
    values[s] = l;
  }
  return {std::move(draws), std::move(sigma2), std::move(values)};
}

}  // namespace

MeanFieldStepResult mf_step(const GaussianVariational& q_theta, const IGParams& q_noise,
                            const MeanFieldPriors& priors, const NoiseLogLikFn& loglik,
                            Eigen::Index n, Rng& rng, double eps,
                            const MeanFieldStepOptions& options,
                            const MeanFieldStepResult* previous) {
  if (n < 1) throw InsufficientSamplesError("mf_step: n must be at least 1");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("mf_step: eps must lie in (0, 1)");

  JointDraws joint = draw_joint(q_theta, q_noise, loglik, n, rng);
  Eigen::MatrixXd draws = std::move(joint.theta);
  Eigen::VectorXd sigma2 = std::move(joint.sigma2);
  Eigen::VectorXd values = std::move(joint.loglik);

  const GaussianVariational prior_q = priors.gaussian.distribution(q_theta.structure());
  double lb = 0.0;
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::VectorXd theta = draws.row(s).transpose();
    lb += log_density(prior_q, theta) + ig_log_density(sigma2[s], priors.noise) + values[s] -
          log_density(q_theta, theta) - ig_log_density(sigma2[s], q_noise);
  }
  lb /= static_cast<double>(n);

  // Baselines from the previous step's draws.
  double c_alpha = 0.0;
  double c_beta = 0.0;
  std::optional<CvCoefficients> c_gauss;
  if (options.control_variates && previous != nullptr && previous->sigma2_draws.size() >= 2) {
    const IGParams& prev_q = previous->q_noise_at_draw;
    const Eigen::Index m = previous->sigma2_draws.size();
    const double center = previous->gaussian_estimate.loglik.mean();
    double sa = 0.0, sal = 0.0, saal = 0.0, sb = 0.0, sbl = 0.0, sbbl = 0.0;
    for (Eigen::Index s = 0; s < m; ++s) {
      const IGGrad g = ig_natgrad_score(previous->sigma2_draws[s], prev_q);
      const double l = previous->gaussian_estimate.loglik[s] - center;
      sa += g.d_alpha;
      sal += g.d_alpha * l;
      saal += g.d_alpha * g.d_alpha * l;
      sb += g.d_beta;
      sbl += g.d_beta * l;
      sbbl += g.d_beta * g.d_beta * l;
    }
    const double md = static_cast<double>(m);
    // Var of the natural score is diag(FIM^-1).
    const Eigen::Matrix2d fim = ig_fim(prev_q);
    const double det = fim(0, 0) * fim(1, 1) - fim(0, 1) * fim(1, 0);
    c_alpha = center + (saal - sal * sa / md) / (md - 1.0) / (fim(1, 1) / det);
    c_beta = center + (sbbl - sbl * sb / md) / (md - 1.0) / (fim(0, 0) / det);
    if (!std::isfinite(c_alpha) || !std::isfinite(c_beta)) c_alpha = c_beta = 0.0;
    if (!options.freeze_gaussian) {
      c_gauss = cv_coefficients(previous->gaussian_estimate, previous->q_theta_at_draw);
    }
  }

  double ga = 0.0;
  double gb = 0.0;
  for (Eigen::Index s = 0; s < n; ++s) {
    const IGGrad g = ig_natgrad_score(sigma2[s], q_noise);
    ga += g.d_alpha * (values[s] - c_alpha);
    gb += g.d_beta * (values[s] - c_beta);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double grad_alpha = priors.noise.alpha - q_noise.alpha + ga * inv_n;
  const double grad_beta = priors.noise.beta - q_noise.beta + gb * inv_n;

  double eps_noise = eps;
  IGParams next_noise = q_noise;
  for (int k = 0;; ++k) {
    next_noise.alpha = q_noise.alpha + eps_noise * grad_alpha;
    next_noise.beta = q_noise.beta + eps_noise * grad_beta;
    if (next_noise.alpha > 0.0 && next_noise.beta > 0.0) break;
    if (k >= kMaxNoiseHalvings) {
      throw NotPositiveError("mf_step: Inverse-Gamma update stayed non-positive after halving");
    }
    eps_noise *= 0.5;
  }

  GradientEstimate est = estimate_from_draws(q_theta, std::move(draws), std::move(values),
                                             c_gauss ? &*c_gauss : nullptr);
  MeanFieldStepResult out{q_theta, next_noise, lb, 0.0, eps_noise, {}, std::move(sigma2),
                          q_theta, q_noise};
  if (!options.freeze_gaussian) {
    const NaturalGradient dir = natural_gradient(q_theta, priors.gaussian, est);
    StepOutcome step = apply_update(q_theta, dir, eps, options.strategy);
    out.q_theta = std::move(step.q);
    out.eps_gaussian = step.beta_used;
  }
  out.gaussian_estimate = std::move(est);
  return out;
}

MeanFieldStepResult mf_pilot(const GaussianVariational& q_theta, const IGParams& q_noise,
                             const NoiseLogLikFn& loglik, Eigen::Index n, Rng& rng) {
  if (n < 1) throw InsufficientSamplesError("mf_pilot: n must be at least 1");
  JointDraws joint = draw_joint(q_theta, q_noise, loglik, n, rng);
  GradientEstimate est =
      estimate_from_draws(q_theta, std::move(joint.theta), std::move(joint.loglik));
  return {q_theta, q_noise, 0.0, 0.0, 0.0, std::move(est), std::move(joint.sigma2), q_theta,
          q_noise};
}

}  // namespace qbvi
