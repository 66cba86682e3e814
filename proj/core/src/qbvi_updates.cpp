#include "qbvi/qbvi_updates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "qbvi/error.hpp"

namespace qbvi {
namespace {

// Per-step cap on |log| change of a diagonal precision entry under the log
// transform; keeps exp() finite and strictly positive.
constexpr double kMaxLogStep = 40.0;

void require_beta(double beta, const char* fn) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ConfigError(std::string(fn) + ": step size must lie in (0, 1), got " +
                      std::to_string(beta));
  }
}

void require_structure(const GaussianVariational& q, CovStructure s, const char* fn) {
  if (q.structure() != s) {
    throw ConfigError(std::string(fn) + ": covariance structure mismatch");
  }
}

Eigen::VectorXd updated_mean(const GaussianVariational& q_new, const GaussianVariational& q_old,
                             const NaturalGradient& dir, double beta) {
  return q_old.mean() + beta * q_new.apply_covariance(dir.mu_dir);
}

}  // namespace

PriorSpec PriorSpec::isotropic(Eigen::Index d, double tau) {
  if (!(tau > 0.0) || d < 1) throw ConfigError("isotropic prior needs tau > 0 and d >= 1");
  PriorSpec p;
  p.mu0 = Eigen::VectorXd::Zero(d);
  p.prec0 = tau * Eigen::MatrixXd::Identity(d, d);
  p.isotropic_tau = tau;
  return p;
}

PriorSpec PriorSpec::general(Eigen::VectorXd mu0, Eigen::MatrixXd prec0) {
  const Eigen::Index d = mu0.size();
  if (d < 1 || prec0.rows() != d || prec0.cols() != d) {
    throw ConfigError("prior: mean/precision dimension mismatch");
  }
  prec0 = symmetrize(prec0);
  Eigen::LLT<Eigen::MatrixXd> llt(prec0);
  if (llt.info() != Eigen::Success) throw ConfigError("prior precision is not positive definite");
  PriorSpec p;
  p.mu0 = std::move(mu0);
  p.prec0 = std::move(prec0);
  return p;
}

Eigen::MatrixXd PriorSpec::precision_block(CovStructure structure) const {
  if (structure == CovStructure::Full) return prec0;
  const Eigen::MatrixXd off = prec0 - Eigen::MatrixXd(prec0.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() > 0.0) {
    throw ConfigError("a diagonal variational family requires a diagonal prior");
  }
  return prec0.diagonal();
}

GaussianVariational PriorSpec::distribution(CovStructure structure) const {
  if (structure == CovStructure::Full) return GaussianVariational::full(mu0, prec0);
  return GaussianVariational::diagonal(mu0, precision_block(structure).col(0));
}

PdStrategy PdStrategy::bounded_step(double beta0, double delta) {
  if (!(beta0 > 0.0 && beta0 < 1.0) || !(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("bounded step requires 0 < beta0 < 1 and 0 < delta < 1");
  }
  return {PdStrategyKind::BoundedStep, beta0, delta};
}

bool PdStrategy::supports(CovStructure structure) const noexcept {
  switch (kind) {
    case PdStrategyKind::Plain: return true;
    case PdStrategyKind::BoundedStep:
    case PdStrategyKind::LogTransform: return structure == CovStructure::Diagonal;
    case PdStrategyKind::Retraction: return structure == CovStructure::Full;
  }
  return false;
}

std::string_view to_string(PdStrategyKind kind) {
  switch (kind) {
    case PdStrategyKind::Plain: return "plain";
    case PdStrategyKind::BoundedStep: return "bounded";
    case PdStrategyKind::LogTransform: return "logtransform";
    case PdStrategyKind::Retraction: return "retraction";
  }
  return "plain";
}

PdStrategyKind parse_pd_strategy(std::string_view name) {
  if (name == "plain") return PdStrategyKind::Plain;
  if (name == "bounded") return PdStrategyKind::BoundedStep;
  if (name == "logtransform") return PdStrategyKind::LogTransform;
  if (name == "retraction") return PdStrategyKind::Retraction;
  throw ConfigError("unknown positive-definiteness strategy '" + std::string(name) + "'");
}

Eigen::VectorXd NaturalGradient::flatten() const {
  Eigen::VectorXd flat(mu_dir.size() + prec_dir.size());
  flat.head(mu_dir.size()) = mu_dir;
  flat.tail(prec_dir.size()) = prec_dir.reshaped();
  return flat;
}

void NaturalGradient::assign_flat(const Eigen::VectorXd& flat) {
  if (flat.size() != mu_dir.size() + prec_dir.size()) {
    throw DimMismatchError("NaturalGradient::assign_flat: size mismatch");
  }
  mu_dir = flat.head(mu_dir.size());
  prec_dir.reshaped() = flat.tail(prec_dir.size());
}

NaturalGradient natural_gradient(const GaussianVariational& q, const PriorSpec& prior,
                                 const GradientEstimate& est) {
  if (prior.dim() != q.dim() || est.g_mu_term.size() != q.dim()) {
    throw DimMismatchError("natural_gradient: prior/estimate dimension differs from q");
  }
  const Eigen::MatrixXd prec0 = prior.precision_block(q.structure());
  NaturalGradient g;
  if (q.is_full()) {
    g.mu_dir = prec0 * (prior.mu0 - q.mean()) + est.g_mu_term;
    g.prec_dir = symmetrize(prec0 + est.g_prec_term - q.precision());
  } else {
    g.mu_dir = prec0.col(0).cwiseProduct(prior.mu0 - q.mean()) + est.g_mu_term;
    g.prec_dir = prec0 + est.g_prec_term - q.precision();
  }
  return g;
}

GaussianVariational update_full(const GaussianVariational& q, const NaturalGradient& dir,
                                double beta) {
  require_structure(q, CovStructure::Full, "update_full");
  const Eigen::MatrixXd prec = symmetrize(q.precision() + beta * dir.prec_dir);
  // Validates SPD; the mean is solved against the new precision.
  const GaussianVariational with_new_prec = GaussianVariational::full(q.mean(), prec);
  return GaussianVariational::full(updated_mean(with_new_prec, q, dir, beta), prec);
}

GaussianVariational update_diag(const GaussianVariational& q, const NaturalGradient& dir,
                                double beta) {
  require_structure(q, CovStructure::Diagonal, "update_diag");
  const Eigen::VectorXd prec = q.precision().col(0) + beta * dir.prec_dir.col(0);
  if (!(prec.array() > 0.0).all() || !prec.allFinite()) {
    throw NotPositiveError("update_diag: precision update left the positive orthant");
  }
  const Eigen::VectorXd mu = q.mean() + beta * dir.mu_dir.cwiseQuotient(prec);
  return GaussianVariational::diagonal(mu, prec);
}

GaussianVariational update_diag_logxform(const GaussianVariational& q, const NaturalGradient& dir,
                                         double beta) {
  require_structure(q, CovStructure::Diagonal, "update_diag_logxform");
  // xi = -log(s_inv / 2); xi' = xi - beta s (prec_dir)  =>  s_inv' = s_inv exp(beta s prec_dir).
  const Eigen::ArrayXd s_inv = q.precision().col(0).array();
  const Eigen::ArrayXd log_step =
      (beta * dir.prec_dir.col(0).array() / s_inv).cwiseMax(-kMaxLogStep).cwiseMin(kMaxLogStep);
  const Eigen::VectorXd prec = (s_inv * log_step.exp()).matrix();
  const Eigen::VectorXd mu = q.mean() + beta * dir.mu_dir.cwiseQuotient(prec);
  return GaussianVariational::diagonal(mu, prec);
}

Eigen::MatrixXd retract_spd(const Eigen::MatrixXd& s_inv, const Eigen::MatrixXd& xi) {
  if (s_inv.rows() != s_inv.cols() || xi.rows() != s_inv.rows() || xi.cols() != s_inv.cols()) {
    throw DimMismatchError("retract_spd: shape mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrize(s_inv));
  if (llt.info() != Eigen::Success) throw NotSpdError("retract_spd: base point is not SPD");
  const Eigen::MatrixXd y = symmetrize(s_inv) + symmetrize(xi);
  const Eigen::MatrixXd w = llt.matrixL().solve(y);
  const Eigen::MatrixXd r = symmetrize(0.5 * s_inv + 0.5 * w.transpose() * w);
  Eigen::LLT<Eigen::MatrixXd> check(r);
  if (!r.allFinite() || check.info() != Eigen::Success) {
    throw SingularError("retract_spd: retracted point is not positive definite");
  }
  return r;
}

GaussianVariational update_full_manifold(const GaussianVariational& q, const NaturalGradient& dir,
                                         double beta) {
  require_structure(q, CovStructure::Full, "update_full_manifold");
  const Eigen::MatrixXd prec = retract_spd(q.precision(), beta * dir.prec_dir);
  const GaussianVariational with_new_prec = GaussianVariational::full(q.mean(), prec);
  return GaussianVariational::full(updated_mean(with_new_prec, q, dir, beta), prec);
}

GaussianVariational step_full(const GaussianVariational& q, const PriorSpec& prior,
                              const GradientEstimate& est, double beta) {
  require_beta(beta, "step_full");
  return update_full(q, natural_gradient(q, prior, est), beta);
}

GaussianVariational step_diag(const GaussianVariational& q, const PriorSpec& prior,
                              const GradientEstimate& est, double beta) {
  require_beta(beta, "step_diag");
  return update_diag(q, natural_gradient(q, prior, est), beta);
}

GaussianVariational step_diag_logxform(const GaussianVariational& q, const PriorSpec& prior,
                                       const GradientEstimate& est, double beta) {
  require_beta(beta, "step_diag_logxform");
  return update_diag_logxform(q, natural_gradient(q, prior, est), beta);
}

GaussianVariational step_full_manifold(const GaussianVariational& q, const PriorSpec& prior,
                                       const GradientEstimate& est, double beta) {
  require_beta(beta, "step_full_manifold");
  return update_full_manifold(q, natural_gradient(q, prior, est), beta);
}

double safe_beta(const Eigen::VectorXd& s_inv, const Eigen::VectorXd& h, double beta0,
                 double delta) {
  if (s_inv.size() != h.size()) throw DimMismatchError("safe_beta: size mismatch");
  double beta_star = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < s_inv.size(); ++i) {
    const double gap = h[i] - s_inv[i];
    if (gap < 0.0) beta_star = std::min(beta_star, -s_inv[i] / gap);
  }
  if (!std::isfinite(beta_star)) return beta0;
  return std::min(beta0, delta * beta_star);
}

StepOutcome apply_update(const GaussianVariational& q, const NaturalGradient& dir, double beta,
                         const PdStrategy& strategy, int max_halvings) {
  if (!strategy.supports(q.structure())) {
    throw ConfigError("strategy '" + std::string(to_string(strategy.kind)) +
                      "' does not support this covariance structure");
  }
  switch (strategy.kind) {
    case PdStrategyKind::BoundedStep: {
      const Eigen::VectorXd s_inv = q.precision().col(0);
      const Eigen::VectorXd h = s_inv + dir.prec_dir.col(0);
      const double b = safe_beta(s_inv, h, std::min(strategy.beta0, beta), strategy.delta);
      return {update_diag(q, dir, b), b, 0};
    }
    case PdStrategyKind::LogTransform:
      return {update_diag_logxform(q, dir, beta), beta, 0};
    case PdStrategyKind::Plain:
    case PdStrategyKind::Retraction:
      break;
  }

  double b = beta;
  for (int halvings = 0;; ++halvings) {
    try {
      if (strategy.kind == PdStrategyKind::Retraction) {
        return {update_full_manifold(q, dir, b), b, halvings};
      }
      if (q.is_full()) return {update_full(q, dir, b), b, halvings};
      return {update_diag(q, dir, b), b, halvings};
    } catch (const Error& e) {
      const bool recoverable = e.kind() == ErrorKind::NotSpd ||
                               e.kind() == ErrorKind::NotPositive ||
                               e.kind() == ErrorKind::Singular;
      if (!recoverable || halvings >= max_halvings) throw;
      b *= 0.5;
    }
  }
}

}  // namespace qbvi
