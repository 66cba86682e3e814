#pragma once

#include <functional>

#include <Eigen/Core>

#include "qbvi/gaussian_family.hpp"
#include "qbvi/random.hpp"

namespace qbvi {

using LogLikFn = std::function<double(const Eigen::VectorXd&)>;

/// Monte Carlo estimate of the two expectations that drive the update:
///   g_mu_term   ~ E_q[ v log p(y|theta) ]
///   g_prec_term ~ E_q[ (S^-1 - v v^T) log p(y|theta) ]
/// together with the draws and their log-likelihoods, which the next iteration
/// reuses for its control-variate coefficients.
struct GradientEstimate {
  Eigen::VectorXd g_mu_term;
  Eigen::MatrixXd g_prec_term;  // d x d (Full) or d x 1 (Diagonal)
  Eigen::Index n_samples = 0;
  Eigen::MatrixXd draws;   // n_samples x d
  Eigen::VectorXd loglik;  // n_samples
};

/// One baseline per scalar entry of each gradient block.
struct CvCoefficients {
  Eigen::VectorXd c1;
  Eigen::MatrixXd c2;

  static CvCoefficients zeros(const GaussianVariational& q);
};

/// Evaluates `loglik` at every row of `draws`, in row order. Throws
/// NonFiniteLoglikError carrying the offending draw.
Eigen::VectorXd evaluate_loglik(const LogLikFn& loglik, const Eigen::MatrixXd& draws);

/// Estimator on caller-supplied draws; `c == nullptr` is the plain average.
GradientEstimate estimate_from_draws(const GaussianVariational& q, Eigen::MatrixXd draws,
                                     Eigen::VectorXd loglik, const CvCoefficients* c = nullptr);

GradientEstimate estimate_naive(const GaussianVariational& q, const LogLikFn& loglik,
                                Eigen::Index n, Rng& rng);

GradientEstimate estimate_cv(const GaussianVariational& q, const LogLikFn& loglik,
                             Eigen::Index n, Rng& rng, const CvCoefficients& c);

/// c = Cov(g l, g) / Var(g) per entry, where g runs over the entries of
/// score_m(q_prev, theta) and the variance is the closed form at q_prev.
/// Entries whose analytic variance vanishes get c = 0. Throws
/// InsufficientSamplesError with fewer than two retained draws.
CvCoefficients cv_coefficients(const GradientEstimate& prev, const GaussianVariational& q_prev);

/// Cov(V_ij, V_kl) for V ~ W(1, sigma).
double wishart1_cov(const Eigen::MatrixXd& sigma, Eigen::Index i, Eigen::Index j, Eigen::Index k,
                    Eigen::Index l);

/// Entrywise variance of score_m().g_m2 (same storage convention as g_m2).
Eigen::MatrixXd analytic_var_m2(const GaussianVariational& q);

/// Entrywise variance of score_m().g_m1.
Eigen::VectorXd analytic_var_m1(const GaussianVariational& q);

}  // namespace qbvi
