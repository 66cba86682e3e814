#include "qbvi/gradient_estimator.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "qbvi/error.hpp"

namespace qbvi {
namespace {

Eigen::MatrixXd zero_second_block(const GaussianVariational& q) {
  const Eigen::Index d = q.dim();
  return q.is_full() ? Eigen::MatrixXd::Zero(d, d) : Eigen::MatrixXd::Zero(d, 1);
}

// S^-1 - v v^T, or its diagonal analogue.
Eigen::MatrixXd precision_score(const GaussianVariational& q, const Eigen::VectorXd& v) {
  if (q.is_full()) return q.precision() - v * v.transpose();
  return q.precision().col(0) - v.cwiseProduct(v);
}

}  // namespace

CvCoefficients CvCoefficients::zeros(const GaussianVariational& q) {
  return {Eigen::VectorXd::Zero(q.dim()), zero_second_block(q)};
}

Eigen::VectorXd evaluate_loglik(const LogLikFn& loglik, const Eigen::MatrixXd& draws) {
  Eigen::VectorXd out(draws.rows());
  for (Eigen::Index s = 0; s < draws.rows(); ++s) {
    const Eigen::VectorXd theta = draws.row(s).transpose();
    const double value = loglik(theta);
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "log-likelihood is not finite (" << value << ") at draw " << s << ": ["
          << theta.transpose() << "]";
      throw NonFiniteLoglikError(msg.str(), std::vector<double>(theta.data(), theta.data() + theta.size()));
    }
    out[s] = value;
  }
  return out;
}

GradientEstimate estimate_from_draws(const GaussianVariational& q, Eigen::MatrixXd draws,
                                     Eigen::VectorXd loglik, const CvCoefficients* c) {
  const Eigen::Index n = draws.rows();
  if (n < 1) throw InsufficientSamplesError("gradient estimate needs at least one draw");
  if (draws.cols() != q.dim() || loglik.size() != n) {
    throw DimMismatchError("estimate_from_draws: draws/loglik shape mismatch");
  }

  GradientEstimate est;
  est.g_mu_term = Eigen::VectorXd::Zero(q.dim());
  est.g_prec_term = zero_second_block(q);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::VectorXd v = whitened_residual(q, draws.row(s).transpose());
    const Eigen::MatrixXd h = precision_score(q, v);
    const double l = loglik[s];
    if (c == nullptr) {
      est.g_mu_term += v * l;
      est.g_prec_term += h * l;
    } else {
      est.g_mu_term += v.cwiseProduct((l - c->c1.array()).matrix());
      est.g_prec_term += h.cwiseProduct((l - c->c2.array()).matrix());
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  est.g_mu_term *= inv_n;
  est.g_prec_term *= inv_n;
  if (q.is_full()) est.g_prec_term = symmetrize(est.g_prec_term);
  est.n_samples = n;
  est.draws = std::move(draws);
  est.loglik = std::move(loglik);
  return est;
}

GradientEstimate estimate_naive(const GaussianVariational& q, const LogLikFn& loglik,
                                Eigen::Index n, Rng& rng) {
  if (n < 1) throw InsufficientSamplesError("estimate_naive: n must be at least 1");
  Eigen::MatrixXd draws = sample(q, n, rng);
  Eigen::VectorXd values = evaluate_loglik(loglik, draws);
  return estimate_from_draws(q, std::move(draws), std::move(values));
}

GradientEstimate estimate_cv(const GaussianVariational& q, const LogLikFn& loglik,
                             Eigen::Index n, Rng& rng, const CvCoefficients& c) {
  if (n < 1) throw InsufficientSamplesError("estimate_cv: n must be at least 1");
  Eigen::MatrixXd draws = sample(q, n, rng);
  Eigen::VectorXd values = evaluate_loglik(loglik, draws);
  return estimate_from_draws(q, std::move(draws), std::move(values), &c);
}

CvCoefficients cv_coefficients(const GradientEstimate& prev, const GaussianVariational& q_prev) {
  const Eigen::Index n = prev.draws.rows();
  if (n < 2 || prev.loglik.size() != n) {
    throw InsufficientSamplesError("cv_coefficients: need at least two retained draws, got " +
                                   std::to_string(n));
  }
  const Eigen::Index d = q_prev.dim();
  const Eigen::Index cols2 = q_prev.is_full() ? d : 1;

  // Since E[g] = 0, c(l + a) = c(l) + a. Working with l - mean(l) and adding
  // the mean back keeps the ratio of sample to analytic moments from scaling
  // a large offset in l.
  const double center = prev.loglik.mean();

  // Accumulate sums for Cov(g l, g) = (sum g^2 l - n mean(g l) mean(g)) / (n - 1).
  Eigen::VectorXd s1_g = Eigen::VectorXd::Zero(d), s1_gl = s1_g, s1_ggl = s1_g;
  Eigen::MatrixXd s2_g = Eigen::MatrixXd::Zero(d, cols2), s2_gl = s2_g, s2_ggl = s2_g;
  for (Eigen::Index s = 0; s < n; ++s) {
    const ScoreGrad g = score_m(q_prev, prev.draws.row(s).transpose());
    const double l = prev.loglik[s] - center;
    s1_g += g.g_m1;
    s1_gl += g.g_m1 * l;
    s1_ggl += g.g_m1.cwiseProduct(g.g_m1) * l;
    s2_g += g.g_m2;
    s2_gl += g.g_m2 * l;
    s2_ggl += g.g_m2.cwiseProduct(g.g_m2) * l;
  }
  const double nd = static_cast<double>(n);
  const Eigen::VectorXd cov1 = (s1_ggl - s1_gl.cwiseProduct(s1_g) / nd) / (nd - 1.0);
  const Eigen::MatrixXd cov2 = (s2_ggl - s2_gl.cwiseProduct(s2_g) / nd) / (nd - 1.0);

  const Eigen::VectorXd var1 = analytic_var_m1(q_prev);
  const Eigen::MatrixXd var2 = analytic_var_m2(q_prev);

  CvCoefficients c = CvCoefficients::zeros(q_prev);
  for (Eigen::Index i = 0; i < d; ++i) {
    c.c1[i] = var1[i] > 0.0 ? center + cov1[i] / var1[i] : 0.0;
  }
  for (Eigen::Index j = 0; j < cols2; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      c.c2(i, j) = var2(i, j) > 0.0 ? center + cov2(i, j) / var2(i, j) : 0.0;
    }
  }
  if (!c.c1.allFinite() || !c.c2.allFinite()) return CvCoefficients::zeros(q_prev);
  return c;
}

double wishart1_cov(const Eigen::MatrixXd& sigma, Eigen::Index i, Eigen::Index j, Eigen::Index k,
                    Eigen::Index l) {
  return sigma(i, k) * sigma(j, l) + sigma(i, l) * sigma(j, k);
}

Eigen::MatrixXd analytic_var_m2(const GaussianVariational& q) {
  const Eigen::MatrixXd& p = q.precision();
  if (!q.is_full()) return 0.5 * p.cwiseProduct(p);
  const Eigen::VectorXd diag = p.diagonal();
  return 0.25 * (p.cwiseProduct(p) + diag * diag.transpose());
}

Eigen::VectorXd analytic_var_m1(const GaussianVariational& q) {
  const Eigen::VectorXd& mu = q.mean();
  if (!q.is_full()) {
    // Coordinates are independent: Var(p theta - p^2 (theta - mu)^2 mu) = p + 2 p^2 mu^2.
    const Eigen::ArrayXd p = q.precision().col(0).array();
    return (p + 2.0 * p.square() * mu.array().square()).matrix();
  }

  const Eigen::Index d = q.dim();
  const Eigen::MatrixXd& s = q.covariance();
  const Eigen::VectorXd z = q.apply_precision(mu);

  // D = vcov(V z), V ~ W(1, S), built entrywise over the upper triangle.
  Eigen::MatrixXd dmat(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      double acc = 0.0;
      for (Eigen::Index h = 0; h < d; ++h) {
        for (Eigen::Index k = 0; k < d; ++k) {
          acc += z[h] * z[k] * wishart1_cov(s, i, h, j, k);
        }
      }
      dmat(i, j) = acc;
      dmat(j, i) = acc;
    }
  }
  const Eigen::MatrixXd& p = q.precision();
  return (p * (s + dmat) * p).diagonal();
}

}  // namespace qbvi
