#include "qbvi/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "qbvi/error.hpp"

namespace qbvi {
namespace {

constexpr Eigen::Index kAdaptWindow = 100;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double safe_eval(const LogDensityFn& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
}

}  // namespace

Eigen::VectorXd Chain::mean() const { return draws.colwise().mean().transpose(); }

Eigen::VectorXd Chain::mean_standard_error(Eigen::Index n_batches) const {
  const Eigen::Index n = draws.rows();
  if (n_batches < 2 || n < 2 * n_batches) {
    throw InsufficientSamplesError("batch means need at least two draws per batch");
  }
  const Eigen::Index len = n / n_batches;
  Eigen::MatrixXd means(n_batches, draws.cols());
  for (Eigen::Index b = 0; b < n_batches; ++b) {
    means.row(b) = draws.middleRows(b * len, len).colwise().mean();
  }
  const Eigen::RowVectorXd grand = means.colwise().mean();
  const Eigen::VectorXd var =
      (means.rowwise() - grand).array().square().colwise().sum().transpose() /
      static_cast<double>(n_batches - 1);
  return (var / static_cast<double>(n_batches)).cwiseSqrt();
}

double metropolis_accept_probability(double log_ratio) {
  if (std::isnan(log_ratio)) return 0.0;
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

Chain rwm_sample(const LogDensityFn& log_post, Eigen::Index d, Rng& rng, const RwmOptions& options) {
  if (options.n_draws < 1000) throw ConfigError("random-walk Metropolis needs at least 1000 draws");
  if (options.burn_in < 0 || options.burn_in >= options.n_draws) {
    throw ConfigError("burn-in must lie in [0, n_draws)");
  }
  if (!(options.step_scale > 0.0)) throw ConfigError("step scale must be positive");
  Eigen::MatrixXd factor = Eigen::MatrixXd::Identity(d, d);
  if (options.proposal_factor) {
    if (options.proposal_factor->rows() != d || options.proposal_factor->cols() != d) {
      throw DimMismatchError("proposal factor must be d x d");
    }
    factor = *options.proposal_factor;
  }

  Eigen::VectorXd theta = options.start ? *options.start : Eigen::VectorXd::Zero(d);
  if (theta.size() != d) throw DimMismatchError("start point has the wrong dimension");
  double current = log_post(theta);
  if (!std::isfinite(current)) {
    throw NonFiniteLogPostError("log posterior is not finite at the initial point");
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double scale = options.step_scale;
  Chain chain;
  chain.burn_in = options.burn_in;
  chain.draws.resize(options.n_draws - options.burn_in, d);
  Eigen::Index window_accepts = 0;
  Eigen::Index kept_accepts = 0;

  for (Eigen::Index it = 0; it < options.n_draws; ++it) {
    const Eigen::VectorXd proposal = theta + scale * (factor * standard_normal(d, rng));
    const double candidate = safe_eval(log_post, proposal);
    const bool accept = unif(rng) < metropolis_accept_probability(candidate - current);
    if (accept) {
      theta = proposal;
      current = candidate;
    }
    if (it < options.burn_in) {
      window_accepts += accept ? 1 : 0;
      if ((it + 1) % kAdaptWindow == 0) {
        const double rate = static_cast<double>(window_accepts) / kAdaptWindow;
        if (rate < 0.2) scale *= 0.8;
        else if (rate > 0.4) scale *= 1.25;
        window_accepts = 0;
      }
    } else {
      kept_accepts += accept ? 1 : 0;
      chain.draws.row(it - options.burn_in) = theta.transpose();
    }
  }
  chain.acceptance_rate =
      static_cast<double>(kept_accepts) / static_cast<double>(chain.draws.rows());
  chain.step_scale = scale;
  return chain;
}

MleResult mle_fit(const LogDensityFn& loglik, Eigen::Index d, const Eigen::VectorXd& x0,
                  const MleOptions& options) {
  if (x0.size() != d) throw DimMismatchError("mle_fit: start point has the wrong dimension");
  // Minimise the negated log-likelihood.
  auto objective = [&](const Eigen::VectorXd& x) { return -safe_eval(loglik, x); };

  MleResult result{x0, -objective(x0), 1};
  const auto n = static_cast<std::size_t>(d + 1);
  for (int restart = 0; restart <= options.restarts; ++restart) {
    std::vector<Eigen::VectorXd> simplex(n, result.theta_hat);
    std::vector<double> values(n);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double step = options.initial_step * std::max(1.0, std::abs(result.theta_hat[i]));
      simplex[static_cast<std::size_t>(i) + 1][i] += step;
    }
    int evals = 0;
    for (std::size_t k = 0; k < n; ++k) {
      values[k] = objective(simplex[k]);
      ++evals;
    }
    std::vector<std::size_t> order(n);

    while (evals < options.max_evaluations) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
      const std::size_t best = order.front();
      const std::size_t worst = order.back();
      const std::size_t second = order[n - 2];

      double diameter = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        diameter = std::max(diameter, (simplex[k] - simplex[best]).lpNorm<Eigen::Infinity>());
      }
      if (diameter < options.tolerance) break;

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
      for (std::size_t k = 0; k < n; ++k) {
        if (k != worst) centroid += simplex[k];
      }
      centroid /= static_cast<double>(d);

      const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
      const double f_r = objective(reflected);
      ++evals;
      if (f_r < values[best]) {
        const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
        const double f_e = objective(expanded);
        ++evals;
        if (f_e < f_r) {
          simplex[worst] = expanded;
          values[worst] = f_e;
        } else {
          simplex[worst] = reflected;
          values[worst] = f_r;
        }
        continue;
      }
      if (f_r < values[second]) {
        simplex[worst] = reflected;
        values[worst] = f_r;
        continue;
      }
      const bool outside = f_r < values[worst];
      const Eigen::VectorXd contracted =
          outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                  : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
      const double f_c = objective(contracted);
      ++evals;
      if (f_c < (outside ? f_r : values[worst])) {
        simplex[worst] = contracted;
        values[worst] = f_c;
        continue;
      }
      for (std::size_t k = 0; k < n; ++k) {
        if (k == best) continue;
        simplex[k] = simplex[best] + 0.5 * (simplex[k] - simplex[best]);
        values[k] = objective(simplex[k]);
        ++evals;
      }
    }
    result.evaluations += evals;
    const auto best_it = std::min_element(values.begin(), values.end());
    const auto best_k = static_cast<std::size_t>(std::distance(values.begin(), best_it));
    if (-*best_it >= result.ll_hat) {
      result.ll_hat = -*best_it;
      result.theta_hat = simplex[best_k];
    }
  }
  return result;
}

ClassificationMetrics metrics_classification(const Eigen::VectorXd& probs,
                                             const Eigen::VectorXd& labels) {
  if (probs.size() != labels.size() || probs.size() == 0) {
    throw DimMismatchError("probabilities and labels must be non-empty and of equal length");
  }
  constexpr double kTiny = std::numeric_limits<double>::min();
  double tp = 0, fp = 0, fn = 0, tn = 0, ll = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    const bool actual = labels[i] == 1.0;
    const bool predicted = p >= 0.5;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
    ll += actual ? std::log(std::max(p, kTiny)) : std::log(std::max(1.0 - p, kTiny));
  }
  auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
  ClassificationMetrics m;
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.accuracy = (tp + tn) / static_cast<double>(probs.size());
  m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  m.ll = ll;
  return m;
}

RegressionMetrics metrics_regression(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets,
                                     double sigma2) {
  if (preds.size() != targets.size() || preds.size() == 0) {
    throw DimMismatchError("predictions and targets must be non-empty and of equal length");
  }
  if (!(sigma2 > 0.0)) throw DomainError("noise variance must be positive");
  const double n = static_cast<double>(preds.size());
  const double rss = (preds - targets).squaredNorm();
  return {rss / n, -0.5 * n * (kLog2Pi + std::log(sigma2)) - 0.5 * rss / sigma2};
}

}  // namespace qbvi
