#include "qbvi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qbvi/error.hpp"
#include "qbvi/gradient_estimator.hpp"

namespace qbvi {
namespace {

GaussianVariational initial_state(const TrainConfig& config) {
  if (config.init) {
    if (config.init->structure() != config.structure) {
      throw ConfigError("initial distribution does not match the covariance structure");
    }
    return *config.init;
  }
  return config.prior.distribution(config.structure);
}

GaussianVariational prior_density(const PriorSpec& prior) {
  return GaussianVariational::full(prior.mu0, prior.prec0);
}

// Tracks the smoothed bound and the best distribution seen so far.
class Monitor {
 public:
  Monitor(const TrainConfig& config, GaussianVariational q0) : config_(config), best_(std::move(q0)) {}

  // Returns true when training should stop.
  template <class Fill>
  bool record(int iter, double lb, const GaussianVariational& q, const IGParams* noise,
              const Fill& fill) {
    raw_.push_back(lb);
    const double smoothed = smooth_lb(raw_, config_.window);
    smoothed_.push_back(smoothed);
    TraceRow row{iter, lb, smoothed, std::nan(""), std::nan("")};
    fill(row);
    trace_.push_back(row);
    if (trace_.size() == 1 || smoothed > best_value_) {
      best_value_ = smoothed;
      best_iter_ = iter;
      best_ = q;
      if (noise != nullptr) best_noise_ = *noise;
    }
    return should_stop(smoothed_, config_.patience);
  }

  FitResult finish(ExitReason reason) && {
    return {std::move(best_), best_noise_, best_iter_, std::move(trace_), reason};
  }

 private:
  const TrainConfig& config_;
  std::vector<double> raw_;
  std::vector<double> smoothed_;
  std::vector<TraceRow> trace_;
  GaussianVariational best_;
  std::optional<IGParams> best_noise_;
  double best_value_ = 0.0;
  int best_iter_ = 0;
};

}  // namespace

TrainConfig TrainConfig::defaults(Eigen::Index d) {
  TrainConfig c;
  c.prior = PriorSpec::isotropic(d, 0.2);
  return c;
}

void TrainConfig::validate(Eigen::Index d) const {
  auto fail = [](const std::string& m) { throw ConfigError("invalid training config: " + m); };
  if (!(beta > 0.0 && beta < 1.0)) fail("beta must lie in (0, 1)");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (window < 1) fail("window must be at least 1");
  if (patience < 1) fail("patience must be at least 1");
  if (!(clip_norm > 0.0)) fail("clip norm must be positive");
  if (n_samples < 1) fail("n_samples must be at least 1");
  if (cv_enabled && n_samples < 2) fail("control variates need at least 2 samples");
  if (max_iters < 1) fail("max_iters must be at least 1");
  if (t_prime < 1) fail("t_prime must be at least 1");
  if (batch_size && *batch_size < 1) fail("batch size must be at least 1");
  if (!pd_strategy.supports(structure)) {
    fail(std::string(to_string(pd_strategy.kind)) + " does not apply to this covariance structure");
  }
  if (prior.dim() != d) {
    throw ConfigError("prior dimension " + std::to_string(prior.dim()) +
                      " does not match model dimension " + std::to_string(d));
  }
  if (init && init->dim() != d) throw ConfigError("initial distribution has the wrong dimension");
}

std::string_view to_string(ExitReason reason) {
  return reason == ExitReason::Patience ? "patience" : "max_iters";
}

double lb_from_draws(const GaussianVariational& q, const PriorSpec& prior,
                     const Eigen::MatrixXd& draws, const Eigen::VectorXd& loglik) {
  if (draws.rows() < 1) throw InsufficientSamplesError("bound estimate needs at least one draw");
  const GaussianVariational p0 = prior_density(prior);
  double total = 0.0;
  for (Eigen::Index s = 0; s < draws.rows(); ++s) {
    const Eigen::VectorXd theta = draws.row(s).transpose();
    total += log_density(p0, theta) + loglik[s] - log_density(q, theta);
  }
  return total / static_cast<double>(draws.rows());
}

double estimate_lb(const GaussianVariational& q, const PriorSpec& prior, const Model& model,
                   Eigen::Index n, Rng& rng) {
  if (n < 1) throw InsufficientSamplesError("bound estimate needs at least one draw");
  const Eigen::MatrixXd draws = sample(q, n, rng);
  const Eigen::VectorXd ll =
      evaluate_loglik([&](const Eigen::VectorXd& t) { return model.loglik(t); }, draws);
  return lb_from_draws(q, prior, draws, ll);
}

double smooth_lb(std::span<const double> trace, int w) {
  if (trace.empty()) throw InsufficientSamplesError("smooth_lb: empty trace");
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::max(w, 1)), trace.size());
  const auto tail = trace.last(k);
  return std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(k);
}

bool should_stop(std::span<const double> smoothed, int patience) {
  if (smoothed.empty()) return false;
  const auto best = std::max_element(smoothed.begin(), smoothed.end());
  const auto since = std::distance(best, smoothed.end()) - 1;
  return since > patience;
}

Eigen::VectorXd clip_gradient(const Eigen::VectorXd& g, double l_max) {
  const double norm = g.norm();
  if (norm > l_max) return g * (l_max / norm);
  return g;
}

Eigen::VectorXd momentum_update(const Eigen::VectorXd& g_bar, const Eigen::VectorXd& g_hat,
                                double gamma) {
  return gamma * g_bar + (1.0 - gamma) * g_hat;
}

double step_size(int t, double beta, int t_prime) {
  if (t < 1) throw ConfigError("iteration counter starts at 1");
  return std::min(beta, beta * static_cast<double>(t_prime) / static_cast<double>(t));
}

BatchSampler::BatchSampler(Eigen::Index n_rows, Eigen::Index batch_size)
    : perm_(static_cast<std::size_t>(n_rows)), batch_(batch_size), pos_(n_rows) {
  if (batch_size < 1 || batch_size > n_rows) {
    throw ConfigError("batch size must lie in [1, " + std::to_string(n_rows) + "]");
  }
  std::iota(perm_.begin(), perm_.end(), Eigen::Index{0});
}

std::span<const Eigen::Index> BatchSampler::next(Rng& rng) {
  if (pos_ + batch_ > static_cast<Eigen::Index>(perm_.size())) {
    std::shuffle(perm_.begin(), perm_.end(), rng);
    pos_ = 0;
  }
  std::span<const Eigen::Index> out(perm_.data() + pos_, static_cast<std::size_t>(batch_));
  pos_ += batch_;
  return out;
}

FitResult fit(const Model& model, const TrainConfig& config, const IterationCallback& on_iteration) {
  const Eigen::Index d = model.dim();
  config.validate(d);

  Rng rng(config.seed);
  std::optional<BatchSampler> batches;
  double batch_scale = 1.0;
  if (config.batch_size && *config.batch_size < model.num_rows()) {
    batches.emplace(model.num_rows(), *config.batch_size);
    batch_scale = static_cast<double>(model.num_rows()) / static_cast<double>(*config.batch_size);
  } else if (config.batch_size && model.num_rows() == 0) {
    throw ConfigError("mini-batching requested for a model without rows");
  }

  GaussianVariational q = initial_state(config);
  Monitor monitor(config, q);
  std::optional<GradientEstimate> previous;
  std::optional<GaussianVariational> previous_q;
  std::optional<Eigen::VectorXd> g_bar;

  for (int t = 1; t <= config.max_iters; ++t) {
    Eigen::MatrixXd draws = sample(q, config.n_samples, rng);
    LogLikFn loglik = [&model](const Eigen::VectorXd& th) { return model.loglik(th); };
    if (batches) {
      const auto rows = batches->next(rng);
      loglik = [&model, rows, batch_scale](const Eigen::VectorXd& th) {
        return batch_scale * model.loglik_rows(th, rows);
      };
    }
    Eigen::VectorXd ll = evaluate_loglik(loglik, draws);

    const double lb = lb_from_draws(q, config.prior, draws, ll);
    if (monitor.record(t, lb, q, nullptr, [&](TraceRow& row) {
          if (on_iteration) on_iteration(q, row);
        })) {
      return std::move(monitor).finish(ExitReason::Patience);
    }
    if (t == config.max_iters) break;

    if (config.cv_enabled && !previous) {
      // Baselines for the first step come from an independent pilot batch.
      Eigen::MatrixXd pilot = sample(q, config.n_samples, rng);
      Eigen::VectorXd pilot_ll = evaluate_loglik(loglik, pilot);
      previous = estimate_from_draws(q, std::move(pilot), std::move(pilot_ll));
      previous_q = q;
    }
    std::optional<CvCoefficients> c;
    if (config.cv_enabled) c = cv_coefficients(*previous, *previous_q);
    GradientEstimate est = estimate_from_draws(q, std::move(draws), std::move(ll), c ? &*c : nullptr);

    NaturalGradient dir = natural_gradient(q, config.prior, est);
    Eigen::VectorXd flat = clip_gradient(dir.flatten(), config.clip_norm);
    g_bar = g_bar ? momentum_update(*g_bar, flat, config.momentum) : flat;
    dir.assign_flat(*g_bar);

    const double beta_t = step_size(t, config.beta, config.t_prime);
    StepOutcome step = apply_update(q, dir, beta_t, config.pd_strategy);
    previous = std::move(est);
    previous_q = q;
    q = std::move(step.q);
  }
  return std::move(monitor).finish(ExitReason::MaxIters);
}

FitResult fit_mean_field(const NoiseLogLikFn& loglik, Eigen::Index d, const TrainConfig& config,
                         const IGParams& noise_prior, const MeanFieldCallback& on_iteration) {
  config.validate(d);
  if (config.structure != CovStructure::Diagonal) {
    throw ConfigError("mean-field fitting uses the diagonal covariance structure");
  }
  const IGParams prior_noise = IGParams::make(noise_prior.alpha, noise_prior.beta);
  const MeanFieldPriors priors{config.prior, prior_noise};
  MeanFieldStepOptions options{config.pd_strategy, config.cv_enabled, false};

  Rng rng(config.seed);
  GaussianVariational q = initial_state(config);
  IGParams noise = config.noise_init
                       ? IGParams::make(config.noise_init->alpha, config.noise_init->beta)
                       : prior_noise;
  Monitor monitor(config, q);
  std::optional<MeanFieldStepResult> previous;

  for (int t = 1; t <= config.max_iters; ++t) {
    const double beta_t = step_size(t, config.beta, config.t_prime);
    if (config.cv_enabled && !previous) {
      previous = mf_pilot(q, noise, loglik, config.n_samples, rng);
    }
    MeanFieldStepResult step = mf_step(q, noise, priors, loglik, config.n_samples, rng, beta_t,
                                       options, previous ? &*previous : nullptr);
    if (monitor.record(t, step.lb, q, &noise, [&](TraceRow& row) {
          if (on_iteration) on_iteration(q, noise, row);
        })) {
      return std::move(monitor).finish(ExitReason::Patience);
    }
    q = step.q_theta;
    noise = step.q_noise;
    previous = std::move(step);
  }
  return std::move(monitor).finish(ExitReason::MaxIters);
}

}  // namespace qbvi
