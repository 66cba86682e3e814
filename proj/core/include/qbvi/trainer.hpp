#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "qbvi/gaussian_family.hpp"
#include "qbvi/inverse_gamma.hpp"
#include "qbvi/models.hpp"
#include "qbvi/qbvi_updates.hpp"
#include "qbvi/random.hpp"

namespace qbvi {

struct TrainConfig {
  double beta = 0.1;
  int t_prime = 800;
  int patience = 500;
  int window = 30;
  double momentum = 0.4;
  double clip_norm = 1000.0;
  Eigen::Index n_samples = 100;
  int max_iters = 1000;
  std::optional<Eigen::Index> batch_size;
  std::uint64_t seed = 0;
  PdStrategy pd_strategy = PdStrategy::plain();
  bool cv_enabled = true;
  PriorSpec prior = PriorSpec::isotropic(1, 0.2);
  CovStructure structure = CovStructure::Full;
  /// Starting point; the prior when unset.
  std::optional<GaussianVariational> init;
  /// Starting noise factor for fit_mean_field; the noise prior when unset.
  std::optional<IGParams> noise_init;

  /// Defaults with an isotropic N(0, 5 I) prior of dimension d.
  static TrainConfig defaults(Eigen::Index d);
  /// Throws ConfigError on out-of-range values or a prior of the wrong dimension.
  void validate(Eigen::Index d) const;
};

enum class ExitReason { Patience, MaxIters };
std::string_view to_string(ExitReason reason);

struct TraceRow {
  int iter = 0;
  double lb_raw = 0.0;
  double lb_smoothed = 0.0;
  double train_ll = 0.0;
  double test_ll = 0.0;
};

struct FitResult {
  GaussianVariational best_q;
  std::optional<IGParams> best_noise;
  int best_iter = 0;
  std::vector<TraceRow> trace;
  ExitReason exit_reason = ExitReason::MaxIters;
};

/// Called once per iteration with the distribution whose bound was just
/// recorded; may fill train_ll / test_ll on the row.
using IterationCallback = std::function<void(const GaussianVariational& q, TraceRow& row)>;
/// Mean-field variant that also sees the noise factor.
using MeanFieldCallback =
    std::function<void(const GaussianVariational& q, const IGParams& noise, TraceRow& row)>;

/// Mean over n draws of log p(theta) + log p(y | theta) - log q(theta).
double estimate_lb(const GaussianVariational& q, const PriorSpec& prior, const Model& model,
                   Eigen::Index n, Rng& rng);
double lb_from_draws(const GaussianVariational& q, const PriorSpec& prior,
                     const Eigen::MatrixXd& draws, const Eigen::VectorXd& loglik);

/// Mean of the last min(w, size) entries.
double smooth_lb(std::span<const double> trace, int w);
/// True when the running maximum was reached more than `patience` entries ago.
bool should_stop(std::span<const double> smoothed, int patience);
Eigen::VectorXd clip_gradient(const Eigen::VectorXd& g, double l_max);
Eigen::VectorXd momentum_update(const Eigen::VectorXd& g_bar, const Eigen::VectorXd& g_hat,
                                double gamma);
/// min(beta, beta t' / t).
double step_size(int t, double beta, int t_prime);

/// Row indices for mini-batches drawn without replacement, reshuffled every epoch.
class BatchSampler {
 public:
  BatchSampler(Eigen::Index n_rows, Eigen::Index batch_size);
  std::span<const Eigen::Index> next(Rng& rng);

 private:
  std::vector<Eigen::Index> perm_;
  Eigen::Index batch_;
  Eigen::Index pos_;
};

FitResult fit(const Model& model, const TrainConfig& config,
              const IterationCallback& on_iteration = {});

/// Gaussian x Inverse-Gamma mean-field fit for a likelihood with unknown noise
/// variance. Uses the step-size schedule, bound smoothing and patience of
/// `config`; config.structure must be Diagonal.
FitResult fit_mean_field(const NoiseLogLikFn& loglik, Eigen::Index d, const TrainConfig& config,
                         const IGParams& noise_prior,
                         const MeanFieldCallback& on_iteration = {});

}  // namespace qbvi
