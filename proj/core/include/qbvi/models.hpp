#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "qbvi/gradient_estimator.hpp"

namespace qbvi {

/// Covariates X (n x p) and targets y (n).
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  /// Rejects empty data, non-finite entries and mismatched shapes.
  static Dataset make(Eigen::MatrixXd X, Eigen::VectorXd y);

  Eigen::Index rows() const noexcept { return X.rows(); }
  Eigen::Index cols() const noexcept { return X.cols(); }
  Dataset subset(std::span<const Eigen::Index> idx) const;
  /// Prepends a column of ones.
  Dataset with_intercept() const;
  bool has_binary_targets() const;
};

double log_sigmoid(double x) noexcept;
double sigmoid(double x) noexcept;

double logistic_loglik(const Eigen::VectorXd& theta, const Dataset& data);
double logistic_loglik(const Eigen::VectorXd& theta, const Dataset& data,
                       std::span<const Eigen::Index> rows);
double gaussian_reg_loglik(const Eigen::VectorXd& theta, double sigma2, const Dataset& data);
double gaussian_reg_loglik(const Eigen::VectorXd& theta, double sigma2, const Dataset& data,
                           std::span<const Eigen::Index> rows);

/// Rows t = 23..T of [1, rv_{t-1}, mean(rv_{t-5..t-1}), mean(rv_{t-22..t-1})] -> rv_t.
Dataset har_features(const Eigen::VectorXd& rv);

struct GarchParams {
  double omega;
  double alpha;
  double beta;
};

/// omega = f(psi_0), alpha = f(psi_1)(1 - f(psi_2)), beta = f(psi_1) f(psi_2), f the logistic.
GarchParams garch_transform(const Eigen::VectorXd& psi);
/// Gaussian GARCH(1,1) log-likelihood over t = 2..T with h_1 the sample variance.
double garch_loglik(const Eigen::VectorXd& psi, const Eigen::VectorXd& returns);
double garch_loglik(const GarchParams& params, const Eigen::VectorXd& returns);
/// Simulates T returns started from the stationary variance.
Eigen::VectorXd simulate_garch(const GarchParams& params, Eigen::Index T, Rng& rng);

enum class Transform { Identity, Sigmoid, Exp };

class TransformChain {
 public:
  static TransformChain identity(Eigen::Index d);
  static TransformChain elementwise(std::vector<Transform> tags);
  /// psi -> (omega, alpha, beta).
  static TransformChain garch();

  Eigen::Index dim() const noexcept { return static_cast<Eigen::Index>(tags_.size()); }
  bool is_garch() const noexcept { return garch_; }
  const std::vector<Transform>& tags() const noexcept { return tags_; }

 private:
  std::vector<Transform> tags_;
  bool garch_ = false;
};

Eigen::VectorXd apply_transforms(const TransformChain& chain, const Eigen::VectorXd& theta_raw);

/// Log-likelihood interface consumed by the trainer.
class Model {
 public:
  virtual ~Model() = default;

  virtual Eigen::Index dim() const = 0;
  /// Rows available for mini-batching; 0 when the model cannot be batched.
  virtual Eigen::Index num_rows() const { return 0; }
  virtual double loglik(const Eigen::VectorXd& theta) const = 0;
  /// Log-likelihood restricted to `rows`. Throws ConfigError unless batchable.
  virtual double loglik_rows(const Eigen::VectorXd& theta,
                             std::span<const Eigen::Index> rows) const;
  virtual TransformChain transforms() const { return TransformChain::identity(dim()); }
};

class FunctionModel final : public Model {
 public:
  FunctionModel(Eigen::Index d, LogLikFn fn) : d_(d), fn_(std::move(fn)) {}
  Eigen::Index dim() const override { return d_; }
  double loglik(const Eigen::VectorXd& theta) const override { return fn_(theta); }

 private:
  Eigen::Index d_;
  LogLikFn fn_;
};

/// loglik == c for every theta.
class ConstantModel final : public Model {
 public:
  ConstantModel(Eigen::Index d, double c) : d_(d), c_(c) {}
  Eigen::Index dim() const override { return d_; }
  double loglik(const Eigen::VectorXd&) const override { return c_; }

 private:
  Eigen::Index d_;
  double c_;
};

class LogisticModel final : public Model {
 public:
  explicit LogisticModel(Dataset data);
  Eigen::Index dim() const override { return data_.cols(); }
  Eigen::Index num_rows() const override { return data_.rows(); }
  double loglik(const Eigen::VectorXd& theta) const override;
  double loglik_rows(const Eigen::VectorXd& theta,
                     std::span<const Eigen::Index> rows) const override;
  const Dataset& data() const noexcept { return data_; }

 private:
  Dataset data_;
};

/// Linear regression with a fixed noise variance.
class GaussianRegressionModel final : public Model {
 public:
  GaussianRegressionModel(Dataset data, double sigma2);
  Eigen::Index dim() const override { return data_.cols(); }
  Eigen::Index num_rows() const override { return data_.rows(); }
  double loglik(const Eigen::VectorXd& theta) const override;
  double loglik_rows(const Eigen::VectorXd& theta,
                     std::span<const Eigen::Index> rows) const override;
  const Dataset& data() const noexcept { return data_; }
  double sigma2() const noexcept { return sigma2_; }

 private:
  Dataset data_;
  double sigma2_;
};

/// GARCH(1,1) on a return series, parametrised by unconstrained psi.
class GarchModel final : public Model {
 public:
  explicit GarchModel(Eigen::VectorXd returns);
  Eigen::Index dim() const override { return 3; }
  double loglik(const Eigen::VectorXd& psi) const override;
  TransformChain transforms() const override { return TransformChain::garch(); }
  const Eigen::VectorXd& returns() const noexcept { return returns_; }

 private:
  Eigen::VectorXd returns_;
};

}  // namespace qbvi
