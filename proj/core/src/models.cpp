#include "qbvi/models.hpp"

#include <cmath>
#include <string>

#include "qbvi/error.hpp"

namespace qbvi {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_theta(const Eigen::VectorXd& theta, const Dataset& data, const char* fn) {
  if (theta.size() != data.cols()) {
    throw DimMismatchError(std::string(fn) + ": theta has " + std::to_string(theta.size()) +
                           " entries, data has " + std::to_string(data.cols()) + " columns");
  }
}

void check_rows(std::span<const Eigen::Index> rows, const Dataset& data) {
  for (Eigen::Index r : rows) {
    if (r < 0 || r >= data.rows()) throw DimMismatchError("row index out of range");
  }
}

double logistic_term(double eta, double y) {
  // y log s(eta) + (1 - y) log s(-eta)
  return y * log_sigmoid(eta) + (1.0 - y) * log_sigmoid(-eta);
}

double gaussian_term(double resid, double sigma2) {
  return -0.5 * (kLog2Pi + std::log(sigma2)) - 0.5 * resid * resid / sigma2;
}

void check_sigma2(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw DomainError("noise variance must be positive, got " + std::to_string(sigma2));
  }
}

double apply_one(Transform t, double x) {
  switch (t) {
    case Transform::Identity: return x;
    case Transform::Sigmoid: return sigmoid(x);
    case Transform::Exp: return std::exp(x);
  }
  return x;
}

}  // namespace

Dataset Dataset::make(Eigen::MatrixXd X, Eigen::VectorXd y) {
  if (X.rows() < 1) throw DimMismatchError("dataset needs at least one row");
  if (X.rows() != y.size()) {
    throw DimMismatchError("dataset has " + std::to_string(X.rows()) + " rows but " +
                           std::to_string(y.size()) + " targets");
  }
  if (!X.allFinite() || !y.allFinite()) throw DomainError("dataset contains non-finite values");
  return {std::move(X), std::move(y)};
}

Dataset Dataset::subset(std::span<const Eigen::Index> idx) const {
  check_rows(idx, *this);
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
  out.y.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.X.row(static_cast<Eigen::Index>(k)) = X.row(idx[k]);
    out.y[static_cast<Eigen::Index>(k)] = y[idx[k]];
  }
  return out;
}

Dataset Dataset::with_intercept() const {
  Dataset out;
  out.X.resize(X.rows(), X.cols() + 1);
  out.X.col(0).setOnes();
  out.X.rightCols(X.cols()) = X;
  out.y = y;
  return out;
}

bool Dataset::has_binary_targets() const {
  return (y.array() == 0.0 || y.array() == 1.0).all();
}

double log_sigmoid(double x) noexcept {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logistic_loglik(const Eigen::VectorXd& theta, const Dataset& data) {
  check_theta(theta, data, "logistic_loglik");
  const Eigen::VectorXd eta = data.X * theta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) total += logistic_term(eta[i], data.y[i]);
  return total;
}

double logistic_loglik(const Eigen::VectorXd& theta, const Dataset& data,
                       std::span<const Eigen::Index> rows) {
  check_theta(theta, data, "logistic_loglik");
  check_rows(rows, data);
  double total = 0.0;
  for (Eigen::Index r : rows) total += logistic_term(data.X.row(r).dot(theta), data.y[r]);
  return total;
}

double gaussian_reg_loglik(const Eigen::VectorXd& theta, double sigma2, const Dataset& data) {
  check_sigma2(sigma2);
  check_theta(theta, data, "gaussian_reg_loglik");
  const double n = static_cast<double>(data.rows());
  const double rss = (data.y - data.X * theta).squaredNorm();
  return -0.5 * n * (kLog2Pi + std::log(sigma2)) - 0.5 * rss / sigma2;
}

double gaussian_reg_loglik(const Eigen::VectorXd& theta, double sigma2, const Dataset& data,
                           std::span<const Eigen::Index> rows) {
  check_sigma2(sigma2);
  check_theta(theta, data, "gaussian_reg_loglik");
  check_rows(rows, data);
  double total = 0.0;
  for (Eigen::Index r : rows) total += gaussian_term(data.y[r] - data.X.row(r).dot(theta), sigma2);
  return total;
}

Dataset har_features(const Eigen::VectorXd& rv) {
  constexpr Eigen::Index kLags = 22;
  const Eigen::Index T = rv.size();
  if (T <= kLags) {
    throw TooShortError("HAR features need more than 22 observations, got " + std::to_string(T));
  }
  const Eigen::Index n = T - kLags;
  Dataset out;
  out.X.resize(n, 4);
  out.y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index t = r + kLags;  // 0-based index of the target
    out.X(r, 0) = 1.0;
    out.X(r, 1) = rv[t - 1];
    out.X(r, 2) = rv.segment(t - 5, 5).mean();
    out.X(r, 3) = rv.segment(t - kLags, kLags).mean();
    out.y[r] = rv[t];
  }
  return out;
}

GarchParams garch_transform(const Eigen::VectorXd& psi) {
  if (psi.size() != 3) throw DimMismatchError("GARCH parameters have 3 entries");
  const double fa = sigmoid(psi[1]);
  const double fb = sigmoid(psi[2]);
  return {sigmoid(psi[0]), fa * (1.0 - fb), fa * fb};
}

double garch_loglik(const GarchParams& params, const Eigen::VectorXd& returns) {
  const Eigen::Index T = returns.size();
  if (T < 2) throw TooShortError("GARCH log-likelihood needs at least 2 returns");
  const double mean = returns.mean();
  double h = (returns.array() - mean).square().sum() / static_cast<double>(T - 1);
  double total = 0.0;
  for (Eigen::Index t = 1; t < T; ++t) {
    h = params.omega + params.alpha * returns[t - 1] * returns[t - 1] + params.beta * h;
    total += gaussian_term(returns[t], h);
  }
  return total;
}

double garch_loglik(const Eigen::VectorXd& psi, const Eigen::VectorXd& returns) {
  return garch_loglik(garch_transform(psi), returns);
}

Eigen::VectorXd simulate_garch(const GarchParams& params, Eigen::Index T, Rng& rng) {
  if (!(params.omega > 0.0 && params.alpha >= 0.0 && params.beta >= 0.0 &&
        params.alpha + params.beta < 1.0)) {
    throw DomainError("GARCH parameters must satisfy omega > 0, alpha + beta < 1");
  }
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd r(T);
  double h = params.omega / (1.0 - params.alpha - params.beta);
  double prev = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t > 0) h = params.omega + params.alpha * prev * prev + params.beta * h;
    prev = std::sqrt(h) * z(rng);
    r[t] = prev;
  }
  return r;
}

TransformChain TransformChain::identity(Eigen::Index d) {
  return elementwise(std::vector<Transform>(static_cast<std::size_t>(d), Transform::Identity));
}

TransformChain TransformChain::elementwise(std::vector<Transform> tags) {
  TransformChain c;
  c.tags_ = std::move(tags);
  return c;
}

TransformChain TransformChain::garch() {
  TransformChain c;
  c.tags_ = {Transform::Sigmoid, Transform::Sigmoid, Transform::Sigmoid};
  c.garch_ = true;
  return c;
}

Eigen::VectorXd apply_transforms(const TransformChain& chain, const Eigen::VectorXd& theta_raw) {
  if (theta_raw.size() != chain.dim()) {
    throw DimMismatchError("transform chain and parameter vector differ in length");
  }
  if (chain.is_garch()) {
    const GarchParams p = garch_transform(theta_raw);
    return Eigen::Vector3d(p.omega, p.alpha, p.beta);
  }
  Eigen::VectorXd out(theta_raw.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[i] = apply_one(chain.tags()[static_cast<std::size_t>(i)], theta_raw[i]);
  }
  return out;
}

double Model::loglik_rows(const Eigen::VectorXd&, std::span<const Eigen::Index>) const {
  throw ConfigError("this model does not support mini-batching");
}

LogisticModel::LogisticModel(Dataset data) : data_(std::move(data)) {
  if (!data_.has_binary_targets()) throw DomainError("logistic targets must be 0 or 1");
}

double LogisticModel::loglik(const Eigen::VectorXd& theta) const {
  return logistic_loglik(theta, data_);
}

double LogisticModel::loglik_rows(const Eigen::VectorXd& theta,
                                  std::span<const Eigen::Index> rows) const {
  return logistic_loglik(theta, data_, rows);
}

GaussianRegressionModel::GaussianRegressionModel(Dataset data, double sigma2)
    : data_(std::move(data)), sigma2_(sigma2) {
  check_sigma2(sigma2_);
}

double GaussianRegressionModel::loglik(const Eigen::VectorXd& theta) const {
  return gaussian_reg_loglik(theta, sigma2_, data_);
}

double GaussianRegressionModel::loglik_rows(const Eigen::VectorXd& theta,
                                            std::span<const Eigen::Index> rows) const {
  return gaussian_reg_loglik(theta, sigma2_, data_, rows);
}

GarchModel::GarchModel(Eigen::VectorXd returns) : returns_(std::move(returns)) {
  if (returns_.size() < 2) throw TooShortError("GARCH model needs at least 2 returns");
  if (!returns_.allFinite()) throw DomainError("returns contain non-finite values");
}

double GarchModel::loglik(const Eigen::VectorXd& psi) const { return garch_loglik(psi, returns_); }

}  // namespace qbvi
