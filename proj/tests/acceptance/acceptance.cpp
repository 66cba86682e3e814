// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qbvi/baselines.hpp"
#include "qbvi/error.hpp"
#include "qbvi/gaussian_family.hpp"
#include "qbvi/gradient_estimator.hpp"
#include "qbvi/inverse_gamma.hpp"
#include "qbvi/models.hpp"
#include "qbvi/qbvi_updates.hpp"
#include "qbvi/trainer.hpp"
#include "qbvi_cli/app.hpp"
#include "support.hpp"

namespace {

using namespace qbvi;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

double min_eigenvalue(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

// ---------------------------------------------------------------------------
// 1. Conjugate posterior.

constexpr double kConjTol = 0.02;
constexpr double kConjSeconds = 30.0;

Outcome conjugate_posterior() {
  Outcome out;
  Rng data_rng(101);
  const double sigma2 = 1.0;
  const Dataset data =
      test::synthetic_regression(200, Eigen::Vector4d(0.5, -1.0, 2.0, 0.3), sigma2, data_rng);
  const auto prior = PriorSpec::isotropic(4, 0.2);
  const auto post = test::conjugate_posterior(data, sigma2, prior);
  const GaussianRegressionModel model(data, sigma2);

  struct Case {
    const char* name;
    CovStructure structure;
    PdStrategy strategy;
  };
  const std::vector<Case> cases{{"full/plain", CovStructure::Full, PdStrategy::plain()},
                                {"full/retraction", CovStructure::Full, PdStrategy::retraction()},
                                {"diag/bounded", CovStructure::Diagonal,
                                 PdStrategy::bounded_step(0.999, 0.9)},
                                {"diag/logtransform", CovStructure::Diagonal,
                                 PdStrategy::log_transform()}};
  const auto t0 = Clock::now();
  for (const auto& c : cases) {
    TrainConfig config = TrainConfig::defaults(4);
    config.prior = prior;
    config.structure = c.structure;
    config.pd_strategy = c.strategy;
    config.beta = 0.01;
    config.clip_norm = 100.0;
    config.t_prime = 2000;
    config.max_iters = 2000;
    config.n_samples = 100;
    config.seed = 102;
    try {
      const auto r = fit(model, config);
      const double em = max_abs(r.best_q.mean() - post.mean);
      out.require(em < kConjTol, fmt("%s |mu-mu*|=%.4f", c.name, em));
      if (c.structure == CovStructure::Full) {
        const double es = max_abs(r.best_q.covariance() - post.cov);
        out.require(es < kConjTol, fmt("%s |S-S*|=%.4f", c.name, es));
        out.note(fmt("%s mu %.4f S %.4f", c.name, em, es));
      } else {
        out.note(fmt("%s mu %.4f", c.name, em));
      }
    } catch (const Error& e) {
      out.require(false, std::string(c.name) + " threw " + e.what());
    }
  }
  const double secs = seconds_since(t0);
  out.require(secs < kConjSeconds, fmt("took %.1fs", secs));
  out.note(fmt("%.1fs", secs));
  return out;
}

// ---------------------------------------------------------------------------
// 2. Score identities.

constexpr double kFdRelTol = 1e-5;
constexpr double kScoreSeconds = 10.0;

double log_density_cov(const Eigen::VectorXd& mu, const Eigen::MatrixXd& s,
                       const Eigen::VectorXd& theta) {
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  const Eigen::VectorXd w = llt.matrixL().solve(theta - mu);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (mu.size() * std::log(2.0 * std::numbers::pi) + logdet + w.squaredNorm());
}

// Largest relative error between score_m and finite differences of the
// covariance-chart density mapped to expectation coordinates.
double score_fd_error(const GaussianVariational& q, const Eigen::VectorXd& theta) {
  const Eigen::Index d = q.dim();
  const Eigen::VectorXd mu = q.mean();
  const Eigen::MatrixXd s = q.covariance();
  Eigen::VectorXd d_mu(d);
  Eigen::MatrixXd d_s(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    d_mu[i] = test::central_diff(
        [&](double x) {
          Eigen::VectorXd m = mu;
          m[i] = x;
          return log_density_cov(m, s, theta);
        },
        mu[i]);
    for (Eigen::Index j = i; j < d; ++j) {
      const double full = test::central_diff(
          [&](double x) {
            Eigen::MatrixXd t = s;
            t(i, j) = x;
            t(j, i) = x;
            return log_density_cov(mu, t, theta);
          },
          s(i, j));
      d_s(i, j) = d_s(j, i) = i == j ? full : 0.5 * full;
    }
  }
  const Eigen::VectorXd want_m1 = d_mu - 2.0 * d_s * mu;
  const auto g = score_m(q, theta);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    worst = std::max(worst, std::abs(g.g_m1[i] - want_m1[i]) / std::max(1.0, std::abs(want_m1[i])));
    for (Eigen::Index j = 0; j < d; ++j) {
      worst = std::max(worst, std::abs(g.g_m2(i, j) - d_s(i, j)) / std::max(1.0, std::abs(d_s(i, j))));
    }
  }
  return worst;
}

// Largest |mean| / SE over both score blocks.
double score_zero_mean_z(const GaussianVariational& q, Rng& rng) {
  const Eigen::Index n = 100000;
  const Eigen::Index d = q.dim();
  const Eigen::Index k2 = q.precision().size();
  const Eigen::MatrixXd draws = sample(q, n, rng);
  Eigen::MatrixXd rows(n, d + k2);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto g = score_m(q, draws.row(s).transpose());
    rows.row(s).head(d) = g.g_m1.transpose();
    rows.row(s).tail(k2) = g.g_m2.reshaped().transpose();
  }
  const auto stats = test::column_stats(rows);
  return (stats.mean.array().abs() / stats.se.array()).maxCoeff();
}

Outcome score_identities() {
  Outcome out;
  Rng rng(201);
  const auto t0 = Clock::now();
  double worst_fd = 0.0, worst_z = 0.0;
  for (Eigen::Index d : {1, 3, 5}) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto q = GaussianVariational::full(standard_normal(d, rng), test::random_spd(d, rng));
      const Eigen::VectorXd theta = sample(q, 1, rng).row(0).transpose();
      worst_fd = std::max(worst_fd, score_fd_error(q, theta));
    }
    const auto qf = GaussianVariational::full(standard_normal(d, rng), test::random_spd(d, rng));
    const auto qd = GaussianVariational::diagonal(standard_normal(d, rng),
                                                  standard_normal(d, rng).array().exp().matrix());
    worst_z = std::max({worst_z, score_zero_mean_z(qf, rng), score_zero_mean_z(qd, rng)});
  }
  const double secs = seconds_since(t0);
  out.require(worst_fd < kFdRelTol, fmt("fd rel err %.2e", worst_fd));
  out.require(worst_z < 3.0, fmt("score mean %.2f SE", worst_z));
  out.require(secs < kScoreSeconds, fmt("took %.1fs", secs));
  out.note(fmt("fd rel err %.1e, max |mean|/SE %.2f, %.1fs", worst_fd, worst_z, secs));
  return out;
}

// ---------------------------------------------------------------------------
// 3. Analytic control-variate variances.

constexpr double kVarRelTol = 0.03;
constexpr double kVarSeconds = 60.0;

Outcome analytic_variances() {
  Outcome out;
  Rng rng(301);
  const Eigen::Index n = 1000000;
  const auto t0 = Clock::now();
  double worst_rel = 0.0, worst_z = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    const auto q = GaussianVariational::full(standard_normal(3, rng), test::random_spd(3, rng));
    const Eigen::MatrixXd x = sample(q, n, rng);
    Eigen::MatrixXd g(n, 12);
    for (Eigen::Index s = 0; s < n; ++s) {
      const auto sc = score_m(q, x.row(s).transpose());
      g.row(s).head(3) = sc.g_m1.transpose();
      g.row(s).tail(9) = sc.g_m2.reshaped().transpose();
    }
    const Eigen::VectorXd var = test::column_stats(g).var;
    const Eigen::VectorXd v1 = analytic_var_m1(q);
    const Eigen::VectorXd v2 = analytic_var_m2(q).reshaped();
    for (int i = 0; i < 3; ++i) worst_rel = std::max(worst_rel, test::rel_err(var[i], v1[i]));
    for (int i = 0; i < 9; ++i) worst_rel = std::max(worst_rel, test::rel_err(var[3 + i], v2[i]));

    // Cov(theta_j, (V z)_j) with V = (theta - mu)(theta - mu)^T and z = S^-1 mu.
    const Eigen::VectorXd z = q.apply_precision(q.mean());
    for (Eigen::Index j = 0; j < 3; ++j) {
      Eigen::ArrayXd a(n), b(n);
      for (Eigen::Index s = 0; s < n; ++s) {
        const Eigen::VectorXd r = x.row(s).transpose() - q.mean();
        a[s] = x(s, j);
        b[s] = r[j] * r.dot(z);
      }
      const Eigen::ArrayXd prod = (a - a.mean()) * (b - b.mean());
      const double se = std::sqrt((prod - prod.mean()).square().sum() / (n - 1.0) / n);
      worst_z = std::max(worst_z, std::abs(prod.sum() / (n - 1.0)) / se);
    }
  }
  const double secs = seconds_since(t0);
  out.require(worst_rel < kVarRelTol, fmt("variance rel err %.4f", worst_rel));
  out.require(worst_z < 3.0, fmt("cross covariance %.2f SE", worst_z));
  out.require(secs < kVarSeconds, fmt("took %.1fs", secs));
  out.note(fmt("max rel err %.4f, cross term %.2f SE, %.1fs", worst_rel, worst_z, secs));
  return out;
}

// ---------------------------------------------------------------------------
// 4. Control-variate variance reduction.

constexpr double kMedianReduction = 0.20;

Outcome cv_reduction() {
  Outcome out;
  Rng data_rng(401);
  const Dataset data = test::synthetic_logistic(100, Eigen::Vector3d(0.4, -1.0, 0.8), data_rng);
  auto ll = [&](const Eigen::VectorXd& t) { return logistic_loglik(t, data); };
  const auto q = GaussianVariational::full(Eigen::Vector3d(0.3, -0.8, 0.6),
                                           25.0 * Eigen::Matrix3d::Identity());
  const int reps = 200;
  Rng rng(402);
  Eigen::MatrixXd naive(reps, 12), cv(reps, 12);
  auto flat = [](const GradientEstimate& e) {
    Eigen::VectorXd v(12);
    v << e.g_mu_term, e.g_prec_term.reshaped();
    return v;
  };
  for (int r = 0; r < reps; ++r) {
    const auto prev = estimate_naive(q, ll, 100, rng);
    const auto c = cv_coefficients(prev, q);
    naive.row(r) = flat(estimate_naive(q, ll, 100, rng)).transpose();
    cv.row(r) = flat(estimate_cv(q, ll, 100, rng, c)).transpose();
  }
  const Eigen::VectorXd vn = test::column_stats(naive).var;
  const Eigen::VectorXd vc = test::column_stats(cv).var;
  std::vector<double> reduction;
  int worse = 0;
  for (int j = 0; j < 12; ++j) {
    if (vc[j] > vn[j]) ++worse;
    reduction.push_back(1.0 - vc[j] / vn[j]);
  }
  std::sort(reduction.begin(), reduction.end());
  const double median = 0.5 * (reduction[5] + reduction[6]);
  out.require(worse == 0, fmt("%d components with larger CV variance", worse));
  out.require(median >= kMedianReduction, fmt("median reduction %.3f", median));
  out.note(fmt("median reduction %.3f, min %.3f", median, reduction.front()));
  return out;
}

// ---------------------------------------------------------------------------
// 5. Positive-definiteness fuzzing.

constexpr int kFuzzSteps = 10000;
constexpr double kFuzzSeconds = 30.0;

Outcome pd_fuzz() {
  Outcome out;
  Rng rng(501);
  std::uniform_real_distribution<double> unit(0.01, 0.99);
  const auto t0 = Clock::now();
  struct Case {
    const char* name;
    CovStructure structure;
    PdStrategy strategy;
  };
  const std::vector<Case> cases{{"plain", CovStructure::Full, PdStrategy::plain()},
                                {"retraction", CovStructure::Full, PdStrategy::retraction()},
                                {"bounded", CovStructure::Diagonal, PdStrategy::bounded_step(0.999, 0.9)},
                                {"logtransform", CovStructure::Diagonal, PdStrategy::log_transform()}};
  for (const auto& c : cases) {
    int bad = 0, refused = 0;
    for (int step = 0; step < kFuzzSteps; ++step) {
      const Eigen::Index d = 1 + step % 5;
      const double scale = std::exp(3.0 * standard_normal(1, rng)[0]);
      const auto prior = PriorSpec::isotropic(d, 0.2);
      GaussianVariational q =
          c.structure == CovStructure::Full
              ? GaussianVariational::full(standard_normal(d, rng), test::random_spd(d, rng, 0.05))
              : GaussianVariational::diagonal(standard_normal(d, rng),
                                              (2.0 * standard_normal(d, rng)).array().exp().matrix());
      GradientEstimate est;
      est.g_mu_term = scale * standard_normal(d, rng);
      if (c.structure == CovStructure::Full) {
        Eigen::MatrixXd a(d, d);
        for (Eigen::Index j = 0; j < d; ++j) a.col(j) = scale * standard_normal(d, rng);
        est.g_prec_term = symmetrize(a);
      } else {
        est.g_prec_term = scale * standard_normal(d, rng);
      }
      est.n_samples = 100;
      try {
        const auto next = apply_update(q, natural_gradient(q, prior, est), unit(rng), c.strategy).q;
        const bool ok = c.structure == CovStructure::Full
                            ? next.precision().allFinite() && min_eigenvalue(next.covariance()) > 0.0
                            : next.precision().allFinite() && (next.precision().array() > 0.0).all();
        if (!ok) ++bad;
      } catch (const NotSpdError&) {
        ++refused;
      } catch (const NotPositiveError&) {
        ++refused;
      } catch (const SingularError&) {
        ++refused;
      }
    }
    out.require(bad == 0, fmt("%s: %d non-SPD results", c.name, bad));
    // Only the plain route may give up after exhausting its step halvings.
    if (c.strategy.kind != PdStrategyKind::Plain) {
      out.require(refused == 0, fmt("%s: %d steps threw", c.name, refused));
    }
    out.note(fmt("%s %d bad/%d refused", c.name, bad, refused));
  }
  const double secs = seconds_since(t0);
  out.require(secs < kFuzzSeconds, fmt("took %.1fs", secs));
  out.note(fmt("%.1fs", secs));
  return out;
}

// ---------------------------------------------------------------------------
// 6. Labour reproduction, or the synthetic substitute.

constexpr double kLabourTol = 0.03;
constexpr double kLabourLlTol = 3.0;
constexpr double kLabourMeanTol = 0.05;
constexpr double kMleLlGap = 1.0;

TrainConfig labour_config(Eigen::Index d, std::uint64_t seed) {
  TrainConfig config = TrainConfig::defaults(d);
  config.pd_strategy = PdStrategy::retraction();
  config.seed = seed;
  return config;
}

Outcome labour_real(const std::string& path) {
  Outcome out;
  Dataset raw = [&] {
    try {
      return cli::load_csv(path, false);
    } catch (const ParseError&) {
      return cli::load_csv(path, true);
    }
  }();
  const Dataset data = raw.with_intercept();
  const auto [train, test] = cli::split_data(data, cli::SplitSpec{0.75, false, 601});
  const Eigen::Index d = data.cols();

  const auto r = fit(LogisticModel(train), labour_config(d, 602));
  const Eigen::VectorXd mu = r.best_q.mean();
  Eigen::VectorXd probs(train.rows());
  for (Eigen::Index i = 0; i < train.rows(); ++i) probs[i] = sigmoid(train.X.row(i).dot(mu));
  const auto m = metrics_classification(probs, train.y);
  out.require(std::abs(m.accuracy - 0.711) <= kLabourTol, fmt("accuracy %.3f", m.accuracy));
  out.require(std::abs(m.f1 - 0.703) <= kLabourTol, fmt("F1 %.3f", m.f1));
  out.require(std::abs(m.ll - (-332.99)) <= kLabourLlTol, fmt("train LL %.2f", m.ll));
  const auto mle = mle_fit([&](const Eigen::VectorXd& t) { return logistic_loglik(t, train); }, d,
                           Eigen::VectorXd::Zero(d));
  out.require(std::abs(m.ll - mle.ll_hat) <= kMleLlGap, fmt("LL gap to MLE %.2f", m.ll - mle.ll_hat));

  const auto full = fit(LogisticModel(data), labour_config(d, 603));
  const Eigen::VectorXd reference(Eigen::VectorXd{{0.675, -1.488, -0.083, -0.574, 0.493, -0.637, 0.609, 0.050}});
  if (full.best_q.mean().size() != reference.size()) {
    out.require(false, fmt("expected 8 coefficients, got %d", static_cast<int>(full.best_q.mean().size())));
  } else {
    const double em = max_abs(full.best_q.mean() - reference);
    out.require(em <= kLabourMeanTol, fmt("|mu - reference| %.3f", em));
    out.note(fmt("|mu - reference| %.3f", em));
  }
  out.note(fmt("labour csv: acc %.3f F1 %.3f LL %.2f (MLE %.2f)", m.accuracy, m.f1, m.ll, mle.ll_hat));
  return out;
}

Outcome labour_synthetic() {
  Outcome out;
  Rng data_rng(611);
  const Eigen::VectorXd truth{{0.675, -1.488, -0.083, -0.574, 0.493, -0.637, 0.609, 0.050}};
  const Dataset data = test::synthetic_logistic(753, truth, data_rng);
  const Eigen::Index d = truth.size();
  TrainConfig config = labour_config(d, 612);
  config.n_samples = 1000;
  const auto r = fit(LogisticModel(data), config);

  const auto prior = PriorSpec::isotropic(d, 0.2);
  auto log_post = [&](const Eigen::VectorXd& t) {
    return logistic_loglik(t, data) + log_density(prior.distribution(CovStructure::Full), t);
  };
  RwmOptions opt;
  opt.start = r.best_q.mean();
  opt.proposal_factor = r.best_q.covariance_factor();
  Rng chain_rng(613);
  const Chain chain = rwm_sample(log_post, d, chain_rng, opt);
  const Eigen::VectorXd se = chain.mean_standard_error();
  const Eigen::VectorXd z = (r.best_q.mean() - chain.mean()).cwiseAbs().cwiseQuotient(se);
  out.require(z.maxCoeff() < 3.0, fmt("max |mu - chain mean| %.2f chain SE", z.maxCoeff()));
  out.note(fmt("synthetic substitute (no QBVI_LABOUR_CSV): max %.2f SE, max |diff| %.4f, SE %.4f",
               z.maxCoeff(), max_abs(r.best_q.mean() - chain.mean()), se.maxCoeff()));
  return out;
}

Outcome labour() {
  const char* path = std::getenv("QBVI_LABOUR_CSV");
  if (path != nullptr && fs::exists(path)) return labour_real(path);
  return labour_synthetic();
}

// ---------------------------------------------------------------------------
// 7. Mean-field inverse-gamma factor.

constexpr double kIgRelTol = 0.05;
constexpr double kFimRelTol = 0.02;

Outcome inverse_gamma_factor() {
  Outcome out;
  Rng data_rng(701);
  const Eigen::Index n = 100;
  const double m = 0.3;
  const Eigen::VectorXd y = (m + 0.8 * standard_normal(n, data_rng).array()).matrix();
  const double ss = (y.array() - m).square().sum();
  auto loglik = [&](const Eigen::VectorXd&, double s2) {
    return -0.5 * n * std::log(2.0 * std::numbers::pi * s2) - 0.5 * ss / s2;
  };
  const MeanFieldPriors priors{PriorSpec::isotropic(1, 1.0), {3.0, 1.0}};
  const double want_alpha = priors.noise.alpha + n / 2.0;
  const double want_beta = priors.noise.beta + 0.5 * ss;

  const auto q = priors.gaussian.distribution(CovStructure::Diagonal);
  IGParams noise = priors.noise;
  Rng rng(702);
  MeanFieldStepOptions opt;
  opt.control_variates = true;
  opt.freeze_gaussian = true;
  MeanFieldStepResult prev = mf_pilot(q, noise, loglik, 1000, rng);
  for (int t = 1; t <= 3000; ++t) {
    const double eps = std::min(0.1, 0.1 * 200.0 / t);
    prev = mf_step(q, noise, priors, loglik, 1000, rng, eps, opt, &prev);
    noise = prev.q_noise;
  }
  const double ea = test::rel_err(noise.alpha, want_alpha);
  const double eb = test::rel_err(noise.beta, want_beta);
  out.require(ea < kIgRelTol, fmt("alpha %.2f vs %.2f", noise.alpha, want_alpha));
  out.require(eb < kIgRelTol, fmt("beta %.2f vs %.2f", noise.beta, want_beta));

  double worst_fim = 0.0;
  for (IGParams p : {IGParams{3.0, 1.0}, IGParams{13.8, 4.7}}) {
    const Eigen::Index draws = 1000000;
    Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
    for (Eigen::Index i = 0; i < draws; ++i) {
      const IGGrad g = ig_score(ig_sample(p, rng), p);
      const Eigen::Vector2d v(g.d_alpha, g.d_beta);
      acc += v * v.transpose();
    }
    acc /= static_cast<double>(draws);
    const Eigen::Matrix2d f = ig_fim(p);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) worst_fim = std::max(worst_fim, test::rel_err(acc(i, j), f(i, j)));
    }
  }
  out.require(worst_fim < kFimRelTol, fmt("FIM rel err %.4f", worst_fim));
  out.note(fmt("alpha %.2f/%.2f beta %.2f/%.2f, FIM rel err %.4f", noise.alpha, want_alpha,
               noise.beta, want_beta, worst_fim));
  return out;
}

// ---------------------------------------------------------------------------
// 8. GARCH pipeline.

constexpr double kGarchTol = 0.05;

double logit(double p) { return std::log(p / (1.0 - p)); }

Outcome garch_pipeline() {
  Outcome out;
  Rng data_rng(801);
  const GarchParams truth{1e-6, 0.1, 0.85};
  const Eigen::VectorXd r = simulate_garch(truth, 2000, data_rng);
  const GarchModel model(r);

  const double var = r.array().square().mean();
  const Eigen::Vector3d x0(logit(0.05 * var), logit(0.9), logit(0.85 / 0.95));
  const auto mle = mle_fit([&](const Eigen::VectorXd& psi) { return garch_loglik(psi, r); }, 3, x0);

  TrainConfig config = TrainConfig::defaults(3);
  config.pd_strategy = PdStrategy::retraction();
  config.seed = 802;
  config.init = GaussianVariational::full(mle.theta_hat, 100.0 * Eigen::Matrix3d::Identity());
  try {
    const auto fitted = fit(model, config);
    Rng rng(803);
    const Eigen::MatrixXd draws = sample(fitted.best_q, 10000, rng);
    double sa = 0.0, sb = 0.0, worst_sum = 0.0;
    int violations = 0;
    for (Eigen::Index s = 0; s < draws.rows(); ++s) {
      const GarchParams p = garch_transform(draws.row(s).transpose());
      sa += p.alpha;
      sb += p.beta;
      worst_sum = std::max(worst_sum, p.alpha + p.beta);
      if (!(p.alpha + p.beta < 1.0) || !(p.omega > 0.0) || !(p.alpha > 0.0) || !(p.beta > 0.0)) {
        ++violations;
      }
    }
    const double ea = sa / draws.rows(), eb = sb / draws.rows();
    out.require(std::abs(ea - truth.alpha) <= kGarchTol, fmt("E[alpha] %.3f", ea));
    out.require(std::abs(eb - truth.beta) <= kGarchTol, fmt("E[beta] %.3f", eb));
    out.require(violations == 0, fmt("%d draws outside the stationary region", violations));
    out.note(fmt("E[alpha] %.3f E[beta] %.3f, max alpha+beta %.4f", ea, eb, worst_sum));

    // Exact-posterior reference on the same series.
    auto log_post = [&](const Eigen::VectorXd& psi) {
      return garch_loglik(psi, r) + log_density(config.prior.distribution(CovStructure::Full), psi);
    };
    RwmOptions opt;
    opt.start = mle.theta_hat;
    opt.proposal_factor = fitted.best_q.covariance_factor();
    Rng chain_rng(804);
    const Chain chain = rwm_sample(log_post, 3, chain_rng, opt);
    double ca = 0.0, cb = 0.0;
    for (Eigen::Index s = 0; s < chain.draws.rows(); ++s) {
      const GarchParams p = garch_transform(chain.draws.row(s).transpose());
      ca += p.alpha;
      cb += p.beta;
    }
    const GarchParams pm = garch_transform(mle.theta_hat);
    out.note(fmt("RWM posterior E[alpha] %.3f E[beta] %.3f, MLE alpha %.3f beta %.3f",
                 ca / chain.draws.rows(), cb / chain.draws.rows(), pm.alpha, pm.beta));
  } catch (const Error& e) {
    out.require(false, std::string("fit threw ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// 9. Runtime sanity.

constexpr double kRuntimeSeconds = 5.0;

Outcome runtime_sanity() {
  Outcome out;
  Rng data_rng(901);
  Eigen::VectorXd truth = 0.3 * standard_normal(24, data_rng);
  const Dataset data = test::synthetic_logistic(1000, truth, data_rng);
  TrainConfig config = TrainConfig::defaults(24);
  config.pd_strategy = PdStrategy::retraction();
  config.max_iters = 10;
  config.n_samples = 100;
  config.seed = 902;
  const LogisticModel model(data);
  const auto t0 = Clock::now();
  const auto r = fit(model, config);
  const double secs = seconds_since(t0);
  out.require(r.trace.size() == 10u, fmt("%zu iterations", r.trace.size()));
  out.require(secs < kRuntimeSeconds, fmt("took %.2fs", secs));
  out.note(fmt("10 iterations in %.3fs", secs));
  return out;
}

// ---------------------------------------------------------------------------
// 10. Determinism of result.json.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome out;
  const fs::path root = fs::temp_directory_path() / "qbvi_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);

  Rng rng(1001);
  auto write = [&](const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ofstream f(root / name);
    f.precision(17);
    body(f);
    return (root / name).string();
  };
  const Dataset logistic = test::synthetic_logistic(200, Eigen::Vector3d(0.3, -1.0, 0.5), rng);
  const std::string logistic_csv = write("logistic.csv", [&](std::ostream& f) {
    for (Eigen::Index i = 0; i < logistic.rows(); ++i) {
      f << logistic.X(i, 1) << ',' << logistic.X(i, 2) << ',' << logistic.y[i] << '\n';
    }
  });
  const Dataset linreg = test::synthetic_regression(200, Eigen::Vector3d(1.0, 0.5, -0.7), 0.5, rng);
  const std::string linreg_csv = write("linreg.csv", [&](std::ostream& f) {
    for (Eigen::Index i = 0; i < linreg.rows(); ++i) {
      f << linreg.X(i, 1) << ',' << linreg.X(i, 2) << ',' << linreg.y[i] << '\n';
    }
  });
  const Eigen::VectorXd rv = (0.2 * standard_normal(300, rng).array()).exp() * 0.01;
  const std::string har_csv = write("har.csv", [&](std::ostream& f) {
    for (Eigen::Index i = 0; i < rv.size(); ++i) f << i << ',' << rv[i] << '\n';
  });
  const Eigen::VectorXd returns = simulate_garch(GarchParams{1e-6, 0.1, 0.85}, 1000, rng);
  const std::string garch_csv = write("garch.csv", [&](std::ostream& f) {
    for (Eigen::Index i = 0; i < returns.size(); ++i) f << i << ',' << returns[i] << '\n';
  });

  struct Task {
    const char* name;
    cli::Task task;
    std::string data;
  };
  const std::vector<Task> tasks{{"logistic", cli::Task::Logistic, logistic_csv},
                                {"linreg", cli::Task::Linreg, linreg_csv},
                                {"har", cli::Task::Har, har_csv},
                                {"garch", cli::Task::Garch, garch_csv},
                                {"constant", cli::Task::Constant, ""}};
  for (const auto& t : tasks) {
    std::string files[2];
    for (int run = 0; run < 2; ++run) {
      cli::RunSpec spec;
      spec.task = t.task;
      spec.data_path = t.data;
      spec.auto_pd_strategy = true;
      spec.output_dir = (root / (std::string(t.name) + std::to_string(run))).string();
      spec.config.max_iters = 200;
      spec.config.seed = 1002;
      spec.compare_mle = true;
      std::ostringstream err;
      const int code = cli::run(spec, err);
      if (code != 0) {
        out.require(false, std::string(t.name) + " run failed: " + err.str());
        break;
      }
      files[run] = slurp(fs::path(spec.output_dir) / "result.json") +
                   slurp(fs::path(spec.output_dir) / "trace.csv");
    }
    out.require(!files[0].empty() && files[0] == files[1], std::string(t.name) + " differs");
  }
  fs::remove_all(root);
  if (out.pass) out.note("result.json and trace.csv identical for logistic, linreg, har, garch, constant");
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {{1, "conjugate posterior oracle", conjugate_posterior},
                                {2, "score identities", score_identities},
                                {3, "analytic CV variances", analytic_variances},
                                {4, "CV variance reduction", cv_reduction},
                                {5, "positive-definiteness fuzzing", pd_fuzz},
                                {6, "labour reproduction", labour},
                                {7, "mean-field inverse-gamma factor", inverse_gamma_factor},
                                {8, "GARCH pipeline", garch_pipeline},
                                {9, "runtime sanity", runtime_sanity},
                                {10, "determinism", determinism}};
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failed;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
