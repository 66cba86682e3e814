#include <benchmark/benchmark.h>

#include "qbvi/gaussian_family.hpp"
#include "qbvi/gradient_estimator.hpp"
#include "qbvi/models.hpp"
#include "qbvi/qbvi_updates.hpp"
#include "qbvi/trainer.hpp"

namespace {

using namespace qbvi;

Dataset logistic_data(Eigen::Index n, Eigen::Index d, Rng& rng) {
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index j = 0; j < d; ++j) X.col(j) = standard_normal(n, rng);
  X.col(0).setOnes();
  const Eigen::VectorXd truth = 0.3 * standard_normal(d, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = u(rng) < sigmoid(X.row(i).dot(truth)) ? 1.0 : 0.0;
  return Dataset::make(std::move(X), std::move(y));
}

GaussianVariational random_full(Eigen::Index d, Rng& rng) {
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index j = 0; j < d; ++j) a.col(j) = standard_normal(d, rng);
  const Eigen::MatrixXd p = a * a.transpose() / static_cast<double>(d) + Eigen::MatrixXd::Identity(d, d);
  return GaussianVariational::full(standard_normal(d, rng), p);
}

void BM_Sample(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  Rng rng(1);
  const auto q = random_full(d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(sample(q, 100, rng));
}
BENCHMARK(BM_Sample)->Arg(4)->Arg(24)->Arg(100);

void BM_ScoreM(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  Rng rng(2);
  const auto q = random_full(d, rng);
  const Eigen::VectorXd theta = standard_normal(d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(score_m(q, theta));
}
BENCHMARK(BM_ScoreM)->Arg(4)->Arg(24)->Arg(100);

void BM_LogisticLoglik(benchmark::State& state) {
  Rng rng(3);
  const Dataset data = logistic_data(state.range(0), 24, rng);
  const Eigen::VectorXd theta = 0.1 * standard_normal(24, rng);
  for (auto _ : state) benchmark::DoNotOptimize(logistic_loglik(theta, data));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogisticLoglik)->Arg(1000)->Arg(10000);

void BM_EstimateCv(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  Rng rng(4);
  const Dataset data = logistic_data(1000, d, rng);
  auto ll = [&](const Eigen::VectorXd& t) { return logistic_loglik(t, data); };
  const auto q = GaussianVariational::full(Eigen::VectorXd::Zero(d),
                                           25.0 * Eigen::MatrixXd::Identity(d, d));
  const auto prev = estimate_naive(q, ll, 100, rng);
  const auto c = cv_coefficients(prev, q);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_cv(q, ll, 100, rng, c));
}
BENCHMARK(BM_EstimateCv)->Arg(4)->Arg(24);

void BM_ApplyUpdate(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  const auto kind = static_cast<PdStrategyKind>(state.range(1));
  const bool full = kind == PdStrategyKind::Plain || kind == PdStrategyKind::Retraction;
  const PdStrategy strategy{kind, 0.999, 0.9};
  Rng rng(5);
  const auto prior = PriorSpec::isotropic(d, 0.2);
  const auto q = full ? random_full(d, rng)
                      : GaussianVariational::diagonal(standard_normal(d, rng),
                                                      Eigen::VectorXd::Ones(d));
  GradientEstimate est;
  est.g_mu_term = standard_normal(d, rng);
  est.g_prec_term = full ? Eigen::MatrixXd(0.1 * Eigen::MatrixXd::Identity(d, d))
                         : Eigen::MatrixXd(Eigen::VectorXd::Constant(d, 0.1));
  est.n_samples = 100;
  const auto g = natural_gradient(q, prior, est);
  for (auto _ : state) benchmark::DoNotOptimize(apply_update(q, g, 0.1, strategy));
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_ApplyUpdate)
    ->Args({24, static_cast<int>(PdStrategyKind::Plain)})
    ->Args({24, static_cast<int>(PdStrategyKind::Retraction)})
    ->Args({24, static_cast<int>(PdStrategyKind::BoundedStep)})
    ->Args({24, static_cast<int>(PdStrategyKind::LogTransform)});

void BM_FitTenIterations(benchmark::State& state) {
  Rng rng(6);
  const Dataset data = logistic_data(1000, 24, rng);
  const LogisticModel model(data);
  TrainConfig config = TrainConfig::defaults(24);
  config.pd_strategy = PdStrategy::retraction();
  config.max_iters = 10;
  for (auto _ : state) benchmark::DoNotOptimize(fit(model, config));
}
BENCHMARK(BM_FitTenIterations)->Unit(benchmark::kMillisecond);

void BM_GarchLoglik(benchmark::State& state) {
  Rng rng(7);
  const Eigen::VectorXd r = simulate_garch(GarchParams{1e-6, 0.1, 0.85}, state.range(0), rng);
  const Eigen::Vector3d psi(-13.0, 2.5, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(garch_loglik(psi, r));
}
BENCHMARK(BM_GarchLoglik)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
