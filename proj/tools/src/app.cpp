#include "qbvi_cli/app.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "qbvi/baselines.hpp"
#include "qbvi/error.hpp"
#include "qbvi/special_functions.hpp"

namespace qbvi::cli {
namespace {

using Json = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
  const std::string_view t = trim(cell);
  auto fail = [&](const std::string& why) {
    throw ParseError("row " + std::to_string(row) + ", col " + std::to_string(col) + ": " + why,
                     row, col);
  };
  if (t.empty()) fail("empty cell");
  std::string_view body = t;
  if (body.front() == '+') body.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
  if (ec != std::errc() || ptr != body.data() + body.size()) {
    fail("not a number: '" + std::string(t) + "'");
  }
  if (!std::isfinite(v)) fail("non-finite value: '" + std::string(t) + "'");
  return v;
}

Eigen::VectorXd to_vector(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

Json from_vector(const Eigen::VectorXd& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

/// Row-major flattening.
Json from_matrix(const Eigen::MatrixXd& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) j.push_back(m(r, c));
  return j;
}

std::string_view to_string(CovStructure s) { return s == CovStructure::Full ? "full" : "diagonal"; }

/// Everything a task needs once the data are loaded.
struct Problem {
  Dataset train;
  Dataset test;
  bool has_test = false;
  bool mean_field = false;
  Eigen::Index dim = 0;
  std::unique_ptr<Model> model;                 // Gaussian-only fits
  NoiseLogLikFn noise_loglik;                   // mean-field fits
  std::function<double(const Eigen::VectorXd&)> test_loglik;
  std::function<double(const Eigen::VectorXd&, double)> noise_test_loglik;
};

Dataset single_column(const Dataset& raw) {
  Eigen::MatrixXd empty(raw.rows(), 0);
  return Dataset{std::move(empty), raw.y};
}

Dataset head_rows(const Dataset& d, Eigen::Index n) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  return d.subset(idx);
}

Dataset tail_rows(const Dataset& d, Eigen::Index from) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(d.rows() - from));
  std::iota(idx.begin(), idx.end(), from);
  return d.subset(idx);
}

double noise_point(const IGParams& p) { return p.alpha > 1.0 ? p.mean() : p.beta / (p.alpha + 1.0); }

struct MethodColumn {
  std::string name;
  std::vector<std::pair<std::string, double>> train;
  std::vector<std::pair<std::string, double>> test;
};

void add_classification(std::vector<std::pair<std::string, double>>& out, const Dataset& d,
                        const Eigen::VectorXd& theta) {
  Eigen::VectorXd eta = d.X * theta;
  Eigen::VectorXd probs = eta.unaryExpr([](double x) { return sigmoid(x); });
  const ClassificationMetrics m = metrics_classification(probs, d.y);
  out = {{"precision", m.precision}, {"recall", m.recall}, {"accuracy", m.accuracy},
         {"f1", m.f1}, {"ll", logistic_loglik(theta, d)}};
}

void add_regression(std::vector<std::pair<std::string, double>>& out, const Dataset& d,
                    const Eigen::VectorXd& theta, double sigma2) {
  const RegressionMetrics m = metrics_regression(d.X * theta, d.y, sigma2);
  out = {{"mse", m.mse}, {"ll", m.ll}};
}

void write_metrics(const std::filesystem::path& path, const std::vector<MethodColumn>& cols,
                   bool has_test) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17) << "metric";
  for (const auto& c : cols) out << ',' << c.name << "_train,"<< c.name << "_test";
  out << '\n';
  if (cols.empty()) return;
  for (std::size_t r = 0; r < cols.front().train.size(); ++r) {
    out << cols.front().train[r].first;
    for (const auto& c : cols) {
      out << ',' << c.train[r].second << ',';
      if (has_test) out << c.test[r].second; else out << "nan";
    }
    out << '\n';
  }
}

void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17) << "iter,lb_raw,lb_smoothed,train_ll,test_ll\n";
  for (const auto& r : trace) {
    out << r.iter << ',' << r.lb_raw << ',' << r.lb_smoothed << ',' << r.train_ll << ','
        << r.test_ll << '\n';
  }
}

/// -Hessian of f at x by central differences.
Eigen::MatrixXd negative_hessian(const LogDensityFn& f, const Eigen::VectorXd& x) {
  const Eigen::Index d = x.size();
  Eigen::VectorXd h(d);
  for (Eigen::Index i = 0; i < d; ++i) h[i] = 1e-4 * std::max(1.0, std::abs(x[i]));
  Eigen::MatrixXd H(d, d);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h[i];
    xm[i] -= h[i];
    H(i, i) = -(f(xp) - 2.0 * f0 + f(xm)) / (h[i] * h[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      Eigen::VectorXd a = x, b = x, c = x, e = x;
      a[i] += h[i]; a[j] += h[j];
      b[i] += h[i]; b[j] -= h[j];
      c[i] -= h[i]; c[j] += h[j];
      e[i] -= h[i]; e[j] -= h[j];
      H(i, j) = H(j, i) = -(f(a) - f(b) - f(c) + f(e)) / (4.0 * h[i] * h[j]);
    }
  }
  return H;
}

/// N(x, curvature^-1), or N(x, I) when the curvature is not usable.
GaussianVariational start_from_curvature(const Eigen::VectorXd& x, const Eigen::MatrixXd& curvature,
                                         CovStructure structure) {
  if (structure == CovStructure::Diagonal) {
    const Eigen::VectorXd diag = curvature.diagonal();
    if (diag.allFinite() && (diag.array() > 0.0).all()) return GaussianVariational::diagonal(x, diag);
  } else if (curvature.allFinite() && curvature.llt().info() == Eigen::Success) {
    return GaussianVariational::full(x, 0.5 * (curvature + curvature.transpose()));
  }
  return GaussianVariational::isotropic(x, 1.0, structure);
}

double logit(double x) { return std::log(x / (1.0 - x)); }

Eigen::VectorXd mle_start(Task task, const Problem& p) {
  if (task != Task::Garch) return Eigen::VectorXd::Zero(p.dim);
  // omega at 5% of the sample variance, alpha + beta = 0.9, beta / (alpha + beta) = 0.85 / 0.95.
  const double var = p.train.y.array().square().mean();
  Eigen::VectorXd x0(3);
  x0 << logit(0.05 * var), logit(0.9), logit(0.85 / 0.95);
  return x0;
}

Problem build_problem(const RunSpec& spec) {
  Problem p;
  if (spec.task == Task::Constant) {
    if (spec.constant_dim < 1) throw ConfigError("constant task needs a positive dimension");
    p.dim = spec.constant_dim;
    p.model = std::make_unique<ConstantModel>(p.dim, 0.0);
    return p;
  }

  const Dataset raw = load_csv(spec.data_path, spec.has_header);
  SplitSpec split = spec.split;
  split.seed = spec.config.seed + kSplitSeedOffset;
  switch (spec.task) {
    case Task::Logistic:
    case Task::Linreg: {
      const Dataset data = spec.intercept ? raw.with_intercept() : raw;
      if (data.cols() < 1) throw ConfigError("regression tasks need at least one covariate");
      if (spec.task == Task::Logistic && !data.has_binary_targets()) {
        throw ConfigError("logistic task needs 0/1 targets in the last column");
      }
      std::tie(p.train, p.test) = split_data(data, split);
      break;
    }
    case Task::Har: {
      split.chronological = true;
      const Dataset data = har_features(raw.y);
      std::tie(p.train, p.test) = split_data(data, split);
      break;
    }
    case Task::Garch: {
      split.chronological = true;
      std::tie(p.train, p.test) = split_data(single_column(raw), split);
      break;
    }
    case Task::Constant:
      break;
  }
  p.has_test = p.test.rows() > 0;

  switch (spec.task) {
    case Task::Logistic: {
      p.dim = p.train.cols();
      p.model = std::make_unique<LogisticModel>(p.train);
      const Dataset test = p.test;
      p.test_loglik = [test](const Eigen::VectorXd& th) { return logistic_loglik(th, test); };
      break;
    }
    case Task::Linreg:
    case Task::Har: {
      p.dim = p.train.cols();
      const Dataset test = p.test;
      if (spec.sigma2) {
        const double s2 = *spec.sigma2;
        p.model = std::make_unique<GaussianRegressionModel>(p.train, s2);
        p.test_loglik = [test, s2](const Eigen::VectorXd& th) {
          return gaussian_reg_loglik(th, s2, test);
        };
      } else {
        p.mean_field = true;
        const Dataset train = p.train;
        p.noise_loglik = [train](const Eigen::VectorXd& th, double s2) {
          return gaussian_reg_loglik(th, s2, train);
        };
        p.noise_test_loglik = [test](const Eigen::VectorXd& th, double s2) {
          return gaussian_reg_loglik(th, s2, test);
        };
      }
      break;
    }
    case Task::Garch: {
      p.dim = 3;
      p.model = std::make_unique<GarchModel>(p.train.y);
      const Eigen::VectorXd test = p.test.y;
      if (test.size() < 2) p.has_test = false;
      p.test_loglik = [test](const Eigen::VectorXd& psi) {
        return test.size() >= 2 ? garch_loglik(psi, test) : kNaN;
      };
      break;
    }
    case Task::Constant:
      break;
  }
  return p;
}

int run_impl(const RunSpec& spec) {
  Problem p = build_problem(spec);
  const Eigen::Index d = p.dim;

  TrainConfig config = spec.config;
  config.prior = PriorSpec::isotropic(d, spec.tau);
  config.structure =
      spec.structure.value_or(p.mean_field ? CovStructure::Diagonal : CovStructure::Full);
  if (spec.auto_pd_strategy) {
    config.pd_strategy = config.structure == CovStructure::Full
                             ? PdStrategy::retraction()
                             : PdStrategy::bounded_step(0.999, 0.9);
  }
  const InitMode init = spec.init.value_or(
      spec.task == Task::Garch || p.mean_field ? InitMode::Mle : InitMode::Prior);

  std::optional<MleResult> mle;
  auto mle_objective = [&]() -> LogDensityFn {
    if (!p.mean_field) {
      const Model* m = p.model.get();
      return [m](const Eigen::VectorXd& th) { return m->loglik(th); };
    }
    // Profile over the noise variance.
    const Dataset train = p.train;
    return [train](const Eigen::VectorXd& th) {
      const double s2 = (train.y - train.X * th).squaredNorm() / static_cast<double>(train.rows());
      return s2 > 0.0 ? gaussian_reg_loglik(th, s2, train)
                      : -std::numeric_limits<double>::infinity();
    };
  };
  if (init == InitMode::Mle || spec.compare_mle) {
    mle = mle_fit(mle_objective(), d, mle_start(spec.task, p));
  }
  if (init == InitMode::Mle) {
    const double n = static_cast<double>(p.train.rows());
    const double s2 = p.mean_field
                          ? (p.train.y - p.train.X * mle->theta_hat).squaredNorm() / n
                          : 0.0;
    if (spec.init_precision) {
      if (!(*spec.init_precision > 0.0)) throw ConfigError("init precision must be positive");
      config.init = GaussianVariational::isotropic(mle->theta_hat, *spec.init_precision,
                                                   config.structure);
    } else {
      LogDensityFn objective = mle_objective();
      if (p.mean_field) {
        const Dataset train = p.train;
        objective = [train, s2](const Eigen::VectorXd& th) {
          return gaussian_reg_loglik(th, s2, train);
        };
      }
      const Eigen::MatrixXd curvature =
          negative_hessian(objective, mle->theta_hat) + config.prior.prec0;
      config.init = start_from_curvature(mle->theta_hat, curvature, config.structure);
    }
    if (p.mean_field) {
      // Conjugate shape, scale matched to the residual variance at the MLE.
      const double alpha = spec.noise_prior.alpha + 0.5 * n;
      config.noise_init = IGParams{alpha, alpha * s2};
    }
  }

  const IterationCallback on_iter = [&](const GaussianVariational& q, TraceRow& row) {
    if (spec.task == Task::Constant) return;
    row.train_ll = p.model->loglik(q.mean());
    row.test_ll = p.has_test ? p.test_loglik(q.mean()) : kNaN;
  };
  const MeanFieldCallback on_mf_iter = [&](const GaussianVariational& q, const IGParams& noise,
                                           TraceRow& row) {
    const double s2 = noise_point(noise);
    row.train_ll = p.noise_loglik(q.mean(), s2);
    row.test_ll = p.has_test ? p.noise_test_loglik(q.mean(), s2) : kNaN;
  };

  FitResult fit_result = p.mean_field
                             ? fit_mean_field(p.noise_loglik, d, config, spec.noise_prior, on_mf_iter)
                             : fit(*p.model, config, on_iter);
  const GaussianVariational& q = fit_result.best_q;

  std::optional<Chain> chain;
  if (spec.compare_mcmc) {
    Rng rng(config.seed + kMcmcSeedOffset);
    const GaussianVariational prior = GaussianVariational::full(config.prior.mu0, config.prior.prec0);
    RwmOptions opts;
    opts.n_draws = spec.mcmc_draws;
    opts.burn_in = spec.mcmc_burn_in;
    if (!p.mean_field) {
      const Model* m = p.model.get();
      opts.step_scale = 2.38 / std::sqrt(static_cast<double>(d));
      opts.proposal_factor = q.covariance_factor();
      opts.start = q.mean();
      chain = rwm_sample(
          [&](const Eigen::VectorXd& th) { return log_density(prior, th) + m->loglik(th); }, d, rng,
          opts);
    } else {
      // Sampled on (theta, log sigma2).
      const IGParams noise = *fit_result.best_noise;
      Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(d + 1, d + 1);
      factor.topLeftCorner(d, d) = q.covariance_factor();
      factor(d, d) = std::sqrt(special::trigamma(noise.alpha));
      Eigen::VectorXd start(d + 1);
      start << q.mean(), std::log(noise_point(noise));
      opts.step_scale = 2.38 / std::sqrt(static_cast<double>(d + 1));
      opts.proposal_factor = factor;
      opts.start = start;
      const IGParams noise_prior = spec.noise_prior;
      chain = rwm_sample(
          [&](const Eigen::VectorXd& x) {
            const Eigen::VectorXd th = x.head(d);
            const double s2 = std::exp(x[d]);
            return log_density(prior, th) + ig_log_density(s2, noise_prior) + x[d] +
                   p.noise_loglik(th, s2);
          },
          d + 1, rng, opts);
    }
  }

  // Posterior summaries on the constrained scale.
  Eigen::VectorXd constrained_mean;
  const TransformChain chain_tf = p.model ? p.model->transforms() : TransformChain::identity(d);
  if (chain_tf.is_garch()) {
    Rng rng(config.seed + kSummarySeedOffset);
    const Eigen::MatrixXd draws = sample(q, 10000, rng);
    constrained_mean = Eigen::VectorXd::Zero(d);
    for (Eigen::Index s = 0; s < draws.rows(); ++s) {
      constrained_mean += apply_transforms(chain_tf, draws.row(s).transpose());
    }
    constrained_mean /= static_cast<double>(draws.rows());
  }

  std::vector<MethodColumn> columns;
  auto make_column = [&](const std::string& name, const Eigen::VectorXd& theta,
                         std::optional<double> s2) {
    MethodColumn c{name, {}, {}};
    switch (spec.task) {
      case Task::Logistic:
        add_classification(c.train, p.train, theta);
        if (p.has_test) add_classification(c.test, p.test, theta);
        break;
      case Task::Linreg:
      case Task::Har: {
        const double v = s2 ? *s2 : *spec.sigma2;
        add_regression(c.train, p.train, theta, v);
        if (p.has_test) add_regression(c.test, p.test, theta, v);
        break;
      }
      case Task::Garch:
        c.train = {{"ll", p.model->loglik(theta)}};
        c.test = {{"ll", p.test_loglik(theta)}};
        break;
      case Task::Constant:
        return;
    }
    columns.push_back(std::move(c));
  };
  {
    std::optional<double> s2;
    if (fit_result.best_noise) s2 = noise_point(*fit_result.best_noise);
    make_column("qbvi", q.mean(), s2);
  }
  if (chain) {
    const Eigen::VectorXd cm = chain->mean();
    std::optional<double> s2;
    if (p.mean_field) s2 = chain->draws.col(d).array().exp().mean();
    make_column("mcmc", cm.head(d), s2);
  }
  if (spec.compare_mle) {
    std::optional<double> s2;
    if (p.mean_field) {
      s2 = (p.train.y - p.train.X * mle->theta_hat).squaredNorm() /
           static_cast<double>(p.train.rows());
    }
    make_column("mle", mle->theta_hat, s2);
  }

  Json result;
  result["task"] = std::string(to_string(spec.task));
  result["seed"] = config.seed;
  result["sub_seeds"] = {{"split", config.seed + kSplitSeedOffset},
                         {"mcmc", config.seed + kMcmcSeedOffset},
                         {"summary", config.seed + kSummarySeedOffset}};
  result["dim"] = d;
  result["structure"] = std::string(to_string(q.structure()));
  result["mean"] = from_vector(q.mean());
  result["precision"] = q.is_full() ? from_matrix(q.precision()) : from_vector(q.precision().col(0));
  if (fit_result.best_noise) {
    result["noise"] = {{"alpha", fit_result.best_noise->alpha}, {"beta", fit_result.best_noise->beta}};
  }
  if (constrained_mean.size() > 0) result["constrained_mean"] = from_vector(constrained_mean);
  result["best_iter"] = fit_result.best_iter;
  result["iterations"] = fit_result.trace.size();
  result["exit_reason"] = std::string(to_string(fit_result.exit_reason));
  Json cfg;
  cfg["beta"] = config.beta;
  cfg["t_prime"] = config.t_prime;
  cfg["patience"] = config.patience;
  cfg["window"] = config.window;
  cfg["momentum"] = config.momentum;
  cfg["clip_norm"] = config.clip_norm;
  cfg["n_samples"] = config.n_samples;
  cfg["max_iters"] = config.max_iters;
  cfg["batch_size"] = config.batch_size ? Json(*config.batch_size) : Json(nullptr);
  cfg["pd_strategy"] = std::string(to_string(config.pd_strategy.kind));
  cfg["cv"] = config.cv_enabled;
  cfg["tau"] = spec.tau;
  cfg["init"] = init == InitMode::Mle ? "mle" : "prior";
  if (init == InitMode::Mle && spec.init_precision) cfg["init_precision"] = *spec.init_precision;
  if (p.mean_field) cfg["noise_prior"] = {spec.noise_prior.alpha, spec.noise_prior.beta};
  if (spec.sigma2) cfg["sigma2"] = *spec.sigma2;
  result["config"] = cfg;
  if (spec.task != Task::Constant) {
    result["data"] = {{"n_train", p.train.rows()},
                      {"n_test", p.test.rows()},
                      {"split_fraction", spec.split.fraction},
                      {"chronological", spec.task == Task::Har || spec.task == Task::Garch ||
                                            spec.split.chronological}};
  }
  if (chain) {
    result["mcmc"] = {{"mean", from_vector(chain->mean())},
                      {"mcse", from_vector(chain->mean_standard_error())},
                      {"acceptance_rate", chain->acceptance_rate},
                      {"n_draws", chain->draws.rows()},
                      {"burn_in", chain->burn_in}};
  }
  if (spec.compare_mle) {
    result["mle"] = {{"theta_hat", from_vector(mle->theta_hat)}, {"ll_hat", mle->ll_hat}};
  }

  const std::filesystem::path out_dir(spec.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  {
    std::ofstream out(out_dir / "result.json");
    if (!out) throw IoError("cannot write " + (out_dir / "result.json").string());
    out << result.dump(2) << '\n';
  }
  write_trace(out_dir / "trace.csv", fit_result.trace);
  write_metrics(out_dir / "metrics.csv", columns, p.has_test);
  return 0;
}

}  // namespace

std::string_view to_string(Task task) {
  switch (task) {
    case Task::Logistic: return "logistic";
    case Task::Linreg: return "linreg";
    case Task::Har: return "har";
    case Task::Garch: return "garch";
    case Task::Constant: return "constant";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  for (Task t : {Task::Logistic, Task::Linreg, Task::Har, Task::Garch, Task::Constant}) {
    if (name == to_string(t)) return t;
  }
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

Dataset load_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file " + path);

  std::vector<double> cells;
  std::size_t width = 0;
  std::size_t n_rows = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (has_header && line_no == 1) continue;
    if (trim(line).empty()) continue;
    std::size_t col = 0;
    std::string_view rest(line);
    while (true) {
      ++col;
      const auto comma = rest.find(',');
      cells.push_back(parse_cell(rest.substr(0, comma), line_no, col));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (width == 0) {
      width = col;
    } else if (col != width) {
      throw ParseError("row " + std::to_string(line_no) + " has " + std::to_string(col) +
                           " fields, expected " + std::to_string(width),
                       line_no, std::min(col, width) + 1);
    }
    ++n_rows;
  }
  if (n_rows == 0) throw ParseError("no data rows in " + path, line_no + 1, 1);

  const auto n = static_cast<Eigen::Index>(n_rows);
  const auto p = static_cast<Eigen::Index>(width) - 1;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * width;
    for (Eigen::Index c = 0; c < p; ++c) X(r, c) = cells[base + static_cast<std::size_t>(c)];
    y[r] = cells[base + width - 1];
  }
  return Dataset::make(std::move(X), std::move(y));
}

std::pair<Dataset, Dataset> split_data(const Dataset& data, const SplitSpec& spec) {
  if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) {
    throw ConfigError("split fraction must lie in (0, 1)");
  }
  const Eigen::Index n = data.rows();
  const auto n_train = static_cast<Eigen::Index>(std::ceil(spec.fraction * static_cast<double>(n)));
  if (spec.chronological) return {head_rows(data, n_train), tail_rows(data, n_train)};

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng(spec.seed);
  // Fisher-Yates with an explicit draw so the split does not depend on the
  // standard library's shuffle.
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  const auto cut = perm.begin() + n_train;
  return {data.subset(std::span<const Eigen::Index>(perm.begin(), cut)),
          data.subset(std::span<const Eigen::Index>(cut, perm.end()))};
}

PosteriorRecord load_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open result file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0, 0);
  }
  try {
    const Eigen::VectorXd mean = to_vector(j.at("mean"));
    const Eigen::VectorXd flat = to_vector(j.at("precision"));
    const Eigen::Index d = mean.size();
    std::optional<IGParams> noise;
    if (j.contains("noise")) {
      noise = IGParams::make(j["noise"].at("alpha").get<double>(), j["noise"].at("beta").get<double>());
    }
    if (j.at("structure").get<std::string>() == "full") {
      if (flat.size() != d * d) throw DimMismatchError(path + ": precision has the wrong size");
      Eigen::MatrixXd prec(d, d);
      for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) prec(r, c) = flat[r * d + c];
      return {GaussianVariational::full(mean, prec), noise};
    }
    if (flat.size() != d) throw DimMismatchError(path + ": precision has the wrong size");
    return {GaussianVariational::diagonal(mean, flat), noise};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0, 0);
  }
}

int run(const RunSpec& spec, std::ostream& err) {
  try {
    if (spec.task != Task::Constant && !std::filesystem::exists(spec.data_path)) {
      throw IoError("data file not found: " + spec.data_path);
    }
    return run_impl(spec);
  } catch (const Error& e) {
    err << "qbvi: " << e.what() << " [" << to_string(e.kind()) << "]\n";
    return 2;
  } catch (const std::exception& e) {
    err << "qbvi: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace qbvi::cli
