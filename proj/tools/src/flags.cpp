#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qbvi/error.hpp"
#include "qbvi_cli/app.hpp"

namespace qbvi::cli {

int main_entry(int argc, char** argv) {
  CLI::App app{"Gaussian variational inference from log-likelihood evaluations"};
  app.option_defaults()->always_capture_default();

  RunSpec spec;
  TrainConfig& c = spec.config;
  std::string task = "logistic";
  std::string pd = "auto";
  std::string structure;
  std::string init;
  std::string cv = "on";
  std::vector<std::string> compare;
  long long batch = 0;
  long long ns = c.n_samples;
  long long dim = spec.constant_dim;
  long long mcmc_draws = spec.mcmc_draws;
  long long mcmc_burn_in = spec.mcmc_burn_in;
  double sigma2 = 0.0;
  double bounded_beta0 = 0.999;
  double bounded_delta = 0.9;

  app.add_option("--task", task, "logistic | linreg | har | garch | constant")
      ->check(CLI::IsMember({"logistic", "linreg", "har", "garch", "constant"}));
  app.add_option("--data", spec.data_path, "CSV file, last column is the target");
  app.add_flag("--header", spec.has_header, "Skip the first line of the CSV");
  app.add_option("--out", spec.output_dir, "Output directory");
  app.add_option("--split", spec.split.fraction, "Training fraction");
  app.add_flag("--chronological", spec.split.chronological,
               "Split in file order (always on for har and garch)");
  app.add_option("--compare", compare, "Baselines to run: mcmc, mle")
      ->check(CLI::IsMember({"mcmc", "mle"}))
      ->delimiter(',');

  app.add_option("--beta", c.beta, "Base step size");
  app.add_option("--t-prime", c.t_prime, "Iteration where the step starts to decay");
  app.add_option("--patience", c.patience, "Stop after this many iterations without improvement");
  app.add_option("--window", c.window, "Bound smoothing window");
  app.add_option("--momentum", c.momentum, "Gradient momentum weight");
  app.add_option("--clip", c.clip_norm, "Gradient norm cap");
  app.add_option("--tau", spec.tau, "Prior precision, N(0, I / tau)");
  app.add_option("--ns", ns, "Monte Carlo draws per iteration");
  app.add_option("--max-iters", c.max_iters, "Iteration limit");
  app.add_option("--batch", batch, "Mini-batch size (0 uses all rows)");
  app.add_option("--seed", c.seed, "Random seed");
  app.add_option("--pd-strategy", pd,
                 "auto | plain | bounded | logtransform | retraction; auto picks retraction "
                 "for full and bounded for diagonal covariances")
      ->check(CLI::IsMember({"auto", "plain", "bounded", "logtransform", "retraction"}));
  app.add_option("--bounded-beta0", bounded_beta0, "Step cap for the bounded strategy");
  app.add_option("--bounded-delta", bounded_delta, "Fraction of the admissible step");
  app.add_option("--cv", cv, "Control variates: on | off")->check(CLI::IsMember({"on", "off"}));
  app.add_option("--structure", structure, "full | diagonal (task default when omitted)")
      ->check(CLI::IsMember({"full", "diagonal"}));
  app.add_option("--init", init, "prior | mle (mle is the default for garch and learned-noise fits)")
      ->check(CLI::IsMember({"prior", "mle"}));
  double init_precision = 0.0;
  app.add_option("--init-precision", init_precision,
                 "Isotropic precision of an MLE start (default: curvature at the MLE)");
  app.add_flag("!--no-intercept", spec.intercept, "Do not prepend a column of ones");
  app.add_option("--sigma2", sigma2, "Known noise variance (linreg, har)");
  app.add_option("--noise-alpha", spec.noise_prior.alpha, "Inverse-Gamma prior shape");
  app.add_option("--noise-beta", spec.noise_prior.beta, "Inverse-Gamma prior scale");
  app.add_option("--dim", dim, "Dimension of the constant task");
  app.add_option("--mcmc-draws", mcmc_draws, "Total chain length including burn-in");
  app.add_option("--mcmc-burn-in", mcmc_burn_in, "Burn-in iterations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    spec.task = parse_task(task);
    if (spec.task != Task::Constant && spec.data_path.empty()) {
      throw ConfigError("--data is required for task " + task);
    }
    c.n_samples = ns;
    if (batch > 0) c.batch_size = batch;
    c.cv_enabled = cv == "on";
    if (pd == "auto") {
      spec.auto_pd_strategy = true;
    } else switch (parse_pd_strategy(pd)) {
      case PdStrategyKind::Plain: c.pd_strategy = PdStrategy::plain(); break;
      case PdStrategyKind::BoundedStep:
        c.pd_strategy = PdStrategy::bounded_step(bounded_beta0, bounded_delta);
        break;
      case PdStrategyKind::LogTransform: c.pd_strategy = PdStrategy::log_transform(); break;
      case PdStrategyKind::Retraction: c.pd_strategy = PdStrategy::retraction(); break;
    }
    if (!structure.empty()) {
      spec.structure = structure == "full" ? CovStructure::Full : CovStructure::Diagonal;
    }
    if (!init.empty()) spec.init = init == "mle" ? InitMode::Mle : InitMode::Prior;
    if (app.count("--sigma2") > 0) spec.sigma2 = sigma2;
    if (app.count("--init-precision") > 0) spec.init_precision = init_precision;
    spec.constant_dim = dim;
    spec.mcmc_draws = mcmc_draws;
    spec.mcmc_burn_in = mcmc_burn_in;
    for (const auto& m : compare) {
      if (m == "mcmc") spec.compare_mcmc = true;
      if (m == "mle") spec.compare_mle = true;
    }
  } catch (const Error& e) {
    std::cerr << "qbvi: " << e.what() << '\n';
    return 2;
  }
  return run(spec, std::cerr);
}

}  // namespace qbvi::cli
