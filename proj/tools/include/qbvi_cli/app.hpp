#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "qbvi/inverse_gamma.hpp"
#include "qbvi/models.hpp"
#include "qbvi/trainer.hpp"

namespace qbvi::cli {

enum class Task { Logistic, Linreg, Har, Garch, Constant };

std::string_view to_string(Task task);
/// Throws ConfigError on an unknown name.
Task parse_task(std::string_view name);

/// Sub-seed offsets added to TrainConfig::seed.
inline constexpr std::uint64_t kSplitSeedOffset = 1;
inline constexpr std::uint64_t kMcmcSeedOffset = 2;
inline constexpr std::uint64_t kSummarySeedOffset = 3;

struct SplitSpec {
  double fraction = 0.75;
  /// First block trains; otherwise a seeded permutation is used.
  bool chronological = false;
  /// run() sets this from the training seed.
  std::uint64_t seed = 0;
};

enum class InitMode { Prior, Mle };

struct RunSpec {
  Task task = Task::Logistic;
  std::string data_path;
  bool has_header = false;
  SplitSpec split;
  TrainConfig config;
  std::string output_dir = ".";
  bool compare_mcmc = false;
  bool compare_mle = false;

  double tau = 0.2;
  /// Task default when unset: Diagonal for mean-field fits, Full otherwise.
  std::optional<CovStructure> structure;
  /// Task default when unset: Mle for garch, Prior otherwise.
  std::optional<InitMode> init;
  /// Isotropic precision of an MLE start; the curvature at the MLE when unset.
  std::optional<double> init_precision;
  /// Replaces config.pd_strategy with retraction (full) or bounded step (diagonal).
  bool auto_pd_strategy = false;
  bool intercept = true;
  /// Known noise variance for linreg; the noise is learned when unset.
  std::optional<double> sigma2;
  IGParams noise_prior{3.0, 1.0};
  Eigen::Index constant_dim = 2;
  Eigen::Index mcmc_draws = 50000;
  Eigen::Index mcmc_burn_in = 10000;
};

/// Comma-separated numeric table; the last column is the target. Rows and
/// columns in ParseError are 1-based line and field numbers of the file.
Dataset load_csv(const std::string& path, bool has_header);

/// ceil(fraction n) training rows, the remainder for testing.
std::pair<Dataset, Dataset> split_data(const Dataset& data, const SplitSpec& spec);

struct PosteriorRecord {
  GaussianVariational q;
  std::optional<IGParams> noise;
};

/// Reads the posterior back from a result.json written by run().
PosteriorRecord load_result(const std::string& path);

/// Runs one experiment and writes result.json, trace.csv and metrics.csv into
/// spec.output_dir. Returns 0 on success; errors are reported on `err`.
int run(const RunSpec& spec, std::ostream& err);

/// Parses command-line flags and calls run().
int main_entry(int argc, char** argv);

}  // namespace qbvi::cli
