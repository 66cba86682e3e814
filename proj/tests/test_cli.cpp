#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "qbvi/error.hpp"
#include "qbvi_cli/app.hpp"

namespace {

using namespace qbvi;
using namespace qbvi::cli;
namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("qbvi_cli_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path_ / name;
    std::ofstream(p) << content;
    return p.string();
  }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> read_trace(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iter,lb_raw,lb_smoothed,train_ll,test_ll");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

TEST(LoadCsv, Basic) {
  TempDir dir;
  const auto path = dir.file("a.csv", "1.5,0\n2,1\n-3e-1,1\n");
  const Dataset d = load_csv(path, false);
  ASSERT_EQ(d.rows(), 3);
  ASSERT_EQ(d.cols(), 1);
  EXPECT_DOUBLE_EQ(d.X(2, 0), -0.3);
  EXPECT_DOUBLE_EQ(d.y[1], 1.0);

  const auto with_header = dir.file("h.csv", "x,y\n1,2\n3,4\n");
  EXPECT_EQ(load_csv(with_header, true).rows(), 2);
  EXPECT_THROW(load_csv(with_header, false), ParseError);
}

TEST(LoadCsv, ReportsLocation) {
  TempDir dir;
  const auto path = dir.file("bad.csv", "1,2,3\n4,5,abc\n");
  try {
    load_csv(path, false);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.col(), 3u);
  }
  EXPECT_THROW(load_csv(dir.file("nan.csv", "1,nan\n"), false), ParseError);
  EXPECT_THROW(load_csv(dir.file("empty.csv", "1,\n"), false), ParseError);
  EXPECT_THROW(load_csv(dir.file("ragged.csv", "1,2\n1,2,3\n"), false), ParseError);
  EXPECT_THROW(load_csv((dir.path() / "missing.csv").string(), false), IoError);
}

TEST(SplitData, SizesAndDeterminism) {
  Eigen::MatrixXd X(100, 1);
  for (int i = 0; i < 100; ++i) X(i, 0) = i;
  const Dataset data = Dataset::make(X, X.col(0));
  SplitSpec spec{0.75, false, 42};
  const auto [a_train, a_test] = split_data(data, spec);
  EXPECT_EQ(a_train.rows(), 75);
  EXPECT_EQ(a_test.rows(), 25);
  const auto [b_train, b_test] = split_data(data, spec);
  EXPECT_EQ(a_train.X, b_train.X);
  EXPECT_EQ(a_test.y, b_test.y);
  spec.seed = 43;
  EXPECT_NE(split_data(data, spec).first.X, a_train.X);

  std::vector<int> seen(100, 0);
  for (Eigen::Index i = 0; i < a_train.rows(); ++i) ++seen[static_cast<int>(a_train.X(i, 0))];
  for (Eigen::Index i = 0; i < a_test.rows(); ++i) ++seen[static_cast<int>(a_test.X(i, 0))];
  for (int s : seen) EXPECT_EQ(s, 1);

  const Dataset four = Dataset::make(Eigen::MatrixXd::Ones(4, 1), Eigen::VectorXd::Ones(4));
  const auto [t4, s4] = split_data(four, SplitSpec{0.75, false, 0});
  EXPECT_EQ(t4.rows(), 3);
  EXPECT_EQ(s4.rows(), 1);

  const auto [c_train, c_test] = split_data(data, SplitSpec{0.75, true, 0});
  EXPECT_EQ(c_train.X(74, 0), 74.0);
  EXPECT_EQ(c_test.X(0, 0), 75.0);
  EXPECT_THROW(split_data(data, SplitSpec{1.0, false, 0}), ConfigError);
}

RunSpec constant_spec(const fs::path& out) {
  RunSpec spec;
  spec.task = Task::Constant;
  spec.constant_dim = 3;
  spec.auto_pd_strategy = true;
  spec.output_dir = out.string();
  spec.config.max_iters = 300;
  spec.config.seed = 7;
  return spec;
}

TEST(Run, ConstantTaskRecoversPrior) {
  TempDir dir;
  std::ostringstream err;
  ASSERT_EQ(run(constant_spec(dir.path()), err), 0) << err.str();
  const auto rec = load_result((dir.path() / "result.json").string());
  EXPECT_LT(rec.q.mean().cwiseAbs().maxCoeff(), 0.05);
  EXPECT_LT((rec.q.precision_dense() - 0.2 * Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(),
            0.01);
  EXPECT_TRUE(fs::exists(dir.path() / "metrics.csv"));
}

TEST(Run, ResultRoundTripsExactly) {
  TempDir dir;
  const RunSpec spec = constant_spec(dir.path());
  std::ostringstream err;
  ASSERT_EQ(run(spec, err), 0) << err.str();
  const auto rec = load_result((dir.path() / "result.json").string());

  TrainConfig config = spec.config;
  config.prior = PriorSpec::isotropic(3, spec.tau);
  config.pd_strategy = PdStrategy::retraction();
  const auto direct = fit(ConstantModel(3, 0.0), config);
  EXPECT_EQ(rec.q.mean(), direct.best_q.mean());
  EXPECT_EQ(rec.q.precision(), direct.best_q.precision());

  const auto j = nlohmann::json::parse(slurp(dir.path() / "result.json"));
  EXPECT_EQ(j.at("best_iter").get<int>(), direct.best_iter);
  EXPECT_EQ(j.at("seed").get<std::uint64_t>(), 7u);
  EXPECT_EQ(j.at("exit_reason").get<std::string>(), std::string(to_string(direct.exit_reason)));
  EXPECT_EQ(j.at("config").at("pd_strategy").get<std::string>(), "retraction");
}

TEST(Run, TraceMatchesOfflineSmoothing) {
  TempDir dir;
  const RunSpec spec = constant_spec(dir.path());
  std::ostringstream err;
  ASSERT_EQ(run(spec, err), 0) << err.str();
  const auto rows = read_trace(dir.path() / "trace.csv");
  const auto j = nlohmann::json::parse(slurp(dir.path() / "result.json"));
  ASSERT_EQ(rows.size(), j.at("iterations").get<std::size_t>());
  std::vector<double> raw;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 5u);
    EXPECT_EQ(rows[i][0], static_cast<double>(i + 1));
    raw.push_back(rows[i][1]);
    EXPECT_NEAR(rows[i][2], smooth_lb(raw, spec.config.window), 1e-12 * (1.0 + std::abs(rows[i][2])));
  }
}

TEST(Run, BitwiseDeterministic) {
  TempDir a, b;
  std::ostringstream err;
  ASSERT_EQ(run(constant_spec(a.path()), err), 0);
  ASSERT_EQ(run(constant_spec(b.path()), err), 0);
  EXPECT_EQ(slurp(a.path() / "result.json"), slurp(b.path() / "result.json"));
  EXPECT_EQ(slurp(a.path() / "trace.csv"), slurp(b.path() / "trace.csv"));
}

TEST(Run, MissingDataFileNamesPath) {
  TempDir dir;
  RunSpec spec;
  spec.task = Task::Logistic;
  spec.data_path = (dir.path() / "no_such_file.csv").string();
  spec.output_dir = dir.path().string();
  std::ostringstream err;
  EXPECT_NE(run(spec, err), 0);
  EXPECT_NE(err.str().find(spec.data_path), std::string::npos) << err.str();
}

TEST(Run, LogisticWithBaselines) {
  TempDir dir;
  std::ostringstream csv;
  Rng rng(3);
  const Eigen::MatrixXd z = Eigen::MatrixXd::NullaryExpr(80, 2, [&] { return standard_normal(1, rng)[0]; });
  for (int i = 0; i < 80; ++i) {
    const double eta = 0.5 + z(i, 0) - z(i, 1);
    csv << z(i, 0) << ',' << z(i, 1) << ',' << (eta + standard_normal(1, rng)[0] > 0 ? 1 : 0) << '\n';
  }
  RunSpec spec;
  spec.task = Task::Logistic;
  spec.data_path = dir.file("d.csv", csv.str());
  spec.output_dir = dir.path().string();
  spec.auto_pd_strategy = true;
  spec.config.max_iters = 200;
  spec.compare_mcmc = true;
  spec.compare_mle = true;
  spec.mcmc_draws = 3000;
  spec.mcmc_burn_in = 1000;
  std::ostringstream err;
  ASSERT_EQ(run(spec, err), 0) << err.str();
  const std::string metrics = slurp(dir.path() / "metrics.csv");
  EXPECT_EQ(metrics.rfind("metric,qbvi_train,qbvi_test,mcmc_train,mcmc_test,mle_train,mle_test", 0), 0u)
      << metrics;
  for (const char* row : {"\nprecision,", "\nrecall,", "\naccuracy,", "\nf1,", "\nll,"}) {
    EXPECT_NE(metrics.find(row), std::string::npos) << row;
  }
  const auto j = nlohmann::json::parse(slurp(dir.path() / "result.json"));
  EXPECT_EQ(j.at("data").at("n_train").get<int>(), 60);
  EXPECT_EQ(j.at("sub_seeds").at("mcmc").get<std::uint64_t>(), kMcmcSeedOffset);
  EXPECT_TRUE(j.contains("mle"));
  EXPECT_TRUE(j.contains("mcmc"));
}

TEST(MainEntry, ParsesFlags) {
  TempDir dir;
  const std::string out = dir.path().string();
  std::vector<std::string> args{"qbvi", "--task", "constant", "--dim", "2", "--max-iters", "40",
                                "--seed", "3", "--beta", "0.05", "--pd-strategy", "plain",
                                "--cv", "off", "--out", out};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  ASSERT_EQ(main_entry(static_cast<int>(argv.size()), argv.data()), 0);
  const auto j = nlohmann::json::parse(slurp(dir.path() / "result.json"));
  EXPECT_EQ(j.at("dim").get<int>(), 2);
  EXPECT_EQ(j.at("iterations").get<int>(), 40);
  EXPECT_EQ(j.at("config").at("beta").get<double>(), 0.05);
  EXPECT_EQ(j.at("config").at("pd_strategy").get<std::string>(), "plain");
  EXPECT_FALSE(j.at("config").at("cv").get<bool>());

  std::vector<std::string> bad{"qbvi", "--task", "nonsense"};
  std::vector<char*> bad_argv;
  for (auto& a : bad) bad_argv.push_back(a.data());
  EXPECT_NE(main_entry(static_cast<int>(bad_argv.size()), bad_argv.data()), 0);

  std::vector<std::string> no_data{"qbvi", "--task", "logistic"};
  std::vector<char*> nd_argv;
  for (auto& a : no_data) nd_argv.push_back(a.data());
  EXPECT_NE(main_entry(static_cast<int>(nd_argv.size()), nd_argv.data()), 0);
}

TEST(ParseTask, RoundTrip) {
  for (Task t : {Task::Logistic, Task::Linreg, Task::Har, Task::Garch, Task::Constant}) {
    EXPECT_EQ(parse_task(to_string(t)), t);
  }
  EXPECT_THROW(parse_task("svm"), ConfigError);
}

}  // namespace
