#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "mlabs/mlabs.hpp"

using namespace mlabs;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("mlabs_io_") + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset noisy_line(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> e(0.0, 0.1);
  Matrix X(n, 2);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = u(rng);
    X(i, 1) = u(rng);
    y[i] = 2 * X(i, 0) + e(rng);
  }
  return Dataset(X, y, {"a", "b"});
}

Hyperparams tiny(int n_iter = 60) {
  Hyperparams h;
  h.n_iter = n_iter;
  h.burn_in = n_iter / 2;
  h.thin = 1;
  return h;
}

}  // namespace

TEST(Csv, ReadsHeaderAndRows) {
  std::istringstream in("x1, x2 ,y\n1,2,3\n\n4,5,6\n");
  const auto t = read_csv(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"x1", "x2", "y"}));
  ASSERT_EQ(t.rows.size(), 2u);
  const Dataset d = dataset_from_table(t, "x2");
  EXPECT_EQ(d.names(), (std::vector<std::string>{"x1", "y"}));
  EXPECT_EQ(d.y()[1], 5.0);
  EXPECT_EQ(d.X()(1, 1), 6.0);
}

TEST(Csv, Errors) {
  std::istringstream empty("");
  EXPECT_THROW(read_csv(empty), InputError);
  std::istringstream header_only("x,y\n");
  EXPECT_THROW(read_csv(header_only), InputError);
  std::istringstream ragged("x,y\n1,2\n3\n");
  EXPECT_THROW(read_csv(ragged), InputError);
  std::istringstream missing("x,y\n1,\n");
  EXPECT_THROW(read_csv(missing), InputError);
  std::istringstream text("x,y\n1,abc\n");
  EXPECT_THROW(read_csv(text), InputError);
  std::istringstream nan("x,y\n1,nan\n");
  EXPECT_THROW(read_csv(nan), InputError);
  std::istringstream ok("x,y\n1,2\n");
  EXPECT_THROW(dataset_from_table(read_csv(ok), "z"), ConfigError);
  EXPECT_THROW(read_csv_file("/nonexistent/file.csv"), InputError);
}

TEST(Csv, WriteReadRoundTrip) {
  const Dataset d = noisy_line(7, 1);
  std::stringstream ss;
  write_dataset_csv(ss, d, "target");
  const Dataset back = dataset_from_table(read_csv(ss), "target");
  EXPECT_EQ(back.X(), d.X());
  EXPECT_EQ(back.y(), d.y());
  EXPECT_EQ(back.names(), d.names());
}

TEST(ChainIo, RoundTripPredictsBitExactly) {
  const Dataset d = noisy_line(30, 2);
  Hyperparams h = tiny(300);
  h.degrees = {0, 1, 3};
  const Chain chain = run_chain(d, h);
  std::stringstream ss;
  save_chain(ss, chain, d.names());
  const ChainFile back = load_chain(ss);
  EXPECT_EQ(back.names, d.names());
  EXPECT_EQ(back.chain.samples, chain.samples);
  const Prediction a = predict(chain, d.X());
  const Prediction b = predict(back.chain, d.X());
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
}

TEST(ChainIo, ProbitRoundTripKeepsTau) {
  Matrix X(6, 1);
  X << 0, 1, 2, 3, 4, 5;
  Vector y(6);
  y << 0, 0, 0, 1, 1, 1;
  const Dataset d(X, y);
  const Chain chain = run_probit_chain(d, tiny(100));
  std::stringstream ss;
  save_chain(ss, chain, d.names());
  const ChainFile back = load_chain(ss);
  EXPECT_EQ(back.chain.link, Link::kProbit);
  EXPECT_EQ(back.chain.samples, chain.samples);
  EXPECT_EQ(predict_prob(back.chain, X), predict_prob(chain, X));
}

TEST(ChainIo, MalformedFiles) {
  const auto load = [](const std::string& text) {
    std::istringstream in(text);
    return load_chain(in);
  };
  EXPECT_THROW(load(""), InputError);
  EXPECT_THROW(load("not json\n"), InputError);
  EXPECT_THROW(load(R"({"schema":"other","version":1,"link":"identity","p":1,"names":["x"],"samples":0})"),
               InputError);
  EXPECT_THROW(load(R"({"schema":"mlabs-chain","version":99,"link":"identity","p":1,"names":["x"],"samples":0})"),
               InputError);
  EXPECT_THROW(load(R"({"schema":"mlabs-chain","version":1,"link":"identity","p":2,"names":["x"],"samples":0})"),
               InputError);
  const std::string header =
      R"({"schema":"mlabs-chain","version":1,"link":"identity","p":1,"names":["x"],"samples":1})""\n";
  EXPECT_THROW(load(header + R"({"intercept":0,"sigma2":1,"M":1,"atoms":[{"beta":1,"factors":[{"v":3,"k":0,"knots":[0,1]}]}],"tau":null})"),
               InputError);
  EXPECT_THROW(load(header + R"({"intercept":0,"sigma2":1,"M":1,"atoms":[{"beta":1,"factors":[{"v":0,"k":0,"knots":[1,0]}]}],"tau":null})"),
               InputError);
  EXPECT_THROW(load(header + R"({"intercept":0})"), InputError);
  EXPECT_THROW(load_chain_file("/nonexistent/chain.jsonl"), InputError);
}

TEST(Config, ParsesKeysCommentsAndOverrides) {
  RunConfig cfg;
  std::istringstream in(
      "# comment\n"
      "degrees = 0, 2\n"
      "k_max = 3\n"
      "expansion = 1.5\n"
      "phi = half-range\n"
      "n_iter = 2000\n"
      "burn_in = 1000\n"
      "thin = 10\n"
      "seed = 42\n"
      "link = probit\n"
      "functions = radial, friedman2\n"
      "rsnr = 1, 5\n"
      "knot_prior = uniform\n"
      "birth_coefficient = conditional\n");
  apply_config(cfg, in);
  EXPECT_EQ(cfg.hyper.degrees, (std::vector<int>{0, 2}));
  EXPECT_EQ(cfg.hyper.k_max, 3);
  EXPECT_EQ(cfg.hyper.expansion, 1.5);
  EXPECT_EQ(cfg.hyper.phi_rule, PhiRule::kHalfRange);
  EXPECT_EQ(cfg.hyper.retained_samples(), 100);
  EXPECT_EQ(cfg.hyper.seed, 42u);
  EXPECT_EQ(cfg.link, Link::kProbit);
  EXPECT_EQ(cfg.functions.size(), 2u);
  EXPECT_EQ(cfg.rsnr, (std::vector<double>{1.0, 5.0}));
  EXPECT_EQ(cfg.hyper.knot_prior, KnotPrior::kUniform);
  EXPECT_EQ(cfg.hyper.birth_coefficient, BirthCoefficient::kConditional);
  apply_override(cfg, "k_max=1");
  apply_override(cfg, "phi = 2.5");
  EXPECT_EQ(cfg.hyper.k_max, 1);
  EXPECT_EQ(cfg.hyper.phi, 2.5);
  EXPECT_NO_THROW(validate(cfg));
}

TEST(Config, DefaultsRunUnchanged) {
  const RunConfig cfg;
  EXPECT_EQ(cfg.hyper.a_gamma, 5.0);
  EXPECT_EQ(cfg.hyper.b_gamma, 1.0);
  EXPECT_EQ(cfg.hyper.r, 0.01);
  EXPECT_EQ(cfg.hyper.R, 0.01);
  EXPECT_EQ(cfg.hyper.retained_samples(), 1000);
  EXPECT_EQ(cfg.replicates, 5);
  EXPECT_NO_THROW(validate(cfg));
}

TEST(Config, Errors) {
  RunConfig cfg;
  EXPECT_THROW(apply_setting(cfg, "colour", "blue"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "k_max", "two"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "expansion", "1.0x"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "link", "logit"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "seed", "-1"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "functions", "sombrero"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "k_max"), ConfigError);
  std::istringstream bad("k_max 2\n");
  EXPECT_THROW(apply_config(cfg, bad), ConfigError);
  EXPECT_THROW(apply_config_file(cfg, "/nonexistent/run.conf"), ConfigError);
  RunConfig schedule;
  apply_setting(schedule, "burn_in", "100000");
  EXPECT_THROW(validate(schedule), ConfigError);
}

TEST(Config, RenderedHyperparamsReadBack) {
  Hyperparams h = bench::preset_hyper(bench::TestFunction::kFriedman1);
  h.seed = 9;
  h.expansion = 0.1;
  RunConfig cfg;
  std::istringstream in(render_hyper(h));
  apply_config(cfg, in);
  EXPECT_EQ(render_hyper(cfg.hyper), render_hyper(h));
  EXPECT_EQ(cfg.hyper.expansion, 0.1);
  EXPECT_EQ(cfg.hyper.phi, 6.0);
}

TEST(Grid, FullGridHas144Points) {
  const GridSpec g = full_grid();
  EXPECT_EQ(g.size(), 144u);
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < g.size(); ++i) distinct.insert(render_hyper(g.point(i, {})));
  EXPECT_EQ(distinct.size(), 144u);
  const Hyperparams first = g.point(0, {});
  EXPECT_EQ(first.degrees, std::vector<int>{0});
  EXPECT_EQ(first.k_max, 1);
  EXPECT_EQ(first.expansion, 0.1);
  EXPECT_EQ(g.point(1, {}).expansion, 1.0);
  EXPECT_EQ(g.point(143, {}).degrees, (std::vector<int>{0, 1, 2, 3}));
}

TEST(Grid, SinglePointNeedsNoFit) {
  const GridSpec g{{{1}}, {2}, {0.5}};
  const GridResult r = hyper_grid(noisy_line(10, 3), g, tiny(), Link::kIdentity, 2, 1, 1);
  EXPECT_EQ(r.fits, 0);
  EXPECT_EQ(r.best, 0u);
  EXPECT_EQ(r.best_hyper.degrees, std::vector<int>{1});
  EXPECT_EQ(r.best_hyper.expansion, 0.5);
}

TEST(Grid, EmptyGridIsConfigError) {
  const GridSpec g{{}, {1}, {0.1}};
  EXPECT_THROW(hyper_grid(noisy_line(10, 3), g, tiny(), Link::kIdentity, 2, 1, 1), ConfigError);
}

TEST(Grid, TiesGoToFirstCandidate) {
  // Two identical candidates give identical CV scores.
  const GridSpec g{{{1}, {1}}, {1}, {0.1}};
  const GridResult r = hyper_grid(noisy_line(20, 4), g, tiny(), Link::kIdentity, 2, 1, 1);
  EXPECT_EQ(r.fits, 4);
  ASSERT_EQ(r.scores.size(), 2u);
  EXPECT_EQ(r.scores[0], r.scores[1]);
  EXPECT_EQ(r.best, 0u);
}

TEST(Grid, PicksLowerScore) {
  // Degree 0 cannot follow a line as closely as degree 1 with a long chain.
  const GridSpec g{{{0}, {1}}, {1}, {0.1}};
  const GridResult r = hyper_grid(noisy_line(60, 5), g, tiny(3000), Link::kIdentity, 3, 1, 1);
  EXPECT_EQ(r.scores[r.best], std::min(r.scores[0], r.scores[1]));
}

TEST(Folds, PartitionCoversEveryRowOnce) {
  for (int folds : {2, 5, 7}) {
    const auto a = make_folds(23, folds, 7);
    std::vector<int> sizes(static_cast<std::size_t>(folds), 0);
    for (int f : a) {
      ASSERT_GE(f, 0);
      ASSERT_LT(f, folds);
      ++sizes[static_cast<std::size_t>(f)];
    }
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1);
    EXPECT_EQ(make_folds(23, folds, 7), a);
  }
  EXPECT_NE(make_folds(23, 5, 7), make_folds(23, 5, 8));
}

TEST(Folds, StratifiedKeepsClassRatio) {
  Vector y(40);
  for (int i = 0; i < 40; ++i) y[i] = i < 10 ? 1.0 : 0.0;
  const auto a = make_folds(40, 5, 3, &y);
  std::vector<int> pos(5, 0), all(5, 0);
  for (int i = 0; i < 40; ++i) {
    ++all[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
    if (y[i] > 0.5) ++pos[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
  }
  for (int k = 0; k < 5; ++k) {
    EXPECT_EQ(pos[static_cast<std::size_t>(k)], 2);
    EXPECT_EQ(all[static_cast<std::size_t>(k)], 8);
  }
}

TEST(Folds, Errors) {
  EXPECT_THROW(make_folds(4, 5, 1), ConfigError);
  EXPECT_THROW(make_folds(4, 1, 1), ConfigError);
}

TEST(Cv, LeaveOneOutRuns) {
  const Dataset d = noisy_line(8, 6);
  const CvResult cv = cross_validate(d, tiny(), Link::kIdentity, 8, 1, 1);
  EXPECT_EQ(cv.fits, 8);
  ASSERT_EQ(cv.folds.size(), 8u);
  for (const auto& f : cv.folds) {
    EXPECT_EQ(f.n_test, 1);
    EXPECT_EQ(f.status, "ok");
  }
  EXPECT_EQ(cv.fold_summary.count, 8);
}

TEST(Cv, FiveFoldsTwentyRepeatsIsHundredFits) {
  const CvResult cv = cross_validate(noisy_line(25, 7), tiny(10), Link::kIdentity, 5, 20, 1);
  EXPECT_EQ(cv.fits, 100);
  EXPECT_EQ(cv.folds.size(), 100u);
  EXPECT_EQ(cv.pooled.size(), 20u);
  EXPECT_EQ(cv.pooled_summary.count, 20);
}

TEST(Cv, ResultIndependentOfThreadCount) {
  const Dataset d = noisy_line(20, 8);
  const CvResult a = cross_validate(d, tiny(), Link::kIdentity, 4, 2, 1);
  const CvResult b = cross_validate(d, tiny(), Link::kIdentity, 4, 2, 3);
  for (std::size_t i = 0; i < a.folds.size(); ++i) EXPECT_EQ(a.folds[i].score, b.folds[i].score);
  EXPECT_EQ(a.pooled, b.pooled);
}

TEST(Cv, FailedFitIsRecordedAndSkipped) {
  // Leaving out the single nonzero response leaves a constant training set.
  Matrix X(5, 1);
  X << 0, 1, 2, 3, 4;
  Vector y(5);
  y << 0, 0, 0, 0, 5;
  const CvResult cv = cross_validate(Dataset(X, y), tiny(), Link::kIdentity, 5, 1, 1);
  int failed = 0;
  for (const auto& f : cv.folds) failed += f.status.rfind("failed", 0) == 0 ? 1 : 0;
  EXPECT_EQ(failed, 1);
  EXPECT_EQ(cv.fold_summary.count, 4);
  EXPECT_TRUE(std::isnan(cv.pooled[0]));
}

TEST(Cv, ProbitUsesAuc) {
  const Dataset d = bench::two_moons(40, 0.1, 2);
  const CvResult cv = cross_validate(d, tiny(200), Link::kProbit, 4, 1, 1);
  for (const auto& f : cv.folds) {
    EXPECT_EQ(f.status, "ok");
    EXPECT_GE(f.score, 0.0);
    EXPECT_LE(f.score, 1.0);
  }
  Vector bad = d.y();
  bad[0] = 0.5;
  EXPECT_THROW(cross_validate(Dataset(d.X(), bad), tiny(), Link::kProbit, 4, 1, 1), InputError);
}

TEST(Benchmark, CartesianRowCount) {
  const auto rows = run_benchmarks({bench::TestFunction::kRadial}, {1.0, 5.0}, 5, tiny(20), false, 2);
  ASSERT_EQ(rows.size(), 10u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].status, "ok");
    EXPECT_TRUE(std::isfinite(rows[i].rmse));
    EXPECT_EQ(rows[i].rsnr, i < 5 ? 1.0 : 5.0);
    EXPECT_EQ(rows[i].replicate, static_cast<int>(i % 5));
  }
}

TEST(Benchmark, ReplicatesAreReproducible) {
  const auto a = run_benchmarks({bench::TestFunction::kNonsmooth}, {5.0}, 2, tiny(20), true, 1);
  const auto b = run_benchmarks({bench::TestFunction::kNonsmooth}, {5.0}, 2, tiny(20), true, 2);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].rmse, b[i].rmse);
  EXPECT_NE(a[0].rmse, a[1].rmse);
  Hyperparams shifted = tiny(20);
  shifted.seed = 2;
  // replicate 0 with seed 2 is replicate 1 with seed 1
  const auto c = run_benchmarks({bench::TestFunction::kNonsmooth}, {5.0}, 1, shifted, true, 1);
  EXPECT_EQ(c[0].rmse, a[1].rmse);
}

TEST(Benchmark, FailedFitsAreRecorded) {
  Hyperparams h = tiny(20);
  h.burn_in = 20;  // every fit rejects its schedule
  const auto rows = run_benchmarks({bench::TestFunction::kRadial}, {5.0}, 2, h, false, 1);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.status.rfind("failed: ", 0), 0u);
    EXPECT_TRUE(std::isnan(r.rmse));
  }
  std::stringstream ss;
  write_benchmark_csv(ss, rows);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "function,rsnr,replicate,rmse,runtime_s,status");
}

TEST(Workflow, FitOnStepDataAndPredict) {
  TempDir dir;
  {
    std::ofstream out(dir.file("step.csv"));
    out << "x,y\n";
    std::mt19937_64 rng(1);
    std::normal_distribution<double> e(0.0, 0.05);
    for (int i = 0; i < 40; ++i) {
      const double x = i / 39.0;
      out << x << ',' << (x < 0.5 ? 0.0 : 1.0) + e(rng) << '\n';
    }
  }
  RunConfig cfg;
  cfg.data = dir.file("step.csv");
  cfg.output = dir.file("out");
  cfg.hyper = tiny(2000);
  cfg.hyper.degrees = {0};
  cfg.hyper.k_max = 1;
  const FitReport r = cmd_fit(cfg);
  EXPECT_LT(r.in_sample_rmse, 0.5);  // half the step gap
  EXPECT_EQ(r.chain.samples.size(), 1000u);
  const std::string chain_text = slurp(dir.file("out/chain.jsonl"));
  EXPECT_FALSE(chain_text.empty());
  EXPECT_TRUE(fs::exists(dir.file("out/fit_report.csv")));

  cmd_fit(cfg);
  EXPECT_EQ(slurp(dir.file("out/chain.jsonl")), chain_text);

  cfg.chain = dir.file("out/chain.jsonl");
  cfg.test_data = dir.file("step.csv");
  const Matrix pred = cmd_predict(cfg);
  ASSERT_EQ(pred.rows(), 40);
  EXPECT_LT(pred(0, 0), 0.5);
  EXPECT_GT(pred(39, 0), 0.5);
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    EXPECT_LE(pred(i, 1), pred(i, 0));
    EXPECT_GE(pred(i, 2), pred(i, 0));
  }

  cfg.response = "target";
  EXPECT_THROW(cmd_fit(cfg), ConfigError);
}

TEST(Workflow, ClassifyWritesProbabilityGrid) {
  TempDir dir;
  {
    std::ofstream out(dir.file("moons.csv"));
    write_dataset_csv(out, bench::two_moons(60, 0.1, 3), "label");
  }
  RunConfig cfg;
  cfg.data = dir.file("moons.csv");
  cfg.response = "label";
  cfg.output = dir.path().string();
  cfg.hyper = tiny(400);
  cfg.grid_export = 5;
  const FitReport r = cmd_classify(cfg);
  EXPECT_GT(r.in_sample_auc, 0.8);
  std::ifstream grid(dir.file("probability_grid.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(grid, line)) ++lines;
  EXPECT_EQ(lines, 26);
}
