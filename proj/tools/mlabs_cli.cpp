// mlabs command-line front end.
//
// Settings are resolved in this order, later entries winning:
//   built-in defaults < --config file < --set key=value (in order) < named flags

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlabs/mlabs.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::string> data, test_data, chain, response, output;
  std::optional<long long> seed;
  std::optional<int> n_iter, burn_in, thin, threads;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("-c,--config", f.config, "key = value configuration file");
  app->add_option("-s,--set", f.sets, "override a configuration key (key=value), repeatable");
  app->add_option("--output", f.output, "output directory");
  app->add_option("--seed", f.seed, "random seed");
  app->add_option("--n-iter", f.n_iter, "MCMC iterations");
  app->add_option("--burn-in", f.burn_in, "burn-in iterations");
  app->add_option("--thin", f.thin, "keep every thin-th post-burn-in state");
  app->add_option("--threads", f.threads, "worker threads for independent fits (0 = all cores)");
}

void add_data(CLI::App* app, CommonFlags& f) {
  app->add_option("--data", f.data, "training CSV");
  app->add_option("--response", f.response, "response column name");
}

mlabs::RunConfig resolve(const CommonFlags& f, mlabs::Task task) {
  mlabs::RunConfig cfg;
  if (!f.config.empty()) mlabs::apply_config_file(cfg, f.config);
  for (const auto& s : f.sets) mlabs::apply_override(cfg, s);
  cfg.task = task;
  if (f.data) cfg.data = *f.data;
  if (f.test_data) cfg.test_data = *f.test_data;
  if (f.chain) cfg.chain = *f.chain;
  if (f.response) cfg.response = *f.response;
  if (f.output) cfg.output = *f.output;
  if (f.seed) mlabs::apply_setting(cfg, "seed", std::to_string(*f.seed));
  if (f.n_iter) cfg.hyper.n_iter = *f.n_iter;
  if (f.burn_in) cfg.hyper.burn_in = *f.burn_in;
  if (f.thin) cfg.hyper.thin = *f.thin;
  if (f.threads) cfg.threads = *f.threads;
  return cfg;
}

void print_fit(const mlabs::FitReport& r, bool probit) {
  std::cout << "retained samples: " << r.chain.samples.size() << "\n"
            << "posterior mean J: " << r.mean_J << "\n";
  if (probit) {
    std::cout << "in-sample AUC:    " << r.in_sample_auc << "\n";
  } else {
    std::cout << "posterior mean sigma2: " << r.mean_sigma2 << "\n"
              << "in-sample RMSE:   " << r.in_sample_rmse << "\n";
  }
  std::cout << "acceptance birth/death/relocate: " << r.acceptance[0] << " / " << r.acceptance[1] << " / "
            << r.acceptance[2] << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Multivariate Levy adaptive B-spline regression and classification"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* fit = app.add_subcommand("fit", "fit a regression model and write its chain");
  add_common(fit, flags);
  add_data(fit, flags);
  fit->add_option("--chain", flags.chain, "chain file to write (default <output>/chain.jsonl)");

  auto* classify = app.add_subcommand("classify", "fit a probit classifier and write its chain");
  add_common(classify, flags);
  add_data(classify, flags);
  classify->add_option("--chain", flags.chain, "chain file to write (default <output>/chain.jsonl)");

  auto* predict = app.add_subcommand("predict", "predict from a saved chain");
  add_common(predict, flags);
  predict->add_option("--chain", flags.chain, "chain file to read")->required();
  predict->add_option("--test-data", flags.test_data, "CSV with the predictor columns")->required();

  auto* cv = app.add_subcommand("cv", "repeated k-fold cross-validation");
  add_common(cv, flags);
  add_data(cv, flags);

  auto* grid = app.add_subcommand("grid", "cross-validated hyperparameter grid search");
  add_common(grid, flags);
  add_data(grid, flags);

  auto* benchmark = app.add_subcommand("benchmark", "synthetic benchmark sweep");
  add_common(benchmark, flags);

  auto* generate = app.add_subcommand("generate", "write a synthetic train/test pair as CSV");
  std::string gen_function = "radial";
  double gen_rsnr = 5.0;
  long long gen_seed = 1;
  std::string gen_output = ".";
  generate->add_option("--function", gen_function, "radial, complex, nonsmooth, friedman1, friedman2, friedman3, moons");
  generate->add_option("--rsnr", gen_rsnr, "root signal-to-noise ratio (moons: noise sd)");
  generate->add_option("--seed", gen_seed, "random seed");
  generate->add_option("--output", gen_output, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (*generate) {
    if (gen_seed < 0) throw mlabs::ConfigError("seed must be non-negative");
    mlabs::RunConfig cfg;
    cfg.output = gen_output;
    if (gen_function == "moons") {
      const auto d = mlabs::bench::two_moons(300, gen_rsnr, static_cast<std::uint64_t>(gen_seed));
      auto out = mlabs::detail::open_output(mlabs::detail::output_path(cfg, "train.csv"));
      mlabs::write_dataset_csv(out, d, "y");
    } else {
      const auto f = mlabs::bench::parse_test_function(gen_function);
      const auto d = mlabs::bench::generate_dataset(
          mlabs::bench::standard_spec(f, gen_rsnr, static_cast<std::uint64_t>(gen_seed)));
      auto train = mlabs::detail::open_output(mlabs::detail::output_path(cfg, "train.csv"));
      mlabs::write_dataset_csv(train, d.train, "y");
      auto test = mlabs::detail::open_output(mlabs::detail::output_path(cfg, "test.csv"));
      mlabs::write_dataset_csv(test, d.test, "y");
    }
    std::cout << "wrote " << gen_output << "\n";
    return 0;
  }

  if (*fit) {
    const auto cfg = resolve(flags, mlabs::Task::kFit);
    print_fit(mlabs::cmd_fit(cfg), false);
  } else if (*classify) {
    const auto cfg = resolve(flags, mlabs::Task::kClassify);
    print_fit(mlabs::cmd_classify(cfg), true);
  } else if (*predict) {
    const auto cfg = resolve(flags, mlabs::Task::kPredict);
    const auto out = mlabs::cmd_predict(cfg);
    std::cout << "predicted " << out.rows() << " rows\n";
  } else if (*cv) {
    const auto cfg = resolve(flags, mlabs::Task::kCv);
    const auto res = mlabs::cmd_cv(cfg);
    const char* metric = cfg.link == mlabs::Link::kProbit ? "AUC" : "RMSE";
    std::cout << "fits: " << res.fits << "\n"
              << "fold " << metric << ": mean " << res.fold_summary.mean << " sd " << res.fold_summary.sd << " ("
              << res.fold_summary.count << " folds)\n"
              << "pooled " << metric << " per repeat: mean " << res.pooled_summary.mean << " sd "
              << res.pooled_summary.sd << "\n";
  } else if (*grid) {
    const auto cfg = resolve(flags, mlabs::Task::kGrid);
    const auto res = mlabs::cmd_hyper_grid(cfg);
    std::cout << "candidates: " << res.candidates.size() << ", fits: " << res.fits << "\n"
              << "best (index " << res.best << "):\n"
              << mlabs::render_hyper(res.best_hyper);
  } else if (*benchmark) {
    const auto cfg = resolve(flags, mlabs::Task::kBenchmark);
    const auto rows = mlabs::cmd_benchmark(cfg);
    int failed = 0;
    for (const auto& r : rows) failed += r.status == "ok" ? 0 : 1;
    std::cout << rows.size() << " rows, " << failed << " failed\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    // InputError and ConfigError
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
