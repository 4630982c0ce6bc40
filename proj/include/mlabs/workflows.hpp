#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "mlabs/benchmarks.hpp"
#include "mlabs/chain.hpp"
#include "mlabs/chain_io.hpp"
#include "mlabs/config.hpp"
#include "mlabs/dataset.hpp"
#include "mlabs/errors.hpp"
#include "mlabs/probit.hpp"
#include "mlabs/sampler.hpp"

namespace mlabs {

// ---------------------------------------------------------------------------
// Task plumbing

/// Runs fn(0..n-1) on up to `threads` workers (0 = hardware concurrency).
/// Results come back in index order; a task that throws stores its message.
template <typename R>
struct TaskResult {
  std::optional<R> value;
  std::string error;
};

template <typename R, typename Fn>
std::vector<TaskResult<R>> parallel_map(std::size_t n, int threads, Fn fn) {
  std::vector<TaskResult<R>> out(n);
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i].value = fn(i);
      } catch (const std::exception& e) {
        out[i].error = e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return out;
}

/// Seed for sub-task (a, b) of a run with base seed `base`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::array<std::uint32_t, 2> v{};
  seq.generate(v.begin(), v.end());
  return (static_cast<std::uint64_t>(v[0]) << 32) | v[1];
}

inline Chain fit_chain(const Dataset& data, const Hyperparams& hyper, Link link) {
  return link == Link::kProbit ? run_probit_chain(data, hyper) : run_chain(data, hyper);
}

/// Mean of mean_function for identity chains, mean of Phi(f) for probit.
inline Vector point_prediction(const Chain& chain, const Matrix& X) {
  return chain.link == Link::kProbit ? predict_prob(chain, X) : predict(chain, X).mean;
}

struct Summary {
  double mean = NAN;
  double sd = NAN;  // sample sd; NaN for fewer than two values
  int count = 0;
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

namespace detail {

inline std::ofstream open_output(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out.precision(17);
  return out;
}

inline std::string output_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output) / name).string();
}

inline Dataset load_training(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("no training data given (key 'data')");
  return load_dataset(cfg.data, cfg.response);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// fit / classify

struct FitReport {
  Chain chain;
  double mean_J = NAN;
  double mean_sigma2 = NAN;
  double in_sample_rmse = NAN;  // regression
  double in_sample_auc = NAN;   // classification
  std::array<double, 3> acceptance{};
};

inline FitReport fit_report(const Dataset& data, const Hyperparams& hyper, Link link) {
  FitReport r;
  r.chain = fit_chain(data, hyper, link);
  if (r.chain.empty()) throw StateError("schedule retained no samples");
  double j = 0.0, s2 = 0.0;
  for (const auto& s : r.chain.samples) {
    j += s.J();
    s2 += s.sigma2;
  }
  r.mean_J = j / static_cast<double>(r.chain.samples.size());
  r.mean_sigma2 = s2 / static_cast<double>(r.chain.samples.size());
  const Vector fitted = point_prediction(r.chain, data.X());
  if (link == Link::kProbit) {
    const bool both = data.y().minCoeff() < 0.5 && data.y().maxCoeff() > 0.5;
    if (both) r.in_sample_auc = bench::auc(data.y(), fitted);
  } else {
    r.in_sample_rmse = bench::rmse(data.y(), fitted);
  }
  for (auto k : {MoveKind::kBirth, MoveKind::kDeath, MoveKind::kRelocate}) {
    r.acceptance[static_cast<std::size_t>(k)] = r.chain.diagnostics.acceptance_rate(k);
  }
  return r;
}

inline void write_fit_report(std::ostream& out, const FitReport& r) {
  out << "samples,mean_J,mean_sigma2,in_sample_rmse,in_sample_auc,accept_birth,accept_death,accept_relocate\n";
  out << r.chain.samples.size() << ',' << r.mean_J << ',' << r.mean_sigma2 << ',' << r.in_sample_rmse << ','
      << r.in_sample_auc << ',' << r.acceptance[0] << ',' << r.acceptance[1] << ',' << r.acceptance[2] << '\n';
}

/// Probability surface over the bounding box of a two-predictor dataset,
/// `resolution` points per axis, rows (x1, x2, p).
inline Matrix probability_grid(const Chain& chain, const Dataset& data, int resolution) {
  if (data.p() != 2) throw ConfigError("probability grid export needs exactly two predictors");
  if (resolution < 2) throw ConfigError("grid resolution must be >= 2");
  const auto r0 = data.range(0);
  const auto r1 = data.range(1);
  Matrix X(resolution * resolution, 2);
  for (int a = 0; a < resolution; ++a) {
    for (int b = 0; b < resolution; ++b) {
      X(a * resolution + b, 0) = r0.min + (r0.max - r0.min) * a / (resolution - 1);
      X(a * resolution + b, 1) = r1.min + (r1.max - r1.min) * b / (resolution - 1);
    }
  }
  const Vector prob = predict_prob(chain, X);
  Matrix out(X.rows(), 3);
  out.leftCols(2) = X;
  out.col(2) = prob;
  return out;
}

/// Fits the training data and writes the chain and a one-row report.
inline FitReport cmd_fit(const RunConfig& cfg, Link link = Link::kIdentity) {
  validate(cfg);
  const Dataset data = detail::load_training(cfg);
  FitReport r = fit_report(data, cfg.hyper, link);
  const std::string chain_path = cfg.chain.empty() ? detail::output_path(cfg, "chain.jsonl") : cfg.chain;
  {
    auto out = detail::open_output(chain_path);
    save_chain(out, r.chain, data.names());
  }
  {
    auto out = detail::open_output(detail::output_path(cfg, "fit_report.csv"));
    write_fit_report(out, r);
  }
  if (link == Link::kProbit && cfg.grid_export > 0) {
    const Matrix g = probability_grid(r.chain, data, cfg.grid_export);
    auto out = detail::open_output(detail::output_path(cfg, "probability_grid.csv"));
    out << data.names()[0] << ',' << data.names()[1] << ",p\n";
    for (Eigen::Index i = 0; i < g.rows(); ++i) out << g(i, 0) << ',' << g(i, 1) << ',' << g(i, 2) << '\n';
  }
  return r;
}

inline FitReport cmd_classify(const RunConfig& cfg) { return cmd_fit(cfg, Link::kProbit); }

// ---------------------------------------------------------------------------
// predict

/// Predictions for `test_data` from a saved chain. Predictor columns are
/// matched by name. Writes predictions.csv: mean,lower,upper for regression
/// chains, p for probit chains.
inline Matrix cmd_predict(const RunConfig& cfg) {
  if (cfg.chain.empty()) throw ConfigError("no chain file given (key 'chain')");
  if (cfg.test_data.empty()) throw ConfigError("no prediction data given (key 'test_data')");
  const ChainFile file = load_chain_file(cfg.chain);
  const Matrix X = matrix_from_table(read_csv_file(cfg.test_data), file.names);
  Matrix out;
  auto stream = detail::open_output(detail::output_path(cfg, "predictions.csv"));
  if (file.chain.link == Link::kProbit) {
    out = predict_prob(file.chain, X);
    stream << "p\n";
    for (Eigen::Index i = 0; i < out.rows(); ++i) stream << out(i, 0) << '\n';
  } else {
    const Prediction pred = predict(file.chain, X);
    out.resize(X.rows(), 3);
    out.col(0) = pred.mean;
    out.col(1) = pred.lower;
    out.col(2) = pred.upper;
    stream << "mean,lower,upper\n";
    for (Eigen::Index i = 0; i < out.rows(); ++i) stream << out(i, 0) << ',' << out(i, 1) << ',' << out(i, 2) << '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// cross-validation

/// Fold id (0..folds-1) for every row. Rows are shuffled with `seed` and dealt
/// round-robin; with `labels`, each class is dealt separately so every fold
/// keeps the class ratio as closely as possible.
inline std::vector<int> make_folds(int n, int folds, std::uint64_t seed, const Vector* labels = nullptr) {
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (folds > n) throw ConfigError("folds (" + std::to_string(folds) + ") exceed the number of rows (" +
                                   std::to_string(n) + ")");
  Rng rng(seed);
  std::vector<int> out(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<int>> groups;
  if (labels != nullptr) {
    std::vector<int> neg, pos;
    for (int i = 0; i < n; ++i) ((*labels)[i] > 0.5 ? pos : neg).push_back(i);
    groups = {std::move(neg), std::move(pos)};
  } else {
    groups.emplace_back(static_cast<std::size_t>(n));
    std::iota(groups[0].begin(), groups[0].end(), 0);
  }
  int offset = 0;
  for (auto& g : groups) {
    std::shuffle(g.begin(), g.end(), rng);
    for (std::size_t k = 0; k < g.size(); ++k) {
      out[static_cast<std::size_t>(g[k])] = static_cast<int>((static_cast<std::size_t>(offset) + k) % static_cast<std::size_t>(folds));
    }
    // continue dealing where the previous class stopped so fold sizes stay balanced
    offset = static_cast<int>((static_cast<std::size_t>(offset) + g.size()) % static_cast<std::size_t>(folds));
  }
  return out;
}

struct FoldScore {
  int repeat = 0;
  int fold = 0;
  int n_test = 0;
  double score = NAN;  // RMSE (regression) or AUC (classification)
  std::string status = "ok";
};

struct CvResult {
  Link link = Link::kIdentity;
  std::vector<FoldScore> folds;
  std::vector<double> pooled;  // per repeat, over all out-of-fold predictions
  Summary fold_summary;        // over successful folds
  Summary pooled_summary;      // over repeats
  int fits = 0;
};

/// Repeated k-fold CV. Fold assignments are seeded per repeat; each fit gets
/// its own derived seed, so the result does not depend on thread count.
/// Classification folds are stratified by class. A fold whose fit fails is
/// recorded and skipped.
inline CvResult cross_validate(const Dataset& data, const Hyperparams& hyper, Link link, int folds, int repeats,
                               int threads = 0) {
  hyper.validate();
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (link == Link::kProbit) require_binary(data.y());
  const int n = data.n();
  std::vector<std::vector<int>> assign;
  for (int r = 0; r < repeats; ++r) {
    assign.push_back(make_folds(n, folds, derive_seed(hyper.seed, static_cast<std::uint64_t>(r), 0),
                                link == Link::kProbit ? &data.y() : nullptr));
  }
  const auto tasks = static_cast<std::size_t>(repeats * folds);
  struct FoldOut {
    std::vector<int> rows;
    Vector pred;
  };
  auto results = parallel_map<FoldOut>(tasks, threads, [&](std::size_t t) {
    const int r = static_cast<int>(t) / folds;
    const int k = static_cast<int>(t) % folds;
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) (assign[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
    Hyperparams h = hyper;
    h.seed = derive_seed(hyper.seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(k) + 1);
    const Chain chain = fit_chain(data.subset(train), h, link);
    const Dataset held = data.subset(test);
    return FoldOut{std::move(test), point_prediction(chain, held.X())};
  });

  CvResult out;
  out.link = link;
  out.fits = static_cast<int>(tasks);
  std::vector<double> ok_scores;
  for (int r = 0; r < repeats; ++r) {
    Vector pooled_pred = Vector::Constant(n, NAN);
    bool complete = true;
    for (int k = 0; k < folds; ++k) {
      const auto& res = results[static_cast<std::size_t>(r * folds + k)];
      FoldScore fs{r, k, 0, NAN, "ok"};
      if (!res.value) {
        fs.status = "failed: " + res.error;
        complete = false;
        out.folds.push_back(fs);
        continue;
      }
      const auto& rows = res.value->rows;
      fs.n_test = static_cast<int>(rows.size());
      Vector truth(fs.n_test);
      for (int i = 0; i < fs.n_test; ++i) {
        truth[i] = data.y()[rows[static_cast<std::size_t>(i)]];
        pooled_pred[rows[static_cast<std::size_t>(i)]] = res.value->pred[i];
      }
      if (link == Link::kProbit) {
        const bool both = truth.minCoeff() < 0.5 && truth.maxCoeff() > 0.5;
        if (both) {
          fs.score = bench::auc(truth, res.value->pred);
        } else {
          fs.status = "single-class fold";
        }
      } else {
        fs.score = bench::rmse(truth, res.value->pred);
      }
      if (fs.status == "ok") ok_scores.push_back(fs.score);
      out.folds.push_back(fs);
    }
    if (complete) {
      out.pooled.push_back(link == Link::kProbit ? bench::auc(data.y(), pooled_pred) : bench::rmse(data.y(), pooled_pred));
    } else {
      out.pooled.push_back(NAN);
    }
  }
  out.fold_summary = summarize(ok_scores);
  std::vector<double> finite;
  for (double v : out.pooled) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  out.pooled_summary = summarize(finite);
  return out;
}

inline void write_cv_report(std::ostream& out, const CvResult& cv) {
  const char* metric = cv.link == Link::kProbit ? "auc" : "rmse";
  out << "repeat,fold,n_test," << metric << ",status\n";
  for (const auto& f : cv.folds) {
    out << f.repeat << ',' << f.fold << ',' << f.n_test << ',' << f.score << ',' << f.status << '\n';
  }
}

inline void write_cv_summary(std::ostream& out, const CvResult& cv) {
  out << "scope,count,mean,sd\n";
  out << "fold," << cv.fold_summary.count << ',' << cv.fold_summary.mean << ',' << cv.fold_summary.sd << '\n';
  out << "repeat_pooled," << cv.pooled_summary.count << ',' << cv.pooled_summary.mean << ',' << cv.pooled_summary.sd
      << '\n';
}

inline CvResult cmd_cv(const RunConfig& cfg) {
  validate(cfg);
  const Dataset data = detail::load_training(cfg);
  CvResult cv = cross_validate(data, cfg.hyper, cfg.link, cfg.folds, cfg.repeats, cfg.threads);
  {
    auto out = detail::open_output(detail::output_path(cfg, "cv_folds.csv"));
    write_cv_report(out, cv);
  }
  {
    auto out = detail::open_output(detail::output_path(cfg, "cv_summary.csv"));
    write_cv_summary(out, cv);
  }
  return cv;
}

// ---------------------------------------------------------------------------
// benchmarks

struct BenchmarkRow {
  bench::TestFunction function = bench::TestFunction::kRadial;
  double rsnr = 0.0;
  int replicate = 0;
  double rmse = NAN;
  double runtime_s = NAN;
  std::string status = "ok";
};

/// One synthetic replicate: data seed and chain seed are both seed + replicate.
inline BenchmarkRow run_benchmark_replicate(bench::TestFunction f, double rsnr, int replicate,
                                            const Hyperparams& hyper) {
  BenchmarkRow row{f, rsnr, replicate};
  const std::uint64_t seed = hyper.seed + static_cast<std::uint64_t>(replicate);
  const auto data = bench::generate_dataset(bench::standard_spec(f, rsnr, seed));
  Hyperparams h = hyper;
  h.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  const Chain chain = run_chain(data.train, h);
  const Vector pred = predict(chain, data.test.X()).mean;
  row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  row.rmse = bench::rmse(data.test.y(), pred);
  return row;
}

/// Every (function, rsnr, replicate) in that order. With `presets` each
/// function uses its tuned hyperparameters, keeping the schedule and seed of
/// `hyper`.
inline std::vector<BenchmarkRow> run_benchmarks(const std::vector<bench::TestFunction>& functions,
                                                const std::vector<double>& rsnrs, int replicates,
                                                const Hyperparams& hyper, bool presets, int threads = 0) {
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  struct Job {
    bench::TestFunction f;
    double rsnr;
    int rep;
  };
  std::vector<Job> jobs;
  for (auto f : functions) {
    for (double r : rsnrs) {
      for (int k = 0; k < replicates; ++k) jobs.push_back({f, r, k});
    }
  }
  auto results = parallel_map<BenchmarkRow>(jobs.size(), threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    const Hyperparams h = presets ? bench::preset_hyper(j.f, hyper) : hyper;
    return run_benchmark_replicate(j.f, j.rsnr, j.rep, h);
  });
  std::vector<BenchmarkRow> rows;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (results[i].value) {
      rows.push_back(*results[i].value);
    } else {
      rows.push_back({jobs[i].f, jobs[i].rsnr, jobs[i].rep, NAN, NAN, "failed: " + results[i].error});
    }
  }
  return rows;
}

inline void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
  out << "function,rsnr,replicate,rmse,runtime_s,status\n";
  for (const auto& r : rows) {
    out << bench::to_string(r.function) << ',' << r.rsnr << ',' << r.replicate << ',' << r.rmse << ',' << r.runtime_s
        << ',' << r.status << '\n';
  }
}

inline std::vector<BenchmarkRow> cmd_benchmark(const RunConfig& cfg) {
  validate(cfg);
  auto rows = run_benchmarks(cfg.functions, cfg.rsnr, cfg.replicates, cfg.hyper, cfg.presets, cfg.threads);
  auto out = detail::open_output(detail::output_path(cfg, "benchmark.csv"));
  write_benchmark_csv(out, rows);
  return rows;
}

// ---------------------------------------------------------------------------
// hyperparameter grid

struct GridResult {
  std::size_t best = 0;
  Hyperparams best_hyper;
  std::vector<Hyperparams> candidates;
  std::vector<double> scores;  // pooled CV mean per candidate; NaN when not evaluated
  int fits = 0;
};

/// Picks the candidate with the best mean CV score (lowest RMSE, or highest
/// AUC for probit); ties go to the earliest candidate. A one-point grid is
/// returned without fitting.
inline GridResult hyper_grid(const Dataset& data, const GridSpec& grid, const Hyperparams& base, Link link, int folds,
                             int repeats, int threads = 0) {
  if (grid.size() == 0) throw ConfigError("hyperparameter grid is empty");
  GridResult out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.candidates.push_back(grid.point(i, base));
    out.candidates.back().validate();
  }
  out.scores.assign(grid.size(), NAN);
  if (grid.size() == 1) {
    out.best_hyper = out.candidates[0];
    return out;
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const CvResult cv = cross_validate(data, out.candidates[i], link, folds, repeats, threads);
    out.fits += cv.fits;
    out.scores[i] = cv.fold_summary.mean;
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(out.scores[i])) continue;
    const bool better = !best || (link == Link::kProbit ? out.scores[i] > out.scores[*best] : out.scores[i] < out.scores[*best]);
    if (better) best = i;
  }
  if (!best) throw StateError("every grid candidate failed");
  out.best = *best;
  out.best_hyper = out.candidates[*best];
  return out;
}

inline GridResult cmd_hyper_grid(const RunConfig& cfg) {
  validate(cfg);
  const Dataset data = detail::load_training(cfg);
  GridResult g = hyper_grid(data, cfg.grid, cfg.hyper, cfg.link, cfg.folds, cfg.repeats, cfg.threads);
  {
    auto out = detail::open_output(detail::output_path(cfg, "grid_scores.csv"));
    out << "index,degrees,k_max,expansion,score\n";
    for (std::size_t i = 0; i < g.candidates.size(); ++i) {
      const auto& h = g.candidates[i];
      out << i << ",\"";
      for (std::size_t d = 0; d < h.degrees.size(); ++d) out << (d ? "," : "") << h.degrees[d];
      out << "\"," << h.k_max << ',' << h.expansion << ',' << g.scores[i] << '\n';
    }
  }
  {
    auto out = detail::open_output(detail::output_path(cfg, "best.conf"));
    out << render_hyper(g.best_hyper);
  }
  return g;
}

}  // namespace mlabs
