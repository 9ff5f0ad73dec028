#pragma once

/** Multi-run experiment harness for the leading-eigenvector (sphere) and
 * Frechet-mean (SPD) studies. Cells (n, run) are independent tasks with
 * seeds derived from the master seed, so results do not depend on how many
 * worker threads execute them. */

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "dprgd/baselines.hpp"
#include "dprgd/experiments/data.hpp"
#include "dprgd/optimizer.hpp"
#include "dprgd/privacy.hpp"
#include "dprgd/sphere.hpp"
#include "dprgd/spd.hpp"

namespace dprgd::experiments {

enum class Experiment { pca, frechet };
enum class Method { dp_rgd, dp_pgd, dp_fm, non_private };

inline std::string to_string(Experiment e) {
  return e == Experiment::pca ? "pca" : "frechet";
}

inline std::string to_string(Method m) {
  switch (m) {
  case Method::dp_rgd: return "dp-rgd";
  case Method::dp_pgd: return "dp-pgd";
  case Method::dp_fm: return "dp-fm";
  case Method::non_private: return "non-private";
  }
  return "unknown";
}

inline Method method_from_string(const std::string &s) {
  if (s == "dp-rgd") return Method::dp_rgd;
  if (s == "dp-pgd") return Method::dp_pgd;
  if (s == "dp-fm") return Method::dp_fm;
  if (s == "non-private") return Method::non_private;
  throw ConfigError("unknown method '" + s + "'");
}

inline Experiment experiment_from_string(const std::string &s) {
  if (s == "pca") return Experiment::pca;
  if (s == "frechet") return Experiment::frechet;
  throw ConfigError("unknown experiment '" + s + "'");
}

struct ExperimentConfig {
  Experiment experiment = Experiment::pca;
  std::vector<std::size_t> n_grid;
  std::size_t runs = 20;
  PrivacyBudget budget{0.1, 1e-3, 1.0};
  Eigen::Index d_plus_1 = 50; // pca
  Eigen::Index r = 2;         // frechet
  double nu = 1e-3;           // pca eigengap
  double diameter = 1.0;      // frechet D_W
  std::vector<Method> methods;
  double eta = 0.2;
  std::uint64_t master_seed = 2024;
  /// Literal reproduction: L0 convention, Frechet gradient convention and
  /// Metropolis-Hastings noise all switch together.
  bool paper_faithful = false;
  std::size_t threads = 1;
  bool record_timing = false;
  int lambda_max = 64;

  static ExperimentConfig defaults(Experiment e) {
    ExperimentConfig c;
    c.experiment = e;
    if (e == Experiment::pca) {
      c.n_grid = {1000, 2000, 5000, 10000, 20000};
      c.methods = {Method::dp_rgd, Method::dp_pgd};
      c.eta = 0.2;
    } else {
      c.n_grid = {10, 20, 50, 100, 200};
      c.methods = {Method::dp_rgd, Method::dp_fm};
      c.eta = 0.01;
    }
    return c;
  }

  void validate() const {
    if (n_grid.empty())
      throw ConfigError("n_grid must be nonempty");
    for (std::size_t i = 1; i < n_grid.size(); ++i)
      if (n_grid[i] <= n_grid[i - 1])
        throw ConfigError("n_grid must be strictly increasing");
    if (runs < 1)
      throw ConfigError("runs must be >= 1");
    if (methods.empty())
      throw ConfigError("methods must be nonempty");
    if (!(eta > 0.0))
      throw ConfigError("eta must be positive");
    if (threads < 1)
      throw ConfigError("threads must be >= 1");
    if (lambda_max < 1)
      throw ConfigError("lambda_max must be >= 1");
    try {
      budget.validate();
    } catch (const DomainError &e) {
      throw ConfigError(e.what());
    }
    for (Method m : methods) {
      if (experiment == Experiment::pca && m == Method::dp_fm)
        throw ConfigError("dp-fm applies to the frechet experiment only");
      if (experiment == Experiment::frechet && m == Method::dp_pgd)
        throw ConfigError("dp-pgd applies to the pca experiment only");
    }
    if (experiment == Experiment::pca && d_plus_1 < 6)
      throw ConfigError("d_plus_1 must be >= 6");
    if (experiment == Experiment::frechet && r < 2)
      throw ConfigError("r must be >= 2");
    if (experiment == Experiment::frechet && !(diameter > 0.0))
      throw ConfigError("D_W must be positive");
  }
};

struct ResultRow {
  std::string experiment;
  std::string method;
  std::size_t n = 0;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double excess_risk = 0.0;
  double wallclock_ms = 0.0;
};

struct AggregateRow {
  std::string experiment;
  std::string method;
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

struct DiagnosticRow {
  std::string experiment;
  std::string kind; // warning | error
  std::string method;
  std::size_t n = 0;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<AggregateRow> aggregates;
  std::vector<DiagnosticRow> diagnostics;
};

/// Seed shared by every method of one (n, run) cell: same data, same
/// initialization, same noise stream.
inline std::uint64_t cell_seed(std::uint64_t master, std::size_t n,
                               std::size_t run) {
  return derive_seed(derive_seed(master, n), run);
}

/// F(w_priv) - F(w_star).
template <class O>
double excess_risk(const O &obj, const typename O::Manifold::Point &w_priv,
                   const typename O::Manifold::Point &w_star) {
  return obj.value(w_priv) - obj.value(w_star);
}

/// Iteration count of the leading-eigenvector study,
/// round(log(n^2 eps^2 / ((d+1) L0^2 log(1/delta)))) clamped to >= 1.
inline std::size_t pca_iterations(std::size_t n, Eigen::Index d_plus_1,
                                  double L0, const PrivacyBudget &b) {
  const double nn = static_cast<double>(n);
  const double t =
      std::log(nn * nn * b.epsilon * b.epsilon /
               (static_cast<double>(d_plus_1) * L0 * L0 *
                std::log(1.0 / b.delta)));
  if (!std::isfinite(t) || t < 1.0)
    return 1;
  return static_cast<std::size_t>(std::llround(t));
}

namespace detail {

struct CellOutput {
  std::vector<ResultRow> rows;
  std::vector<DiagnosticRow> diagnostics;
};

inline std::vector<int> lambda_grid(int max) {
  std::vector<int> g;
  for (int l = 1; l <= max; ++l)
    g.push_back(l);
  return g;
}

class Stopwatch {
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

inline void audit_check(const ExperimentConfig &cfg, const MomentsLedger &l,
                        DiagnosticRow base, CellOutput &out) {
  try {
    const double eps = audit(l, cfg.budget.delta);
    if (eps > cfg.budget.epsilon * 1.01) {
      base.kind = "warning";
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "audited epsilon %.6g exceeds configured epsilon %.6g",
                    eps, cfg.budget.epsilon);
      base.message = buf;
      out.diagnostics.push_back(base);
    }
  } catch (const std::exception &e) {
    base.kind = "warning";
    base.message = std::string("privacy audit failed: ") + e.what();
    out.diagnostics.push_back(base);
  }
}

inline CellOutput run_pca_cell(const ExperimentConfig &cfg, std::size_t n,
                               std::size_t run) {
  CellOutput out;
  const std::uint64_t seed = cell_seed(cfg.master_seed, n, run);
  const std::string exp = to_string(cfg.experiment);
  RngStream data_rng(seed, StreamId::data);
  const PcaData data = generate_pca_data(static_cast<Eigen::Index>(n),
                                         cfg.d_plus_1, cfg.nu, data_rng);
  const PcaObjective obj(data.samples);
  if (!obj.is_centered())
    throw DomainError("pca data are not centered");
  const double L0 = pca_lipschitz_estimate(
      obj.samples(), cfg.paper_faithful ? LipschitzConvention::paper
                                        : LipschitzConvention::exact);
  const std::size_t T = pca_iterations(n, cfg.d_plus_1, L0, cfg.budget);
  const NoiseCalibration cal = calibrate_iterative(T, L0, n, n, cfg.budget);
  const Sphere::Point w_star = solve_pca_reference(obj);
  const double f_star = obj.value(w_star);

  OptimizerConfig oc;
  oc.schedule = Schedule::constant(cfg.eta);
  oc.output = OutputStrategy::last;
  oc.profile.L0 = L0;
  oc.profile.c_l = 1.0;
  oc.calibration = cal;
  oc.seed = seed;
  oc.sampler = cfg.paper_faithful ? NoiseSampler::metropolis_hastings
                                  : NoiseSampler::exact;
  oc.lambda_grid = lambda_grid(cfg.lambda_max);

  for (Method m : cfg.methods) {
    const Stopwatch sw;
    ResultRow row{exp, to_string(m), n, run, seed, 0.0, 0.0};
    DiagnosticRow diag{exp, "", to_string(m), n, run, seed, ""};
    try {
      switch (m) {
      case Method::dp_rgd: {
        const auto res = dprgd::run(obj, oc);
        row.excess_risk = obj.value(res.w_priv) - f_star;
        audit_check(cfg, res.ledger, diag, out);
        break;
      }
      case Method::dp_pgd: {
        const auto res = baseline_dp_pgd_sphere(obj, oc);
        row.excess_risk = obj.value(res.w_priv) - f_star;
        break;
      }
      case Method::non_private:
        row.excess_risk = obj.value(w_star) - f_star;
        break;
      case Method::dp_fm:
        throw ConfigError("dp-fm is not defined for pca");
      }
      row.wallclock_ms = cfg.record_timing ? sw.ms() : 0.0;
      out.rows.push_back(row);
    } catch (const std::exception &e) {
      diag.kind = "error";
      diag.message = e.what();
      out.diagnostics.push_back(diag);
    }
  }
  return out;
}

inline CellOutput run_frechet_cell(const ExperimentConfig &cfg, std::size_t n,
                                   std::size_t run) {
  CellOutput out;
  const std::uint64_t seed = cell_seed(cfg.master_seed, n, run);
  const std::string exp = to_string(cfg.experiment);
  RngStream data_rng(seed, StreamId::data);
  const SpdManifold m(cfg.r);
  const auto conv = cfg.paper_faithful ? GradientConvention::paper
                                       : GradientConvention::exact;
  const FrechetObjective obj(
      m, generate_wishart_spd(n, cfg.r, cfg.diameter, data_rng), cfg.diameter,
      conv);
  DomainProfile profile;
  profile.diameter = cfg.diameter;
  profile.L0 = frechet_lipschitz(profile, conv);
  profile.beta = 2.0;
  const std::size_t T = n;
  const NoiseCalibration cal =
      calibrate_iterative(T, profile.L0, n, n, cfg.budget);
  const auto ref = solve_frechet_reference(obj);
  const double f_star = obj.value(ref.mean);

  OptimizerConfig oc;
  oc.schedule = Schedule::constant(cfg.eta);
  oc.output = OutputStrategy::last;
  oc.profile = profile;
  oc.calibration = cal;
  oc.seed = seed;
  oc.sampler = cfg.paper_faithful ? NoiseSampler::metropolis_hastings
                                  : NoiseSampler::exact;
  oc.lambda_grid = lambda_grid(cfg.lambda_max);

  for (Method meth : cfg.methods) {
    const Stopwatch sw;
    ResultRow row{exp, to_string(meth), n, run, seed, 0.0, 0.0};
    DiagnosticRow diag{exp, "", to_string(meth), n, run, seed, ""};
    try {
      switch (meth) {
      case Method::dp_rgd: {
        const auto res = dprgd::run(obj, oc);
        row.excess_risk = obj.value(res.w_priv) - f_star;
        audit_check(cfg, res.ledger, diag, out);
        break;
      }
      case Method::dp_fm: {
        RngStream noise(seed, StreamId::noise);
        const auto res = baseline_dp_frechet_output(obj, cfg.budget.epsilon,
                                                    cfg.diameter, noise);
        row.excess_risk = obj.value(res.private_mean) - f_star;
        break;
      }
      case Method::non_private:
        row.excess_risk = obj.value(ref.mean) - f_star;
        break;
      case Method::dp_pgd:
        throw ConfigError("dp-pgd is not defined for frechet");
      }
      row.wallclock_ms = cfg.record_timing ? sw.ms() : 0.0;
      out.rows.push_back(row);
    } catch (const std::exception &e) {
      diag.kind = "error";
      diag.message = e.what();
      out.diagnostics.push_back(diag);
    }
  }
  return out;
}

inline CellOutput run_cell(const ExperimentConfig &cfg, std::size_t n,
                           std::size_t run) {
  try {
    return cfg.experiment == Experiment::pca ? run_pca_cell(cfg, n, run)
                                             : run_frechet_cell(cfg, n, run);
  } catch (const std::exception &e) {
    CellOutput out;
    out.diagnostics.push_back({to_string(cfg.experiment), "error", "*", n, run,
                               cell_seed(cfg.master_seed, n, run), e.what()});
    return out;
  }
}

} // namespace detail

/// Mean and sample standard deviation per (method, n), in the order the
/// rows appear.
inline std::vector<AggregateRow>
aggregate(const std::vector<ResultRow> &rows) {
  std::vector<AggregateRow> out;
  for (const auto &r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const AggregateRow &a) {
      return a.method == r.method && a.n == r.n && a.experiment == r.experiment;
    });
    if (it == out.end()) {
      out.push_back({r.experiment, r.method, r.n, 0.0, 0.0, 0});
    }
  }
  for (auto &a : out) {
    std::vector<double> v;
    for (const auto &r : rows)
      if (r.method == a.method && r.n == a.n && r.experiment == a.experiment)
        v.push_back(r.excess_risk);
    double sum = 0.0;
    for (double x : v)
      sum += x;
    a.count = v.size();
    a.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
      ss += (x - a.mean) * (x - a.mean);
    a.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1))
                         : 0.0;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const AggregateRow &a, const AggregateRow &b) {
                     if (a.method != b.method)
                       return a.method < b.method;
                     return a.n < b.n;
                   });
  return out;
}

/// Runs every (n, run) cell of the configuration on cfg.threads workers.
inline ExperimentResult run_experiment(const ExperimentConfig &cfg) {
  cfg.validate();
  struct Cell {
    std::size_t n, run;
  };
  std::vector<Cell> cells;
  for (std::size_t n : cfg.n_grid)
    for (std::size_t r = 0; r < cfg.runs; ++r)
      cells.push_back({n, r});
  std::vector<detail::CellOutput> outputs(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size())
        return;
      outputs[i] = detail::run_cell(cfg, cells[i].n, cells[i].run);
    }
  };
  const std::size_t nthreads = std::min(cfg.threads, cells.size());
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t)
      pool.emplace_back(worker);
    for (auto &th : pool)
      th.join();
  }
  ExperimentResult res;
  for (auto &o : outputs) {
    res.rows.insert(res.rows.end(), o.rows.begin(), o.rows.end());
    res.diagnostics.insert(res.diagnostics.end(), o.diagnostics.begin(),
                           o.diagnostics.end());
  }
  res.aggregates = aggregate(res.rows);
  return res;
}

} // namespace dprgd::experiments
