#pragma once

// Command-line front end. Kept in a header so the test suite can drive
// cli_main() directly.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dprgd/dprgd.hpp"
#include "dprgd/experiments/io.hpp"

namespace dprgd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char *kOutDirEnv = "DPRGD_OUT_DIR";

// Errors that map to exit code 2.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct RunOptions {
  std::string config;
  std::string out;
  std::string plot;
  bool paper_faithful = false;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  bool timing = false;
};

struct CalibrateOptions {
  std::size_t n = 0;
  double eps = 0.0;
  double delta = 0.0;
  std::size_t T = 1;
  double L0 = 1.0;
  std::optional<std::size_t> b;
  double c = 1.0;
  int lambda_max = 64;
};

struct SampleOptions {
  std::string geometry = "sphere";
  Eigen::Index dim = 4;
  Eigen::Index r = 2;
  double sigma = 1.0;
  std::size_t count = 1000;
  std::uint64_t seed = 1;
  std::string sampler = "exact";
  std::string out;
};

struct PlotOptions {
  std::string csv;
  std::string out;
  std::string title;
};

inline void write_file(const std::filesystem::path &p,
                       const std::string &text) {
  std::ofstream f(p, std::ios::binary);
  if (!f)
    throw std::runtime_error("cannot write '" + p.string() + "'");
  f << text;
  if (!f)
    throw std::runtime_error("write failed for '" + p.string() + "'");
}

inline std::string read_file(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw UsageError("cannot open '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// Flag, then config file, then environment variable.
inline std::filesystem::path resolve_out_dir(const std::string &flag,
                                             const std::string &from_config) {
  std::string dir = flag;
  if (dir.empty())
    dir = from_config;
  if (dir.empty())
    if (const char *env = std::getenv(kOutDirEnv))
      dir = env;
  if (dir.empty())
    throw UsageError(std::string("no output directory: pass --out or set ") +
                     kOutDirEnv);
  if (!std::filesystem::is_directory(dir))
    throw UsageError("output directory '" + dir + "' does not exist");
  return dir;
}

inline int run_experiment_command(experiments::Experiment e,
                                  const RunOptions &o, std::ostream &out) {
  using namespace experiments;
  ConfigFile cf{ExperimentConfig::defaults(e), "", ""};
  if (!o.config.empty()) {
    try {
      cf = load_config_file(o.config, e);
    } catch (const MissingFile &ex) {
      throw UsageError(ex.what());
    }
  }
  auto &cfg = cf.config;
  if (o.paper_faithful)
    cfg.paper_faithful = true;
  if (o.threads)
    cfg.threads = *o.threads;
  if (o.runs)
    cfg.runs = *o.runs;
  if (o.seed)
    cfg.master_seed = *o.seed;
  cfg.record_timing = o.timing;
  cfg.validate();
  const auto dir = resolve_out_dir(o.out, cf.out_dir);

  const ExperimentResult res = run_experiment(cfg);
  write_file(dir / "results.csv", results_csv(res.rows));
  write_file(dir / "aggregates.csv", aggregates_csv(res.aggregates));
  write_file(dir / "diagnostics.csv", diagnostics_csv(res.diagnostics));
  const std::string plot = o.plot.empty() ? cf.plot : o.plot;
  if (!plot.empty())
    write_file(plot, plot_svg(res.aggregates, to_string(e) + ": excess risk"));

  out << aggregates_csv(res.aggregates);
  std::size_t warnings = 0, errors = 0;
  for (const auto &d : res.diagnostics)
    (d.kind == "error" ? errors : warnings) += 1;
  if (warnings + errors > 0)
    out << warnings << " warning(s), " << errors
        << " error(s); see diagnostics.csv\n";
  return kExitOk;
}

inline int calibrate_command(const CalibrateOptions &o, std::ostream &out) {
  const PrivacyBudget budget{o.eps, o.delta, o.c};
  const std::size_t b = o.b.value_or(o.n);
  const NoiseCalibration cal = calibrate_iterative(o.T, o.L0, o.n, b, budget);
  std::vector<int> grid;
  for (int l = 1; l <= o.lambda_max; ++l)
    grid.push_back(l);
  MomentsLedger ledger(grid);
  ledger.add({b >= o.n ? MomentKind::full_batch : MomentKind::subsampled,
              o.L0, o.n, b, cal.sigma2},
             o.T);
  out << "sigma2       " << experiments::format_double(cal.sigma2) << '\n'
      << "sigma        " << experiments::format_double(std::sqrt(cal.sigma2))
      << '\n'
      << "T            " << cal.T << '\n'
      << "floor        " << experiments::format_double(cal.floor)
      << (cal.floor_active ? "  (active)" : "  (inactive)") << '\n';
  try {
    const AuditResult a = audit_detailed(ledger, o.delta);
    out << "audited eps  " << experiments::format_double(a.epsilon)
        << "  (lambda " << a.lambda << ")\n";
    if (a.epsilon > o.eps * 1.01)
      out << "warning: audited epsilon exceeds the requested epsilon\n";
  } catch (const NoValidMomentOrder &) {
    out << "audited eps  unavailable (no valid moment order)\n";
  }
  return kExitOk;
}

inline int sample_noise_command(const SampleOptions &o, std::ostream &out) {
  if (o.count == 0)
    throw UsageError("--count must be >= 1");
  RngStream rng(o.seed, StreamId::noise);
  std::ostringstream csv;
  auto emit = [&](const Eigen::VectorXd &c) {
    for (Eigen::Index i = 0; i < c.size(); ++i)
      csv << (i ? "," : "") << experiments::format_double(c(i));
    csv << '\n';
  };
  auto header = [&](Eigen::Index k) {
    for (Eigen::Index i = 0; i < k; ++i)
      csv << (i ? "," : "") << 'c' << i;
    csv << '\n';
  };
  if (o.geometry == "sphere") {
    if (o.sampler == "laplace")
      throw UsageError("laplace sampler is only available for spd");
    const Sphere s(o.dim);
    Eigen::VectorXd pole = Eigen::VectorXd::Zero(s.ambient_dim());
    pole(0) = 1.0;
    const Sphere::Point w{pole};
    header(s.dim());
    for (std::size_t k = 0; k < o.count; ++k) {
      const auto xi = o.sampler == "mh"
                          ? sample_tangent_gaussian_mh(s, w, o.sigma, rng)
                          : sample_tangent_gaussian(s, w, o.sigma, rng);
      emit(s.vectorize(xi));
    }
  } else if (o.geometry == "spd") {
    const SpdManifold m(o.r);
    const auto w = m.identity();
    header(m.dim());
    for (std::size_t k = 0; k < o.count; ++k) {
      if (o.sampler == "laplace") {
        const auto x = sample_intrinsic_laplace_spd(m, w, o.sigma, rng);
        emit(m.vectorize(m.log_map(w, x)));
      } else {
        const auto xi = o.sampler == "mh"
                            ? sample_tangent_gaussian_mh(m, w, o.sigma, rng)
                            : sample_tangent_gaussian(m, w, o.sigma, rng);
        emit(m.vectorize(xi));
      }
    }
  } else {
    throw UsageError("unknown geometry '" + o.geometry + "'");
  }
  if (o.out.empty())
    out << csv.str();
  else
    write_file(o.out, csv.str());
  return kExitOk;
}

inline int plot_command(const PlotOptions &o, std::ostream &out) {
  const auto rows = experiments::parse_results_csv(read_file(o.csv));
  const auto agg = experiments::aggregate(rows);
  std::string title = o.title;
  if (title.empty())
    title = rows.empty() ? "excess risk" : rows.front().experiment +
                                               ": excess risk";
  write_file(o.out, experiments::plot_svg(agg, title));
  out << "wrote " << o.out << '\n';
  return kExitOk;
}

inline void add_run_options(CLI::App *sub, RunOptions &o) {
  sub->add_option("--config", o.config, "JSON config file");
  sub->add_option("--out", o.out,
                  std::string("output directory (default: $") + kOutDirEnv +
                      ")");
  sub->add_option("--plot", o.plot, "write an SVG plot to this path");
  sub->add_flag("--paper-faithful", o.paper_faithful,
                "literal constants and Metropolis-Hastings noise");
  sub->add_option("--threads", o.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  sub->add_option("--runs", o.runs, "runs per sample size")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_flag("--timing", o.timing, "record wallclock_ms");
}

} // namespace detail

inline int cli_main(int argc, const char *const *argv,
                    std::ostream &out = std::cout,
                    std::ostream &err = std::cerr) {
  using namespace detail;
  CLI::App app{"Differentially private Riemannian gradient descent"};
  app.require_subcommand(1);

  RunOptions pca_opts, frechet_opts;
  auto *pca = app.add_subcommand("run-pca", "leading eigenvector on the sphere");
  add_run_options(pca, pca_opts);
  auto *frechet =
      app.add_subcommand("run-frechet", "Frechet mean on SPD matrices");
  add_run_options(frechet, frechet_opts);

  CalibrateOptions cal;
  auto *calibrate = app.add_subcommand("calibrate", "noise calibration table");
  calibrate->add_option("--n", cal.n, "dataset size")->required();
  calibrate->add_option("--eps", cal.eps, "epsilon")->required();
  calibrate->add_option("--delta", cal.delta, "delta")->required();
  calibrate->add_option("--T", cal.T, "iterations")->required();
  calibrate->add_option("--L0", cal.L0, "Lipschitz constant")->required();
  calibrate->add_option("--b", cal.b, "batch size (default n)");
  calibrate->add_option("--c", cal.c, "calibration constant");
  calibrate->add_option("--lambda-max", cal.lambda_max, "largest moment order")
      ->check(CLI::PositiveNumber);

  SampleOptions smp;
  auto *sample = app.add_subcommand("sample-noise", "draw tangent noise");
  sample->add_option("--geometry", smp.geometry)
      ->check(CLI::IsMember({"sphere", "spd"}));
  sample->add_option("--dim", smp.dim, "sphere dimension d")
      ->check(CLI::PositiveNumber);
  sample->add_option("--r", smp.r, "SPD matrix size")
      ->check(CLI::Range(Eigen::Index{1}, SpdManifold::kMaxMetricTensorSize));
  sample->add_option("--sigma", smp.sigma)->check(CLI::PositiveNumber);
  sample->add_option("--count", smp.count);
  sample->add_option("--seed", smp.seed);
  sample->add_option("--sampler", smp.sampler)
      ->check(CLI::IsMember({"exact", "mh", "laplace"}));
  sample->add_option("--out", smp.out, "CSV path (default stdout)");

  PlotOptions plt;
  auto *plot = app.add_subcommand("plot", "SVG plot from a results CSV");
  plot->add_option("--csv", plt.csv, "results.csv")->required();
  plot->add_option("--out", plt.out, "SVG path")->required();
  plot->add_option("--title", plt.title);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*pca)
      return run_experiment_command(experiments::Experiment::pca, pca_opts,
                                    out);
    if (*frechet)
      return run_experiment_command(experiments::Experiment::frechet,
                                    frechet_opts, out);
    if (*calibrate)
      return calibrate_command(cal, out);
    if (*sample)
      return sample_noise_command(smp, out);
    if (*plot)
      return plot_command(plt, out);
  } catch (const UsageError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

} // namespace dprgd::cli
