#pragma once

/** Experiment I/O: JSON config files, CSV emission/parsing and a static SVG
 * plot of excess risk against sample size. */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dprgd/experiments/harness.hpp"

namespace dprgd::experiments {

inline constexpr const char *kResultsHeader =
    "experiment,method,n,run,seed,excess_risk,wallclock_ms";
inline constexpr const char *kAggregateHeader =
    "experiment,method,n,mean,std,count";
inline constexpr const char *kDiagnosticsHeader =
    "experiment,kind,method,n,run,seed,message";

/// Shortest text that round-trips the double exactly.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string results_csv(const std::vector<ResultRow> &rows) {
  std::ostringstream os;
  os << kResultsHeader << '\n';
  for (const auto &r : rows)
    os << r.experiment << ',' << r.method << ',' << r.n << ',' << r.run << ','
       << r.seed << ',' << format_double(r.excess_risk) << ','
       << format_double(r.wallclock_ms) << '\n';
  return os.str();
}

inline std::string aggregates_csv(const std::vector<AggregateRow> &rows) {
  std::ostringstream os;
  os << kAggregateHeader << '\n';
  for (const auto &a : rows)
    os << a.experiment << ',' << a.method << ',' << a.n << ','
       << format_double(a.mean) << ',' << format_double(a.std) << ','
       << a.count << '\n';
  return os.str();
}

inline std::string diagnostics_csv(const std::vector<DiagnosticRow> &rows) {
  std::ostringstream os;
  os << kDiagnosticsHeader << '\n';
  for (const auto &d : rows) {
    std::string msg = d.message;
    std::replace(msg.begin(), msg.end(), '"', '\'');
    os << d.experiment << ',' << d.kind << ',' << d.method << ',' << d.n << ','
       << d.run << ',' << d.seed << ",\"" << msg << "\"\n";
  }
  return os.str();
}

inline std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ','))
    out.push_back(cur);
  return out;
}

/// Parses text produced by results_csv().
inline std::vector<ResultRow> parse_results_csv(const std::string &text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kResultsHeader)
    throw ConfigError("results csv: unexpected header");
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7)
      throw ConfigError("results csv: malformed row '" + line + "'");
    ResultRow r;
    r.experiment = f[0];
    r.method = f[1];
    r.n = std::stoull(f[2]);
    r.run = std::stoull(f[3]);
    r.seed = std::stoull(f[4]);
    r.excess_risk = std::stod(f[5]);
    r.wallclock_ms = std::stod(f[6]);
    rows.push_back(r);
  }
  return rows;
}

/// Excess risk against n, log-scaled on both axes, one series per method,
/// error bars of +-1 standard deviation. Nonpositive values are not drawn.
inline std::string plot_svg(const std::vector<AggregateRow> &agg,
                            const std::string &title) {
  constexpr double W = 640, H = 420, L = 80, R = 150, Tm = 40, B = 60;
  std::map<std::string, std::vector<AggregateRow>> series;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto &a : agg) {
    if (!(a.mean > 0.0))
      continue;
    series[a.method].push_back(a);
    const double lo = a.mean - a.std > 0.0 ? a.mean - a.std : a.mean;
    xmin = std::min(xmin, static_cast<double>(a.n));
    xmax = std::max(xmax, static_cast<double>(a.n));
    ymin = std::min(ymin, lo);
    ymax = std::max(ymax, a.mean + a.std);
  }
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  if (series.empty()) {
    os << "</svg>\n";
    return os.str();
  }
  const double lx0 = std::log10(xmin), lx1 = std::log10(xmax);
  const double ly0 = std::floor(std::log10(ymin)),
               ly1 = std::ceil(std::log10(ymax));
  auto px = [&](double x) {
    const double span = lx1 > lx0 ? lx1 - lx0 : 1.0;
    return L + (std::log10(x) - lx0) / span * (W - L - R);
  };
  auto py = [&](double y) {
    const double span = ly1 > ly0 ? ly1 - ly0 : 1.0;
    return H - B - (std::log10(y) - ly0) / span * (H - Tm - B);
  };
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R
     << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L
     << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (double e = ly0; e <= ly1; e += 1.0)
    os << "<text x=\"" << L - 8 << "\" y=\"" << py(std::pow(10.0, e)) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
          "font-size=\"11\">1e"
       << static_cast<int>(e) << "</text>\n";
  for (const auto &[m, pts] : series)
    for (const auto &a : pts)
      os << "<text x=\"" << px(static_cast<double>(a.n)) << "\" y=\""
         << H - B + 18 << "\" text-anchor=\"middle\" "
         << "font-family=\"sans-serif\" font-size=\"11\">" << a.n
         << "</text>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"13\">sample size n</text>\n"
     << "<text x=\"18\" y=\"" << H / 2 << "\" transform=\"rotate(-90 18 "
     << H / 2 << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"13\">excess risk</text>\n";
  const char *colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::size_t k = 0;
  for (const auto &[m, pts] : series) {
    const char *c = colors[k % 4];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" "
       << "points=\"";
    for (const auto &a : pts)
      os << px(static_cast<double>(a.n)) << ',' << py(a.mean) << ' ';
    os << "\"/>\n";
    for (const auto &a : pts) {
      const double x = px(static_cast<double>(a.n));
      const double lo = a.mean - a.std > 0.0 ? a.mean - a.std : a.mean;
      os << "<line x1=\"" << x << "\" y1=\"" << py(lo) << "\" x2=\"" << x
         << "\" y2=\"" << py(a.mean + a.std) << "\" stroke=\"" << c
         << "\"/>\n"
         << "<circle cx=\"" << x << "\" cy=\"" << py(a.mean)
         << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    }
    const double ly = Tm + 20.0 * static_cast<double>(k);
    os << "<line x1=\"" << W - R + 15 << "\" y1=\"" << ly << "\" x2=\""
       << W - R + 40 << "\" y2=\"" << ly << "\" stroke=\"" << c
       << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << W - R + 45 << "\" y=\"" << ly + 4
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << m
       << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

/// Applies the keys of a JSON config object onto `cfg`. Unknown keys are
/// rejected. Keys: experiment, n_grid, runs, budget{epsilon,delta,c},
/// d_plus_1, r, nu, D_W, methods, eta, master_seed, paper_faithful, threads,
/// lambda_max, out_dir, plot.
struct ConfigFile {
  ExperimentConfig config;
  std::string out_dir;
  std::string plot;
};

inline ConfigFile parse_config(const nlohmann::json &j,
                               std::optional<Experiment> expected = {}) {
  if (!j.is_object())
    throw ConfigError("config: top level must be an object");
  Experiment e = expected.value_or(Experiment::pca);
  if (j.contains("experiment")) {
    e = experiment_from_string(j.at("experiment").get<std::string>());
    if (expected && e != *expected)
      throw ConfigError("config: experiment does not match the subcommand");
  }
  ConfigFile out{ExperimentConfig::defaults(e), "", ""};
  auto &c = out.config;
  try {
    for (const auto &[key, v] : j.items()) {
      if (key == "experiment") {
      } else if (key == "n_grid") {
        c.n_grid = v.get<std::vector<std::size_t>>();
      } else if (key == "runs") {
        c.runs = v.get<std::size_t>();
      } else if (key == "budget") {
        for (const auto &[bk, bv] : v.items()) {
          if (bk == "epsilon") c.budget.epsilon = bv.get<double>();
          else if (bk == "delta") c.budget.delta = bv.get<double>();
          else if (bk == "c") c.budget.c = bv.get<double>();
          else throw ConfigError("config: unknown budget key '" + bk + "'");
        }
      } else if (key == "d_plus_1") {
        c.d_plus_1 = v.get<Eigen::Index>();
      } else if (key == "r") {
        c.r = v.get<Eigen::Index>();
      } else if (key == "nu") {
        c.nu = v.get<double>();
      } else if (key == "D_W") {
        c.diameter = v.get<double>();
      } else if (key == "methods") {
        c.methods.clear();
        for (const auto &m : v)
          c.methods.push_back(method_from_string(m.get<std::string>()));
      } else if (key == "eta") {
        c.eta = v.get<double>();
      } else if (key == "master_seed") {
        c.master_seed = v.get<std::uint64_t>();
      } else if (key == "paper_faithful") {
        c.paper_faithful = v.get<bool>();
      } else if (key == "threads") {
        c.threads = v.get<std::size_t>();
      } else if (key == "lambda_max") {
        c.lambda_max = v.get<int>();
      } else if (key == "out_dir") {
        out.out_dir = v.get<std::string>();
      } else if (key == "plot") {
        out.plot = v.get<std::string>();
      } else {
        throw ConfigError("config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception &ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  return out;
}

inline ConfigFile load_config_file(const std::string &path,
                                   std::optional<Experiment> expected = {}) {
  std::ifstream in(path);
  if (!in)
    throw MissingFile("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &ex) {
    throw ConfigError(std::string("config: malformed JSON: ") + ex.what());
  }
  return parse_config(j, expected);
}

} // namespace dprgd::experiments
