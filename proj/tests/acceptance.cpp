// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Criteria 8 and 9 run the full default experiments and take a
// while.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "dprgd/dprgd.hpp"
#include "dprgd/experiments/data.hpp"
#include "dprgd/experiments/harness.hpp"
#include "dprgd/experiments/io.hpp"
#include "support.hpp"

using namespace dprgd;
using namespace dprgd::experiments;
using dprgd::testing::random_spd;
using dprgd::testing::random_spd_tangent;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

void fail(Outcome &o, const std::string &msg) {
  o.pass = false;
  if (!o.detail.empty())
    o.detail += "; ";
  o.detail += msg;
}

std::string fmt(const char *f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Eigen::MatrixXd empirical_second_moment(const std::vector<Eigen::VectorXd> &x,
                                        Eigen::VectorXd &mean) {
  const Eigen::Index d = x.front().size();
  mean = Eigen::VectorXd::Zero(d);
  for (const auto &v : x)
    mean += v;
  mean /= static_cast<double>(x.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  for (const auto &v : x)
    c += (v - mean) * (v - mean).transpose();
  return c / static_cast<double>(x.size() - 1);
}

// 1. Exp/Log roundtrip, symmetry and triangle inequality.
Outcome geometry_suite() {
  Outcome o;
  RngStream rng(1001, StreamId::data);
  double worst_rt = 0.0, worst_sym = 0.0, worst_tri = 0.0;
  {
    const Sphere s(4);
    for (int k = 0; k < 1000; ++k) {
      const auto w = s.random_point(rng);
      // norms up to 3 stay inside the injectivity radius pi
      const double len = 3.0 * rng.uniform();
      auto xi = dprgd::testing::random_sphere_tangent(s, w, rng, 1.0);
      xi = (len / s.norm(xi)) * xi;
      const auto back = s.log_map(w, s.exp_map(w, xi));
      worst_rt = std::max(worst_rt, s.norm(back - xi));
    }
    for (int k = 0; k < 1000; ++k) {
      const auto a = s.random_point(rng), b = s.random_point(rng),
                 c = s.random_point(rng);
      worst_sym = std::max(worst_sym, std::abs(s.dist(a, b) - s.dist(b, a)));
      worst_tri = std::max(worst_tri,
                           s.dist(a, c) - s.dist(a, b) - s.dist(b, c));
    }
  }
  {
    const SpdManifold m(3);
    for (int k = 0; k < 1000; ++k) {
      const auto w = random_spd(3, rng, 0.8);
      // W^1/2 S W^1/2 has metric norm |S|_F, kept below 3
      const Eigen::MatrixXd g = rng.normal_matrix(3, 3);
      Eigen::MatrixXd sym = 0.5 * (g + g.transpose());
      sym *= 3.0 * rng.uniform() / sym.norm();
      const Eigen::MatrixXd half = spd_sqrtm(w.coords);
      const SpdManifold::Tangent xi{w.coords, half * sym * half};
      const auto back = m.log_map(w, m.exp_map(w, xi));
      worst_rt = std::max(worst_rt, m.norm(back - xi));
    }
    for (int k = 0; k < 1000; ++k) {
      const auto a = random_spd(3, rng, 0.8), b = random_spd(3, rng, 0.8),
                 c = random_spd(3, rng, 0.8);
      worst_sym = std::max(worst_sym, std::abs(m.dist(a, b) - m.dist(b, a)));
      worst_tri = std::max(worst_tri,
                           m.dist(a, c) - m.dist(a, b) - m.dist(b, c));
    }
  }
  if (worst_rt > 1e-8)
    fail(o, fmt("roundtrip error %.3g", worst_rt));
  if (worst_sym > 1e-10)
    fail(o, fmt("asymmetry %.3g", worst_sym));
  if (worst_tri > 1e-10)
    fail(o, fmt("triangle violation %.3g", worst_tri));
  o.detail += (o.detail.empty() ? "" : "; ") +
              fmt("roundtrip %.2g, asym %.2g, tri %.2g", worst_rt, worst_sym,
                  worst_tri);
  return o;
}

template <class Obj, class DrawTangent>
double worst_fd_error(const Obj &obj, const typename Obj::Manifold::Point &w,
                      DrawTangent draw, int count) {
  const auto &m = obj.manifold();
  const auto g = obj.full_rgrad(w);
  const double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < count; ++k) {
    const auto xi = draw();
    const double fd = (obj.value(m.exp_map(w, h * xi)) -
                       obj.value(m.exp_map(w, (-h) * xi))) /
                      (2.0 * h);
    const double an = m.inner(g, xi);
    worst = std::max(worst, std::abs(fd - an) / std::abs(an));
  }
  return worst;
}

// 2. Riemannian gradients against finite differences.
Outcome gradient_suite() {
  Outcome o;
  RngStream rng(1002, StreamId::data);
  const PcaObjective pca(rng.normal_matrix(40, 6));
  const Sphere &s = pca.manifold();
  const auto ws = s.random_point(rng);
  const double e_pca = worst_fd_error(
      pca, ws,
      [&] { return dprgd::testing::random_sphere_tangent(s, ws, rng, 1.0); },
      100);

  const SpdManifold m(3);
  std::vector<SpdManifold::Point> xs;
  for (int i = 0; i < 8; ++i)
    xs.push_back(random_spd(3, rng));
  const FrechetObjective fr(m, xs);
  const auto wf = random_spd(3, rng);
  const double e_fr = worst_fd_error(
      fr, wf, [&] { return random_spd_tangent(wf, rng, 1.0); }, 100);

  double e_norm = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto w = random_spd(3, rng, 0.8), x = random_spd(3, rng, 0.8);
    const double gn = m.norm(frechet_rgrad(m, w, x));
    e_norm = std::max(e_norm, std::abs(gn - 2.0 * m.dist(w, x)));
  }
  if (e_pca > 1e-5)
    fail(o, fmt("pca FD relative error %.3g", e_pca));
  if (e_fr > 1e-5)
    fail(o, fmt("frechet FD relative error %.3g", e_fr));
  if (e_norm > 1e-9)
    fail(o, fmt("||grad|| - 2 dist = %.3g", e_norm));
  o.detail += (o.detail.empty() ? "" : "; ") +
              fmt("pca %.2g, frechet %.2g, norm %.2g", e_pca, e_fr, e_norm);
  return o;
}

// 3. One step with n = 1, eta = 1/2, sigma = 0 lands on the sample.
Outcome closed_form_step() {
  Outcome o;
  RngStream rng(1003, StreamId::data);
  const SpdManifold m(3);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto x = random_spd(3, rng, 0.8);
    const FrechetObjective obj(m, {x});
    OptimizerConfig cfg;
    cfg.schedule = Schedule::constant(0.5);
    cfg.calibration.T = 1;
    cfg.calibration.n = 1;
    cfg.calibration.b = 1;
    cfg.calibration.sigma2 = 0.0;
    const auto res = run(obj, cfg, random_spd(3, rng, 0.8));
    worst = std::max(worst, m.dist(res.w_priv, x));
  }
  if (worst > 1e-8)
    fail(o, fmt("dist to sample %.3g", worst));
  o.detail += (o.detail.empty() ? "" : "; ") + fmt("max dist %.2g", worst);
  return o;
}

template <class M>
void check_sampler(Outcome &o, const std::string &name, const M &m,
                   const typename M::Point &w, double sigma, RngStream &rng) {
  const int N = 100000;
  std::vector<Eigen::VectorXd> ex;
  ex.reserve(N);
  for (int k = 0; k < N; ++k)
    ex.push_back(m.vectorize(sample_tangent_gaussian(m, w, sigma, rng)));
  Eigen::VectorXd mean_ex;
  const Eigen::MatrixXd cov_ex = empirical_second_moment(ex, mean_ex);
  const Eigen::MatrixXd target = sigma * sigma * m.metric_tensor(w).inverse();
  const double rel = (cov_ex - target).norm() / target.norm();
  if (rel > 0.05)
    fail(o, name + fmt(" exact covariance error %.3g", rel));

  const int Nmh = 20000;
  std::vector<Eigen::VectorXd> mh;
  mh.reserve(Nmh);
  MhStats stats;
  for (int k = 0; k < Nmh; ++k)
    mh.push_back(m.vectorize(
        sample_tangent_gaussian_mh(m, w, sigma, rng, {}, &stats)));
  Eigen::VectorXd mean_mh;
  const Eigen::MatrixXd cov_mh = empirical_second_moment(mh, mean_mh);
  double worst_diag = 0.0, worst_mean = 0.0;
  for (Eigen::Index i = 0; i < cov_mh.rows(); ++i) {
    worst_diag = std::max(worst_diag,
                          std::abs(cov_mh(i, i) - cov_ex(i, i)) / cov_ex(i, i));
    // first moments are zero, so compare in standard errors
    worst_mean = std::max(worst_mean, std::abs(mean_mh(i) - mean_ex(i)) /
                                          std::sqrt(cov_ex(i, i) / Nmh));
  }
  if (worst_diag > 0.05)
    fail(o, name + fmt(" MH second moment error %.3g", worst_diag));
  if (worst_mean > 4.0)
    fail(o, name + fmt(" MH mean off by %.3g SE", worst_mean));
  o.detail += (o.detail.empty() ? "" : "; ") + name +
              fmt(" cov %.3f, MH diag %.3f, MH mean %.2f SE", rel, worst_diag,
                  worst_mean) +
              fmt(", acc %.2f", stats.acceptance_rate());
}

// 4. Tangent Gaussian samplers.
Outcome sampler_suite() {
  Outcome o;
  RngStream rng(1004, StreamId::noise), pts(1004, StreamId::data);
  const Sphere s(4);
  check_sampler(o, "sphere", s, s.random_point(pts), 0.7, rng);
  const SpdManifold m(2);
  check_sampler(o, "spd", m, random_spd(2, pts, 0.8), 1.3, rng);
  return o;
}

// 5. Moments accountant.
Outcome accountant_suite() {
  Outcome o;
  // exact equality with the Gaussian Renyi cumulant at sensitivity 2 L0 / n
  for (int lambda : {1, 2, 5, 17, 64})
    for (double s2 : {0.01, 0.5, 3.0}) {
      const double L0 = 1.3;
      const std::size_t n = 50;
      const double dm = 2.0 * L0 / static_cast<double>(n);
      const double renyi = lambda * (lambda + 1.0) * dm * dm / (2.0 * s2);
      if (std::abs(moment_full(lambda, L0, n, s2) - renyi) >
          1e-14 * std::max(1.0, renyi))
        fail(o, fmt("moment_full mismatch at lambda %g sigma2 %g", lambda, s2));
    }
  // monotone in sigma^2 and in T
  double prev = 1e300;
  for (double s2 : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    MomentsLedger l;
    l.add({MomentKind::full_batch, 1.0, 100, 100, s2}, 50);
    const double e = audit(l, 1e-3);
    if (e > prev)
      fail(o, "audit not monotone in sigma2");
    prev = e;
  }
  prev = 0.0;
  for (std::size_t T : {1u, 10u, 100u, 1000u}) {
    MomentsLedger l;
    l.add({MomentKind::full_batch, 1.0, 100, 100, 0.01}, T);
    const double e = audit(l, 1e-3);
    if (e < prev)
      fail(o, "audit not monotone in T");
    prev = e;
  }
  // additivity: 250 steps equal one step with 250x the moment
  MomentsLedger many, one;
  for (int t = 0; t < 250; ++t)
    many.add_step(1.3, 500, 500, 0.02);
  one.add_step(1.3, 500, 500, 0.02 / 250.0);
  for (int l = 1; l <= 64; ++l)
    if (std::abs(*many.composed(l) - *one.composed(l)) >
        1e-12 * *one.composed(l))
      fail(o, fmt("composition not additive at lambda %g", l));
  // Monte-Carlo cumulant of the 1-D Gaussian privacy loss
  const double L0 = 1.0, s2 = 0.1;
  const std::size_t n = 10;
  const double D = 2.0 * L0 / static_cast<double>(n);
  RngStream rng(1005, StreamId::noise);
  double worst = 0.0;
  for (int lambda : {1, 2, 4}) {
    double acc = 0.0;
    const int N = 1000000;
    for (int k = 0; k < N; ++k) {
      const double x = std::sqrt(s2) * rng.normal();
      acc += std::exp(lambda * (D * D - 2.0 * x * D) / (2.0 * s2));
    }
    const double ratio = (acc / N) / std::exp(moment_full(lambda, L0, n, s2));
    worst = std::max(worst, ratio);
  }
  if (worst > 1.05)
    fail(o, fmt("MC mgf / exp(bound) = %.4f", worst));
  o.detail += (o.detail.empty() ? "" : "; ") +
              fmt("max MC mgf / exp(bound) %.4f", worst);
  return o;
}

template <class Obj>
double second_moment_ratio(const Obj &obj, const typename Obj::Manifold::Point &w,
                           double L0, double sigma, std::uint64_t seed) {
  const auto &m = obj.manifold();
  RunStreams streams(seed);
  double acc = 0.0;
  const int N = 10000;
  for (int k = 0; k < N; ++k) {
    const auto batch = subsample(obj.size(), 1, streams.subsample);
    const auto zeta = obj.batch_rgrad(w, batch) +
                      sample_tangent_gaussian(m, w, sigma, streams.noise);
    acc += std::pow(m.norm(zeta), 2);
  }
  // c_l = 1 for both geometries in these coordinates
  const double bound =
      L0 * L0 + static_cast<double>(m.dim()) * sigma * sigma;
  return (acc / N) / bound;
}

// 6. Second moment of the noisy gradient.
Outcome lemma6() {
  Outcome o;
  RngStream rng(1006, StreamId::data);
  const PcaObjective pca(rng.normal_matrix(50, 6));
  RngStream init(1006, StreamId::init);
  const double r_pca =
      second_moment_ratio(pca, pca.manifold().random_point(init),
                          pca_lipschitz_estimate(pca.samples()), 0.5, 1007);

  const double D = 1.0;
  const FrechetObjective fr(SpdManifold(2), generate_wishart_spd(30, 2, D, rng),
                            D);
  DomainProfile p;
  p.diameter = D;
  // a sample point keeps w inside the diameter-D domain
  const double r_fr = second_moment_ratio(fr, fr.samples().front(),
                                          frechet_lipschitz(p), 0.5, 1008);
  if (r_pca > 1.05)
    fail(o, fmt("sphere ratio %.4f", r_pca));
  if (r_fr > 1.05)
    fail(o, fmt("spd ratio %.4f", r_fr));
  o.detail += (o.detail.empty() ? "" : "; ") +
              fmt("E||zeta||^2 / bound: sphere %.3f, spd %.3f", r_pca, r_fr);
  return o;
}

// 7. Geodesic 2-strong convexity of the Frechet loss.
Outcome strong_convexity() {
  Outcome o;
  RngStream rng(1009, StreamId::data);
  const SpdManifold m(3);
  std::vector<SpdManifold::Point> xs;
  for (int i = 0; i < 6; ++i)
    xs.push_back(random_spd(3, rng));
  const FrechetObjective obj(m, xs);
  double worst = -1e300;
  for (int k = 0; k < 500; ++k) {
    const auto a = random_spd(3, rng), b = random_spd(3, rng);
    const double t = rng.uniform();
    const auto g = m.exp_map(a, t * m.log_map(a, b));
    const double gap = obj.value(g) - ((1 - t) * obj.value(a) +
                                       t * obj.value(b) -
                                       t * (1 - t) * std::pow(m.dist(a, b), 2));
    worst = std::max(worst, gap);
  }
  if (worst > 1e-7)
    fail(o, fmt("violation %.3g", worst));
  o.detail += (o.detail.empty() ? "" : "; ") +
              fmt("max violation %.3g", worst);
  return o;
}

double mean_of(const std::vector<AggregateRow> &agg, const std::string &method,
               std::size_t n) {
  for (const auto &a : agg)
    if (a.method == method && a.n == n)
      return a.mean;
  return std::nan("");
}

std::string curve(const std::vector<AggregateRow> &agg,
                  const std::string &method,
                  const std::vector<std::size_t> &grid) {
  std::string s = method + " [";
  for (std::size_t i = 0; i < grid.size(); ++i)
    s += (i ? " " : "") + fmt("%.3g", mean_of(agg, method, grid[i]));
  return s + "]";
}

// 8. Leading eigenvector study.
Outcome pca_curves() {
  Outcome o;
  const auto cfg = ExperimentConfig::defaults(Experiment::pca);
  const auto res = run_experiment(cfg);
  for (const auto &d : res.diagnostics)
    if (d.kind == "error")
      fail(o, "cell error: " + d.message);
  const auto &g = cfg.n_grid;
  int inversions = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double rgd = mean_of(res.aggregates, "dp-rgd", g[i]);
    const double pgd = mean_of(res.aggregates, "dp-pgd", g[i]);
    if (!(rgd < pgd))
      fail(o, fmt("dp-rgd %.6g >= dp-pgd %.6g at n=%g", rgd, pgd,
                  static_cast<double>(g[i])));
    if (i > 0 && rgd > mean_of(res.aggregates, "dp-rgd", g[i - 1]))
      ++inversions;
  }
  if (inversions > 1)
    fail(o, fmt("dp-rgd curve has %g inversions", inversions));
  o.detail += (o.detail.empty() ? "" : "; ") +
              curve(res.aggregates, "dp-rgd", g) + " " +
              curve(res.aggregates, "dp-pgd", g);
  return o;
}

// 9. Frechet mean study.
Outcome frechet_curves() {
  Outcome o;
  const auto cfg = ExperimentConfig::defaults(Experiment::frechet);
  const auto res = run_experiment(cfg);
  for (const auto &d : res.diagnostics)
    if (d.kind == "error")
      fail(o, "cell error: " + d.message);
  const auto &g = cfg.n_grid;
  for (std::size_t i = 0; i < 2; ++i) {
    const double rgd = mean_of(res.aggregates, "dp-rgd", g[i]);
    const double fm = mean_of(res.aggregates, "dp-fm", g[i]);
    if (!(rgd < fm))
      fail(o, fmt("dp-rgd %.6g >= dp-fm %.6g at n=%g", rgd, fm,
                  static_cast<double>(g[i])));
  }
  for (const char *meth : {"dp-rgd", "dp-fm"})
    if (!(mean_of(res.aggregates, meth, g.back()) <
          mean_of(res.aggregates, meth, g.front())))
      fail(o, std::string(meth) + " does not decrease from smallest to largest n");
  o.detail += (o.detail.empty() ? "" : "; ") +
              curve(res.aggregates, "dp-rgd", g) + " " +
              curve(res.aggregates, "dp-fm", g);
  return o;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

std::vector<double> strongly_convex_risks(std::size_t n, std::size_t runs,
                                          const PrivacyBudget &budget,
                                          double D) {
  std::vector<double> out;
  for (std::size_t r = 0; r < runs; ++r) {
    const std::uint64_t seed = cell_seed(77, n, r);
    RngStream data(seed, StreamId::data);
    const SpdManifold m(2);
    const FrechetObjective obj(m, generate_wishart_spd(n, 2, D, data), D);
    DomainProfile p;
    p.diameter = D;
    p.L0 = frechet_lipschitz(p);
    p.beta = 2.0;
    const Schedule sched = Schedule::of(ScheduleKind::strongly_convex);
    OptimizerConfig cfg;
    cfg.schedule = sched;
    cfg.output = OutputStrategy::geodesic_average;
    cfg.average_weight = AverageWeight::two_over_t;
    cfg.profile = p;
    cfg.calibration = calibrate_iterative(schedule_T(sched, p, budget, n, m.dim()),
                                          p.L0, n, n, budget);
    cfg.seed = seed;
    const auto res = run(obj, cfg, m.identity());
    const auto ref = solve_frechet_reference(obj);
    out.push_back(excess_risk(obj, res.w_priv, ref.mean));
  }
  return out;
}

// 10. Excess risk scaling under the strongly convex schedule.
Outcome strong_convexity_scaling() {
  Outcome o;
  const PrivacyBudget budget{1.0, 1e-3, 1.0};
  const double small = median(strongly_convex_risks(20, 50, budget, 1.0));
  const double large = median(strongly_convex_risks(40, 50, budget, 1.0));
  const double ratio = small / large;
  if (!(ratio >= 2.0 && ratio <= 8.0))
    fail(o, fmt("median ratio %.3f outside [2, 8]", ratio));
  o.detail += (o.detail.empty() ? "" : "; ") +
              fmt("median n=20 %.4g, n=40 %.4g, ratio %.3f", small, large,
                  ratio);
  return o;
}

// 11. Byte-identical CSVs across repetitions and thread counts.
Outcome determinism() {
  Outcome o;
  auto pca = ExperimentConfig::defaults(Experiment::pca);
  pca.n_grid = {200, 400};
  pca.runs = 3;
  pca.d_plus_1 = 10;
  auto fr = ExperimentConfig::defaults(Experiment::frechet);
  fr.n_grid = {10, 20};
  fr.runs = 4;
  for (auto cfg : {pca, fr}) {
    std::vector<std::string> csvs;
    for (std::size_t threads : {1u, 1u, 4u}) {
      cfg.threads = threads;
      const auto res = run_experiment(cfg);
      csvs.push_back(results_csv(res.rows) + aggregates_csv(res.aggregates) +
                     diagnostics_csv(res.diagnostics));
    }
    if (csvs[0] != csvs[1] || csvs[0] != csvs[2])
      fail(o, to_string(cfg.experiment) + " CSVs differ");
  }
  if (o.pass)
    o.detail = "results, aggregates and diagnostics identical for 1, 1, 4 threads";
  return o;
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 geometry suite", geometry_suite},
      {"2 gradient suite", gradient_suite},
      {"3 closed-form step", closed_form_step},
      {"4 sampler suite", sampler_suite},
      {"5 accountant suite", accountant_suite},
      {"6 noisy gradient second moment", lemma6},
      {"7 geodesic strong convexity", strong_convexity},
      {"8 pca curves", pca_curves},
      {"9 frechet curves", frechet_curves},
      {"10 strongly convex scaling", strong_convexity_scaling},
      {"11 determinism", determinism},
  };
  int failures = 0;
  for (const auto &[name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception &e) {
      fail(o, std::string("exception: ") + e.what());
    }
    const double sec = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
    std::printf("%s criterion %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL",
                name.c_str(), sec, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
