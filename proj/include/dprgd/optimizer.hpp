#pragma once

/** Differentially private Riemannian (stochastic) gradient descent.
 *
 * Each iteration draws a minibatch without replacement, averages the
 * per-sample Riemannian gradients, adds tangent-space Gaussian noise at the
 * current iterate and moves along the geodesic:
 *
 *   zeta_t  = (1/b) sum_{z in B_t} grad f(w_t; z) + eps_t,  eps_t ~ N_{w_t}(0, sigma^2)
 *   w_{t+1} = Exp_{w_t}(-eta_t zeta_t)
 *
 * The private output is the last iterate, a uniformly chosen iterate, or a
 * geodesic running average, depending on the function class. */

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dprgd/manifold.hpp"
#include "dprgd/privacy.hpp"
#include "dprgd/rng.hpp"
#include "dprgd/sampling.hpp"

namespace dprgd {

// clang-format off
template <class O>
concept Objective = requires(const O &o, const typename O::Manifold::Point &w,
                             std::span<const std::size_t> idx) {
  typename O::Manifold;
  requires RiemannianManifold<typename O::Manifold>;
  { o.manifold() } -> std::convertible_to<const typename O::Manifold &>;
  { o.size() } -> std::convertible_to<std::size_t>;
  { o.value(w) } -> std::convertible_to<double>;
  { o.batch_rgrad(w, idx) } -> std::same_as<typename O::Manifold::Tangent>;
};
// clang-format on

enum class ScheduleKind { gconvex, strongly_convex, pl, nonconvex, constant };

struct Schedule {
  ScheduleKind kind = ScheduleKind::constant;
  double eta = 0.0; // only used by ScheduleKind::constant

  static Schedule constant(double eta) { return {ScheduleKind::constant, eta}; }
  static Schedule of(ScheduleKind k) { return {k, 0.0}; }
};

/// Strict inequality eta < min(1/L1, 1/tau) realized with this factor.
inline constexpr double kPlStepFactor = 0.99;

enum class OutputStrategy { last, uniform_random, geodesic_average };

/// Weight of the newest iterate in the running geodesic average.
enum class AverageWeight {
  inverse_t, // 1/(t+1): uniform average, geodesically convex case
  two_over_t // 2/(t+1): linearly weighted, strongly convex case
};

enum class NoiseSampler { exact, metropolis_hastings };

struct OptimizerConfig {
  Schedule schedule;
  OutputStrategy output = OutputStrategy::last;
  AverageWeight average_weight = AverageWeight::inverse_t;
  DomainProfile profile;
  NoiseCalibration calibration; // carries T, b, n, L0 and sigma^2
  std::uint64_t seed = 0;
  NoiseSampler sampler = NoiseSampler::exact;
  MhParams mh;
  bool record_batches = false;
  std::vector<int> lambda_grid; // empty: 1..64
};

/// Step size of iteration t for the given schedule.
inline double schedule_stepsize(const Schedule &s, std::size_t t,
                                const DomainProfile &p, double sigma2,
                                std::size_t T, Eigen::Index d) {
  switch (s.kind) {
  case ScheduleKind::constant:
    if (!(s.eta > 0.0))
      throw ConfigError("constant schedule needs eta > 0");
    return s.eta;
  case ScheduleKind::gconvex: {
    if (!(p.diameter > 0.0))
      throw ConfigError("gconvex schedule needs a positive diameter");
    if (!(p.c_l > 0.0))
      throw ConfigError("gconvex schedule needs c_l > 0");
    const double varsigma = curvature_constant(p.kappa_min, p.diameter);
    const double second =
        p.L0 * p.L0 + static_cast<double>(d) * sigma2 / p.c_l;
    return p.diameter / std::sqrt(second * varsigma * static_cast<double>(T));
  }
  case ScheduleKind::strongly_convex:
    if (!p.beta || !(*p.beta > 0.0))
      throw ConfigError("strongly_convex schedule needs beta");
    return 1.0 / (*p.beta * static_cast<double>(t + 1));
  case ScheduleKind::pl:
    if (!p.L1 || !p.tau || !(*p.L1 > 0.0) || !(*p.tau > 0.0))
      throw ConfigError("pl schedule needs L1 and tau");
    return kPlStepFactor * std::min(1.0 / *p.L1, 1.0 / *p.tau);
  case ScheduleKind::nonconvex:
    if (!p.L1 || !(*p.L1 > 0.0))
      throw ConfigError("nonconvex schedule needs L1");
    return 1.0 / *p.L1;
  }
  throw ConfigError("unknown schedule");
}

/// Iteration count recommended for the schedule, rounded and clamped to >= 1.
inline std::size_t schedule_T(const Schedule &s, const DomainProfile &p,
                              const PrivacyBudget &budget, std::size_t n,
                              Eigen::Index d) {
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double logd = std::log(1.0 / budget.delta);
  double t = 1.0;
  switch (s.kind) {
  case ScheduleKind::gconvex:
  case ScheduleKind::strongly_convex:
    t = nn * nn;
    break;
  case ScheduleKind::pl:
    t = std::log(nn * nn * budget.epsilon * budget.epsilon * p.c_l /
                 (dd * p.L0 * p.L0 * logd));
    break;
  case ScheduleKind::nonconvex: {
    if (!p.L1)
      throw ConfigError("nonconvex schedule needs L1");
    t = std::sqrt(*p.L1) * nn * budget.epsilon /
        (std::sqrt(dd * logd / p.c_l) * p.L0);
    break;
  }
  case ScheduleKind::constant:
    throw ConfigError("constant schedule has no associated iteration count");
  }
  if (!std::isfinite(t) || t < 1.0)
    return 1;
  return static_cast<std::size_t>(std::llround(t));
}

/// b distinct indices drawn uniformly without replacement, in increasing
/// order. b == n returns 0..n-1 without consuming randomness.
inline std::vector<std::size_t> subsample(std::size_t n, std::size_t b,
                                          RngStream &rng) {
  if (b == 0 || b > n)
    throw DomainError("subsample: need 1 <= b <= n");
  std::vector<std::size_t> out;
  out.reserve(b);
  if (b == n) {
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(i);
    return out;
  }
  // Selection sampling: index i is kept with probability
  // (still needed) / (still available).
  for (std::size_t i = 0; i < n && out.size() < b; ++i) {
    const double needed = static_cast<double>(b - out.size());
    if (rng.uniform() * static_cast<double>(n - i) < needed)
      out.push_back(i);
  }
  return out;
}

/// The four independent substreams of one run.
struct RunStreams {
  RngStream noise;
  RngStream subsample;
  RngStream init;
  RngStream output_select;

  explicit RunStreams(std::uint64_t seed)
      : noise(seed, StreamId::noise), subsample(seed, StreamId::subsample),
        init(seed, StreamId::init),
        output_select(seed, StreamId::output_select) {}
};

template <class Point> struct Trajectory {
  std::vector<Point> iterates; // w_0 .. w_T
  std::vector<double> noise_norms;
  std::vector<double> stepsizes;
  std::vector<std::vector<std::size_t>> batches; // when recorded
  std::vector<std::string> warnings;
};

template <class Point> struct RunResult {
  Trajectory<Point> trajectory;
  Point w_priv;
  std::size_t selected_index = 0; // for OutputStrategy::uniform_random
  MomentsLedger ledger;
};

template <RiemannianManifold M>
typename M::Tangent draw_tangent_noise(const M &m, const typename M::Point &w,
                                       double sigma, RngStream &rng,
                                       NoiseSampler sampler,
                                       const MhParams &mh) {
  if (sampler == NoiseSampler::metropolis_hastings)
    return sample_tangent_gaussian_mh(m, w, sigma, rng, mh);
  return sample_tangent_gaussian(m, w, sigma, rng);
}

/// Validates a configuration against an objective; throws ConfigError.
template <Objective O>
void validate_config(const O &obj, const OptimizerConfig &cfg) {
  const auto &cal = cfg.calibration;
  if (cal.T < 1)
    throw ConfigError("T must be >= 1");
  if (cal.b < 1 || cal.b > obj.size())
    throw ConfigError("batch size must satisfy 1 <= b <= n");
  if (cal.n != obj.size())
    throw ConfigError("calibration was computed for a different n");
  if (!(cal.sigma2 >= 0.0))
    throw ConfigError("sigma2 must be nonnegative");
  // Evaluating the first step size surfaces missing profile fields.
  (void)schedule_stepsize(cfg.schedule, 0, cfg.profile, cal.sigma2, cal.T,
                          obj.manifold().dim());
}

/// One noisy Riemannian gradient step from w at iteration t.
template <Objective O>
typename O::Manifold::Point
dp_step(const O &obj, const typename O::Manifold::Point &w, std::size_t t,
        const OptimizerConfig &cfg, RunStreams &streams,
        Trajectory<typename O::Manifold::Point> *trace = nullptr) {
  const auto &m = obj.manifold();
  const auto &cal = cfg.calibration;
  const auto batch = subsample(obj.size(), cal.b, streams.subsample);
  auto zeta = obj.batch_rgrad(w, batch);
  double noise_norm = 0.0;
  if (cal.sigma2 > 0.0) {
    const auto eps = draw_tangent_noise(m, w, std::sqrt(cal.sigma2),
                                        streams.noise, cfg.sampler, cfg.mh);
    noise_norm = m.norm(eps);
    zeta = zeta + eps;
  }
  const double eta = schedule_stepsize(cfg.schedule, t, cfg.profile,
                                       cal.sigma2, cal.T, m.dim());
  auto next = m.exp_map(w, (-eta) * zeta);
  if (trace) {
    trace->noise_norms.push_back(noise_norm);
    trace->stepsizes.push_back(eta);
    if (cfg.record_batches)
      trace->batches.push_back(batch);
  }
  return next;
}

/// Geodesic running average of w_1 .. w_{T-1}: bar_1 = w_1 and
/// bar_{t+1} = Exp_{bar_t}(a_t Log_{bar_t}(w_{t+1})). With T == 1 the only
/// available iterate w_1 is returned.
template <RiemannianManifold M>
typename M::Point geodesic_average(const M &m,
                                   const std::vector<typename M::Point> &it,
                                   AverageWeight rule) {
  if (it.size() < 2)
    throw DomainError("geodesic_average: need at least w_0 and w_1");
  const std::size_t T = it.size() - 1;
  auto bar = it[1];
  for (std::size_t t = 1; t + 1 <= T - 1; ++t) {
    const double a = rule == AverageWeight::inverse_t
                         ? 1.0 / static_cast<double>(t + 1)
                         : std::min(1.0, 2.0 / static_cast<double>(t + 1));
    bar = geodesic_average_step(m, bar, it[t + 1], a);
  }
  return bar;
}

/// Runs T iterations and selects the private output.
template <Objective O>
RunResult<typename O::Manifold::Point>
run(const O &obj, const OptimizerConfig &cfg,
    std::optional<typename O::Manifold::Point> init = std::nullopt) {
  using Point = typename O::Manifold::Point;
  validate_config(obj, cfg);
  const auto &m = obj.manifold();
  const auto &cal = cfg.calibration;
  RunStreams streams(cfg.seed);

  Point w = init ? *init : m.default_init(streams.init);
  m.check_point(w);

  RunResult<Point> out{
      {}, w, 0,
      cfg.lambda_grid.empty() ? MomentsLedger() : MomentsLedger(cfg.lambda_grid)};
  auto &traj = out.trajectory;
  traj.iterates.reserve(cal.T + 1);
  traj.iterates.push_back(w);

  for (std::size_t t = 0; t < cal.T; ++t) {
    w = dp_step(obj, w, t, cfg, streams, &traj);
    out.ledger.add_step(cal.L0, cal.n, cal.b, cal.sigma2);
    if (cfg.profile.monitor_radius) {
      const double r = m.dist(traj.iterates.front(), w);
      if (r > *cfg.profile.monitor_radius)
        traj.warnings.push_back("iterate " + std::to_string(t + 1) +
                                " left the monitored ball (dist " +
                                std::to_string(r) + ")");
    }
    traj.iterates.push_back(w);
  }

  switch (cfg.output) {
  case OutputStrategy::last:
    out.selected_index = cal.T;
    out.w_priv = traj.iterates.back();
    break;
  case OutputStrategy::uniform_random:
    out.selected_index = streams.output_select.uniform_index(cal.T);
    out.w_priv = traj.iterates[out.selected_index];
    break;
  case OutputStrategy::geodesic_average:
    out.selected_index = cal.T;
    out.w_priv = geodesic_average(m, traj.iterates, cfg.average_weight);
    break;
  }
  return out;
}

/// Plain Riemannian gradient descent with full gradients and constant step.
template <Objective O>
std::vector<typename O::Manifold::Point>
rgd_trajectory(const O &obj, typename O::Manifold::Point w0, double eta,
               std::size_t T) {
  const auto &m = obj.manifold();
  std::vector<std::size_t> all(obj.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<typename O::Manifold::Point> it{w0};
  for (std::size_t t = 0; t < T; ++t)
    it.push_back(m.exp_map(it.back(), (-eta) * obj.batch_rgrad(it.back(), all)));
  return it;
}

} // namespace dprgd
