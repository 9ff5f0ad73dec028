#pragma once

/** Comparison methods and non-private reference solvers. */

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "dprgd/optimizer.hpp"
#include "dprgd/sampling.hpp"
#include "dprgd/sphere.hpp"
#include "dprgd/spd.hpp"

namespace dprgd {

struct PgdResult {
  std::vector<Sphere::Point> iterates;
  Sphere::Point w_priv;
  std::size_t resamples = 0;
};

/// Noisy projected gradient descent on the sphere: Euclidean gradient plus
/// isotropic ambient noise N(0, sigma^2 I_{d+1}), followed by renormalization,
///   w_{t+1} = (w_t - eta zeta_t) / ||w_t - eta zeta_t||.
/// Uses the noise variance, iteration count, batch size and step schedule of
/// `cfg`, and the same substreams as run() so paired comparisons share the
/// initialization.
inline PgdResult
baseline_dp_pgd_sphere(const PcaObjective &obj, const OptimizerConfig &cfg,
                       std::optional<Sphere::Point> init = std::nullopt) {
  validate_config(obj, cfg);
  const auto &s = obj.manifold();
  const auto &cal = cfg.calibration;
  RunStreams streams(cfg.seed);
  Sphere::Point w = init ? *init : s.default_init(streams.init);
  s.check_point(w);
  const double sigma = std::sqrt(cal.sigma2);

  PgdResult out{{w}, w, 0};
  for (std::size_t t = 0; t < cal.T; ++t) {
    const auto batch = subsample(obj.size(), cal.b, streams.subsample);
    const Eigen::VectorXd g = obj.batch_egrad(w, batch);
    const double eta = schedule_stepsize(cfg.schedule, t, cfg.profile,
                                         cal.sigma2, cal.T, s.dim());
    auto step = [&]() -> Eigen::VectorXd {
      Eigen::VectorXd zeta = g;
      if (sigma > 0.0)
        zeta += sigma * streams.noise.normal_vector(s.ambient_dim());
      return w.coords - eta * zeta;
    };
    Eigen::VectorXd v = step();
    if (v.norm() < 1e-14) {
      ++out.resamples;
      v = step();
      if (v.norm() < 1e-14)
        throw DomainError("dp-pgd: update collapsed to the zero vector");
    }
    w = Sphere::Point{v / v.norm()};
    out.iterates.push_back(w);
  }
  out.w_priv = w;
  return out;
}

/// Top eigenvector of the sample covariance, sign fixed so that the first
/// nonzero coordinate is positive.
inline Sphere::Point solve_pca_reference(const PcaObjective &obj) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(obj.covariance());
  if (es.info() != Eigen::Success)
    throw ConvergenceError("pca reference: eigendecomposition failed");
  Eigen::VectorXd v = es.eigenvectors().col(es.eigenvectors().cols() - 1);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) != 0.0) {
      if (v(i) < 0.0)
        v = -v;
      break;
    }
  }
  return Sphere::Point{v / v.norm()};
}

struct FrechetSolve {
  SpdManifold::Point mean;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
};

/// Non-private Frechet mean by Riemannian gradient descent on the exact
/// gradient -2 mean_i Log_W(X_i) with step 1/2, i.e. W <- Exp_W(mean Log_W(X_i)).
inline FrechetSolve
solve_frechet_reference(const FrechetObjective &obj, double grad_tol = 1e-14,
                        std::size_t max_iter = 100000,
                        std::optional<SpdManifold::Point> init = std::nullopt,
                        double eta = 0.5) {
  const auto &m = obj.manifold();
  const auto &xs = obj.samples();
  SpdManifold::Point w = init ? *init : m.identity();
  const double inv_n = 1.0 / static_cast<double>(xs.size());
  for (std::size_t it = 0; it <= max_iter; ++it) {
    const auto c = m.cache(w);
    Eigen::MatrixXd white_mean = Eigen::MatrixXd::Zero(m.size(), m.size());
    for (const auto &x : xs)
      if (!same_base(w.coords, x.coords))
        white_mean += spd_logm(SpdManifold::whiten(c, x.coords));
    white_mean *= inv_n;
    // ||grad||_W = 2 ||mean Log_W||_W = 2 ||whitened mean||_F
    const double gn = 2.0 * white_mean.norm();
    if (gn <= grad_tol)
      return {w, it, gn};
    if (it == max_iter)
      break;
    w = SpdManifold::Point{SpdManifold::unwhiten(
        c, spd_expm(symmetrize(2.0 * eta * white_mean)))};
  }
  throw ConvergenceError("frechet reference: gradient norm did not reach "
                         "tolerance within the iteration cap");
}

struct DpFrechetOutput {
  SpdManifold::Point nonprivate_mean;
  SpdManifold::Point private_mean;
  double sensitivity = 0.0;
  double sigma = 0.0;
};

/// Output perturbation: the non-private Frechet mean, perturbed by the
/// tangent-coordinate Laplace sampler with scale sensitivity / epsilon,
/// sensitivity = 2 D_W / n.
inline DpFrechetOutput
baseline_dp_frechet_output(const FrechetObjective &obj, double epsilon,
                           double diameter, RngStream &rng,
                           const MhParams &mh = {}) {
  if (!(epsilon > 0.0))
    throw DomainError("dp-fm: epsilon must be positive");
  if (!(diameter > 0.0))
    throw DomainError("dp-fm: diameter must be positive");
  DpFrechetOutput out{solve_frechet_reference(obj).mean, {}, 0.0, 0.0};
  out.sensitivity = 2.0 * diameter / static_cast<double>(obj.size());
  out.sigma = out.sensitivity / epsilon;
  out.private_mean = sample_intrinsic_laplace_spd(
      obj.manifold(), out.nonprivate_mean, out.sigma, rng, mh);
  return out;
}

} // namespace dprgd
