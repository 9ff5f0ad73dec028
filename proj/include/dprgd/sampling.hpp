#pragma once

/** Samplers for the tangent-space Gaussian N_w(0, sigma^2), whose density is
 * proportional to exp(-||xi||_w^2 / (2 sigma^2)), and for the tangent-coordinate
 * Laplace distribution on SPD used by output perturbation. */

#include <Eigen/Dense>

#include <cmath>
#include <optional>

#include "dprgd/manifold.hpp"
#include "dprgd/rng.hpp"
#include "dprgd/sphere.hpp"
#include "dprgd/spd.hpp"

namespace dprgd {

struct MhParams {
  std::optional<double> proposal_std; // defaults to the target scale sigma
  std::size_t burn_in = 500;
  std::size_t thinning = 10;

  void validate() const {
    if (thinning < 1)
      throw DomainError("MhParams: thinning must be >= 1");
    if (proposal_std && !(*proposal_std > 0.0))
      throw DomainError("MhParams: proposal_std must be positive");
  }
};

struct MhStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  double acceptance_rate() const {
    return proposals == 0 ? 0.0
                          : static_cast<double>(accepted) /
                                static_cast<double>(proposals);
  }
};

inline void require_positive_sigma(double sigma) {
  if (!(sigma > 0.0))
    throw DomainError("sampler: sigma must be positive");
}

/// Exact draw on the sphere: an isotropic ambient Gaussian projected onto
/// T_w S^d, i.e. N(0, sigma^2 I_d) in any orthonormal tangent frame.
inline Sphere::Tangent sample_tangent_gaussian(const Sphere &s,
                                               const Sphere::Point &w,
                                               double sigma, RngStream &rng) {
  require_positive_sigma(sigma);
  return s.project(w, sigma * rng.normal_vector(s.ambient_dim()));
}

/// Exact draw on SPD: W^{1/2} eta W^{1/2} with eta having i.i.d. N(0, sigma^2)
/// Frobenius-orthonormal coordinates. ||W^{1/2} eta W^{1/2}||_W = ||eta||_F.
inline SpdManifold::Tangent
sample_tangent_gaussian(const SpdManifold &m, const SpdKernelCache &c,
                        const SpdManifold::Point &w, double sigma,
                        RngStream &rng) {
  require_positive_sigma(sigma);
  const Eigen::MatrixXd eta =
      m.coords_to_sym(sigma * rng.normal_vector(m.dim()));
  return {w.coords, SpdManifold::unwhiten(c, eta)};
}

inline SpdManifold::Tangent sample_tangent_gaussian(const SpdManifold &m,
                                                    const SpdManifold::Point &w,
                                                    double sigma,
                                                    RngStream &rng) {
  return sample_tangent_gaussian(m, m.cache(w), w, sigma, rng);
}

/// Random-walk Metropolis-Hastings on the vectorized tangent coordinates,
/// targeting exp(-c^T G_w c / (2 sigma^2)). Runs burn_in + thinning steps
/// from the origin and returns the final state.
template <RiemannianManifold M>
typename M::Tangent
sample_tangent_gaussian_mh(const M &m, const typename M::Point &w,
                           double sigma, RngStream &rng,
                           const MhParams &params = {},
                           MhStats *stats = nullptr) {
  require_positive_sigma(sigma);
  params.validate();
  const Eigen::MatrixXd g = m.metric_tensor(w);
  const double step = params.proposal_std.value_or(sigma);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  auto log_target = [&](const Eigen::VectorXd &c) {
    return -c.dot(g * c) * inv2s2;
  };
  Eigen::VectorXd cur = Eigen::VectorXd::Zero(m.dim());
  double cur_lp = log_target(cur);
  const std::size_t total = params.burn_in + params.thinning;
  for (std::size_t k = 0; k < total; ++k) {
    Eigen::VectorXd prop = cur + step * rng.normal_vector(m.dim());
    const double lp = log_target(prop);
    const double u = rng.uniform();
    const bool accept = std::log(u) < lp - cur_lp;
    if (accept) {
      cur = std::move(prop);
      cur_lp = lp;
    }
    if (stats) {
      ++stats->proposals;
      stats->accepted += accept ? 1 : 0;
    }
  }
  return m.unvectorize(w, cur);
}

/// Draw from the density proportional to exp(-dist(X, footprint) / sigma),
/// expressed in orthonormal tangent coordinates at the footprint and mapped
/// through Exp. Random-walk MH from the footprint.
inline SpdManifold::Point
sample_intrinsic_laplace_spd(const SpdManifold &m,
                             const SpdManifold::Point &footprint, double sigma,
                             RngStream &rng, const MhParams &params = {},
                             MhStats *stats = nullptr) {
  require_positive_sigma(sigma);
  params.validate();
  m.check_point(footprint);
  const double step = params.proposal_std.value_or(sigma);
  Eigen::VectorXd cur = Eigen::VectorXd::Zero(m.dim());
  double cur_lp = 0.0;
  const std::size_t total = params.burn_in + params.thinning;
  for (std::size_t k = 0; k < total; ++k) {
    Eigen::VectorXd prop = cur + step * rng.normal_vector(m.dim());
    const double lp = -prop.norm() / sigma;
    const double u = rng.uniform();
    const bool accept = std::log(u) < lp - cur_lp;
    if (accept) {
      cur = std::move(prop);
      cur_lp = lp;
    }
    if (stats) {
      ++stats->proposals;
      stats->accepted += accept ? 1 : 0;
    }
  }
  const auto c = m.cache(footprint);
  return SpdManifold::Point{
      SpdManifold::unwhiten(c, spd_expm(m.coords_to_sym(cur)))};
}

} // namespace dprgd
