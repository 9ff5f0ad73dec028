#pragma once

// Random inputs shared by the test files.

#include <Eigen/Dense>

#include "dprgd/rng.hpp"
#include "dprgd/spd.hpp"
#include "dprgd/sphere.hpp"

namespace dprgd::testing {

inline Sphere::Point random_sphere_point(const Sphere &s, RngStream &rng) {
  return s.random_point(rng);
}

inline Sphere::Tangent random_sphere_tangent(const Sphere &s,
                                             const Sphere::Point &w,
                                             RngStream &rng, double scale) {
  return s.project(w, scale * rng.normal_vector(s.ambient_dim()));
}

// exp of a random symmetric matrix: SPD with controlled conditioning.
inline SpdManifold::Point random_spd(Eigen::Index r, RngStream &rng,
                                     double spread = 0.5) {
  Eigen::MatrixXd g = rng.normal_matrix(r, r);
  Eigen::MatrixXd s = spread * 0.5 * (g + g.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  Eigen::MatrixXd w = es.eigenvectors() *
                      es.eigenvalues().array().exp().matrix().asDiagonal() *
                      es.eigenvectors().transpose();
  return {0.5 * (w + w.transpose())};
}

inline SpdManifold::Tangent random_spd_tangent(const SpdManifold::Point &w,
                                               RngStream &rng, double scale) {
  const Eigen::Index r = w.coords.rows();
  Eigen::MatrixXd g = rng.normal_matrix(r, r);
  return {w.coords, scale * 0.5 * (g + g.transpose())};
}

} // namespace dprgd::testing
