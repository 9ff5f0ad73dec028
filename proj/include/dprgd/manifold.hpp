#pragma once

/** Geometry-agnostic vocabulary shared by every manifold: points, tangent
 * vectors tied to their base point, the manifold concept the optimizer is
 * written against, and a few helpers that only need that concept. */

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <optional>
#include <string>

#include "dprgd/errors.hpp"

namespace dprgd {

/// Numerical tolerances used by validity checks. One instance per manifold;
/// override by constructing the manifold with a custom value.
struct Tolerances {
  double point = 1e-12;
  double tangent = 1e-10;
  double roundtrip = 1e-8;
};

struct ManifoldDescriptor {
  Eigen::Index intrinsic_dim = 0;
  std::string ambient_shape;
  std::string injectivity_note;
};

template <class Rep> struct ManifoldPoint {
  Rep coords;
};

/// A tangent vector always carries the point it is attached to.
template <class Rep> struct TangentVector {
  Rep base;
  Rep coords;
};

template <class Rep> bool same_base(const Rep &a, const Rep &b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

template <class Rep> void require_same_base(const Rep &a, const Rep &b) {
  if (!same_base(a, b))
    throw DomainError("tangent vectors live at different base points");
}

template <class Rep>
TangentVector<Rep> operator*(double a, const TangentVector<Rep> &x) {
  return {x.base, Rep(a * x.coords)};
}

template <class Rep>
TangentVector<Rep> operator+(const TangentVector<Rep> &a,
                             const TangentVector<Rep> &b) {
  require_same_base(a.base, b.base);
  return {a.base, Rep(a.coords + b.coords)};
}

template <class Rep>
TangentVector<Rep> operator-(const TangentVector<Rep> &a,
                             const TangentVector<Rep> &b) {
  require_same_base(a.base, b.base);
  return {a.base, Rep(a.coords - b.coords)};
}

/// Problem-dependent constants of the constraint set and the loss.
struct DomainProfile {
  double diameter = 0.0;  // D_W
  double kappa_min = 0.0; // sectional curvature lower bound
  double c_l = 1.0;       // lower bound on the metric tensor eigenvalues
  double L0 = 1.0;        // geodesic Lipschitz constant of the per-sample loss
  std::optional<double> L1;   // geodesic smoothness
  std::optional<double> beta; // geodesic strong convexity
  std::optional<double> tau;  // PL constant
  /// Iterates farther than this from w_0 are reported, never projected.
  std::optional<double> monitor_radius;
};

// clang-format off
template <class M>
concept RiemannianManifold = requires(const M &m, const typename M::Point &w,
                                      const typename M::Tangent &xi,
                                      const typename M::Rep &ambient,
                                      const Eigen::VectorXd &c) {
  typename M::Rep;
  { m.descriptor() } -> std::same_as<ManifoldDescriptor>;
  { m.dim() } -> std::convertible_to<Eigen::Index>;
  { m.check_point(w) };
  { m.check_tangent(xi) };
  { m.zero(w) } -> std::same_as<typename M::Tangent>;
  { m.inner(xi, xi) } -> std::convertible_to<double>;
  { m.norm(xi) } -> std::convertible_to<double>;
  { m.exp_map(w, xi) } -> std::same_as<typename M::Point>;
  { m.log_map(w, w) } -> std::same_as<typename M::Tangent>;
  { m.dist(w, w) } -> std::convertible_to<double>;
  { m.egrad_to_rgrad(w, ambient) } -> std::same_as<typename M::Tangent>;
  { m.vectorize(xi) } -> std::same_as<Eigen::VectorXd>;
  { m.unvectorize(w, c) } -> std::same_as<typename M::Tangent>;
  { m.metric_tensor(w) } -> std::same_as<Eigen::MatrixXd>;
};
// clang-format on

/// Curvature constant of the trigonometric distance bound: 1 on nonnegatively
/// curved domains, sqrt|k| D / tanh(sqrt|k| D) otherwise.
inline double curvature_constant(double kappa_min, double diameter) {
  if (!(diameter > 0.0))
    throw DomainError("curvature_constant: diameter must be positive");
  if (kappa_min >= 0.0)
    return 1.0;
  const double x = std::sqrt(-kappa_min) * diameter;
  if (x < 1e-8)
    return 1.0 + x * x / 3.0;
  return x / std::tanh(x);
}

/// One step of the geodesic running average: Exp_bar(weight * Log_bar(next)).
template <RiemannianManifold M>
typename M::Point geodesic_average_step(const M &m,
                                        const typename M::Point &bar,
                                        const typename M::Point &next,
                                        double weight) {
  if (!(weight > 0.0 && weight <= 1.0))
    throw DomainError("geodesic_average_step: weight must lie in (0, 1]");
  if (weight == 1.0)
    return next;
  return m.exp_map(bar, weight * m.log_map(bar, next));
}

/// Angle at w0 between the geodesics towards w1 and w2, as used by the
/// trigonometric distance bound.
template <RiemannianManifold M>
double geodesic_angle_cos(const M &m, const typename M::Point &w0,
                          const typename M::Point &w1,
                          const typename M::Point &w2) {
  const auto a = m.log_map(w0, w1);
  const auto b = m.log_map(w0, w2);
  const double na = m.norm(a), nb = m.norm(b);
  if (na == 0.0 || nb == 0.0)
    return 1.0;
  return m.inner(a, b) / (na * nb);
}

} // namespace dprgd
