#pragma once

/** The unit sphere S^d embedded in R^{d+1} with the induced Euclidean metric,
 * and the leading-eigenvector (PCA) objective defined on it. */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "dprgd/manifold.hpp"
#include "dprgd/rng.hpp"

namespace dprgd {

class Sphere {
public:
  using Rep = Eigen::VectorXd;
  using Point = ManifoldPoint<Rep>;
  using Tangent = TangentVector<Rep>;

  /// S^d: intrinsic dimension d, ambient dimension d+1.
  explicit Sphere(Eigen::Index d, Tolerances tol = {}) : d_(d), tol_(tol) {
    if (d < 1)
      throw DomainError("Sphere: intrinsic dimension must be >= 1");
  }

  Eigen::Index dim() const { return d_; }
  Eigen::Index ambient_dim() const { return d_ + 1; }
  const Tolerances &tolerances() const { return tol_; }

  ManifoldDescriptor descriptor() const {
    return {d_, "vector of length " + std::to_string(d_ + 1),
            "log defined for geodesic distance < pi (non-antipodal pairs)"};
  }

  void check_point(const Point &w) const {
    require(w.coords.size() == d_ + 1, "Sphere: point has wrong length");
    require(std::abs(w.coords.norm() - 1.0) <= tol_.point,
            "Sphere: point is not unit norm");
  }

  void check_tangent(const Tangent &xi) const {
    require(xi.coords.size() == d_ + 1 && xi.base.size() == d_ + 1,
            "Sphere: tangent vector has wrong length");
    require(std::abs(xi.base.dot(xi.coords)) <=
                tol_.tangent * (1.0 + xi.coords.norm()),
            "Sphere: vector is not tangent at its base point");
  }

  Point make_point(Rep v) const {
    Point p{std::move(v)};
    check_point(p);
    return p;
  }

  /// Normalizes an arbitrary nonzero ambient vector.
  Point normalize(const Rep &v) const {
    require(v.size() == d_ + 1, "Sphere: wrong ambient length");
    const double n = v.norm();
    require(n > 0.0, "Sphere: cannot normalize the zero vector");
    return Point{v / n};
  }

  Tangent make_tangent(const Point &w, Rep v) const {
    Tangent t{w.coords, std::move(v)};
    check_tangent(t);
    return t;
  }

  Tangent zero(const Point &w) const {
    return {w.coords, Rep::Zero(d_ + 1)};
  }

  /// Orthogonal projection of an ambient vector onto T_w S^d.
  Tangent project(const Point &w, const Rep &v) const {
    require(v.size() == d_ + 1, "Sphere: ambient vector has wrong length");
    return {w.coords, v - w.coords.dot(v) * w.coords};
  }

  double inner(const Tangent &xi, const Tangent &zeta) const {
    require_same_base(xi.base, zeta.base);
    return xi.coords.dot(zeta.coords);
  }

  double norm(const Tangent &xi) const { return xi.coords.norm(); }

  Point exp_map(const Point &w, const Tangent &xi) const {
    require_same_base(w.coords, xi.base);
    check_tangent(xi);
    const double t = xi.coords.norm();
    if (t == 0.0)
      return w;
    Rep out = std::cos(t) * w.coords + (std::sin(t) / t) * xi.coords;
    out /= out.norm();
    return Point{std::move(out)};
  }

  Tangent log_map(const Point &w, const Point &w2) const {
    const double c = w.coords.dot(w2.coords);
    if (c <= -1.0 + 1e-10)
      throw LogUndefined("Sphere: log undefined for antipodal points");
    Rep v = w2.coords - c * w.coords;
    const double s = v.norm();
    if (s < 1e-8) // theta / sin(theta) = 1 + O(theta^2)
      return {w.coords, std::move(v)};
    const double theta = std::atan2(s, c);
    return {w.coords, (theta / s) * v};
  }

  double dist(const Point &w, const Point &w2) const {
    const double c = w.coords.dot(w2.coords);
    const double s = (w2.coords - c * w.coords).norm();
    return std::atan2(s, std::clamp(c, -1.0, 1.0));
  }

  Tangent egrad_to_rgrad(const Point &w, const Rep &eg) const {
    return project(w, eg);
  }

  /// Coordinates in the orthonormal tangent frame given by the Householder
  /// reflector that maps w onto a multiple of e_0.
  Eigen::VectorXd vectorize(const Tangent &xi) const {
    const Rep u = householder(xi.base);
    const Rep hx = xi.coords - (2.0 * u.dot(xi.coords) / u.squaredNorm()) * u;
    return hx.tail(d_);
  }

  Tangent unvectorize(const Point &w, const Eigen::VectorXd &c) const {
    if (c.size() != d_)
      throw DomainError("Sphere: coordinate vector must have length d");
    const Rep u = householder(w.coords);
    Rep v(d_ + 1);
    v(0) = 0.0;
    v.tail(d_) = c;
    v -= (2.0 * u.dot(v) / u.squaredNorm()) * u;
    return {w.coords, std::move(v)};
  }

  Eigen::MatrixXd metric_tensor(const Point &) const {
    return Eigen::MatrixXd::Identity(d_, d_);
  }

  /// Uniformly distributed point.
  Point random_point(RngStream &rng) const {
    Rep v = rng.normal_vector(d_ + 1);
    return Point{v / v.norm()};
  }

  Point default_init(RngStream &rng) const { return random_point(rng); }

private:
  static Rep householder(const Rep &w) {
    Rep u = w;
    u(0) += (w(0) >= 0.0 ? 1.0 : -1.0);
    return u;
  }

  Eigen::Index d_;
  Tolerances tol_;
};

/// -(w^T z)^2
inline double pca_loss(const Sphere::Point &w, const Eigen::VectorXd &z) {
  const double p = w.coords.dot(z);
  return -p * p;
}

/// Riemannian gradient of pca_loss: -2 (I - w w^T) z z^T w.
inline Sphere::Tangent pca_rgrad(const Sphere &s, const Sphere::Point &w,
                                 const Eigen::VectorXd &z) {
  return s.egrad_to_rgrad(w, (-2.0 * w.coords.dot(z)) * z);
}

enum class LipschitzConvention {
  exact, // 2 max ||z||^2, a valid bound on ||grad f||
  paper, // max ||z||^2
};

/// Estimate of the geodesic Lipschitz constant of the per-sample PCA loss.
/// Rows of `samples` are the z_i.
inline double pca_lipschitz_estimate(const Eigen::MatrixXd &samples,
                                     LipschitzConvention conv =
                                         LipschitzConvention::exact) {
  if (samples.rows() == 0)
    throw DomainError("pca_lipschitz_estimate: empty dataset");
  const double theta = samples.rowwise().squaredNorm().maxCoeff();
  return conv == LipschitzConvention::exact ? 2.0 * theta : theta;
}

/// F(w) = -(1/n) sum_i (w^T z_i)^2 = -w^T A w over the rows z_i of Z.
class PcaObjective {
public:
  using Manifold = Sphere;

  explicit PcaObjective(Eigen::MatrixXd samples)
      : sphere_(samples.cols() - 1), z_(std::move(samples)) {
    if (z_.rows() < 1)
      throw DomainError("PcaObjective: need at least one sample");
    cov_ = (z_.transpose() * z_) / static_cast<double>(z_.rows());
  }

  const Sphere &manifold() const { return sphere_; }
  std::size_t size() const { return static_cast<std::size_t>(z_.rows()); }
  const Eigen::MatrixXd &samples() const { return z_; }
  const Eigen::MatrixXd &covariance() const { return cov_; }

  /// Column means vanish to `tol` relative to the data scale.
  bool is_centered(double tol = 1e-10) const {
    const double scale = std::max(1.0, z_.cwiseAbs().maxCoeff());
    return (z_.colwise().mean()).cwiseAbs().maxCoeff() <= tol * scale;
  }

  double value(const Sphere::Point &w) const {
    return -w.coords.dot(cov_ * w.coords);
  }

  double sample_loss(const Sphere::Point &w, std::size_t i) const {
    return pca_loss(w, z_.row(static_cast<Eigen::Index>(i)).transpose());
  }

  Sphere::Tangent sample_rgrad(const Sphere::Point &w, std::size_t i) const {
    return pca_rgrad(sphere_, w,
                     z_.row(static_cast<Eigen::Index>(i)).transpose());
  }

  /// Euclidean gradient of the minibatch mean, -(2/b) Z_B^T Z_B w.
  Eigen::VectorXd batch_egrad(const Sphere::Point &w,
                              std::span<const std::size_t> idx) const {
    require(!idx.empty(), "PcaObjective: empty batch");
    const double scale = -2.0 / static_cast<double>(idx.size());
    if (idx.size() == size()) {
      const Eigen::VectorXd u = z_ * w.coords;
      return scale * (z_.transpose() * u);
    }
    Eigen::VectorXd g = Eigen::VectorXd::Zero(z_.cols());
    for (std::size_t i : idx) {
      const auto z = z_.row(static_cast<Eigen::Index>(i));
      g += z.dot(w.coords) * z.transpose();
    }
    return scale * g;
  }

  Sphere::Tangent batch_rgrad(const Sphere::Point &w,
                              std::span<const std::size_t> idx) const {
    return sphere_.egrad_to_rgrad(w, batch_egrad(w, idx));
  }

  Sphere::Tangent full_rgrad(const Sphere::Point &w) const {
    return sphere_.egrad_to_rgrad(w, -2.0 * (cov_ * w.coords));
  }

private:
  Sphere sphere_;
  Eigen::MatrixXd z_;
  Eigen::MatrixXd cov_;
};

} // namespace dprgd
