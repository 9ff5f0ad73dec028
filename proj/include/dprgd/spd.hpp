#pragma once

/** The manifold of r x r symmetric positive definite matrices under the
 * affine-invariant metric <U, V>_W = tr(U W^-1 V W^-1), and the Frechet-mean
 * objective (mean squared geodesic distance to the samples). */

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dprgd/manifold.hpp"
#include "dprgd/matrix_functions.hpp"
#include "dprgd/rng.hpp"

namespace dprgd {

class SpdManifold {
public:
  using Rep = Eigen::MatrixXd;
  using Point = ManifoldPoint<Rep>;
  using Tangent = TangentVector<Rep>;

  /// Largest size for which metric_tensor() is provided.
  static constexpr Eigen::Index kMaxMetricTensorSize = 8;

  explicit SpdManifold(Eigen::Index r, Tolerances tol = {}) : r_(r), tol_(tol) {
    if (r < 1)
      throw DomainError("SpdManifold: matrix size must be >= 1");
  }

  Eigen::Index size() const { return r_; }
  Eigen::Index dim() const { return r_ * (r_ + 1) / 2; }
  const Tolerances &tolerances() const { return tol_; }

  ManifoldDescriptor descriptor() const {
    const std::string r = std::to_string(r_);
    return {dim(), r + "x" + r + " symmetric positive definite matrix",
            "exp/log are global diffeomorphisms (Hadamard manifold)"};
  }

  void check_point(const Point &w) const {
    require(w.coords.rows() == r_ && w.coords.cols() == r_,
            "SpdManifold: point has wrong shape");
    const double scale = std::max(1.0, w.coords.cwiseAbs().maxCoeff());
    require((w.coords - w.coords.transpose()).cwiseAbs().maxCoeff() <=
                tol_.point * scale,
            "SpdManifold: point is not symmetric");
    Eigen::SelfAdjointEigenSolver<Rep> es(w.coords, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() > tol_.point,
            "SpdManifold: point is not positive definite");
  }

  void check_tangent(const Tangent &xi) const {
    require(xi.coords.rows() == r_ && xi.coords.cols() == r_ &&
                xi.base.rows() == r_ && xi.base.cols() == r_,
            "SpdManifold: tangent vector has wrong shape");
    require((xi.coords - xi.coords.transpose()).cwiseAbs().maxCoeff() <=
                tol_.tangent * (1.0 + xi.coords.cwiseAbs().maxCoeff()),
            "SpdManifold: tangent vector is not symmetric");
  }

  Point make_point(Rep w) const {
    Point p{std::move(w)};
    check_point(p);
    return p;
  }

  Tangent make_tangent(const Point &w, Rep v) const {
    Tangent t{w.coords, std::move(v)};
    check_tangent(t);
    return t;
  }

  Point identity() const { return Point{Rep::Identity(r_, r_)}; }

  Tangent zero(const Point &w) const {
    return {w.coords, Rep::Zero(r_, r_)};
  }

  SpdKernelCache cache(const Point &w) const {
    return SpdKernelCache::compute(w.coords, tol_.point);
  }

  /// W^{-1/2} U W^{-1/2}: maps T_W isometrically onto (Sym, Frobenius).
  static Rep whiten(const SpdKernelCache &c, const Rep &u) {
    return symmetrize(c.inv_sqrt * u * c.inv_sqrt);
  }

  static Rep unwhiten(const SpdKernelCache &c, const Rep &u) {
    return symmetrize(c.sqrt * u * c.sqrt);
  }

  double inner(const Tangent &xi, const Tangent &zeta) const {
    require_same_base(xi.base, zeta.base);
    const auto c = cache(Point{xi.base});
    return whiten(c, xi.coords).cwiseProduct(whiten(c, zeta.coords)).sum();
  }

  double norm(const Tangent &xi) const {
    const auto c = cache(Point{xi.base});
    return whiten(c, xi.coords).norm();
  }

  Point exp_map(const SpdKernelCache &c, const Tangent &xi) const {
    check_tangent(xi);
    return Point{unwhiten(c, spd_expm(whiten(c, xi.coords)))};
  }

  Point exp_map(const Point &w, const Tangent &xi) const {
    require_same_base(w.coords, xi.base);
    if (xi.coords.isZero(0.0))
      return w;
    return exp_map(cache(w), xi);
  }

  Tangent log_map(const SpdKernelCache &c, const Point &w,
                  const Point &x) const {
    return {w.coords, unwhiten(c, spd_logm(whiten(c, x.coords)))};
  }

  Tangent log_map(const Point &w, const Point &x) const {
    if (same_base(w.coords, x.coords))
      return zero(w);
    return log_map(cache(w), w, x);
  }

  /// sqrt(sum_i log^2 lambda_i(W^{-1/2} X W^{-1/2})).
  double dist(const SpdKernelCache &c, const Point &x) const {
    Eigen::SelfAdjointEigenSolver<Rep> es(whiten(c, x.coords),
                                          Eigen::EigenvaluesOnly);
    const Eigen::VectorXd l = es.eigenvalues();
    require(l.minCoeff() > 0.0, "SpdManifold: dist argument not SPD");
    return l.array().log().matrix().norm();
  }

  double dist(const Point &w, const Point &x) const {
    if (same_base(w.coords, x.coords))
      return 0.0;
    return dist(cache(w), x);
  }

  /// W sym(eg) W.
  Tangent egrad_to_rgrad(const Point &w, const Rep &eg) const {
    require(eg.rows() == r_ && eg.cols() == r_,
            "SpdManifold: Euclidean gradient has wrong shape");
    return {w.coords, symmetrize(w.coords * symmetrize(eg) * w.coords)};
  }

  /// Coordinates of a symmetric matrix in the Frobenius-orthonormal basis
  /// {E_ii} U {(E_ij + E_ji)/sqrt 2, i < j}, upper triangle row-major.
  Eigen::VectorXd sym_to_coords(const Rep &s) const {
    Eigen::VectorXd c(dim());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < r_; ++i)
      for (Eigen::Index j = i; j < r_; ++j)
        c(k++) = (i == j) ? s(i, i) : std::sqrt(2.0) * 0.5 * (s(i, j) + s(j, i));
    return c;
  }

  Rep coords_to_sym(const Eigen::VectorXd &c) const {
    if (c.size() != dim())
      throw DomainError("SpdManifold: coordinate vector must have length d");
    Rep s(r_, r_);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < r_; ++i)
      for (Eigen::Index j = i; j < r_; ++j) {
        if (i == j) {
          s(i, i) = c(k++);
        } else {
          s(i, j) = s(j, i) = c(k++) / std::sqrt(2.0);
        }
      }
    return s;
  }

  Eigen::VectorXd vectorize(const Tangent &xi) const {
    return sym_to_coords(xi.coords);
  }

  Tangent unvectorize(const Point &w, const Eigen::VectorXd &c) const {
    return {w.coords, coords_to_sym(c)};
  }

  /// G_w in the coordinates of vectorize(); built from inner() on basis
  /// pairs. Only provided for r <= 8.
  Eigen::MatrixXd metric_tensor(const Point &w) const {
    if (r_ > kMaxMetricTensorSize)
      throw DomainError("SpdManifold: metric_tensor only provided for r <= 8");
    const auto c = cache(w);
    const Eigen::Index d = dim();
    std::vector<Rep> white;
    white.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index a = 0; a < d; ++a)
      white.push_back(whiten(c, coords_to_sym(Eigen::VectorXd::Unit(d, a))));
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b <= a; ++b)
        g(a, b) = g(b, a) = white[a].cwiseProduct(white[b]).sum();
    return g;
  }

  Point default_init(RngStream &) const { return identity(); }

private:
  Eigen::Index r_;
  Tolerances tol_;
};

enum class GradientConvention {
  exact, // -2 Log_W(X), the Riemannian gradient of dist^2(W, X)
  paper, // W logm(W^-1 X) = Log_W(X)
};

inline double frechet_loss(const SpdManifold &m, const SpdManifold::Point &w,
                           const SpdManifold::Point &x) {
  const double d = m.dist(w, x);
  return d * d;
}

inline SpdManifold::Tangent
frechet_rgrad(const SpdManifold &m, const SpdManifold::Point &w,
              const SpdManifold::Point &x,
              GradientConvention conv = GradientConvention::exact) {
  auto log = m.log_map(w, x);
  return conv == GradientConvention::exact ? -2.0 * log : log;
}

/// L0 consistent with the selected gradient convention: 2 D_W (exact) or D_W.
inline double frechet_lipschitz(const DomainProfile &profile,
                                GradientConvention conv =
                                    GradientConvention::exact) {
  if (!(profile.diameter > 0.0))
    throw DomainError("frechet_lipschitz: diameter must be positive");
  return conv == GradientConvention::exact ? 2.0 * profile.diameter
                                           : profile.diameter;
}

/// F(W) = (1/n) sum_i dist^2(W, X_i).
class FrechetObjective {
public:
  using Manifold = SpdManifold;

  FrechetObjective(SpdManifold m, std::vector<SpdManifold::Point> samples,
                   std::optional<double> diameter = std::nullopt,
                   GradientConvention conv = GradientConvention::exact)
      : m_(std::move(m)), x_(std::move(samples)), diameter_(diameter),
        conv_(conv) {
    if (x_.empty())
      throw DomainError("FrechetObjective: need at least one sample");
    for (const auto &x : x_)
      m_.check_point(x);
    if (diameter_) {
      for (std::size_t i = 0; i < x_.size(); ++i)
        for (std::size_t j = i + 1; j < x_.size(); ++j)
          require(m_.dist(x_[i], x_[j]) <= *diameter_ + 1e-8,
                  "FrechetObjective: samples exceed the declared diameter");
    }
  }

  const SpdManifold &manifold() const { return m_; }
  std::size_t size() const { return x_.size(); }
  const std::vector<SpdManifold::Point> &samples() const { return x_; }
  std::optional<double> diameter() const { return diameter_; }
  GradientConvention convention() const { return conv_; }

  double value(const SpdManifold::Point &w) const {
    const auto c = m_.cache(w);
    double acc = 0.0;
    for (const auto &x : x_) {
      const double d = same_base(w.coords, x.coords) ? 0.0 : m_.dist(c, x);
      acc += d * d;
    }
    return acc / static_cast<double>(x_.size());
  }

  double sample_loss(const SpdManifold::Point &w, std::size_t i) const {
    return frechet_loss(m_, w, x_[i]);
  }

  SpdManifold::Tangent sample_rgrad(const SpdManifold::Point &w,
                                    std::size_t i) const {
    return frechet_rgrad(m_, w, x_[i], conv_);
  }

  SpdManifold::Tangent batch_rgrad(const SpdManifold::Point &w,
                                   std::span<const std::size_t> idx) const {
    require(!idx.empty(), "FrechetObjective: empty batch");
    const auto c = m_.cache(w);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m_.size(), m_.size());
    for (std::size_t i : idx) {
      if (same_base(w.coords, x_[i].coords))
        continue;
      acc += m_.log_map(c, w, x_[i]).coords;
    }
    const double scale =
        (conv_ == GradientConvention::exact ? -2.0 : 1.0) /
        static_cast<double>(idx.size());
    return {w.coords, scale * acc};
  }

  SpdManifold::Tangent full_rgrad(const SpdManifold::Point &w) const {
    std::vector<std::size_t> all(x_.size());
    for (std::size_t i = 0; i < all.size(); ++i)
      all[i] = i;
    return batch_rgrad(w, all);
  }

private:
  SpdManifold m_;
  std::vector<SpdManifold::Point> x_;
  std::optional<double> diameter_;
  GradientConvention conv_;
};

} // namespace dprgd
