#pragma once

/** Matrix functions of symmetric matrices via the symmetric
 * eigendecomposition. All outputs are exactly symmetric. */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "dprgd/errors.hpp"

namespace dprgd {

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd &m) {
  return 0.5 * (m + m.transpose());
}

inline double asymmetry(const Eigen::MatrixXd &m) {
  return (m - m.transpose()).norm();
}

inline void require_symmetric(const Eigen::MatrixXd &m, const char *who,
                              double tol = 1e-8) {
  if (m.rows() != m.cols())
    throw DomainError(std::string(who) + ": matrix is not square");
  if (asymmetry(m) > tol * std::max(1.0, m.norm()))
    throw DomainError(std::string(who) + ": matrix is not symmetric");
}

/// Q diag(f(lambda)) Q^T, symmetrized.
template <class F>
Eigen::MatrixXd apply_spectral(const Eigen::MatrixXd &q,
                               const Eigen::VectorXd &lambda, F &&f) {
  Eigen::VectorXd fl(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    fl(i) = f(lambda(i));
  return symmetrize(q * fl.asDiagonal() * q.transpose());
}

/// Eigendecomposition of an SPD matrix plus the square root, inverse square
/// root and logarithm derived from it.
struct SpdKernelCache {
  Eigen::VectorXd eigvals;
  Eigen::MatrixXd eigvecs;
  Eigen::MatrixXd sqrt;
  Eigen::MatrixXd inv_sqrt;
  Eigen::MatrixXd log;

  static SpdKernelCache compute(const Eigen::MatrixXd &w,
                                double min_eig = 1e-12) {
    require_symmetric(w, "SpdKernelCache");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(w));
    if (es.info() != Eigen::Success)
      throw DomainError("SpdKernelCache: eigendecomposition failed");
    SpdKernelCache c;
    c.eigvals = es.eigenvalues();
    c.eigvecs = es.eigenvectors();
    if (!(c.eigvals.minCoeff() > min_eig))
      throw DomainError("SpdKernelCache: matrix is not positive definite");
    c.sqrt = apply_spectral(c.eigvecs, c.eigvals,
                            [](double x) { return std::sqrt(x); });
    c.inv_sqrt = apply_spectral(c.eigvecs, c.eigvals,
                                [](double x) { return 1.0 / std::sqrt(x); });
    c.log = apply_spectral(c.eigvecs, c.eigvals,
                           [](double x) { return std::log(x); });
    return c;
  }
};

inline Eigen::MatrixXd spd_expm(const Eigen::MatrixXd &s) {
  require_symmetric(s, "spd_expm");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(s));
  return apply_spectral(es.eigenvectors(), es.eigenvalues(),
                        [](double x) { return std::exp(x); });
}

inline Eigen::MatrixXd spd_logm(const Eigen::MatrixXd &s) {
  require_symmetric(s, "spd_logm");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(s));
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw DomainError("spd_logm: matrix is not positive definite");
  return apply_spectral(es.eigenvectors(), es.eigenvalues(),
                        [](double x) { return std::log(x); });
}

inline Eigen::MatrixXd spd_sqrtm(const Eigen::MatrixXd &s) {
  require_symmetric(s, "spd_sqrtm");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(s));
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw DomainError("spd_sqrtm: matrix is not positive definite");
  return apply_spectral(es.eigenvectors(), es.eigenvalues(),
                        [](double x) { return std::sqrt(x); });
}

} // namespace dprgd
