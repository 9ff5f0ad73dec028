#pragma once

/** Synthetic datasets for the two experiments. */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dprgd/errors.hpp"
#include "dprgd/rng.hpp"
#include "dprgd/spd.hpp"

namespace dprgd::experiments {

struct PcaData {
  Eigen::MatrixXd samples;  // n x (d+1), rows are z_i
  Eigen::VectorXd spectrum; // diagonal of Sigma, construction order
};

/// Random matrix with orthonormal columns. When `orthogonal_to_ones` is set
/// the columns are also orthogonal to the all-ones vector, which makes
/// U Sigma V column-centered.
inline Eigen::MatrixXd random_orthonormal_columns(Eigen::Index rows,
                                                  Eigen::Index cols,
                                                  RngStream &rng,
                                                  bool orthogonal_to_ones) {
  Eigen::MatrixXd g = rng.normal_matrix(rows, cols);
  if (orthogonal_to_ones)
    g.rowwise() -= g.colwise().mean();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  // Sign convention of the Haar measure: make diag(R) positive.
  const Eigen::MatrixXd &r = qr.matrixQR();
  for (Eigen::Index j = 0; j < cols; ++j)
    if (r(j, j) < 0.0)
      q.col(j) = -q.col(j);
  return q;
}

/// Z = U Sigma V with Sigma = diag(1, 1 - 1.1 nu, 1 - 1.2 nu, 1 - 1.3 nu,
/// 1 - 1.4 nu, |x_1|/(d+1), |x_2|/(d+1), ...). U is n x (d+1) with orthonormal
/// columns orthogonal to the ones vector (so the data are centered), V is a
/// random orthogonal (d+1) x (d+1) matrix.
inline PcaData generate_pca_data(Eigen::Index n, Eigen::Index d_plus_1,
                                 double nu, RngStream &rng) {
  if (d_plus_1 < 6)
    throw DomainError("generate_pca_data: need d+1 >= 6");
  if (n < d_plus_1 + 1)
    throw DomainError("generate_pca_data: need n >= d+2 for centered "
                      "column-orthonormal U");
  if (!(nu >= 0.0 && 1.4 * nu < 1.0))
    throw DomainError("generate_pca_data: eigengap nu out of range");
  PcaData out;
  out.spectrum.resize(d_plus_1);
  out.spectrum(0) = 1.0;
  for (int k = 1; k <= 4; ++k)
    out.spectrum(k) = 1.0 - (1.0 + 0.1 * k) * nu;
  for (Eigen::Index k = 5; k < d_plus_1; ++k)
    out.spectrum(k) =
        std::abs(rng.normal()) / static_cast<double>(d_plus_1);
  const Eigen::MatrixXd u = random_orthonormal_columns(n, d_plus_1, rng, true);
  const Eigen::MatrixXd v =
      random_orthonormal_columns(d_plus_1, d_plus_1, rng, false);
  out.samples = u * out.spectrum.asDiagonal() * v;
  return out;
}

struct WishartStats {
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  double acceptance_rate() const {
    return attempts == 0 ? 0.0
                         : static_cast<double>(accepted) /
                               static_cast<double>(attempts);
  }
};

/// n draws from Wishart(I_r / r, r), i.e. G G^T / r with G standard normal,
/// kept only when dist(X, I) <= D_W / 2 so that every pair lies within D_W.
inline std::vector<SpdManifold::Point>
generate_wishart_spd(std::size_t n, Eigen::Index r, double diameter,
                     RngStream &rng, WishartStats *stats = nullptr) {
  if (r < 2)
    throw DomainError("generate_wishart_spd: need r >= 2");
  if (!(diameter > 0.0))
    throw DomainError("generate_wishart_spd: diameter must be positive");
  constexpr std::size_t kMaxAttempts = 1000000;
  const SpdManifold m(r);
  const auto id = m.identity();
  std::vector<SpdManifold::Point> out;
  out.reserve(n);
  WishartStats local;
  while (out.size() < n) {
    if (local.attempts >= kMaxAttempts &&
        local.acceptance_rate() < 1e-4)
      throw ConvergenceError("generate_wishart_spd: acceptance rate below "
                             "1e-4; use a larger diameter");
    ++local.attempts;
    const Eigen::MatrixXd g = rng.normal_matrix(r, r);
    const Eigen::MatrixXd x = symmetrize(g * g.transpose() / static_cast<double>(r));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd l = es.eigenvalues();
    if (l.minCoeff() < 1e-10)
      continue;
    // dist(X, I) = ||log eig(X)||_2
    if (l.array().log().matrix().norm() > diameter / 2.0)
      continue;
    ++local.accepted;
    out.push_back(SpdManifold::Point{x});
  }
  if (stats)
    *stats = local;
  return out;
}

} // namespace dprgd::experiments
