#pragma once

/** Noise calibration for the tangent-space Gaussian mechanism and a moments
 * accountant: per-iteration Renyi moment bounds, their composition, and the
 * conversion back to an (epsilon, delta) guarantee. */

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dprgd/errors.hpp"

namespace dprgd {

struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 1e-5;
  double c = 1.0; // calibration constant of the iterative noise scale

  void validate() const {
    if (!(epsilon > 0.0))
      throw DomainError("PrivacyBudget: epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0))
      throw DomainError("PrivacyBudget: delta must lie in (0, 1)");
    if (!(c > 0.0))
      throw DomainError("PrivacyBudget: c must be positive");
  }
};

struct NoiseCalibration {
  double sigma2 = 0.0;
  std::size_t T = 1;
  double L0 = 1.0;
  std::size_t n = 1;
  std::size_t b = 1;
  double floor = 0.0;       // 4 L0^2 / b^2
  bool floor_active = false; // the floor, not the budget, set sigma2
};

/// Minimal variance for a one-shot tangent Gaussian mechanism with
/// sensitivity `sensitivity` (measured in the Riemannian norm).
inline double calibrate_mechanism(double sensitivity,
                                  const PrivacyBudget &budget) {
  budget.validate();
  if (!(sensitivity > 0.0))
    throw DomainError("calibrate_mechanism: sensitivity must be positive");
  return 2.0 * std::log(1.25 / budget.delta) * sensitivity * sensitivity /
         (budget.epsilon * budget.epsilon);
}

/// sigma^2 = max(c T log(1/delta) L0^2 / (n^2 eps^2), 4 L0^2 / b^2).
inline NoiseCalibration calibrate_iterative(std::size_t T, double L0,
                                            std::size_t n, std::size_t b,
                                            const PrivacyBudget &budget) {
  budget.validate();
  if (T == 0)
    throw DomainError("calibrate_iterative: T must be >= 1");
  if (!(L0 > 0.0))
    throw DomainError("calibrate_iterative: L0 must be positive");
  if (n == 0 || b == 0 || b > n)
    throw DomainError("calibrate_iterative: need 1 <= b <= n");
  const double nn = static_cast<double>(n);
  const double bb = static_cast<double>(b);
  const double main = budget.c * static_cast<double>(T) *
                      std::log(1.0 / budget.delta) * L0 * L0 /
                      (nn * nn * budget.epsilon * budget.epsilon);
  const double floor = 4.0 * L0 * L0 / (bb * bb);
  NoiseCalibration out;
  out.sigma2 = std::max(main, floor);
  out.T = T;
  out.L0 = L0;
  out.n = n;
  out.b = b;
  out.floor = floor;
  out.floor_active = floor > main;
  return out;
}

/// lambda-th moment bound of one full-batch noisy gradient step:
/// 2 lambda (lambda + 1) L0^2 / (n^2 sigma^2).
inline double moment_full(double lambda, double L0, std::size_t n,
                          double sigma2) {
  if (!(lambda >= 1.0))
    throw DomainError("moment_full: lambda must be >= 1");
  const double nn = static_cast<double>(n);
  return 2.0 * lambda * (lambda + 1.0) * L0 * L0 / (nn * nn * sigma2);
}

/// Whether the hypotheses of the subsampled moment bound hold.
inline bool subsampled_preconditions(double lambda, double L0, std::size_t n,
                                     std::size_t b, double sigma2) {
  const double nn = static_cast<double>(n);
  const double bb = static_cast<double>(b);
  if (!(sigma2 >= 4.0 * L0 * L0 / (bb * bb)))
    return false;
  const double arg =
      nn / (bb * (lambda + 1.0) * (1.0 + bb * bb * sigma2 / (4.0 * L0 * L0)));
  if (!(arg > 0.0))
    return false;
  return lambda <= 2.0 * sigma2 * std::log(arg) / 3.0;
}

/// lambda-th moment bound of one subsampled (without replacement) step,
/// 15 (lambda + 1) L0^2 / (n^2 sigma^2), or nullopt when the bound's
/// hypotheses fail for this lambda.
inline std::optional<double> moment_subsampled(double lambda, double L0,
                                               std::size_t n, std::size_t b,
                                               double sigma2) {
  if (b >= n)
    throw DomainError("moment_subsampled: requires b < n, use moment_full");
  if (!(lambda >= 1.0))
    throw DomainError("moment_subsampled: lambda must be >= 1");
  if (!subsampled_preconditions(lambda, L0, n, b, sigma2))
    return std::nullopt;
  const double nn = static_cast<double>(n);
  return 15.0 * (lambda + 1.0) * L0 * L0 / (nn * nn * sigma2);
}

/// (alpha, rho)-RDP implies (rho + log(1/delta)/(alpha - 1), delta)-DP.
inline double rdp_to_dp(double alpha, double rho, double delta) {
  if (!(alpha > 1.0))
    throw DomainError("rdp_to_dp: alpha must exceed 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw DomainError("rdp_to_dp: delta must lie in (0, 1)");
  return rho + std::log(1.0 / delta) / (alpha - 1.0);
}

enum class MomentKind { full_batch, subsampled };

struct MomentEntry {
  MomentKind kind = MomentKind::full_batch;
  double L0 = 1.0;
  std::size_t n = 1;
  std::size_t b = 1;
  double sigma2 = 1.0;

  /// nullopt when this entry cannot certify the given moment order.
  std::optional<double> moment(double lambda) const {
    if (kind == MomentKind::full_batch)
      return moment_full(lambda, L0, n, sigma2);
    return moment_subsampled(lambda, L0, n, b, sigma2);
  }

  bool operator==(const MomentEntry &) const = default;
};

/// Sequence of per-iteration moment bounds. Consecutive identical entries are
/// stored once with a multiplicity, so composing T identical steps is exactly
/// T times one step.
class MomentsLedger {
public:
  struct Group {
    MomentEntry entry;
    std::size_t count;
  };

  MomentsLedger() {
    for (int l = 1; l <= 64; ++l)
      grid_.push_back(l);
  }

  explicit MomentsLedger(std::vector<int> lambda_grid)
      : grid_(std::move(lambda_grid)) {
    for (int l : grid_)
      if (l < 1)
        throw DomainError("MomentsLedger: moment orders must be >= 1");
  }

  void add(const MomentEntry &e, std::size_t count = 1) {
    if (count == 0)
      return;
    if (!groups_.empty() && groups_.back().entry == e)
      groups_.back().count += count;
    else
      groups_.push_back({e, count});
  }

  /// Records one step of the noisy gradient mechanism with batch size b.
  void add_step(double L0, std::size_t n, std::size_t b, double sigma2) {
    add({b >= n ? MomentKind::full_batch : MomentKind::subsampled, L0, n, b,
         sigma2});
  }

  std::size_t size() const {
    std::size_t s = 0;
    for (const auto &g : groups_)
      s += g.count;
    return s;
  }

  bool empty() const { return groups_.empty(); }
  const std::vector<Group> &groups() const { return groups_; }
  const std::vector<int> &lambda_grid() const { return grid_; }

  /// Composed bound K(lambda) = sum_t K_t(lambda); nullopt when any entry
  /// refuses this order.
  std::optional<double> composed(double lambda) const {
    double k = 0.0;
    for (const auto &g : groups_) {
      const auto m = g.entry.moment(lambda);
      if (!m)
        return std::nullopt;
      k += static_cast<double>(g.count) * *m;
    }
    return k;
  }

private:
  std::vector<int> grid_;
  std::vector<Group> groups_;
};

struct AuditResult {
  double epsilon = std::numeric_limits<double>::infinity();
  int lambda = 0; // minimizing moment order
};

class NoValidMomentOrder : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Smallest epsilon certified by the ledger: min over the lambda grid of
/// (K(lambda) + log(1/delta)) / lambda.
inline AuditResult audit_detailed(const MomentsLedger &ledger, double delta) {
  if (ledger.empty())
    throw DomainError("audit: empty ledger");
  if (!(delta > 0.0 && delta < 1.0))
    throw DomainError("audit: delta must lie in (0, 1)");
  AuditResult best;
  bool any = false;
  for (int l : ledger.lambda_grid()) {
    const auto k = ledger.composed(l);
    if (!k)
      continue;
    any = true;
    const double eps = rdp_to_dp(l + 1.0, *k / l, delta);
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.lambda = l;
    }
  }
  if (!any)
    throw NoValidMomentOrder("audit: no valid moment order in the grid");
  return best;
}

inline double audit(const MomentsLedger &ledger, double delta) {
  return audit_detailed(ledger, delta).epsilon;
}

} // namespace dprgd
