// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>
#include <cmath>

#include "crsam/curvature.hpp"
#include "crsam/errors.hpp"

namespace crsam {

double quadratic_increase(const DenseMatrix& A, std::span<const double> g, std::span<const double> d) {
  const std::size_t n = g.size();
  if (A.rows != n || A.cols != n || d.size() != n) throw ContractError("quadratic_increase: dimension mismatch");
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double ad = 0.0;
    for (std::size_t j = 0; j < n; ++j) ad += A(i, j) * d[j];
    lin += g[i] * d[i];
    quad += d[i] * ad;
  }
  return lin + 0.5 * quad;
}

// Maximizing g'd + 0.5 d'Ad over the ball is the trust-region subproblem for
// -A. In the eigenbasis A = Q diag(a) Q', with h = Q'g, the maximizer is
// y_i = h_i / (mu - a_i) for the multiplier mu >= max(a_max, 0) with
// ||y|| = rho (or mu = 0 with ||y|| <= rho when A is negative definite).
TrustRegionSolution exact_worst_case_quadratic(const DenseMatrix& A, std::span<const double> g, double rho) {
  const std::size_t n = g.size();
  if (n == 0 || n > 64) throw ContractError("exact_worst_case_quadratic: dimension must be in [1, 64]");
  if (A.rows != n || A.cols != n) throw ContractError("exact_worst_case_quadratic: A does not match g");
  if (!(rho > 0.0)) throw ContractError("exact_worst_case_quadratic: rho must be > 0");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (A(i, j) != A(j, i)) throw ContractError("exact_worst_case_quadratic: A must be symmetric");

  Eigen::MatrixXd M(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) M(i, j) = A(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  if (eig.info() != Eigen::Success) throw NumericError("exact_worst_case_quadratic: eigendecomposition failed");
  const Eigen::VectorXd a = eig.eigenvalues();  // ascending
  const Eigen::MatrixXd& Q = eig.eigenvectors();
  const Eigen::VectorXd h = Q.transpose() * Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(n));

  const double a_max = a(static_cast<Eigen::Index>(n) - 1);
  const double g_norm = h.norm();
  const double spread = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double eig_tol = 1e-12 * spread;
  const double g_tol = 1e-14 * std::max(g_norm, 1e-300);

  auto y_at = [&](double mu, bool skip_top) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (skip_top && a(i) >= a_max - eig_tol) continue;
      if (h(i) != 0.0) y(i) = h(i) / (mu - a(i));
    }
    return y;
  };

  Eigen::VectorXd y;
  bool hard = false;
  bool solved = false;

  if (a_max < 0.0) {
    // stationary point of a concave quadratic
    y = y_at(0.0, false);
    solved = y.norm() <= rho;
  }
  if (!solved) {
    const double mu_lo = std::max(a_max, 0.0);
    bool top_has_gradient = false;
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (a(i) >= a_max - eig_tol && std::abs(h(i)) > g_tol) top_has_gradient = true;
    if (!top_has_gradient && a_max >= 0.0) {
      Eigen::VectorXd y_top = y_at(a_max, true);
      if (y_top.norm() <= rho) {
        hard = true;
        solved = true;
        y = y_top;
        y(static_cast<Eigen::Index>(n) - 1) += std::sqrt(std::max(0.0, rho * rho - y_top.squaredNorm()));
      }
    }
    if (!solved) {
      double lo = mu_lo;
      double hi = mu_lo + g_norm / rho + eig_tol;
      while (y_at(hi, false).norm() > rho) hi = mu_lo + 2.0 * (hi - mu_lo);
      for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (y_at(mid, false).norm() > rho)
          lo = mid;
        else
          hi = mid;
      }
      y = y_at(hi, false);
      const double yn = y.norm();
      if (yn > 0.0) y *= rho / yn;
    }
  }

  const Eigen::VectorXd delta = Q * y;
  TrustRegionSolution out;
  out.delta.assign(delta.data(), delta.data() + n);
  out.hard_case = hard;
  out.max_increase = quadratic_increase(A, g, out.delta);
  if (!std::isfinite(out.max_increase)) throw NumericError("exact_worst_case_quadratic: non-finite result");
  return out;
}

}  // namespace crsam
