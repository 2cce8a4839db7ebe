#pragma once

#include "purcell/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

namespace purcell::linalg {

struct SymmetricEigen {
  RVec values;  ///< sorted descending
  RMat vectors; ///< columns are orthonormal eigenvectors
};

/// Cyclic Jacobi rotations on a real symmetric matrix. Sweeps until the
/// off-diagonal Frobenius norm drops below `tol` times the matrix norm.
inline SymmetricEigen jacobi_eigen(const RMat& input, double tol = 1e-12, int max_sweeps = 100) {
  detail::require(input.rows() == input.cols(), "jacobi_eigen: matrix must be square");
  const Eigen::Index n = input.rows();
  const double scale = std::max(input.norm(), 1e-300);
  detail::require((input - input.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
                  "jacobi_eigen: matrix must be symmetric");

  RMat a = 0.5 * (input + input.transpose());
  RMat v = RMat::Identity(n, n);

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
    return std::sqrt(s);
  };

  int sweep = 0;
  for (; sweep < max_sweeps && off_norm() > tol * scale; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (off_norm() > tol * scale) throw NumericalError("jacobi_eigen: no convergence after max sweeps");

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) > a(j, j); });

  SymmetricEigen out{RVec(n), RMat(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

/// Eigenvalues of a dense complex matrix (Hessenberg reduction followed by
/// shifted QR, via Eigen::ComplexEigenSolver).
inline CVec complex_eigenvalues(const CMat& m) {
  detail::require(m.rows() == m.cols(), "complex_eigenvalues: matrix must be square");
  if (m.size() == 0) return CVec(0);
  detail::require(m.allFinite(), "complex_eigenvalues: matrix has non-finite entries");
  Eigen::ComplexEigenSolver<CMat> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw NumericalError("complex_eigenvalues: QR iteration did not converge");
  return solver.eigenvalues();
}

/// Solves M X + X M^T = -D through the Kronecker form
/// (I (x) M + M (x) I) vec(X) = -vec(D) with partial-pivot LU.
inline CMat solve_lyapunov_kron(const CMat& m, const CMat& d) {
  const Eigen::Index n = m.rows();
  detail::require(m.cols() == n && d.rows() == n && d.cols() == n, "solve_lyapunov: dimension mismatch");
  const CMat id = CMat::Identity(n, n);
  CMat big = CMat::Zero(n * n, n * n);
  // column-major vec: vec(M X) = (I (x) M) vec(X), vec(X M^T) = (M (x) I) vec(X)
  for (Eigen::Index j = 0; j < n; ++j) {
    big.block(j * n, j * n, n, n) += m;
    for (Eigen::Index i = 0; i < n; ++i) big.block(i * n, j * n, n, n) += m(i, j) * id;
  }
  const CVec rhs = -Eigen::Map<const CVec>(d.data(), n * n);
  Eigen::PartialPivLU<CMat> lu(big);
  const CVec x = lu.solve(rhs);
  if (!x.allFinite()) throw NumericalError("solve_lyapunov: singular Kronecker system");
  return Eigen::Map<const CMat>(x.data(), n, n);
}

struct PowerLawFit {
  double exponent = 0.0;
  double log_prefactor = 0.0;
  double exponent_stderr = 0.0;
  size_t points = 0;
  double x_min = 0.0;
  double x_max = 0.0;
};

/// Ordinary least squares of log(y) against log(x).
inline PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), "fit_power_law: size mismatch");
  detail::require(x.size() >= 2, "fit_power_law: need at least two points");
  const size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    detail::require(x[i] > 0 && y[i] > 0, "fit_power_law: values must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  detail::require(denom > 0, "fit_power_law: degenerate abscissae");
  PowerLawFit fit;
  fit.exponent = (n * sxy - sx * sy) / denom;
  fit.log_prefactor = (sy - fit.exponent * sx) / n;
  fit.points = n;
  fit.x_min = *std::min_element(x.begin(), x.end());
  fit.x_max = *std::max_element(x.begin(), x.end());
  if (n > 2) {
    double ss = 0;
    for (size_t i = 0; i < n; ++i) {
      const double r = std::log(y[i]) - fit.log_prefactor - fit.exponent * std::log(x[i]);
      ss += r * r;
    }
    fit.exponent_stderr = std::sqrt(ss / (n - 2) * n / denom);
  }
  return fit;
}

} // namespace purcell::linalg
