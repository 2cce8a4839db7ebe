#pragma once

#include "purcell/greens.hpp"
#include "purcell/linalg.hpp"

#include <optional>
#include <vector>

namespace purcell::freespace {

struct ExcitonState {
  size_t N = 0;
  size_t m = 0;
  RVec coeffs;
};

/// Single-excitation eigenstate |m> of the nearest-neighbour chain Hamiltonian.
inline ExcitonState exciton_state(size_t n, size_t m) {
  if (m < 1 || m > n) throw std::invalid_argument("exciton_state: m must lie in [1, N]");
  ExcitonState s{n, m, RVec(static_cast<Eigen::Index>(n))};
  const double norm = std::sqrt(2.0 / (static_cast<double>(n) + 1.0));
  for (size_t j = 1; j <= n; ++j)
    s.coeffs(static_cast<Eigen::Index>(j - 1)) = norm * std::sin(kPi * m * j / (static_cast<double>(n) + 1.0));
  return s;
}

inline double exciton_energy(size_t n, size_t m, double omega_e, double omega12) {
  if (m < 1 || m > n) throw std::invalid_argument("exciton_energy: m must lie in [1, N]");
  return omega_e + 2.0 * omega12 * std::cos(kPi * m / (static_cast<double>(n) + 1.0));
}

/// Eigen-decomposition of the collective decay matrix, Gamma = T diag(lambda) T^T.
struct DecayChannels {
  RVec lambdas; ///< descending
  RMat T;       ///< columns are the channel vectors
};

inline DecayChannels diagonal_decay_channels(const RMat& gamma_matrix) {
  auto eig = linalg::jacobi_eigen(gamma_matrix);
  return {std::move(eig.values), std::move(eig.vectors)};
}

/// Initial decay rate sum_ij c_i c_j gamma_ij of a single-excitation state
/// with real amplitudes c (the population decays at twice this value).
inline double collective_decay_rate(const RVec& c, const RMat& gamma_matrix) {
  detail::require(c.size() == gamma_matrix.rows(), "collective_decay_rate: dimension mismatch");
  return c.dot(gamma_matrix * c);
}

/// Coherence matrix <S_i^+ S_j> of a single-excitation state.
inline CMat coherence_matrix(const RVec& c) { return (c * c.transpose()).cast<cplx>(); }

/// Field-profile vector (F - iG) at r generated by an emitter at r_j,
/// expressed in the dipole frame.
inline Eigen::Vector3cd field_profile(const greens::DipoleFrame& frame, double k_e, const Vec3& r, const Vec3& rj) {
  const auto sph = frame.spherical(r - rj);
  const auto p = greens::angular_profiles(k_e * sph.r, sph.theta, sph.phi);
  return {cplx(p.Fx, -p.Gx), cplx(p.Fy, -p.Gy), cplx(p.Fz, -p.Gz)};
}

/// Radiated intensity sum_ij rho_ij sum_m conj(F - iG)_m(r - r_i) (F - iG)_m(r - r_j),
/// omitting the global factor (3 gamma / 4 mu)^2. Returns nullopt when r
/// coincides with an emitter.
inline std::optional<double> radiation_intensity(const greens::EmitterEnsemble& ens, const CMat& rho, const Vec3& r) {
  const auto n = static_cast<Eigen::Index>(ens.size());
  const greens::DipoleFrame frame(ens.dipole);
  std::vector<Eigen::Vector3cd> fields;
  fields.reserve(ens.size());
  for (const auto& rj : ens.positions) {
    if ((r - rj).norm() == 0.0) return std::nullopt;
    fields.push_back(field_profile(frame, ens.k_e, r, rj));
  }
  cplx acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) acc += rho(i, j) * fields[i].dot(fields[j]); // dot conjugates the left
  return acc.real();
}

struct PlaneGrid {
  double x_min = -2.0, x_max = 2.0;
  double y_min = -2.0, y_max = 2.0;
  double z = 2.0;
  size_t nx = 41, ny = 41;
};

struct RadiationMap {
  PlaneGrid grid;
  std::vector<double> x, y;          ///< per point, row-major over (iy, ix)
  std::vector<double> intensity;     ///< raw, NaN at skipped points
  std::vector<double> normalized;    ///< intensity / max over the grid
  std::vector<bool> skipped;
  double max_intensity = 0.0;
  double plane_integral = 0.0;       ///< Riemann sum over the grid
};

inline RadiationMap radiation_map(const greens::EmitterEnsemble& ens, const CMat& rho, const PlaneGrid& grid) {
  ens.validate();
  detail::require(rho.rows() == static_cast<Eigen::Index>(ens.size()) && rho.cols() == rho.rows(),
                  "radiation_map: coherence matrix dimension mismatch");
  detail::require(detail::max_abs(CMat(rho - rho.adjoint())) <= 1e-10 * std::max(1.0, detail::max_abs(rho)),
                  "radiation_map: coherence matrix must be Hermitian");
  const double tol = -1e-10 * std::max(1.0, detail::max_abs(rho));
  detail::require(rho.size() == 0 || Eigen::SelfAdjointEigenSolver<CMat>(rho).eigenvalues().minCoeff() >= tol,
                  "radiation_map: coherence matrix must be positive semidefinite");
  detail::require(grid.nx >= 2 && grid.ny >= 2, "radiation_map: grid needs at least 2 points per axis");
  detail::require(grid.x_max > grid.x_min && grid.y_max > grid.y_min, "radiation_map: empty grid range");

  RadiationMap map;
  map.grid = grid;
  const double dx = (grid.x_max - grid.x_min) / static_cast<double>(grid.nx - 1);
  const double dy = (grid.y_max - grid.y_min) / static_cast<double>(grid.ny - 1);
  for (size_t iy = 0; iy < grid.ny; ++iy) {
    for (size_t ix = 0; ix < grid.nx; ++ix) {
      const Vec3 r(grid.x_min + dx * ix, grid.y_min + dy * iy, grid.z);
      map.x.push_back(r.x());
      map.y.push_back(r.y());
      const auto v = radiation_intensity(ens, rho, r);
      map.skipped.push_back(!v.has_value());
      const double val = v.value_or(std::numeric_limits<double>::quiet_NaN());
      map.intensity.push_back(val);
      if (v) {
        map.max_intensity = std::max(map.max_intensity, val);
        map.plane_integral += val * dx * dy;
      }
    }
  }
  for (double v : map.intensity) map.normalized.push_back(map.max_intensity > 0.0 ? v / map.max_intensity : v);
  return map;
}

} // namespace purcell::freespace
