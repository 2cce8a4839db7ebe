#pragma once

#include "purcell/types.hpp"

#include <vector>

namespace purcell::greens {

/// Below this argument the sine-type radial combinations are summed from their
/// power series; the closed forms cancel catastrophically near the origin.
inline constexpr double kSeriesThreshold = 1.0;

/// Angular field-profile functions of a point dipole along the local z axis.
/// F carries the dissipative (in-phase) part, G the reactive part.
struct AngularProfiles {
  double Fx = 0, Fy = 0, Fz = 0;
  double Gx = 0, Gy = 0, Gz = 0;
};

namespace radial {

namespace detail {

// Sum_j c_j x^{2j} where c_j = (-1)^j num(j) / (2j + 1 + shift)!.
template <class Num>
double even_series(double x, int shift, Num num) {
  const double x2 = x * x;
  double factorial = 1.0;
  for (int i = 2; i <= 1 + shift; ++i) factorial *= i;
  double sum = 0.0, power = 1.0;
  for (int j = 0; j < 40; ++j) {
    if (j > 0) factorial *= (2.0 * j + shift) * (2.0 * j + 1 + shift);
    const double term = (j % 2 ? -1.0 : 1.0) * num(j) * power / factorial;
    sum += term;
    if (j > 1 && std::abs(term) <= 1e-18 * std::abs(sum)) break;
    power *= x2;
  }
  return sum;
}

} // namespace detail

// sin x / x
inline double transverse_sin(double x) {
  if (x < kSeriesThreshold) return detail::even_series(x, 0, [](int) { return 1.0; });
  return std::sin(x) / x;
}

// cos x / x^2 - sin x / x^3
inline double near_sin(double x) {
  if (x < kSeriesThreshold) return -detail::even_series(x, 2, [](int j) { return 2.0 * j + 2.0; });
  return std::cos(x) / (x * x) - std::sin(x) / (x * x * x);
}

// sin x / x + 3 cos x / x^2 - 3 sin x / x^3
inline double oblique_sin(double x) {
  if (x < kSeriesThreshold)
    return detail::even_series(x, 2, [](int j) { return (2.0 * j + 2.0) * (2.0 * j); });
  return std::sin(x) / x + 3.0 * std::cos(x) / (x * x) - 3.0 * std::sin(x) / (x * x * x);
}

// cos x / x
inline double transverse_cos(double x) { return std::cos(x) / x; }

// sin x / x^2 + cos x / x^3
inline double near_cos(double x) { return std::sin(x) / (x * x) + std::cos(x) / (x * x * x); }

// cos x / x - 3 sin x / x^2 - 3 cos x / x^3
inline double oblique_cos(double x) {
  return std::cos(x) / x - 3.0 * std::sin(x) / (x * x) - 3.0 * std::cos(x) / (x * x * x);
}

} // namespace radial

/// Six angular profile functions at dimensionless distance kr, polar angle
/// theta (from the dipole axis) and azimuth phi.
inline AngularProfiles angular_profiles(double kr, double theta, double phi) {
  detail::require_finite(kr, "kr");
  detail::require_finite(theta, "theta");
  detail::require_finite(phi, "phi");
  detail::require(kr > 0.0, "angular_profiles: kr must be positive");

  const double ct = std::cos(theta), st = std::sin(theta);
  const double cp = std::cos(phi), sp = std::sin(phi);
  const double oblique = -ct * st;
  const double axial = 1.0 - 3.0 * ct * ct;

  const double fo = radial::oblique_sin(kr);
  const double go = radial::oblique_cos(kr);

  AngularProfiles p;
  p.Fx = oblique * cp * fo;
  p.Fy = oblique * sp * fo;
  p.Fz = st * st * radial::transverse_sin(kr) + axial * radial::near_sin(kr);
  p.Gx = oblique * cp * go;
  p.Gy = oblique * sp * go;
  p.Gz = st * st * radial::transverse_cos(kr) - axial * radial::near_cos(kr);
  return p;
}

struct EmitterEnsemble {
  std::vector<Vec3> positions;
  Vec3 dipole = Vec3::UnitZ(); ///< shared unit orientation
  double gamma = 1.0;          ///< free-space half decay rate
  double k_e = 2.0 * kPi;      ///< transition wavenumber; 2*pi when lengths are in wavelengths

  [[nodiscard]] size_t size() const { return positions.size(); }

  void validate() const {
    detail::require(gamma > 0.0 && std::isfinite(gamma), "EmitterEnsemble: gamma must be positive");
    detail::require(k_e > 0.0 && std::isfinite(k_e), "EmitterEnsemble: k_e must be positive");
    detail::require(std::abs(dipole.norm() - 1.0) <= 1e-12, "EmitterEnsemble: dipole orientation must be a unit vector");
    for (const auto& r : positions) detail::require(r.allFinite(), "EmitterEnsemble: positions must be finite");
    for (size_t i = 0; i < positions.size(); ++i)
      for (size_t j = i + 1; j < positions.size(); ++j)
        detail::require((positions[i] - positions[j]).norm() > 0.0,
                        "EmitterEnsemble: emitters " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
  }
};

/// Equidistant chain of n emitters along `axis`, starting at the origin.
inline EmitterEnsemble make_chain(size_t n, double spacing, const Vec3& dipole, double gamma,
                                  double k_e = 2.0 * kPi, const Vec3& axis = Vec3::UnitX()) {
  detail::require(spacing > 0.0, "make_chain: spacing must be positive");
  detail::require(axis.norm() > 0.0, "make_chain: axis must be nonzero");
  EmitterEnsemble e;
  e.dipole = dipole.normalized();
  e.gamma = gamma;
  e.k_e = k_e;
  const Vec3 u = axis.normalized();
  for (size_t j = 0; j < n; ++j) e.positions.push_back(static_cast<double>(j) * spacing * u);
  return e;
}

/// Orthonormal frame (e1, e2, dipole). Azimuths are measured from e1 in the
/// plane orthogonal to the dipole.
struct DipoleFrame {
  Vec3 e1, e2, e3;

  explicit DipoleFrame(const Vec3& dipole) : e3(dipole.normalized()) {
    const Vec3 trial = std::abs(e3.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    e1 = (trial - trial.dot(e3) * e3).normalized();
    e2 = e3.cross(e1);
  }

  struct Spherical {
    double r, theta, phi;
  };

  [[nodiscard]] Spherical spherical(const Vec3& v) const {
    const double r = v.norm();
    const double z = v.dot(e3);
    const double theta = std::acos(std::clamp(z / r, -1.0, 1.0));
    const double phi = std::atan2(v.dot(e2), v.dot(e1));
    return {r, theta, phi};
  }

  /// Converts local components (x along e1, y along e2, z along e3) to lab frame.
  [[nodiscard]] Vec3 to_lab(double x, double y, double z) const { return x * e1 + y * e2 + z * e3; }
};

struct CouplingKernels {
  RMat omega;        ///< coherent dipole-dipole shifts, zero diagonal
  RMat gamma_matrix; ///< collective decay rates, diagonal equal to gamma
  RMat h;            ///< gamma_matrix / gamma
  double gamma = 1.0;

  [[nodiscard]] size_t size() const { return static_cast<size_t>(omega.rows()); }
};

/// Omega = -(3 gamma / 4) G_z and gamma_ij = (3 gamma / 2) F_z, with theta the
/// angle between r_i - r_j and the dipole.
inline CouplingKernels coupling_kernels(const EmitterEnsemble& ensemble) {
  ensemble.validate();
  const auto n = static_cast<Eigen::Index>(ensemble.size());
  const DipoleFrame frame(ensemble.dipole);
  CouplingKernels k{RMat::Zero(n, n), RMat::Zero(n, n), RMat::Identity(n, n), ensemble.gamma};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto s = frame.spherical(ensemble.positions[i] - ensemble.positions[j]);
      const auto p = angular_profiles(ensemble.k_e * s.r, s.theta, 0.0);
      const double hij = 1.5 * p.Fz;
      const double wij = -0.75 * ensemble.gamma * p.Gz;
      k.h(i, j) = k.h(j, i) = hij;
      k.omega(i, j) = k.omega(j, i) = wij;
    }
  }
  k.gamma_matrix = ensemble.gamma * k.h;
  k.gamma_matrix.diagonal().setConstant(ensemble.gamma);
  return k;
}

/// Non-interacting emitters: Omega = 0, Gamma = gamma * identity.
inline CouplingKernels independent_kernels(size_t n, double gamma) {
  detail::require(gamma > 0.0, "independent_kernels: gamma must be positive");
  const auto m = static_cast<Eigen::Index>(n);
  return {RMat::Zero(m, m), gamma * RMat::Identity(m, m), RMat::Identity(m, m), gamma};
}

} // namespace purcell::greens
