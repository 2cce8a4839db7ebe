#pragma once

#include "purcell/steadystate.hpp"

#include <vector>

namespace purcell {

struct KerrResult {
  CVec beta1;
  CVec beta3;
  cplx t_lin{1.0, 0.0};
  cplx t_nl{1.0, 0.0};
  double norm_beta3 = 0.0;
  double max_population = 0.0; ///< max_j |beta1_j + beta3_j|^2
};

/// Largest excited-state population for which a Kerr result is reported.
inline constexpr double kKerrPopulationLimit = 0.1;

namespace detail {

inline CMat kerr_resolvent_matrix(const CavitySystem& s, const RMat& gamma_block) {
  const cplx kc = s.kappa() - kI * s.delta_c;
  const CVec g = s.G.cast<cplx>();
  return kc * (kI * s.kernels.omega.cast<cplx>() + gamma_block.cast<cplx>()) + g * g.transpose();
}

inline cplx transmission_from_beta(const CavitySystem& s, const CVec& beta, const CVec& beta_per_eta) {
  const cplx kc = s.kappa() - kI * s.delta_c;
  const CVec g = s.G.cast<cplx>();
  // G^T beta / eta, taken from the per-unit-drive vector when eta = 0
  const cplx ratio = s.eta > 0.0 ? (g.transpose() * beta)(0) / s.eta : (g.transpose() * beta_per_eta)(0);
  return std::sqrt(s.kappa_A * s.kappa_B) * (1.0 - kI * ratio) / kc;
}

} // namespace detail

/// Linear dipoles beta1 and their third-order (Kerr) correction beta3.
inline KerrResult kerr_correction(const CavitySystem& s) {
  s.validate();
  detail::require(s.size() > 0, "kerr_correction: need at least one emitter");
  const auto n = static_cast<Eigen::Index>(s.size());
  const CVec g = s.G.cast<cplx>();

  RMat gamma_shifted = s.kernels.gamma_matrix;
  gamma_shifted.diagonal().array() -= s.gamma();
  CMat mres = detail::kerr_resolvent_matrix(s, s.kernels.gamma_matrix);
  mres.diagonal().array() -= (s.kappa() - kI * s.delta_c) * kI * s.delta_e;

  Eigen::PartialPivLU<CMat> lu(mres);
  if (!(lu.rcond() > 1e-14)) throw NumericalError("kerr_correction: collective resolvent is singular");

  const CVec beta1_per_eta = -kI * lu.solve(g);
  KerrResult r;
  r.beta1 = s.eta * beta1_per_eta;
  const CMat inner = detail::kerr_resolvent_matrix(s, gamma_shifted);
  const CVec source = kI * s.eta * g + inner * r.beta1;
  r.beta3 = 2.0 * lu.solve(CVec(r.beta1.cwiseAbs2().cast<cplx>().cwiseProduct(source)));
  if (!r.beta1.allFinite() || !r.beta3.allFinite()) throw NumericalError("kerr_correction: non-finite result");
  (void)n;

  r.norm_beta3 = r.beta3.norm();
  r.t_lin = detail::transmission_from_beta(s, r.beta1, beta1_per_eta);
  r.t_nl = detail::transmission_from_beta(s, CVec(r.beta1 + r.beta3), beta1_per_eta);
  r.max_population = (r.beta1 + r.beta3).cwiseAbs2().maxCoeff();
  if (r.max_population > kKerrPopulationLimit) {
    std::ostringstream msg;
    msg << "kerr_correction: excited-state population " << r.max_population
        << " exceeds the weak-excitation limit " << kKerrPopulationLimit;
    throw NumericalError(msg.str());
  }
  return r;
}

/// Max-norm residual of the nonlinear mean-value equations at beta, with the
/// cavity field eliminated adiabatically from its own steady-state equation.
inline double kerr_residual(const CavitySystem& s, const CVec& beta) {
  const CVec g = s.G.cast<cplx>();
  const cplx alpha = (s.eta - kI * (g.transpose() * beta)(0)) / (s.kappa() - kI * s.delta_c);
  return classical_residual(s, alpha, beta);
}

/// Resonant Kerr magnitude for N independent, equally coupled emitters with
/// single-emitter cooperativity C.
inline double independent_kerr_magnitude(double n, double C, double gamma, double kappa, double eta) {
  detail::require(n >= 1.0 && gamma > 0.0 && kappa > 0.0 && C >= 0.0 && eta >= 0.0,
                  "independent_kerr_magnitude: invalid arguments");
  const double nc = n * C;
  return 2.0 * eta * eta * eta / n * std::sqrt(nc * nc * nc / (std::pow(gamma, 3) * std::pow(1.0 + nc, 8) * std::pow(kappa, 3)));
}

/// Resonant Kerr magnitude for two emitters driven with G = (g, +-g) and the
/// cavity matched to the addressed collective state.
inline double two_emitter_resonant_kerr(const CavitySystem& s) {
  s.validate();
  detail::require(s.size() == 2, "two_emitter_resonant_kerr: need exactly two emitters");
  const auto q = effective_quantities(s);
  const double om = s.kernels.omega(0, 1);
  const double gam = s.gamma();
  const double ratio = q.C_eff / (1.0 + q.C_eff);
  return std::pow(ratio, 1.5) * std::pow(s.eta, 3) * std::sqrt(gam * gam + om * om) /
         std::sqrt(std::pow(q.gamma_eff * (1.0 + q.C_eff), 5) * std::pow(s.kappa(), 3));
}

struct KerrRow {
  size_t N = 0;
  double d = 0.0;
  double delta = 0.0; ///< laser offset or matched emitter detuning
  Symmetry symmetry = Symmetry::symmetric;
  double norm_beta3 = 0.0;
  double t_lin_abs2 = 0.0;
  double t_nl_abs2 = 0.0;
  double max_population = 0.0;
};

struct KerrScan {
  Symmetry symmetry;
  std::vector<KerrRow> rows;
  std::optional<linalg::PowerLawFit> fit;
};

/// Population ceiling enforced in scaling and distance scans.
inline constexpr double kKerrScanPopulationLimit = 1e-4;

inline KerrRow kerr_row(const CavitySystem& s, size_t n, double d, Symmetry sym, bool enforce_scan_limit) {
  const KerrResult k = kerr_correction(s);
  if (enforce_scan_limit && k.max_population >= kKerrScanPopulationLimit) {
    std::ostringstream msg;
    msg << "Kerr scan point N = " << n << ", d = " << d << " has population " << k.max_population
        << " >= " << kKerrScanPopulationLimit << "; reduce eta";
    throw NumericalError(msg.str());
  }
  return {n, d, s.delta_e, sym, k.norm_beta3, std::norm(k.t_lin), std::norm(k.t_nl), k.max_population};
}

/// Kerr magnitude versus emitter number, cavity matched to the addressed
/// collective state for each N (or left at delta_c = delta_e = 0).
inline KerrRow kerr_scaling_point(const ChainSpec& spec, size_t n, Symmetry sym, bool matched = true) {
  CavitySystem s = chain_system(spec, n, sym);
  if (matched) s = match_system(s, sym);
  return kerr_row(s, n, spec.spacing, sym, true);
}

inline KerrScan kerr_scaling_scan(const ChainSpec& spec, std::span<const size_t> n_values, Symmetry sym,
                                  bool matched = true) {
  KerrScan scan{sym, {}, std::nullopt};
  for (size_t n : n_values) scan.rows.push_back(kerr_scaling_point(spec, n, sym, matched));
  scan.fit = fit_rows(scan.rows, [](const KerrRow& r) { return r.norm_beta3; });
  return scan;
}

/// Closed-form independent-emitter curve; reaches N far beyond what the
/// dense resolvent can handle.
inline KerrScan independent_kerr_curve(const ChainSpec& spec, std::span<const size_t> n_values) {
  KerrScan scan{Symmetry::independent, {}, std::nullopt};
  const double C = spec.g * spec.g / (spec.kappa * spec.gamma);
  for (size_t n : n_values) {
    KerrRow r;
    r.N = n;
    r.d = spec.spacing;
    r.symmetry = Symmetry::independent;
    r.norm_beta3 = independent_kerr_magnitude(static_cast<double>(n), C, spec.gamma, spec.kappa, spec.eta);
    const double t = 1.0 / (1.0 + n * C);
    r.t_lin_abs2 = t * t;
    r.t_nl_abs2 = std::numeric_limits<double>::quiet_NaN();
    r.max_population = std::numeric_limits<double>::quiet_NaN();
    scan.rows.push_back(r);
  }
  scan.fit = fit_rows(scan.rows, [](const KerrRow& r) { return r.norm_beta3; });
  return scan;
}

/// Two-emitter Kerr magnitude at a given separation with the cavity matched
/// to the symmetric or antisymmetric state.
inline KerrRow kerr_distance_point(ChainSpec spec, double d, Symmetry sym) {
  spec.spacing = d;
  const CavitySystem s = match_system(chain_system(spec, 2, sym), sym);
  return kerr_row(s, 2, d, sym, true);
}

/// Laser scan without frequency matching: delta_c = delta_e = offset.
inline KerrRow kerr_detuning_point(const CavitySystem& base, double offset, Symmetry sym) {
  CavitySystem s = base;
  s.delta_c += offset;
  s.delta_e += offset;
  KerrRow r = kerr_row(s, s.size(), 0.0, sym, false);
  r.delta = offset;
  return r;
}

} // namespace purcell
