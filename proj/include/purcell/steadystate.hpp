#pragma once

#include "purcell/greens.hpp"
#include "purcell/linalg.hpp"

#include <Eigen/LU>

#include <optional>
#include <sstream>
#include <vector>

namespace purcell {

/// Driven two-sided cavity containing N emitters. All rates share one unit
/// (typically kappa).
struct CavitySystem {
  double kappa_A = 1.0;
  double kappa_B = 1.0;
  double delta_c = 0.0; ///< laser minus cavity frequency
  double delta_e = 0.0; ///< laser minus emitter frequency
  double eta = 0.0;     ///< drive amplitude through mirror A
  RVec G;               ///< emitter-cavity couplings g_j
  greens::CouplingKernels kernels;

  [[nodiscard]] double kappa() const { return 0.5 * (kappa_A + kappa_B); }
  [[nodiscard]] double gamma() const { return kernels.gamma; }
  [[nodiscard]] size_t size() const { return static_cast<size_t>(G.size()); }

  void validate() const {
    detail::require(kappa_A > 0.0 && std::isfinite(kappa_A), "CavitySystem: kappa_A must be positive");
    detail::require(kappa_B > 0.0 && std::isfinite(kappa_B), "CavitySystem: kappa_B must be positive");
    detail::require_finite(delta_c, "CavitySystem: delta_c");
    detail::require_finite(delta_e, "CavitySystem: delta_e");
    detail::require(eta >= 0.0 && std::isfinite(eta), "CavitySystem: eta must be non-negative");
    detail::require(G.allFinite(), "CavitySystem: G must be finite");
    detail::require(kernels.omega.rows() == G.size() && kernels.omega.cols() == G.size() &&
                        kernels.gamma_matrix.rows() == G.size() && kernels.gamma_matrix.cols() == G.size(),
                    "CavitySystem: kernel dimension does not match G");
    if (G.size() > 0) detail::require(kernels.gamma > 0.0, "CavitySystem: gamma must be positive");
  }
};

/// Empty cavity (N = 0).
inline CavitySystem empty_cavity(double kappa_A, double kappa_B, double delta_c, double eta) {
  CavitySystem s;
  s.kappa_A = kappa_A;
  s.kappa_B = kappa_B;
  s.delta_c = delta_c;
  s.eta = eta;
  s.G = RVec(0);
  s.kernels = greens::independent_kernels(0, 1.0);
  return s;
}

/// Single emitter with coupling g.
inline CavitySystem single_emitter(double kappa, double gamma, double g, double eta, double delta_c = 0.0,
                                   double delta_e = 0.0) {
  CavitySystem s;
  s.kappa_A = s.kappa_B = kappa;
  s.delta_c = delta_c;
  s.delta_e = delta_e;
  s.eta = eta;
  s.G = RVec::Constant(1, g);
  s.kernels = greens::independent_kernels(1, gamma);
  return s;
}

struct ClassicalState {
  cplx alpha{0.0, 0.0};
  CVec beta;
  RVec z;
  double residual = 0.0;
  int iterations = 0;

  [[nodiscard]] size_t size() const { return static_cast<size_t>(beta.size()); }
};

struct HybridModes {
  double Gamma_plus, Gamma_minus, omega_plus, omega_minus;
};

/// Resonant single-emitter normal modes.
inline HybridModes hybrid_modes(double g, double kappa, double gamma) {
  detail::require(kappa > 0.0 && gamma > 0.0, "hybrid_modes: kappa and gamma must be positive");
  detail::require(g >= 0.0 && std::isfinite(g), "hybrid_modes: g must be non-negative");
  const double half = 0.5 * (kappa - gamma);
  const cplx root = std::sqrt(cplx(half * half - g * g, 0.0));
  const double mean = 0.5 * (kappa + gamma);
  return {mean + root.real(), mean - root.real(), root.imag(), -root.imag()};
}

struct PurcellQuantities {
  double C, F_p;
};

inline PurcellQuantities purcell_quantities(double g, double kappa, double gamma) {
  detail::require(kappa > 0.0 && gamma > 0.0, "purcell_quantities: kappa and gamma must be positive");
  const double c = g * g / (kappa * gamma);
  return {c, 4.0 * c};
}

namespace detail {

/// R = -i Delta_e + i Omega + Gamma, the emitter block of the linear response.
inline CMat emitter_resolvent_matrix(const CavitySystem& s) {
  CMat r = kI * s.kernels.omega.cast<cplx>() + s.kernels.gamma_matrix.cast<cplx>();
  r.diagonal().array() -= kI * s.delta_e;
  return r;
}

/// Solves R x = G, reporting the collective eigenvalue responsible when R is
/// (numerically) singular.
inline CVec solve_emitter_resolvent(const CavitySystem& s, const CVec& rhs) {
  const CMat r = emitter_resolvent_matrix(s);
  if (r.size() == 0) return CVec(0);
  Eigen::PartialPivLU<CMat> lu(r);
  const double scale = std::max(detail::max_abs(r), s.gamma());
  if (!(lu.rcond() > 1e-14) || lu.determinant() == cplx(0.0)) {
    const CVec ev = linalg::complex_eigenvalues(r);
    Eigen::Index worst = 0;
    ev.cwiseAbs().minCoeff(&worst);
    std::ostringstream msg;
    msg << "emitter resolvent is singular at delta_e = " << s.delta_e << ": collective eigenvalue "
        << ev(worst).real() << (ev(worst).imag() < 0 ? " - " : " + ") << std::abs(ev(worst).imag())
        << "i of (i Omega + Gamma) sits on the laser frequency (|lambda| / scale = " << std::abs(ev(worst)) / scale
        << ")";
    throw NumericalError(msg.str());
  }
  return lu.solve(rhs);
}

/// G^T R^{-1} G.
inline cplx collective_susceptibility(const CavitySystem& s) {
  if (s.size() == 0) return 0.0;
  const CVec g = s.G.cast<cplx>();
  return (g.transpose() * solve_emitter_resolvent(s, g))(0);
}

} // namespace detail

/// Weak-drive (z = -1) steady state.
inline ClassicalState linear_solution(const CavitySystem& s) {
  s.validate();
  ClassicalState st;
  const cplx kc = s.kappa() - kI * s.delta_c;
  if (s.size() == 0) {
    st.alpha = s.eta / kc;
    st.beta = CVec(0);
    st.z = RVec(0);
    return st;
  }
  const CVec g = s.G.cast<cplx>();
  const CVec rg = detail::solve_emitter_resolvent(s, g);
  const cplx chi = (g.transpose() * rg)(0);
  st.alpha = s.eta / (kc + chi);
  st.beta = -kI * rg * st.alpha;
  st.z = (2.0 * st.beta.cwiseAbs2().array() - 1.0).matrix();
  return st;
}

namespace detail {

/// Right-hand sides of the mean-value equations with z taken from the state.
inline std::pair<cplx, CVec> classical_rhs(const CavitySystem& s, cplx alpha, const CVec& beta, const RVec& z) {
  const auto n = static_cast<Eigen::Index>(s.size());
  const CVec g = s.G.cast<cplx>();
  cplx da = -(s.kappa() - kI * s.delta_c) * alpha + s.eta;
  if (n > 0) da -= kI * (g.transpose() * beta)(0);
  CVec db(n);
  const double gam = s.gamma();
  for (Eigen::Index j = 0; j < n; ++j) {
    cplx acc = -(gam - kI * s.delta_e) * beta(j) + kI * g(j) * alpha * z(j);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == j) continue;
      acc += (kI * s.kernels.omega(j, k) + s.kernels.gamma_matrix(j, k)) * z(j) * beta(k);
    }
    db(j) = acc;
  }
  return {da, db};
}

} // namespace detail

/// Max-norm residual of the nonlinear mean-value equations with the closure
/// z = 2|beta|^2 - 1.
inline double classical_residual(const CavitySystem& s, cplx alpha, const CVec& beta) {
  const RVec z = (2.0 * beta.cwiseAbs2().array() - 1.0).matrix();
  const auto [da, db] = detail::classical_rhs(s, alpha, beta, z);
  double r = std::abs(da);
  if (db.size() > 0) r = std::max(r, db.cwiseAbs().maxCoeff());
  return r;
}

struct ClassicalSolverOptions {
  double damping = 0.5;
  double tolerance = 1e-12; ///< relative to eta
  int max_iterations = 10000;
};

/// Damped fixed-point iteration on the inversions z. For fixed z the
/// equations are linear in (alpha, beta) and are solved jointly.
inline ClassicalState solve_classical(const CavitySystem& s, const ClassicalSolverOptions& opt = {}) {
  s.validate();
  const auto n = static_cast<Eigen::Index>(s.size());
  ClassicalState st;
  if (s.eta == 0.0) {
    st.beta = CVec::Zero(n);
    st.z = RVec::Constant(n, -1.0);
    return st;
  }
  st = linear_solution(s);
  if (n == 0) return st;

  const double tol = std::max(opt.tolerance * s.eta, 1e-15);
  const CVec g = s.G.cast<cplx>();
  const double gam = s.gamma();
  RVec z = st.z;
  const Eigen::Index dim = n + 1;
  CMat a(dim, dim);
  CVec rhs = CVec::Zero(dim);
  rhs(0) = s.eta;

  double residual = classical_residual(s, st.alpha, st.beta);
  int it = 0;
  for (; it < opt.max_iterations && residual > tol; ++it) {
    a.setZero();
    a(0, 0) = s.kappa() - kI * s.delta_c;
    a.block(0, 1, 1, n) = kI * g.transpose();
    for (Eigen::Index j = 0; j < n; ++j) {
      a(j + 1, 0) = -kI * g(j) * z(j);
      a(j + 1, j + 1) = gam - kI * s.delta_e;
      for (Eigen::Index k = 0; k < n; ++k)
        if (k != j) a(j + 1, k + 1) = -(kI * s.kernels.omega(j, k) + s.kernels.gamma_matrix(j, k)) * z(j);
    }
    const CVec x = a.partialPivLu().solve(rhs);
    if (!x.allFinite()) throw NumericalError("solve_classical: singular linear system during iteration");
    st.alpha = x(0);
    st.beta = x.tail(n);
    if (st.beta.cwiseAbs().maxCoeff() > 1.0)
      throw NumericalError("solve_classical: |beta_j| > 1, outside weak-excitation validity");
    const RVec z_new = (2.0 * st.beta.cwiseAbs2().array() - 1.0).matrix();
    z = (1.0 - opt.damping) * z_new + opt.damping * z;
    residual = classical_residual(s, st.alpha, st.beta);
  }
  if (residual > tol) {
    std::ostringstream msg;
    msg << "solve_classical: no convergence after " << it << " iterations (last residual " << residual << ")";
    throw NumericalError(msg.str());
  }
  st.z = (2.0 * st.beta.cwiseAbs2().array() - 1.0).matrix();
  st.residual = residual;
  st.iterations = it;
  return st;
}

struct ResponseCoefficients {
  cplx t_c{1.0, 0.0};
  cplx r_c{0.0, 0.0};
  cplx s_c{0.0, 0.0}; ///< real and non-negative: only |s_c| is determined
  double abs_t2 = 1.0, abs_r2 = 0.0, abs_s2 = 0.0;
  double phi = 0.0;
  double phi_emitter = 0.0;
};

/// Linear (z = -1) transmission, reflection and scattering at the system's
/// detunings.
inline ResponseCoefficients linear_response(const CavitySystem& s) {
  s.validate();
  const cplx kc = s.kappa() - kI * s.delta_c;
  const cplx a_over_eta = 1.0 / (kc + detail::collective_susceptibility(s));
  ResponseCoefficients out;
  out.t_c = std::sqrt(s.kappa_A * s.kappa_B) * a_over_eta;
  out.r_c = s.kappa_A * a_over_eta - 1.0;
  out.abs_t2 = std::norm(out.t_c);
  out.abs_r2 = std::norm(out.r_c);
  if (s.kappa_A == s.kappa_B)
    out.abs_s2 = 2.0 * (out.t_c.real() - out.abs_t2);
  else
    out.abs_s2 = 1.0 - out.abs_r2 - out.abs_t2;
  out.s_c = std::sqrt(std::max(out.abs_s2, 0.0));
  out.phi = std::arg(out.t_c);
  out.phi_emitter = out.phi - std::atan(s.delta_c / s.kappa());
  return out;
}

/// Laser scan: each offset delta shifts both detunings, delta_c + delta and
/// delta_e + delta.
inline std::vector<ResponseCoefficients> linear_response(const CavitySystem& s, std::span<const double> offsets) {
  std::vector<ResponseCoefficients> out;
  out.reserve(offsets.size());
  for (double d : offsets) {
    CavitySystem p = s;
    p.delta_c += d;
    p.delta_e += d;
    out.push_back(linear_response(p));
  }
  return out;
}

struct EffectiveQuantities {
  double delta_eff = 0.0;
  double gamma_eff = 0.0;
  double C_eff = 0.0;
  bool near_pole = false; ///< gamma_eff <= 0 was encountered
};

/// Collective shift, linewidth and cooperativity such that
/// G^T R^{-1} G = G^T G / (gamma_eff - i delta_eff).
inline EffectiveQuantities effective_quantities(const CavitySystem& s) {
  s.validate();
  const double gg = s.G.squaredNorm();
  detail::require(gg > 0.0, "effective_quantities: coupling vector G must be nonzero");
  const cplx ratio = gg / detail::collective_susceptibility(s);
  EffectiveQuantities q;
  q.gamma_eff = ratio.real();
  q.delta_eff = -ratio.imag();
  q.C_eff = gg / (s.kappa() * q.gamma_eff);
  q.near_pole = !(q.gamma_eff > 0.0);
  return q;
}

inline EffectiveQuantities effective_quantities(CavitySystem s, double delta_e) {
  s.delta_e = delta_e;
  return effective_quantities(s);
}

struct MatchOptions {
  int scan_points = 1000;
  double half_width = 0.0; ///< 0 selects 4 max(|Omega|_max, gamma)
  double root_tolerance = 1e-10; ///< on |delta_eff| in units of gamma
};

/// Emitter detuning delta_e* (laser minus emitter) at which delta_eff
/// vanishes, nearest to `guess`. The cavity is matched when it is resonant
/// with the laser there, i.e. omega_c - omega_e = delta_e*.
inline double matched_shift(const CavitySystem& s, double guess, const MatchOptions& opt = {}) {
  s.validate();
  detail::require(s.size() > 0, "matched_shift: need at least one emitter");
  detail::require(opt.scan_points >= 2, "matched_shift: need at least two scan points");
  const double gam = s.gamma();
  const double om_max = detail::max_abs(s.kernels.omega);
  const double w = opt.half_width > 0.0 ? opt.half_width : 4.0 * std::max(om_max, gam);
  auto f = [&](double de) { return effective_quantities(s, de).delta_eff; };

  const int n = opt.scan_points;
  std::vector<double> xs(static_cast<size_t>(n)), fs(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    xs[i] = guess - w + 2.0 * w * i / (n - 1);
    fs[i] = f(xs[i]);
  }
  std::vector<double> roots;
  for (int i = 0; i < n; ++i) {
    if (fs[i] == 0.0) {
      roots.push_back(xs[i]);
      continue;
    }
    if (i + 1 >= n || fs[i + 1] == 0.0 || (fs[i] > 0) == (fs[i + 1] > 0)) continue;
    double lo = xs[i], hi = xs[i + 1], flo = fs[i];
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double fm = f(mid);
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((fm > 0) == (flo > 0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    const double fl = std::abs(f(lo)), fh = std::abs(f(hi));
    const double root = fl <= fh ? lo : hi;
    if (std::min(fl, fh) < opt.root_tolerance * gam) roots.push_back(root); // poles fail this test
  }
  if (roots.empty()) {
    std::ostringstream msg;
    msg << "matched_shift: no sign change of delta_eff in [" << guess - w << ", " << guess + w
        << "]; widen the scan";
    throw NumericalError(msg.str());
  }
  return *std::min_element(roots.begin(), roots.end(),
                           [&](double a, double b) { return std::abs(a - guess) < std::abs(b - guess); });
}

/// Cavity frequency that matches the collective resonance near
/// omega_e + target_shift_guess.
inline double match_cavity(const CavitySystem& s, double omega_e, double target_shift_guess,
                           const MatchOptions& opt = {}) {
  return omega_e + matched_shift(s, target_shift_guess, opt);
}

enum class Symmetry { symmetric, alternating, independent };

inline const char* to_string(Symmetry s) {
  switch (s) {
  case Symmetry::symmetric: return "symmetric";
  case Symmetry::alternating: return "alternating";
  case Symmetry::independent: return "independent";
  }
  return "?";
}

inline Symmetry symmetry_from_string(const std::string& name) {
  if (name == "symmetric") return Symmetry::symmetric;
  if (name == "alternating") return Symmetry::alternating;
  if (name == "independent") return Symmetry::independent;
  throw std::invalid_argument("unknown symmetry '" + name + "'");
}

/// Equidistant emitter chain in a balanced cavity. Rates in units of kappa,
/// spacing in transition wavelengths.
struct ChainSpec {
  double spacing = 0.1;
  double kappa = 1.0;
  double gamma = 0.05;
  double g = 0.01;
  double eta = 0.0;
  Vec3 dipole = Vec3::UnitZ();
  Vec3 axis = Vec3::UnitX();
};

inline RVec coupling_vector(size_t n, double g, Symmetry sym) {
  RVec G(static_cast<Eigen::Index>(n));
  for (size_t j = 0; j < n; ++j) G(static_cast<Eigen::Index>(j)) = (sym == Symmetry::alternating && j % 2) ? -g : g;
  return G;
}

/// Chain system at zero detunings; independent mode drops all dipole-dipole
/// couplings.
inline CavitySystem chain_system(const ChainSpec& spec, size_t n, Symmetry sym) {
  CavitySystem s;
  s.kappa_A = s.kappa_B = spec.kappa;
  s.eta = spec.eta;
  s.G = coupling_vector(n, spec.g, sym);
  if (sym == Symmetry::independent || n < 2) {
    s.kernels = greens::independent_kernels(n, spec.gamma);
  } else {
    s.kernels = greens::coupling_kernels(greens::make_chain(n, spec.spacing, spec.dipole, spec.gamma, 2.0 * kPi, spec.axis));
  }
  return s;
}

/// Nearest-neighbour estimate 2 Omega_12 cos(pi m / (N + 1)) of the collective
/// shift driven by the given coupling symmetry.
inline double collective_shift_guess(const CavitySystem& s, Symmetry sym) {
  const auto n = s.size();
  if (sym == Symmetry::independent || n < 2) return 0.0;
  const double m = sym == Symmetry::symmetric ? 1.0 : static_cast<double>(n);
  return 2.0 * s.kernels.omega(0, 1) * std::cos(kPi * m / (static_cast<double>(n) + 1.0));
}

/// Sets delta_e to the matched collective resonance and puts the cavity on
/// resonance with the laser.
inline CavitySystem match_system(CavitySystem s, Symmetry sym, const MatchOptions& opt = {}) {
  s.delta_c = 0.0;
  s.delta_e = matched_shift(s, collective_shift_guess(s, sym), opt);
  return s;
}

struct CooperativityRow {
  size_t N;
  double delta_e_match;
  double gamma_eff;
  double C_eff;
};

struct CooperativityScan {
  Symmetry symmetry;
  std::vector<CooperativityRow> rows;
  std::optional<linalg::PowerLawFit> fit;
};

/// Fit window: the largest decade available, never below N = 4.
inline std::pair<double, double> fit_window(double n_max) { return {std::max(4.0, n_max / 10.0), n_max}; }

template <class Rows, class Getter>
std::optional<linalg::PowerLawFit> fit_rows(const Rows& rows, Getter y_of) {
  if (rows.empty()) return std::nullopt;
  double n_max = 0;
  for (const auto& r : rows) n_max = std::max(n_max, static_cast<double>(r.N));
  const auto [lo, hi] = fit_window(n_max);
  std::vector<double> x, y;
  for (const auto& r : rows) {
    const double n = static_cast<double>(r.N);
    if (n >= lo && n <= hi) {
      x.push_back(n);
      y.push_back(y_of(r));
    }
  }
  if (x.size() < 2) return std::nullopt;
  return linalg::fit_power_law(x, y);
}

inline CooperativityRow cooperativity_point(const ChainSpec& spec, size_t n, Symmetry sym) {
  const CavitySystem s = match_system(chain_system(spec, n, sym), sym);
  const auto q = effective_quantities(s);
  return {n, s.delta_e, q.gamma_eff, q.C_eff};
}

inline CooperativityScan cooperativity_scan(const ChainSpec& spec, std::span<const size_t> n_values, Symmetry sym) {
  CooperativityScan scan{sym, {}, std::nullopt};
  for (size_t n : n_values) {
    detail::require(n >= 1, "cooperativity_scan: N must be at least 1");
    scan.rows.push_back(cooperativity_point(spec, n, sym));
  }
  scan.fit = fit_rows(scan.rows, [](const CooperativityRow& r) { return r.C_eff; });
  return scan;
}

} // namespace purcell
