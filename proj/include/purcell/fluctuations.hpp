#pragma once

#include "purcell/steadystate.hpp"

#include <functional>
#include <string>
#include <vector>

namespace purcell {

/// Linearized fluctuation dynamics dv/dt = M v + N v_in with
/// v = (a, a+, s_1..s_N, s+_1..s+_N, sz_1..sz_N) and
/// v_in = (a_in, a_in+, b_in, b_in+, xi_1..N, xi+_1..N, xiz_1..N).
struct FluctuationSystem {
  CMat M;
  CMat N_mat;
  CMat C_mat;
  CMat D;
  size_t emitters = 0;

  [[nodiscard]] Eigen::Index dim() const { return M.rows(); }
  [[nodiscard]] Eigen::Index input_dim() const { return C_mat.rows(); }
};

namespace index {
inline Eigen::Index a() { return 0; }
inline Eigen::Index a_dag() { return 1; }
inline Eigen::Index sigma(size_t n, size_t j) { (void)n; return static_cast<Eigen::Index>(2 + j); }
inline Eigen::Index sigma_dag(size_t n, size_t j) { return static_cast<Eigen::Index>(2 + n + j); }
inline Eigen::Index sigma_z(size_t n, size_t j) { return static_cast<Eigen::Index>(2 + 2 * n + j); }
// output / input ports
inline Eigen::Index a_port() { return 0; }
inline Eigen::Index a_port_dag() { return 1; }
inline Eigen::Index b_port() { return 2; }
inline Eigen::Index b_port_dag() { return 3; }
inline Eigen::Index xi(size_t n, size_t j) { (void)n; return static_cast<Eigen::Index>(4 + j); }
inline Eigen::Index xi_dag(size_t n, size_t j) { return static_cast<Eigen::Index>(4 + n + j); }
inline Eigen::Index xi_z(size_t n, size_t j) { return static_cast<Eigen::Index>(4 + 2 * n + j); }
} // namespace index

inline FluctuationSystem build_fluctuation_system(const CavitySystem& s, const ClassicalState& st) {
  s.validate();
  const size_t n = s.size();
  if (st.size() != n || static_cast<size_t>(st.z.size()) != n)
    throw std::invalid_argument("build_fluctuation_system: classical state dimension does not match the system");
  const auto dv = static_cast<Eigen::Index>(2 + 3 * n);
  const auto di = static_cast<Eigen::Index>(4 + 3 * n);
  const double gam = n > 0 ? s.gamma() : 0.0;
  const auto& Om = s.kernels.omega;
  const auto& Gm = s.kernels.gamma_matrix;
  const auto& h = s.kernels.h;
  const cplx alpha = st.alpha;

  FluctuationSystem f;
  f.emitters = n;
  f.M = CMat::Zero(dv, dv);
  f.N_mat = CMat::Zero(dv, di);
  f.C_mat = CMat::Zero(di, di);

  using namespace index;
  f.M(a(), a()) = -(s.kappa() - kI * s.delta_c);
  f.M(a_dag(), a_dag()) = -(s.kappa() + kI * s.delta_c);
  for (size_t j = 0; j < n; ++j) {
    const auto J = static_cast<Eigen::Index>(j);
    const double gj = s.G(J);
    const cplx bj = st.beta(J);
    const double zj = st.z(J);

    f.M(a(), sigma(n, j)) = -kI * gj;
    f.M(a_dag(), sigma_dag(n, j)) = kI * gj;

    f.M(sigma(n, j), a()) = kI * gj * zj;
    f.M(sigma_dag(n, j), a_dag()) = -kI * gj * zj;

    cplx bjj = kI * gj * alpha;
    cplx kjj = 2.0 * kI * gj * std::conj(alpha);
    f.M(sigma(n, j), sigma(n, j)) = -(gam - kI * s.delta_e);
    f.M(sigma_dag(n, j), sigma_dag(n, j)) = -(gam + kI * s.delta_e);
    for (size_t k = 0; k < n; ++k) {
      if (k == j) continue;
      const auto K = static_cast<Eigen::Index>(k);
      const cplx coupling = kI * Om(J, K) + Gm(J, K);
      const cplx ajk = coupling * zj;
      f.M(sigma(n, j), sigma(n, k)) = ajk;
      f.M(sigma_dag(n, j), sigma_dag(n, k)) = std::conj(ajk);
      bjj += coupling * st.beta(K);
      kjj -= 2.0 * Gm(J, K) * std::conj(st.beta(K));
      const cplx kjk = -2.0 * Gm(J, K) * std::conj(bj);
      f.M(sigma_z(n, j), sigma(n, k)) = kjk;
      f.M(sigma_z(n, j), sigma_dag(n, k)) = std::conj(kjk);
    }
    f.M(sigma(n, j), sigma_z(n, j)) = bjj;
    f.M(sigma_dag(n, j), sigma_z(n, j)) = std::conj(bjj);
    f.M(sigma_z(n, j), sigma(n, j)) = kjj;
    f.M(sigma_z(n, j), sigma_dag(n, j)) = std::conj(kjj);
    f.M(sigma_z(n, j), a()) = -2.0 * kI * gj * std::conj(bj);
    f.M(sigma_z(n, j), a_dag()) = 2.0 * kI * gj * bj;
    f.M(sigma_z(n, j), sigma_z(n, j)) = -2.0 * gam;
  }

  const double sa = std::sqrt(s.kappa_A), sb = std::sqrt(s.kappa_B), sg = std::sqrt(2.0 * gam);
  f.N_mat(a(), a_port()) = sa;
  f.N_mat(a(), b_port()) = sb;
  f.N_mat(a_dag(), a_port_dag()) = sa;
  f.N_mat(a_dag(), b_port_dag()) = sb;
  for (size_t j = 0; j < n; ++j) {
    f.N_mat(sigma(n, j), xi(n, j)) = -sg;
    f.N_mat(sigma_dag(n, j), xi_dag(n, j)) = -sg;
    f.N_mat(sigma_z(n, j), xi_z(n, j)) = sg;
  }

  f.C_mat(a_port(), a_port_dag()) = 1.0;
  f.C_mat(b_port(), b_port_dag()) = 1.0;
  for (size_t j = 0; j < n; ++j) {
    const auto J = static_cast<Eigen::Index>(j);
    for (size_t k = 0; k < n; ++k) {
      const auto K = static_cast<Eigen::Index>(k);
      cplx cbb, czb, czz;
      if (j == k) {
        cbb = 1.0;
        czb = -2.0 * std::conj(st.beta(J));
        czz = 2.0 * (st.z(J) + 1.0);
      } else {
        cbb = h(J, K) * st.z(J) * st.z(K);
        czb = 2.0 * h(J, K) * st.z(K) * std::conj(st.beta(J));
        czz = 4.0 * h(J, K) * std::conj(st.beta(J)) * st.beta(K);
      }
      f.C_mat(xi(n, j), xi_dag(n, k)) = cbb;
      f.C_mat(xi_z(n, j), xi_dag(n, k)) = czb;
      f.C_mat(xi_z(n, j), xi_z(n, k)) = czz;
    }
  }
  // <xi_j xiz_k> = <xiz_k xi+_j>^*
  for (size_t j = 0; j < n; ++j)
    for (size_t k = 0; k < n; ++k)
      f.C_mat(xi(n, j), xi_z(n, k)) = std::conj(f.C_mat(xi_z(n, k), xi_dag(n, j)));

  f.D = f.N_mat * f.C_mat * f.N_mat.transpose();
  return f;
}

struct Stability {
  bool is_stable;
  double spectral_abscissa;
};

inline Stability stability(const CMat& m) {
  detail::require(m.rows() == m.cols(), "stability: drift matrix must be square");
  detail::require(m.allFinite(), "stability: drift matrix must be finite");
  const CVec ev = linalg::complex_eigenvalues(m);
  double abscissa = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) abscissa = std::max(abscissa, ev(i).real());
  return {abscissa < 0.0, abscissa};
}

/// Steady-state covariance V = <v v^T> from M V + V M^T = -D.
inline CMat solve_lyapunov(const CMat& m, const CMat& d) {
  const auto st = stability(m);
  if (!st.is_stable) {
    std::ostringstream msg;
    msg << "solve_lyapunov: drift matrix is not stable (spectral abscissa " << st.spectral_abscissa
        << "); no steady state";
    throw NumericalError(msg.str());
  }
  return linalg::solve_lyapunov_kron(m, d);
}

inline CMat solve_lyapunov(const FluctuationSystem& f) { return solve_lyapunov(f.M, f.D); }

inline double lyapunov_residual(const CMat& m, const CMat& v, const CMat& d) {
  return detail::max_abs(m * v + v * m.transpose() + d);
}

namespace detail {
inline CMat resolvent(const CMat& m, double omega) {
  CMat r = -m;
  r.diagonal().array() += kI * omega;
  Eigen::PartialPivLU<CMat> lu(r);
  if (!(lu.rcond() > 1e-15)) {
    std::ostringstream msg;
    msg << "singular resolvent (i omega - M) at omega = " << omega;
    throw NumericalError(msg.str());
  }
  return lu.inverse();
}
} // namespace detail

/// F(omega) = N^T (i omega - M)^{-1} N - 1.
inline CMat transfer_matrix(const FluctuationSystem& f, double omega) {
  CMat t = f.N_mat.transpose() * detail::resolvent(f.M, omega) * f.N_mat;
  t.diagonal().array() -= 1.0;
  return t;
}

struct SpectrumMatrix {
  CMat S;
  double omega;
};

/// Output spectrum S(omega) = F(omega) C F^T(-omega).
inline SpectrumMatrix output_spectrum(const FluctuationSystem& f, double omega) {
  return {transfer_matrix(f, omega) * f.C_mat * transfer_matrix(f, -omega).transpose(), omega};
}

/// Intracavity spectrum G(omega) D G^T(-omega) with G = (i omega - M)^{-1};
/// (1/2 pi) times its integral over omega is the Lyapunov covariance.
inline CMat intracavity_spectrum(const FluctuationSystem& f, double omega) {
  return detail::resolvent(f.M, omega) * f.D * detail::resolvent(f.M, -omega).transpose();
}

/// Gaussian four-point moment <x_i x_j x_k x_l> from ordered two-point
/// moments V(p, q) = <x_p x_q>, p before q.
inline cplx isserlis4(const CMat& v, Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l) {
  return v(i, j) * v(k, l) + v(i, k) * v(j, l) + v(i, l) * v(j, k);
}

struct IntracavityQuadratures {
  double var_x, var_y, photons;
};

/// Intracavity quadrature variances of X = (a + a+)/sqrt2, Y = -i(a - a+)/sqrt2
/// and fluctuation photon number <a+ a>, from the covariance V.
inline IntracavityQuadratures intracavity_quadratures(const CMat& v) {
  const cplx aa = v(0, 0), adad = v(1, 1), aad = v(0, 1), ada = v(1, 0);
  return {0.5 * (aa + adad + aad + ada).real(), 0.5 * (-aa - adad + aad + ada).real(), ada.real()};
}

struct DetectedStats {
  cplx mean_amp_t{0.0, 0.0}; ///< <B_det>
  cplx mean_amp_r{0.0, 0.0}; ///< <A_det>
  double var_x = 0.5, var_y = 0.5;
  double n_det = 0.0;
  double var_n = 0.0;         ///< four-point Isserlis expansion
  double var_n_closed = 0.0;  ///< literal closed form with |S44|^2
  double g2 = 1.0;            ///< NaN when the detected photon number vanishes
  double g2_closed = 1.0;
  double T = 0.0;
  std::vector<std::string> warnings;
};

/// Mean detected amplitudes over a window of half-length T.
inline std::pair<cplx, cplx> detected_mean_amplitudes(const CavitySystem& s, const ClassicalState& st, double T) {
  const cplx b = std::sqrt(2.0 * T * s.kappa_B) * st.alpha;
  const cplx a = std::sqrt(2.0 * T) * (std::sqrt(s.kappa_A) * st.alpha - s.eta / std::sqrt(s.kappa_A));
  return {b, a};
}

/// Statistics of the transmitted detected field from the detected correlation
/// matrix (S(0) in the long-window limit). `gamma_min` is the slowest decay
/// rate of the drift matrix; 0 skips the window check.
inline DetectedStats detected_statistics(const CMat& v_det, cplx mean_t, cplx mean_r, double T, double gamma_min = 0.0) {
  detail::require(T > 0.0 && std::isfinite(T), "detected_statistics: T must be positive");
  detail::require(v_det.rows() >= 4 && v_det.cols() == v_det.rows(), "detected_statistics: correlation matrix too small");
  using namespace index;
  const cplx s33 = v_det(b_port(), b_port());
  const cplx s44 = v_det(b_port_dag(), b_port_dag());
  const cplx s43 = v_det(b_port_dag(), b_port());
  const cplx s34 = v_det(b_port(), b_port_dag());
  const cplx B = mean_t;
  const double b2 = std::norm(B);

  DetectedStats d;
  d.mean_amp_t = mean_t;
  d.mean_amp_r = mean_r;
  d.T = T;
  if (gamma_min > 0.0 && T * gamma_min <= 10.0) {
    std::ostringstream msg;
    msg << "detection window T = " << T << " is not long compared to the slowest decay 1/" << gamma_min
        << "; S(0) is a poor approximation";
    d.warnings.push_back(msg.str());
  }
  d.var_x = 0.5 + s43.real() + s33.real();
  d.var_y = 0.5 + s43.real() - s33.real();
  d.n_det = b2 + s43.real();
  if (d.n_det < -1e-12) throw NumericalError("detected_statistics: negative detected photon number");

  const cplx bdbbdb = isserlis4(v_det, b_port_dag(), b_port(), b_port_dag(), b_port());
  const cplx var = bdbbdb - s43 * s43 + b2 * (1.0 + 2.0 * s43) + std::conj(B) * std::conj(B) * s33 + B * B * s44;
  d.var_n = var.real();
  d.var_n_closed = (std::norm(s44) + b2 * (1.0 + 2.0 * s43) + 2.0 * (B * B * s44).real() + s43 * s34).real();

  const cplx bdbdbb = isserlis4(v_det, b_port_dag(), b_port_dag(), b_port(), b_port());
  const cplx num = b2 * b2 + 4.0 * b2 * s43 + std::conj(B) * std::conj(B) * s33 + B * B * s44 + bdbdbb;
  const double den = std::pow(b2 + s43.real(), 2);
  const double num_closed =
      (b2 * b2 + 4.0 * b2 * s43 + 2.0 * (B * B * s44).real() + std::norm(s44) + 2.0 * s43 * s43).real();
  const double den_closed = (b2 * b2 + 2.0 * b2 * s43 + s43 * s43).real();
  if (den == 0.0) {
    d.g2 = d.g2_closed = std::numeric_limits<double>::quiet_NaN();
  } else {
    d.g2 = num.real() / den;
    d.g2_closed = num_closed / den_closed;
  }
  return d;
}

/// Full pipeline at one operating point: classical state, fluctuations, S(0)
/// and detected statistics of the transmitted field.
inline DetectedStats detect_transmission(const CavitySystem& s, double T) {
  const ClassicalState st = solve_classical(s);
  const FluctuationSystem f = build_fluctuation_system(s, st);
  const auto stab = stability(f.M);
  if (!stab.is_stable) {
    std::ostringstream msg;
    msg << "operating point is unstable (spectral abscissa " << stab.spectral_abscissa << ")";
    throw NumericalError(msg.str());
  }
  const auto [b, a] = detected_mean_amplitudes(s, st, T);
  return detected_statistics(output_spectrum(f, 0.0).S, b, a, T, -stab.spectral_abscissa);
}

struct FiniteWindowOptions {
  double half_width = 0.0;       ///< 0 selects max(40/T, 40 * spectral radius of M)
  int main_lobe_points = 1000;   ///< initial panels across |omega| < pi/T
  double tolerance = 1e-10;      ///< absolute, max-norm over entries
};

namespace detail {

using MatFn = std::function<CMat(double)>;

inline CMat adaptive_simpson(const MatFn& f, double a, double b, const CMat& fa, const CMat& fm, const CMat& fb,
                             const CMat& whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const CMat flm = f(0.5 * (a + m));
  const CMat frm = f(0.5 * (m + b));
  const CMat left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const CMat right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double err = max_abs(CMat(left + right - whole));
  if (depth <= 0 || err <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline CMat simpson_panel(const MatFn& f, double a, double b, double tol) {
  const CMat fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const CMat whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 30);
}

} // namespace detail

/// Detected correlation matrix for a finite window,
/// V_det = (1 / pi T) int sin^2(omega T) / omega^2 S(omega) d omega,
/// evaluated as C + (1 / pi T) int K (S - C) over |omega| <= W, split at the
/// sinc-squared nodes omega = k pi / T.
inline CMat detected_correlations_finite_T(const FluctuationSystem& f, double T, const FiniteWindowOptions& opt = {}) {
  detail::require(T > 0.0 && std::isfinite(T), "detected_correlations_finite_T: T must be positive");
  const double rho = linalg::complex_eigenvalues(f.M).cwiseAbs().maxCoeff();
  const double w = opt.half_width > 0.0 ? opt.half_width : std::max(40.0 / T, 40.0 * rho);
  if (w < 40.0 / T) {
    std::ostringstream msg;
    msg << "detected_correlations_finite_T: integration span +-" << w << " is too narrow; need at least +-"
        << 40.0 / T;
    throw std::invalid_argument(msg.str());
  }
  if (opt.main_lobe_points < 1000) {
    throw std::invalid_argument("detected_correlations_finite_T: main lobe needs at least 1000 points, got " +
                                std::to_string(opt.main_lobe_points));
  }

  const CMat& c = f.C_mat;
  const detail::MatFn integrand = [&](double om) -> CMat {
    const double x = om * T;
    // sin^2(omega T) / omega^2 = T^2 sinc^2(omega T)
    const double sinc = std::abs(x) < 1e-4 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
    return (T * T * sinc * sinc) * (output_spectrum(f, om).S - c);
  };

  const double lobe = kPi / T;
  const auto lobes = static_cast<long>(std::ceil(w / lobe - 1e-9));
  const double tol_density = opt.tolerance * kPi * T / (2.0 * w);

  CMat acc = CMat::Zero(c.rows(), c.cols());
  // main lobe, resolved with an initial subdivision
  const int panels = opt.main_lobe_points / 2;
  for (int p = 0; p < panels; ++p) {
    const double a = -lobe + 2.0 * lobe * p / panels;
    const double b = -lobe + 2.0 * lobe * (p + 1) / panels;
    acc += detail::simpson_panel(integrand, a, b, tol_density * (b - a));
  }
  for (long k = 1; k < lobes; ++k) {
    const double a = k * lobe;
    const double b = std::min((k + 1) * lobe, w);
    acc += detail::simpson_panel(integrand, a, b, tol_density * (b - a));
    acc += detail::simpson_panel(integrand, -b, -a, tol_density * (b - a));
  }
  return c + acc / (kPi * T);
}

} // namespace purcell
