#pragma once

#include "purcell/freespace.hpp"
#include "purcell/steadystate.hpp"

#include <bit>
#include <vector>

namespace purcell::oracle {

/// Density matrix on Fock(0..n_max) (x) N qubits, basis index n * 2^N + bits,
/// bit j set when emitter j is excited. Without a cavity n_max = 0.
struct DensityOperator {
  CMat rho;
  size_t n_max = 0;
  size_t emitters = 0;

  [[nodiscard]] Eigen::Index dim() const { return rho.rows(); }
};

inline constexpr Eigen::Index kMaxDim = 10000;
/// Largest Hilbert-space dimension for the dense superoperator solve.
inline constexpr Eigen::Index kMaxLiouvilleDim = 64;

/// Lindblad term rate * (2 L rho L+ - L+ L rho - rho L+ L).
struct Dissipator {
  CMat L;
  double rate;
};

struct Generators {
  CMat H;
  std::vector<Dissipator> dissipators;
  double max_rate = 0.0; ///< sets the RK4 step
  size_t n_max = 0;
  size_t emitters = 0;
};

namespace detail {

inline CMat annihilation(size_t n_max, size_t emitters) {
  const Eigen::Index q = Eigen::Index{1} << emitters;
  const auto dim = static_cast<Eigen::Index>(n_max + 1) * q;
  CMat a = CMat::Zero(dim, dim);
  for (size_t n = 1; n <= n_max; ++n)
    for (Eigen::Index b = 0; b < q; ++b) a(static_cast<Eigen::Index>(n - 1) * q + b, static_cast<Eigen::Index>(n) * q + b) = std::sqrt(double(n));
  return a;
}

inline CMat lowering(size_t n_max, size_t emitters, size_t j) {
  const Eigen::Index q = Eigen::Index{1} << emitters;
  const auto dim = static_cast<Eigen::Index>(n_max + 1) * q;
  const Eigen::Index bit = Eigen::Index{1} << j;
  CMat s = CMat::Zero(dim, dim);
  for (Eigen::Index n = 0; n <= static_cast<Eigen::Index>(n_max); ++n)
    for (Eigen::Index b = 0; b < q; ++b)
      if (b & bit) s(n * q + (b & ~bit), n * q + b) = 1.0;
  return s;
}

inline double kernel_rate_scale(const greens::CouplingKernels& k) {
  if (k.size() == 0) return 0.0;
  return std::max(k.gamma * (1.0 + purcell::detail::max_abs(RMat(k.h - RMat::Identity(k.h.rows(), k.h.cols())))),
                  purcell::detail::max_abs(k.omega));
}

} // namespace detail

/// Hamiltonian and channel-form dissipators of the driven cavity with N <= 3
/// emitters. The collective decay enters through the eigen-channels of Gamma.
inline Generators build_generators(const CavitySystem& s, size_t n_max) {
  s.validate();
  const size_t n = s.size();
  purcell::detail::require(n_max >= 1, "build_generators: n_max must be at least 1");
  purcell::detail::require(n <= 3, "build_generators: the oracle supports at most 3 emitters with a cavity");
  const auto dim = static_cast<Eigen::Index>(n_max + 1) * (Eigen::Index{1} << n);
  if (dim > kMaxDim) throw std::invalid_argument("build_generators: Hilbert-space dimension exceeds 10^4");

  const CMat a = detail::annihilation(n_max, n);
  std::vector<CMat> sj;
  for (size_t j = 0; j < n; ++j) sj.push_back(detail::lowering(n_max, n, j));

  Generators gen;
  gen.n_max = n_max;
  gen.emitters = n;
  gen.H = -s.delta_c * a.adjoint() * a + kI * s.eta * (a.adjoint() - a);
  for (size_t j = 0; j < n; ++j) {
    const double g = s.G(static_cast<Eigen::Index>(j));
    gen.H += g * (a.adjoint() * sj[j] + a * sj[j].adjoint()) - s.delta_e * sj[j].adjoint() * sj[j];
    for (size_t k = 0; k < n; ++k)
      if (k != j) gen.H += s.kernels.omega(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * sj[k].adjoint() * sj[j];
  }
  gen.dissipators.push_back({a, s.kappa()});
  if (n > 0) {
    const auto ch = freespace::diagonal_decay_channels(s.kernels.gamma_matrix);
    for (Eigen::Index k = 0; k < ch.lambdas.size(); ++k) {
      if (std::abs(ch.lambdas(k)) <= 1e-14 * s.gamma()) continue;
      CMat pk = CMat::Zero(dim, dim);
      for (size_t j = 0; j < n; ++j) pk += ch.T(static_cast<Eigen::Index>(j), k) * sj[j];
      gen.dissipators.push_back({pk, ch.lambdas(k)});
    }
  }
  double g_max = s.G.size() ? s.G.cwiseAbs().maxCoeff() : 0.0;
  gen.max_rate = std::max({s.kappa(), detail::kernel_rate_scale(s.kernels), g_max, s.eta, std::abs(s.delta_c),
                           std::abs(s.delta_e)});
  return gen;
}

/// Liouvillian applied to rho.
inline CMat lindblad_rhs(const Generators& gen, const CMat& rho) {
  CMat out = -kI * (gen.H * rho - rho * gen.H);
  for (const auto& d : gen.dissipators) {
    const CMat ldl = d.L.adjoint() * d.L;
    out += d.rate * (2.0 * d.L * rho * d.L.adjoint() - ldl * rho - rho * ldl);
  }
  return out;
}

/// Collective emitter dissipator in pairwise form,
/// sum_jk gamma_jk (2 S_j rho S_k+ - S_k+ S_j rho - rho S_k+ S_j).
inline CMat pairwise_emitter_dissipator(const RMat& gamma_matrix, size_t n_max, size_t emitters, const CMat& rho) {
  std::vector<CMat> sj;
  for (size_t j = 0; j < emitters; ++j) sj.push_back(detail::lowering(n_max, emitters, j));
  CMat out = CMat::Zero(rho.rows(), rho.cols());
  for (size_t j = 0; j < emitters; ++j)
    for (size_t k = 0; k < emitters; ++k) {
      const double gjk = gamma_matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
      const CMat skdsj = sj[k].adjoint() * sj[j];
      out += gjk * (2.0 * sj[j] * rho * sj[k].adjoint() - skdsj * rho - rho * skdsj);
    }
  return out;
}

/// Channel-form emitter part of the generators only (cavity dissipator dropped).
inline CMat channel_emitter_dissipator(const Generators& gen, const CMat& rho) {
  CMat out = CMat::Zero(rho.rows(), rho.cols());
  for (size_t i = 1; i < gen.dissipators.size(); ++i) {
    const auto& d = gen.dissipators[i];
    const CMat ldl = d.L.adjoint() * d.L;
    out += d.rate * (2.0 * d.L * rho * d.L.adjoint() - ldl * rho - rho * ldl);
  }
  return out;
}

struct EvolveOptions {
  double dt = 0.0;         ///< 0 selects 0.005 / max rate
  double t_end = 1e5;      ///< in units of 1 / max rate when dt is automatic
  double tolerance = 1e-10; ///< on max |drho/dt| relative to the max rate
  double cutoff_population = 1e-6;
};

inline CMat rk4_step(const Generators& gen, const CMat& rho, double dt) {
  const CMat k1 = lindblad_rhs(gen, rho);
  const CMat k2 = lindblad_rhs(gen, rho + 0.5 * dt * k1);
  const CMat k3 = lindblad_rhs(gen, rho + 0.5 * dt * k2);
  const CMat k4 = lindblad_rhs(gen, rho + dt * k3);
  return rho + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Population of the highest retained Fock level.
inline double top_fock_population(const DensityOperator& d) {
  const Eigen::Index q = Eigen::Index{1} << d.emitters;
  const auto top = static_cast<Eigen::Index>(d.n_max) * q;
  double p = 0.0;
  for (Eigen::Index b = 0; b < q; ++b) p += d.rho(top + b, top + b).real();
  return p;
}

/// Fixed-step RK4 until max |drho/dt| < tolerance * max rate.
inline DensityOperator evolve_to_steady_state(const Generators& gen, const CMat& rho0, const EvolveOptions& opt = {}) {
  purcell::detail::require(rho0.rows() == gen.H.rows() && rho0.cols() == gen.H.cols(), "evolve_to_steady_state: rho0 dimension mismatch");
  const double rate = std::max(gen.max_rate, 1e-300);
  const double dt = opt.dt > 0.0 ? opt.dt : 0.005 / rate;
  const double t_end = opt.dt > 0.0 ? opt.t_end : opt.t_end / rate;
  CMat rho = rho0;
  double t = 0.0;
  bool converged = false;
  for (; t < t_end; t += dt) {
    if (purcell::detail::max_abs(lindblad_rhs(gen, rho)) < opt.tolerance * rate) {
      converged = true;
      break;
    }
    rho = rk4_step(gen, rho, dt);
  }
  if (!converged) throw NumericalError("evolve_to_steady_state: no stationary state reached before t_end");
  rho = 0.5 * (rho + rho.adjoint());
  DensityOperator d{rho, gen.n_max, gen.emitters};
  const double top = top_fock_population(d);
  if (top >= opt.cutoff_population) {
    std::ostringstream msg;
    msg << "Fock cutoff n_max = " << gen.n_max << " is too small (top-level population " << top
        << "); increase n_max";
    throw NumericalError(msg.str());
  }
  return d;
}

/// Liouvillian as a dense superoperator acting on column-stacked rho.
inline CMat liouvillian(const Generators& gen) {
  const Eigen::Index dim = gen.H.rows();
  const CMat id = CMat::Identity(dim, dim);
  auto kron = [](const CMat& a, const CMat& b) {
    CMat k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
  };
  CMat l = -kI * (kron(id, gen.H) - kron(gen.H.transpose(), id));
  for (const auto& d : gen.dissipators) {
    const CMat ldl = d.L.adjoint() * d.L;
    l += d.rate * (2.0 * kron(d.L.conjugate(), d.L) - kron(id, ldl) - kron(ldl.transpose(), id));
  }
  return l;
}

/// Stationary state from the kernel of the Liouvillian, one equation being
/// replaced by the trace condition.
inline DensityOperator stationary_state(const Generators& gen, double cutoff_population = 1e-6) {
  const Eigen::Index dim = gen.H.rows();
  if (dim > kMaxLiouvilleDim) throw std::invalid_argument("stationary_state: Hilbert space too large for the dense Liouvillian");
  CMat l = liouvillian(gen);
  CVec rhs = CVec::Zero(dim * dim);
  l.row(0).setZero();
  for (Eigen::Index i = 0; i < dim; ++i) l(0, i * dim + i) = 1.0;
  rhs(0) = 1.0;
  Eigen::PartialPivLU<CMat> lu(l);
  const CVec v = lu.solve(rhs);
  if (!v.allFinite() || (l * v - rhs).cwiseAbs().maxCoeff() > 1e-8)
    throw NumericalError("stationary_state: Liouvillian kernel solve failed");
  CMat rho = Eigen::Map<const CMat>(v.data(), dim, dim);
  rho = 0.5 * (rho + rho.adjoint());
  DensityOperator d{rho, gen.n_max, gen.emitters};
  const double top = top_fock_population(d);
  if (top >= cutoff_population) {
    std::ostringstream msg;
    msg << "Fock cutoff n_max = " << gen.n_max << " is too small (top-level population " << top
        << "); increase n_max";
    throw NumericalError(msg.str());
  }
  return d;
}

/// Vacuum cavity, all emitters in the ground state.
inline CMat ground_state(size_t n_max, size_t emitters) {
  const auto dim = static_cast<Eigen::Index>(n_max + 1) * (Eigen::Index{1} << emitters);
  CMat rho = CMat::Zero(dim, dim);
  rho(0, 0) = 1.0;
  return rho;
}

struct SteadyStateResult {
  DensityOperator state;
  size_t n_max;
};

/// Stationary state, raising n_max by two until the top Fock level is empty
/// enough.
inline SteadyStateResult oracle_steady_state(const CavitySystem& s, size_t n_max = 6, size_t n_max_limit = 40,
                                             const EvolveOptions& opt = {}) {
  for (size_t nm = n_max;; nm += 2) {
    const Generators gen = build_generators(s, nm);
    try {
      return {stationary_state(gen, opt.cutoff_population), nm};
    } catch (const NumericalError& e) {
      if (std::string(e.what()).find("Fock cutoff") == std::string::npos || nm + 2 > n_max_limit) throw;
    }
  }
}

struct Observables {
  cplx a;
  std::vector<cplx> s;
  double photons;    ///< <A+ A>
  double g2;         ///< <A+ A+ A A> / <A+ A>^2
  double var_x, var_y; ///< variances of (A + A+)/sqrt2 and -i(A - A+)/sqrt2
};

inline Observables observables(const DensityOperator& d) {
  const CMat a = detail::annihilation(d.n_max, d.emitters);
  const CMat ad = a.adjoint();
  auto ex = [&](const CMat& op) { return (op * d.rho).trace(); };
  Observables o;
  o.a = ex(a);
  for (size_t j = 0; j < d.emitters; ++j) o.s.push_back(ex(detail::lowering(d.n_max, d.emitters, j)));
  o.photons = ex(ad * a).real();
  o.g2 = o.photons > 0.0 ? ex(ad * ad * a * a).real() / (o.photons * o.photons) : std::numeric_limits<double>::quiet_NaN();
  const CMat x = (a + ad) / std::sqrt(2.0);
  const CMat y = -kI * (a - ad) / std::sqrt(2.0);
  o.var_x = (ex(x * x) - ex(x) * ex(x)).real();
  o.var_y = (ex(y * y) - ex(y) * ex(y)).real();
  return o;
}

/// Partial trace over the cavity.
inline CMat reduce_to_emitters(const DensityOperator& d) {
  const Eigen::Index q = Eigen::Index{1} << d.emitters;
  CMat r = CMat::Zero(q, q);
  for (Eigen::Index n = 0; n <= static_cast<Eigen::Index>(d.n_max); ++n) r += d.rho.block(n * q, n * q, q, q);
  return r;
}

struct StateChecks {
  double hermiticity, trace_error, min_eigenvalue;
};

inline StateChecks check_state(const CMat& rho) {
  const CMat herm = 0.5 * (rho + rho.adjoint());
  return {purcell::detail::max_abs(CMat(rho - rho.adjoint())), std::abs(rho.trace() - 1.0),
          Eigen::SelfAdjointEigenSolver<CMat>(herm, Eigen::EigenvaluesOnly).eigenvalues().minCoeff()};
}

/// log2 of the trace norm of the partial transpose over the emitters in
/// `partition`.
inline double logarithmic_negativity(const CMat& rho, size_t emitters, const std::vector<size_t>& partition) {
  const Eigen::Index q = Eigen::Index{1} << emitters;
  purcell::detail::require(rho.rows() == q && rho.cols() == q, "logarithmic_negativity: rho must act on the emitter space");
  purcell::detail::require(!partition.empty() && partition.size() < emitters,
                  "logarithmic_negativity: partition must be a nonempty proper subset");
  Eigen::Index mask = 0;
  for (size_t j : partition) {
    purcell::detail::require(j < emitters, "logarithmic_negativity: partition index out of range");
    const Eigen::Index bit = Eigen::Index{1} << j;
    purcell::detail::require(!(mask & bit), "logarithmic_negativity: duplicate partition index");
    mask |= bit;
  }
  CMat pt(q, q);
  for (Eigen::Index b = 0; b < q; ++b)
    for (Eigen::Index c = 0; c < q; ++c) {
      const Eigen::Index bt = (b & ~mask) | (c & mask);
      const Eigen::Index ct = (c & ~mask) | (b & mask);
      pt(b, c) = rho(bt, ct);
    }
  const CMat herm = 0.5 * (pt + pt.adjoint());
  const RVec ev = Eigen::SelfAdjointEigenSolver<CMat>(herm, Eigen::EigenvaluesOnly).eigenvalues();
  return std::log2(ev.cwiseAbs().sum());
}

/// Emitter state vector for a single-excitation amplitude vector c.
inline CVec single_excitation_state(const RVec& c) {
  const auto n = static_cast<size_t>(c.size());
  CVec psi = CVec::Zero(Eigen::Index{1} << n);
  for (size_t j = 0; j < n; ++j) psi(Eigen::Index{1} << j) = c(static_cast<Eigen::Index>(j));
  return psi;
}

struct FreeDecayOptions {
  double dt = 0.0; ///< 0 selects 0.005 / max(gamma (1 + max h), |Omega|_max)
};

/// Free-space evolution of the emitters (no cavity). Dynamics never raises
/// the excitation number, so the basis is restricted to states with at most
/// as many excitations as the initial state; results are returned on the full
/// 2^N space.
inline std::vector<DensityOperator> free_decay_evolution(const greens::CouplingKernels& k, const CVec& psi0,
                                                         const std::vector<double>& times,
                                                         const FreeDecayOptions& opt = {}) {
  const size_t n = k.size();
  purcell::detail::require(n >= 1 && n <= 6, "free_decay_evolution: supports 1 to 6 emitters");
  const Eigen::Index q = Eigen::Index{1} << n;
  purcell::detail::require(psi0.size() == q, "free_decay_evolution: state dimension must be 2^N");
  purcell::detail::require(std::abs(psi0.norm() - 1.0) < 1e-10, "free_decay_evolution: initial state must be normalized");
  for (size_t i = 0; i < times.size(); ++i) {
    purcell::detail::require(times[i] >= 0.0 && std::isfinite(times[i]), "free_decay_evolution: times must be non-negative");
    if (i) purcell::detail::require(times[i] >= times[i - 1], "free_decay_evolution: times must be non-decreasing");
  }

  int k_max = 0;
  for (Eigen::Index b = 0; b < q; ++b)
    if (std::abs(psi0(b)) > 0.0) k_max = std::max(k_max, std::popcount(static_cast<unsigned>(b)));
  std::vector<Eigen::Index> basis;
  std::vector<Eigen::Index> where(static_cast<size_t>(q), -1);
  for (Eigen::Index b = 0; b < q; ++b)
    if (std::popcount(static_cast<unsigned>(b)) <= k_max) {
      where[static_cast<size_t>(b)] = static_cast<Eigen::Index>(basis.size());
      basis.push_back(b);
    }
  const auto dim = static_cast<Eigen::Index>(basis.size());

  Generators gen;
  gen.emitters = n;
  gen.H = CMat::Zero(dim, dim);
  std::vector<CMat> sj;
  for (size_t j = 0; j < n; ++j) {
    const Eigen::Index bit = Eigen::Index{1} << j;
    CMat s = CMat::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      if (basis[i] & bit) s(where[static_cast<size_t>(basis[i] & ~bit)], i) = 1.0;
    sj.push_back(std::move(s));
  }
  for (size_t j = 0; j < n; ++j)
    for (size_t l = 0; l < n; ++l)
      if (l != j) gen.H += k.omega(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) * sj[l].adjoint() * sj[j];
  const auto ch = freespace::diagonal_decay_channels(k.gamma_matrix);
  for (Eigen::Index c = 0; c < ch.lambdas.size(); ++c) {
    if (std::abs(ch.lambdas(c)) <= 1e-14 * k.gamma) continue;
    CMat pk = CMat::Zero(dim, dim);
    for (size_t j = 0; j < n; ++j) pk += ch.T(static_cast<Eigen::Index>(j), c) * sj[j];
    gen.dissipators.push_back({pk, ch.lambdas(c)});
  }
  gen.max_rate = std::max(detail::kernel_rate_scale(k), k.gamma);
  const double dt_max = opt.dt > 0.0 ? opt.dt : 0.005 / gen.max_rate;

  CVec psi(dim);
  for (Eigen::Index i = 0; i < dim; ++i) psi(i) = psi0(basis[i]);
  CMat rho = psi * psi.adjoint();

  std::vector<DensityOperator> out;
  double t = 0.0;
  for (double target : times) {
    const double span = target - t;
    if (span > 0.0) {
      const auto steps = static_cast<long>(std::ceil(span / dt_max - 1e-12));
      const double dt = span / static_cast<double>(steps);
      for (long s = 0; s < steps; ++s) rho = rk4_step(gen, rho, dt);
      t = target;
    }
    CMat full = CMat::Zero(q, q);
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) full(basis[i], basis[j]) = rho(i, j);
    out.push_back({full, 0, n});
  }
  return out;
}

/// Total excited-state population sum_j <S_j+ S_j> of an emitter density matrix.
inline double excitation_number(const CMat& rho, size_t emitters) {
  double p = 0.0;
  for (Eigen::Index b = 0; b < rho.rows(); ++b) p += std::popcount(static_cast<unsigned>(b)) * rho(b, b).real();
  (void)emitters;
  return p;
}

} // namespace purcell::oracle
