#include "purcell/fluctuations.hpp"
#include "purcell/oracle.hpp"

#include <gtest/gtest.h>

using namespace purcell;
using namespace purcell::oracle;

TEST(Oracle, UndrivenSteadyStateIsGround) {
  const auto r = oracle_steady_state(single_emitter(1.0, 0.05, 0.2, 0.0));
  EXPECT_NEAR(r.state.rho(0, 0).real(), 1.0, 1e-12);
  EXPECT_NEAR(observables(r.state).photons, 0.0, 1e-12);
}

TEST(Oracle, LiouvillianPreservesTraceAndHermiticity) {
  ChainSpec c;
  c.g = 0.2;
  c.eta = 0.3;
  const auto gen = build_generators(chain_system(c, 2, Symmetry::symmetric), 3);
  CMat rho = CMat::Random(gen.H.rows(), gen.H.cols());
  rho = (rho * rho.adjoint()).eval();
  rho /= rho.trace();
  const CMat d = lindblad_rhs(gen, rho);
  EXPECT_LT(std::abs(d.trace()), 1e-13);
  EXPECT_LT(purcell::detail::max_abs(CMat(d - d.adjoint())), 1e-13);
}

TEST(Oracle, ChannelDissipatorEqualsPairwiseForm) {
  ChainSpec c;
  c.spacing = 0.17;
  c.g = 0.1;
  const auto s = chain_system(c, 3, Symmetry::symmetric);
  const auto gen = build_generators(s, 1);
  CMat rho = CMat::Random(gen.H.rows(), gen.H.cols());
  rho = (rho * rho.adjoint()).eval();
  const CMat a = channel_emitter_dissipator(gen, rho);
  const CMat b = pairwise_emitter_dissipator(s.kernels.gamma_matrix, 1, 3, rho);
  EXPECT_LT(purcell::detail::max_abs(CMat(a - b)), 1e-13);
}

TEST(Oracle, CoherentStateOfEmptyCavity) {
  EvolveOptions opt;
  opt.cutoff_population = 1e-12;
  const auto r = oracle_steady_state(empty_cavity(1.0, 1.0, 0.0, 2.0), 6, 40, opt);
  const auto o = observables(r.state);
  EXPECT_GT(r.n_max, 6u);
  EXPECT_NEAR(o.photons, 4.0, 1e-6);
  EXPECT_NEAR(o.g2, 1.0, 1e-6);
  EXPECT_NEAR(o.var_x, 0.5, 1e-6);
}

TEST(Oracle, RungeKuttaReachesTheKernelSolution) {
  const auto s = single_emitter(1.0, 0.05, 0.2, 0.02);
  const auto gen = build_generators(s, 4);
  const auto a = stationary_state(gen);
  const auto b = evolve_to_steady_state(gen, ground_state(4, 1));
  EXPECT_LT(purcell::detail::max_abs(CMat(a.rho - b.rho)), 1e-8);
}

TEST(Oracle, WeakDriveAgreesWithMeanField) {
  const auto s = single_emitter(1.0, 0.05, 0.2, 0.02);
  const auto o = observables(oracle_steady_state(s).state);
  const auto st = solve_classical(s);
  EXPECT_LT(std::abs(o.a - st.alpha) / std::abs(st.alpha), 0.01);
  EXPECT_LT(std::abs(o.s[0] - st.beta(0)) / std::abs(st.beta(0)), 0.01);
}

TEST(Oracle, StateChecks) {
  const auto r = oracle_steady_state(single_emitter(1.0, 0.05, 0.2, 0.05));
  const auto c = check_state(r.state.rho);
  EXPECT_LT(c.hermiticity, 1e-12);
  EXPECT_LT(c.trace_error, 1e-12);
  EXPECT_GT(c.min_eigenvalue, -1e-10);
  EXPECT_NEAR(reduce_to_emitters(r.state).trace().real(), 1.0, 1e-12);
}

TEST(Oracle, LogarithmicNegativity) {
  CMat product = CMat::Zero(4, 4);
  product(1, 1) = 1.0;
  EXPECT_LT(std::abs(logarithmic_negativity(product, 2, {0})), 1e-12);
  RVec c(2);
  c << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const CVec psi = single_excitation_state(c);
  EXPECT_NEAR(logarithmic_negativity(psi * psi.adjoint(), 2, {0}), 1.0, 1e-12);
  EXPECT_THROW(logarithmic_negativity(product, 2, {0, 1}), std::invalid_argument);
}

TEST(Oracle, FreeDecayOfTwoEmitterStates) {
  const double gamma = 0.05;
  const auto k = greens::coupling_kernels(greens::make_chain(2, 0.3, Vec3::UnitZ(), gamma));
  for (int m : {1, 2}) {
    const double rate = 2 * gamma * (1 + (m == 1 ? 1 : -1) * k.h(0, 1));
    const auto states = free_decay_evolution(k, single_excitation_state(freespace::exciton_state(2, m).coeffs), {0.0, 10.0, 20.0});
    for (size_t i = 0; i < 3; ++i)
      EXPECT_NEAR(excitation_number(states[i].rho, 2), std::exp(-rate * 10.0 * i), 1e-9);
  }
}

TEST(Oracle, Guards) {
  ChainSpec c;
  EXPECT_THROW(build_generators(chain_system(c, 4, Symmetry::symmetric), 2), std::invalid_argument);
  EXPECT_THROW(build_generators(single_emitter(1.0, 0.05, 0.2, 0.1), 0), std::invalid_argument);
}
