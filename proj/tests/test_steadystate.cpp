#include "purcell/steadystate.hpp"

#include <gtest/gtest.h>

using namespace purcell;

namespace {

// Transmission of a cavity holding one linear dipole, written out directly.
cplx single_emitter_t(double kappa, double gamma, double g, double dc, double de) {
  return kappa / (kappa - kI * dc + g * g / (gamma - kI * de));
}

} // namespace

TEST(SteadyState, SingleEmitterTransmissionOffResonance) {
  for (double dc : {-0.3, 0.0, 0.17})
    for (double de : {-0.2, 0.05}) {
      const auto r = linear_response(single_emitter(1.0, 0.05, 0.2, 0.0, dc, de));
      const cplx t = single_emitter_t(1.0, 0.05, 0.2, dc, de);
      EXPECT_NEAR(std::abs(r.t_c - t), 0.0, 1e-14);
      EXPECT_NEAR(std::abs(r.r_c - (t - 1.0)), 0.0, 1e-14);
    }
}

TEST(SteadyState, ResonantIntensitiesFollowCooperativity) {
  for (double C : {0.1, 0.8, 5.0, 50.0}) {
    const double g = std::sqrt(C * 1.0 * 0.05);
    const auto r = linear_response(single_emitter(1.0, 0.05, g, 0.0));
    EXPECT_NEAR(r.abs_t2, 1.0 / ((1 + C) * (1 + C)), 1e-12);
    EXPECT_NEAR(r.abs_r2, C * C / ((1 + C) * (1 + C)), 1e-12);
    EXPECT_NEAR(r.abs_s2, 2 * C / ((1 + C) * (1 + C)), 1e-12);
  }
}

TEST(SteadyState, UnbalancedMirrorsConserveEnergyWithoutEmitters) {
  const auto r = linear_response(empty_cavity(1.4, 0.6, 0.3, 0.0));
  EXPECT_NEAR(r.abs_t2 + r.abs_r2, 1.0, 1e-14);
  EXPECT_NEAR(r.abs_s2, 0.0, 1e-14);
}

TEST(SteadyState, HybridModes) {
  const auto weak = hybrid_modes(0.2, 1.0, 0.05);
  EXPECT_EQ(weak.omega_plus, 0.0);
  EXPECT_NEAR(weak.Gamma_plus + weak.Gamma_minus, 1.05, 1e-14);
  const auto strong = hybrid_modes(10.0, 1.0, 0.05);
  EXPECT_NEAR(strong.omega_plus, std::sqrt(100.0 - 0.475 * 0.475), 1e-12);
  EXPECT_NEAR(strong.Gamma_plus, 0.525, 1e-14);
  EXPECT_NEAR(purcell_quantities(0.2, 1.0, 0.05).F_p, 3.2, 1e-14);
}

TEST(SteadyState, ClassicalReducesToLinearAtWeakDrive) {
  auto s = single_emitter(1.0, 0.05, 0.2, 1e-5);
  const auto st = solve_classical(s);
  const auto lin = linear_solution(s);
  EXPECT_NEAR(std::abs(st.alpha - lin.alpha) / std::abs(lin.alpha), 0.0, 1e-8);
  EXPECT_LT(st.residual, 1e-12 * s.eta + 1e-15);
}

TEST(SteadyState, ClassicalSolutionSatisfiesEquations) {
  ChainSpec c;
  c.spacing = 0.2;
  c.g = 0.2;
  c.eta = 0.03;
  for (auto sym : {Symmetry::symmetric, Symmetry::alternating}) {
    auto s = chain_system(c, 3, sym);
    s.delta_c = s.delta_e = 0.07;
    const auto st = solve_classical(s);
    EXPECT_LT(classical_residual(s, st.alpha, st.beta), 1e-12);
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(st.z(j), 2 * std::norm(st.beta(j)) - 1, 1e-15);
  }
}

TEST(SteadyState, ClassicalSaturationLowersTransmissionDip) {
  const auto weak = solve_classical(single_emitter(1.0, 0.05, 0.2, 1e-4));
  const auto strong = solve_classical(single_emitter(1.0, 0.05, 0.2, 0.08));
  EXPECT_GT(std::abs(strong.alpha) / 0.08, std::abs(weak.alpha) / 1e-4);
}

TEST(SteadyState, EffectiveQuantitiesSingleEmitter) {
  const auto q = effective_quantities(single_emitter(1.0, 0.05, 0.2, 0.0, 0.0, 0.13));
  EXPECT_NEAR(q.gamma_eff, 0.05, 1e-14);
  EXPECT_NEAR(q.delta_eff, 0.13, 1e-14);
  EXPECT_NEAR(q.C_eff, 0.8, 1e-12);
}

TEST(SteadyState, IndependentCooperativityIsExtensive) {
  ChainSpec c;
  for (size_t n : {1, 4, 9}) {
    const auto r = cooperativity_point(c, n, Symmetry::independent);
    EXPECT_NEAR(r.C_eff, n * c.g * c.g / (c.kappa * c.gamma), 1e-12);
  }
}

TEST(SteadyState, MatchedShiftIsARoot) {
  ChainSpec c;
  c.spacing = 0.1;
  for (auto sym : {Symmetry::symmetric, Symmetry::alternating}) {
    const auto s = match_system(chain_system(c, 5, sym), sym);
    EXPECT_LT(std::abs(effective_quantities(s).delta_eff), 1e-9);
    EXPECT_GT(effective_quantities(s).gamma_eff, 0.0);
  }
}

TEST(SteadyState, TwoEmitterMatchedShiftEqualsCoherentCoupling) {
  ChainSpec c;
  c.spacing = 0.2;
  const auto sym = match_system(chain_system(c, 2, Symmetry::symmetric), Symmetry::symmetric);
  const auto alt = match_system(chain_system(c, 2, Symmetry::alternating), Symmetry::alternating);
  const double om = sym.kernels.omega(0, 1);
  EXPECT_NEAR(sym.delta_e, om, 1e-9);
  EXPECT_NEAR(alt.delta_e, -om, 1e-9);
  EXPECT_NEAR(effective_quantities(sym).gamma_eff, c.gamma * (1 + sym.kernels.h(0, 1)), 1e-9);
}

TEST(SteadyState, FitWindowAndPowerLaw) {
  EXPECT_EQ(fit_window(40).first, 4.0);
  EXPECT_EQ(fit_window(200).first, 20.0);
  std::vector<double> x{1, 2, 4, 8}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -1.5));
  const auto f = linalg::fit_power_law(x, y);
  EXPECT_NEAR(f.exponent, -1.5, 1e-13);
  EXPECT_NEAR(std::exp(f.log_prefactor), 3.0, 1e-12);
}

TEST(SteadyState, ValidationErrors) {
  auto s = single_emitter(1.0, 0.05, 0.2, 0.05);
  s.kappa_A = -1.0;
  EXPECT_THROW(linear_response(s), std::invalid_argument);
  EXPECT_THROW(symmetry_from_string("diagonal"), std::invalid_argument);
  EXPECT_THROW(solve_classical(single_emitter(1.0, 0.05, 0.2, 5.0)), NumericalError);
}
