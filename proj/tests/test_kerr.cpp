#include "purcell/kerr.hpp"

#include <gtest/gtest.h>

using namespace purcell;

TEST(Kerr, SingleEmitterClosedForm) {
  const double g = 0.2, eta = 0.01;
  const auto k = kerr_correction(single_emitter(1.0, 0.05, g, eta, 0.1, 0.1));
  const cplx b1 = k.beta1(0);
  const cplx ref = -2.0 * b1 * std::norm(b1) * (1.0 - kI * (g / eta) * b1);
  EXPECT_LT(std::abs(k.beta3(0) - ref) / std::abs(ref), 1e-12);
}

TEST(Kerr, IndependentEmittersMatchClosedForm) {
  ChainSpec c;
  c.g = 0.2;
  c.eta = 0.01;
  for (size_t n : {1, 2, 5, 20}) {
    const auto k = kerr_correction(chain_system(c, n, Symmetry::independent));
    EXPECT_NEAR(k.norm_beta3 / independent_kerr_magnitude(double(n), 0.8, 0.05, 1.0, 0.01), 1.0, 1e-10);
  }
}

TEST(Kerr, TwoEmitterResonantFormula) {
  ChainSpec c;
  c.g = 0.1;
  c.eta = 1e-4;
  for (double d : {0.1, 0.3})
    for (auto sym : {Symmetry::symmetric, Symmetry::alternating}) {
      const auto r = kerr_distance_point(c, d, sym);
      auto cc = c;
      cc.spacing = d;
      const auto s = match_system(chain_system(cc, 2, sym), sym);
      EXPECT_NEAR(r.norm_beta3 / two_emitter_resonant_kerr(s), 1.0, 1e-8);
    }
}

TEST(Kerr, ResidualIsFifthOrder) {
  auto res = [](double eta) {
    const auto s = single_emitter(1.0, 0.05, 0.2, eta, 0.05, 0.05);
    const auto k = kerr_correction(s);
    return kerr_residual(s, CVec(k.beta1 + k.beta3));
  };
  EXPECT_NEAR(res(0.002) / res(0.001), 32.0, 3.2);
}

TEST(Kerr, LinearTransmissionAgreesWithResponse) {
  ChainSpec c;
  c.g = 0.1;
  c.eta = 1e-4;
  c.spacing = 0.15;
  const auto s = chain_system(c, 3, Symmetry::alternating);
  EXPECT_LT(std::abs(kerr_correction(s).t_lin - linear_response(s).t_c), 1e-13);
}

TEST(Kerr, PopulationGuards) {
  EXPECT_THROW(kerr_correction(single_emitter(1.0, 0.05, 0.2, 0.3)), NumericalError);
  ChainSpec c;
  c.g = 0.1;
  c.eta = 0.1;
  EXPECT_THROW(kerr_scaling_point(c, 2, Symmetry::symmetric), NumericalError);
}

TEST(Kerr, AnalyticIndependentCurveExponent) {
  ChainSpec c;
  c.g = 0.1;
  c.eta = 1e-4;
  std::vector<size_t> ns;
  for (size_t n = 1; n <= 10000; n = static_cast<size_t>(std::ceil(n * 1.2))) ns.push_back(n);
  EXPECT_NEAR(independent_kerr_curve(c, ns).fit->exponent, -3.5, 0.05);
}
