// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "purcell/studies.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

using namespace purcell;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// 1. Resonant single-emitter intensities against the cooperativity closed forms.
void resonance_intensities(Outcome& o) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (double C : {0.1, 0.8, 5.0, 50.0}) {
    const double kappa = 1.0, gamma = 0.05, g = std::sqrt(C * kappa * gamma);
    const auto r = linear_response(single_emitter(kappa, gamma, g, 0.0));
    const double d = (1 + C) * (1 + C);
    worst = std::max({worst, std::abs(r.abs_t2 - 1 / d), std::abs(r.abs_r2 - C * C / d), std::abs(r.abs_s2 - 2 * C / d)});
  }
  const double t = seconds_since(t0);
  o.check(worst < 1e-10, "closed forms");
  o.check(t < 1.0, "runtime");
  o.detail << "max deviation " << worst << ", " << t << " s";
}

// 2. Energy conservation on a 1000-point detuning grid.
void energy_conservation(Outcome& o) {
  auto s = single_emitter(1.0, 0.05, 0.2, 0.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double d = -2.0 + 4.0 * i / 999.0;
    s.delta_c = s.delta_e = d;
    const auto r = linear_response(s);
    worst = std::max(worst, std::abs(r.abs_t2 + r.abs_r2 + r.abs_s2 - 1.0));
  }
  o.check(worst < 1e-10, "|r|^2 + |t|^2 + |s|^2 = 1");
  o.detail << "max |sum - 1| = " << worst;
}

// 3. Hybrid-mode threshold and the strong-coupling limit.
void hybrid_threshold(Outcome& o) {
  const double kappa = 1.0, gamma = 0.05, th = 0.5 * (kappa - gamma);
  double below = 0.0;
  for (double g : {0.0, 0.1, 0.3, th}) {
    const auto m = hybrid_modes(g, kappa, gamma);
    below = std::max({below, std::abs(m.omega_plus), std::abs(m.omega_minus)});
  }
  const auto strong = hybrid_modes(10.0, kappa, gamma);
  const double dev = std::max(std::abs(strong.omega_plus / 10.0 - 1.0), std::abs(strong.omega_minus / -10.0 - 1.0));
  o.check(below == 0.0, "omega = 0 below threshold");
  o.check(dev < 0.02, "omega -> +-g");
  o.detail << "max |omega| below threshold " << below << ", strong-coupling deviation " << dev;
}

// 4. Lyapunov residual and commutator at randomized stable weak-excitation points.
void lyapunov_correctness(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937 rng(20240611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int accepted = 0, tries = 0;
  double worst_res = 0.0, worst_comm = 0.0;
  while (accepted < 20 && tries < 1000) {
    ++tries;
    ChainSpec c;
    c.g = 0.05 + 0.45 * u(rng);
    c.gamma = 0.02 + 0.18 * u(rng);
    c.spacing = 0.1 + 0.4 * u(rng);
    c.eta = 1e-4 + 2e-3 * u(rng);
    const size_t n = 1 + static_cast<size_t>(3 * u(rng));
    const Symmetry sym = u(rng) < 0.5 ? Symmetry::symmetric : Symmetry::alternating;
    auto s = chain_system(c, n, sym);
    s.delta_c = -0.5 + u(rng);
    s.delta_e = -0.5 + u(rng);
    ClassicalState st;
    try {
      st = solve_classical(s);
    } catch (const NumericalError&) {
      continue;
    }
    if (st.beta.cwiseAbs2().maxCoeff() >= kKerrScanPopulationLimit) continue;
    const auto f = build_fluctuation_system(s, st);
    if (!stability(f.M).is_stable) continue;
    const CMat v = solve_lyapunov(f);
    worst_res = std::max(worst_res, lyapunov_residual(f.M, v, f.D) / detail::max_abs(f.D));
    worst_comm = std::max(worst_comm, std::abs(v(index::a(), index::a_dag()) - v(index::a_dag(), index::a()) - 1.0));
    ++accepted;
  }
  const double t = seconds_since(t0);
  o.check(accepted == 20, "20 stable points");
  o.check(worst_res < 1e-10, "relative residual");
  o.check(worst_comm < 1e-8, "commutator");
  o.check(t < 5.0, "runtime");
  o.detail << accepted << " points, max relative residual " << worst_res << ", max |[a,a+] - 1| " << worst_comm << ", " << t
           << " s";
}

// 5. Vacuum passivity and the coherent g2 of the empty driven cavity.
void vacuum_passivity(Outcome& o) {
  ChainSpec c;
  c.spacing = 0.2;
  c.g = 0.2;
  c.eta = 0.0;
  double worst = 0.0;
  for (size_t n : {1, 3}) {
    const auto s = chain_system(c, n, Symmetry::symmetric);
    const auto f = build_fluctuation_system(s, solve_classical(s));
    using namespace index;
    const Eigen::Index ann[] = {a_port(), b_port()};
    const Eigen::Index cre[] = {a_port_dag(), b_port_dag()};
    for (int i = 0; i <= 400; ++i) {
      const CMat S = output_spectrum(f, -10.0 + 20.0 * i / 400.0).S;
      for (auto p : cre)
        for (auto q : ann) worst = std::max(worst, std::abs(S(p, q)));
      for (auto p : ann)
        for (auto q : ann) worst = std::max(worst, std::abs(S(p, q)));
      for (auto p : cre)
        for (auto q : cre) worst = std::max(worst, std::abs(S(p, q)));
    }
  }
  const auto d = detect_transmission(empty_cavity(1.0, 1.0, 0.0, 0.05), 1e3);
  o.check(worst < 1e-12, "normally ordered entries vanish");
  o.check(d.g2 == 1.0, "g2 = 1");
  o.detail << "max normally-ordered |S| " << worst << ", empty-cavity g2 = " << d.g2;
}

// 6. Finite detection window converges to the long-time spectrum.
void finite_window(Outcome& o) {
  const auto t0 = Clock::now();
  const auto s = single_emitter(1.0, 0.05, 0.2, 0.05);
  const auto f = build_fluctuation_system(s, solve_classical(s));
  const CMat s0 = output_spectrum(f, 0.0).S;
  using namespace index;
  const std::pair<Eigen::Index, Eigen::Index> entries[] = {
      {b_port(), b_port()}, {b_port_dag(), b_port()}, {b_port(), b_port_dag()}, {b_port_dag(), b_port_dag()}};
  auto rel = [&](double T) {
    const CMat v = detected_correlations_finite_T(f, T);
    double num = 0.0, den = 0.0;
    for (auto [i, j] : entries) {
      num = std::max(num, std::abs(v(i, j) - s0(i, j)));
      den = std::max(den, std::abs(s0(i, j)));
    }
    return num / den;
  };
  const double e3 = rel(1e3), e4 = rel(1e4);
  o.check(e3 < 1e-2, "T = 1e3 within 1e-2");
  o.check(e4 < e3, "monotone improvement at T = 1e4");
  o.detail << "relative error " << e3 << " (T = 1e3), " << e4 << " (T = 1e4), " << seconds_since(t0) << " s";
}

// 7. Master-equation oracle against mean field and the linearized squeezing sign.
void oracle_cross_validation(Outcome& o) {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, CavitySystem>> cases;
  cases.emplace_back("N=1 eta=0.02", single_emitter(1.0, 0.05, 0.2, 0.02));
  cases.emplace_back("N=1 eta=0.01", single_emitter(1.0, 0.05, 0.2, 0.01));
  ChainSpec c;
  c.spacing = 0.3;
  c.g = 0.2;
  c.gamma = 0.05;
  c.eta = 0.05;
  cases.emplace_back("N=2 symmetric matched eta=0.05", match_system(chain_system(c, 2, Symmetry::symmetric), Symmetry::symmetric));
  c.eta = 0.02;
  cases.emplace_back("N=2 alternating eta=0.02", chain_system(c, 2, Symmetry::alternating));
  double worst = 0.0;
  bool signs = true;
  for (const auto& [name, s] : cases) {
    const auto ob = oracle::observables(oracle::oracle_steady_state(s).state);
    const auto st = solve_classical(s);
    worst = std::max(worst, std::abs(ob.a - st.alpha) / std::abs(st.alpha));
    for (size_t j = 0; j < s.size(); ++j)
      worst = std::max(worst, std::abs(ob.s[j] - st.beta(static_cast<Eigen::Index>(j))) / std::abs(st.beta(static_cast<Eigen::Index>(j))));
    const auto q = intracavity_quadratures(solve_lyapunov(build_fluctuation_system(s, st)));
    const bool same = (ob.var_x < 0.5) == (q.var_x < 0.5) && (ob.var_y < 0.5) == (q.var_y < 0.5) &&
                      ((ob.var_x < 0.5) || (ob.var_y < 0.5));
    if (!same) {
      signs = false;
      o.detail << "[" << name << ": oracle (" << ob.var_x << ", " << ob.var_y << ") linear (" << q.var_x << ", "
               << q.var_y << ")] ";
    }
  }
  const double t = seconds_since(t0);
  o.check(worst < 0.01, "mean values within 1%");
  o.check(signs, "squeezed quadrature agrees");
  o.check(t < 120.0, "runtime");
  o.detail << cases.size() << " cases, max relative deviation " << worst << ", " << t << " s";
}

// 8. Subradiant cooperativity scaling.
void cooperativity_scaling(Outcome& o) {
  const auto t0 = Clock::now();
  ChainSpec c;
  c.spacing = 0.1;
  c.gamma = 0.05;
  c.g = 0.01;
  const std::vector<size_t> ns{4, 5, 6, 8, 10, 12, 15, 20, 25, 30, 35, 40};
  const auto alt = cooperativity_scan(c, ns, Symmetry::alternating);
  const auto sym = cooperativity_scan(c, ns, Symmetry::symmetric);
  const auto ind = cooperativity_scan(c, ns, Symmetry::independent);
  bool below = true;
  for (size_t i = 0; i < ns.size(); ++i) below = below && sym.rows[i].C_eff <= ind.rows[i].C_eff;
  const double t = seconds_since(t0);
  o.check(alt.fit && alt.fit->exponent >= 3.5 && alt.fit->exponent <= 4.1, "alternating exponent in [3.5, 4.1]");
  o.check(ind.fit && std::abs(ind.fit->exponent - 1.0) < 1e-6, "independent exponent 1");
  o.check(below, "symmetric never above independent");
  o.check(t < 60.0, "runtime");
  o.detail << "alternating exponent " << alt.fit->exponent << " +- " << alt.fit->exponent_stderr << ", independent "
           << ind.fit->exponent << ", symmetric " << sym.fit->exponent << ", " << t << " s";
}

// 9. Kerr closed forms and perturbative order.
void kerr_closed_forms(Outcome& o) {
  const double g = 0.2, eta = 0.01;
  const auto k1 = kerr_correction(single_emitter(1.0, 0.05, g, eta, 0.1, 0.1));
  const cplx b1 = k1.beta1(0);
  const cplx ref = -2.0 * b1 * std::norm(b1) * (1.0 - kI * (g / eta) * b1);
  const double e1 = std::abs(k1.beta3(0) - ref) / std::abs(ref);

  ChainSpec c;
  c.g = g;
  c.eta = eta;
  double e_ind = 0.0;
  for (size_t n : {1, 2, 5, 20}) {
    const auto k = kerr_correction(chain_system(c, n, Symmetry::independent));
    e_ind = std::max(e_ind, std::abs(k.norm_beta3 / independent_kerr_magnitude(double(n), g * g / 0.05, 0.05, 1.0, eta) - 1.0));
  }

  ChainSpec c2;
  c2.g = 0.1;
  c2.eta = 1e-4;
  double e_two = 0.0;
  for (double d : {0.07, 0.2, 0.45})
    for (auto sym : {Symmetry::symmetric, Symmetry::alternating}) {
      auto cc = c2;
      cc.spacing = d;
      const auto s = match_system(chain_system(cc, 2, sym), sym);
      e_two = std::max(e_two, std::abs(kerr_correction(s).norm_beta3 / two_emitter_resonant_kerr(s) - 1.0));
    }

  auto res = [](double e) {
    const auto s = single_emitter(1.0, 0.05, 0.2, e, 0.05, 0.05);
    const auto k = kerr_correction(s);
    return kerr_residual(s, CVec(k.beta1 + k.beta3));
  };
  const double ratio = res(0.002) / res(0.001);
  o.check(e1 < 1e-12, "N = 1 reduction");
  o.check(e_ind < 1e-10, "independent closed form");
  o.check(e_two < 1e-8, "two-emitter matched formula");
  o.check(std::abs(ratio / 32.0 - 1.0) < 0.1, "eta^5 residual");
  o.detail << "N=1 " << e1 << ", independent " << e_ind << ", two-emitter " << e_two << ", residual ratio " << ratio;
}

// 10. Kerr scaling exponents.
void kerr_scaling(Outcome& o) {
  const auto t0 = Clock::now();
  ChainSpec c;
  c.spacing = 0.07;
  c.gamma = 0.05;
  c.g = 0.1;
  c.eta = 1e-4;
  std::vector<size_t> big;
  for (size_t n = 1; n <= 10000; n = static_cast<size_t>(std::ceil(n * 1.2))) big.push_back(n);
  if (big.back() != 10000) big.push_back(10000);
  const auto ind = independent_kerr_curve(c, big);
  const std::vector<size_t> ns{10, 15, 20, 30, 40, 60, 80, 100, 150, 200};
  const auto alt = kerr_scaling_scan(c, ns, Symmetry::alternating);
  const auto sym2 = kerr_scaling_point(c, 2, Symmetry::symmetric);
  const double ind2 = independent_kerr_magnitude(2.0, c.g * c.g / (c.kappa * c.gamma), c.gamma, c.kappa, c.eta);
  const double t = seconds_since(t0);
  o.check(ind.fit && std::abs(ind.fit->exponent + 3.5) <= 0.05, "independent exponent -3.5 +- 0.05");
  o.check(alt.fit && std::abs(alt.fit->exponent + 0.5) <= 0.3, "alternating exponent -0.5 +- 0.3");
  o.check(sym2.norm_beta3 > ind2, "symmetric above independent at N = 2");
  o.detail << "independent " << ind.fit->exponent << " (N <= 10^4), alternating " << alt.fit->exponent << " +- "
           << alt.fit->exponent_stderr << " (N in [" << alt.fit->x_min << ", " << alt.fit->x_max << "]), N=2 symmetric "
           << sym2.norm_beta3 << " vs independent " << ind2 << ", " << t << " s";
}

// 11. Free-space decay channels, oracle decay and radiated power ordering.
void free_space(Outcome& o) {
  const double gamma = 0.05;
  const auto ens = greens::make_chain(2, 0.3, Vec3::UnitZ(), gamma);
  const auto k = greens::coupling_kernels(ens);
  const double h = k.h(0, 1);
  const auto ch = freespace::diagonal_decay_channels(k.gamma_matrix);
  const double e_ch = std::max(std::abs(ch.lambdas(0) - gamma * (1 + std::abs(h))), std::abs(ch.lambdas(1) - gamma * (1 - std::abs(h))));

  std::vector<double> ts;
  for (int i = 0; i <= 50; ++i) ts.push_back(i / (50.0 * gamma));
  double e_decay = 0.0;
  double plane[2];
  for (int m : {1, 2}) {
    const auto ex = freespace::exciton_state(2, static_cast<size_t>(m));
    const auto states = oracle::free_decay_evolution(k, oracle::single_excitation_state(ex.coeffs), ts);
    const double rate = 2 * gamma * (1 + (m == 1 ? h : -h));
    for (size_t i = 0; i < ts.size(); ++i) {
      const double ref = std::exp(-rate * ts[i]);
      e_decay = std::max(e_decay, std::abs(oracle::excitation_number(states[i].rho, 2) - ref) / ref);
    }
    freespace::PlaneGrid grid;
    grid.z = 2.0;
    grid.nx = grid.ny = 81;
    plane[m - 1] = freespace::radiation_map(ens, freespace::coherence_matrix(ex.coeffs), grid).plane_integral;
  }
  o.check(e_ch < 1e-10, "decay channels");
  o.check(e_decay < 0.01, "oracle population decay");
  o.check(plane[0] > plane[1], "I(m=1) > I(m=2)");
  o.detail << "channel error " << e_ch << ", decay deviation " << e_decay << ", plane integrals " << plane[0] << " > "
           << plane[1];
}

// 12. Logarithmic negativity.
void entanglement(Outcome& o) {
  const auto t0 = Clock::now();
  CMat product = CMat::Zero(4, 4);
  product(2, 2) = 1.0;
  const double lp = oracle::logarithmic_negativity(product, 2, {0});
  RVec c(2);
  c << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  const CVec bell = oracle::single_excitation_state(c);
  const double lb = oracle::logarithmic_negativity(bell * bell.adjoint(), 2, {0});

  const double gamma = 0.05;
  const auto k = greens::coupling_kernels(greens::make_chain(6, 0.1, Vec3::UnitZ(), gamma));
  const auto states =
      oracle::free_decay_evolution(k, oracle::single_excitation_state(freespace::exciton_state(6, 6).coeffs), {100.0 / gamma});
  const CMat& rho = states.back().rho;
  const double center = oracle::logarithmic_negativity(rho, 6, {2});
  const double edge = oracle::logarithmic_negativity(rho, 6, {0});
  const double t = seconds_since(t0);
  o.check(std::abs(lp) < 1e-10, "product state");
  o.check(std::abs(lb - 1.0) < 1e-8, "Bell state");
  o.check(center > 0.0 && center > edge, "center > edge > 0 at t = 100/gamma");
  o.check(t < 300.0, "runtime");
  o.detail << "product " << lp << ", Bell " << lb << ", N=6 center " << center << " edge " << edge << ", " << t << " s";
}

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(PURCELL_LAB_EXE) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 13. CLI determinism across repeated and parallel runs.
void cli_determinism(Outcome& o) {
  const auto root = std::filesystem::temp_directory_path() / "purcell_lab_acceptance";
  std::filesystem::remove_all(root);
  const std::string scn = std::string(PURCELL_SCENARIO_DIR) + "/fig3.json";
  const int a = run_cli("run " + scn + " --out " + (root / "a").string() + " --workers 1");
  const int b = run_cli("run " + scn + " --out " + (root / "b").string() + " --workers 1");
  const int c = run_cli("run " + scn + " --out " + (root / "c").string() + " --workers 8");
  o.check(a == 0 && b == 0 && c == 0, "runs succeed");
  const auto csv_a = slurp(root / "a" / "detected_stats.csv");
  o.check(!csv_a.empty(), "CSV written");
  o.check(csv_a == slurp(root / "b" / "detected_stats.csv"), "repeat run identical");
  o.check(csv_a == slurp(root / "c" / "detected_stats.csv"), "8 workers identical to serial");
  o.check(slurp(root / "a" / "manifest.json") == slurp(root / "c" / "manifest.json"), "manifests identical");
  o.detail << "fig3 CSV " << csv_a.size() << " bytes, " << std::count(csv_a.begin(), csv_a.end(), '\n') << " lines";
}

} // namespace

int main() {
  const std::pair<const char*, void (*)(Outcome&)> criteria[] = {
      {"single-emitter resonance intensities", resonance_intensities},
      {"energy conservation", energy_conservation},
      {"hybrid-mode threshold", hybrid_threshold},
      {"Lyapunov correctness", lyapunov_correctness},
      {"vacuum passivity", vacuum_passivity},
      {"finite-T detection limit", finite_window},
      {"oracle cross-validation", oracle_cross_validation},
      {"subradiant cooperativity scaling", cooperativity_scaling},
      {"Kerr closed forms", kerr_closed_forms},
      {"Kerr scaling exponents", kerr_scaling},
      {"free-space physics", free_space},
      {"entanglement", entanglement},
      {"CLI determinism", cli_determinism},
  };
  int failures = 0;
  int k = 0;
  for (const auto& [name, fn] : criteria) {
    ++k;
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.str().c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d/%d criteria passed\n", k - failures, k);
  return failures == 0 ? 0 : 1;
}
