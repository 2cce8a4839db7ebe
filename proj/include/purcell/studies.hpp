#pragma once

#include "purcell/fluctuations.hpp"
#include "purcell/freespace.hpp"
#include "purcell/kerr.hpp"
#include "purcell/oracle.hpp"
#include "purcell/scenario.hpp"

#include <atomic>
#include <charconv>
#include <exception>
#include <filesystem>
#include <functional>
#include <set>
#include <thread>
#include <variant>

#ifndef PURCELL_LAB_VERSION
#define PURCELL_LAB_VERSION "0.0.0"
#endif

namespace purcell::studies {

using scenario::json;
using scenario::Scenario;
using scenario::Study;

/// Runs fn(0..count-1) on up to `workers` threads. Results land in index
/// order; if any task throws, the exception of the lowest failing index is
/// rethrown, so the outcome never depends on scheduling.
template <class R>
std::vector<R> parallel_map(size_t count, size_t workers, const std::function<R(size_t)>& fn) {
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const size_t threads = std::min(std::max<size_t>(workers, 1), std::max<size_t>(count, 1));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  std::vector<R> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

using Cell = std::variant<double, std::string>;
using Row = std::vector<Cell>;

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += '\n';
  for (const auto& row : t.rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      if (const auto* d = std::get_if<double>(&row[i]))
        out += format_double(*d);
      else
        out += std::get<std::string>(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline json to_json(const Table& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::object();
    for (size_t i = 0; i < row.size(); ++i) {
      if (const auto* d = std::get_if<double>(&row[i]))
        r[t.header[i]] = std::isfinite(*d) ? json(*d) : json(nullptr);
      else
        r[t.header[i]] = std::get<std::string>(row[i]);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

struct StudyResult {
  Table table;
  json summary = json::object();
};

namespace detail {

inline json fit_json(const std::optional<linalg::PowerLawFit>& fit) {
  if (!fit) return nullptr;
  return {{"exponent", fit->exponent},   {"exponent_stderr", fit->exponent_stderr},
          {"log_prefactor", fit->log_prefactor}, {"points", fit->points},
          {"N_min", fit->x_min},         {"N_max", fit->x_max}};
}

inline greens::EmitterEnsemble ensemble(const Scenario& s, size_t n, double spacing) {
  const auto& g = s.geometry;
  if (!g.positions.empty()) {
    greens::EmitterEnsemble e;
    e.positions = g.positions;
    e.dipole = g.dipole;
    e.gamma = s.rates.gamma;
    return e;
  }
  return greens::make_chain(n, spacing, g.dipole, s.rates.gamma, 2.0 * kPi, g.axis);
}

/// Cavity system for N emitters at the given spacing and coupling symmetry,
/// with the scenario's mirror rates, drive and base detunings.
inline CavitySystem system(const Scenario& s, size_t n, double spacing, Symmetry sym) {
  CavitySystem sys;
  sys.kappa_A = s.rates.kappa_A;
  sys.kappa_B = s.rates.kappa_B;
  sys.eta = s.rates.eta;
  sys.delta_c = s.rates.delta_c;
  sys.delta_e = s.rates.delta_e;
  sys.G = s.rates.G ? *s.rates.G : coupling_vector(n, s.rates.g, sym);
  if (sym == Symmetry::independent || n < 2)
    sys.kernels = greens::independent_kernels(n, s.rates.gamma);
  else
    sys.kernels = greens::coupling_kernels(ensemble(s, n, spacing));
  return sys;
}

/// Applies the scenario's matching: cavity on resonance with the laser and
/// emitter detuning set to the chosen collective resonance.
inline CavitySystem apply_matching(const Scenario& s, CavitySystem sys, Symmetry sym) {
  if (!s.matching.collective) return sys;
  if (s.matching.m == 0) return match_system(std::move(sys), sym);
  const size_t n = sys.size();
  const double guess = n < 2 ? 0.0
                             : 2.0 * sys.kernels.omega(0, 1) *
                                   std::cos(kPi * static_cast<double>(s.matching.m) / (static_cast<double>(n) + 1.0));
  sys.delta_c = 0.0;
  sys.delta_e = matched_shift(sys, guess);
  return sys;
}

inline CavitySystem base_system(const Scenario& s) {
  return apply_matching(s, system(s, s.geometry.N, s.geometry.spacing, s.coupling), s.coupling);
}

inline CavitySystem shifted(CavitySystem sys, double delta) {
  sys.delta_c += delta;
  sys.delta_e += delta;
  return sys;
}

inline double require_balanced(const Scenario& s) {
  if (s.rates.kappa_A != s.rates.kappa_B)
    throw scenario::ScenarioError("rates.kappa_B", "this scan needs balanced mirrors (kappa_A = kappa_B)");
  return s.rates.kappa_A;
}

inline ChainSpec chain_spec(const Scenario& s) {
  ChainSpec c;
  c.spacing = s.geometry.spacing;
  c.kappa = require_balanced(s);
  c.gamma = s.rates.gamma;
  c.g = s.rates.g;
  c.eta = s.rates.eta;
  c.dipole = s.geometry.dipole;
  c.axis = s.geometry.axis;
  return c;
}

} // namespace detail

inline StudyResult response_scan(const Scenario& s, size_t workers) {
  const CavitySystem base = detail::base_system(s);
  const auto& xs = s.scan->values;
  const auto rows = parallel_map<Row>(xs.size(), workers, [&](size_t i) {
    const auto r = linear_response(detail::shifted(base, xs[i]));
    return Row{xs[i], r.abs_t2, r.abs_r2, r.abs_s2, r.t_c.real(), r.t_c.imag(), r.r_c.real(), r.r_c.imag(), r.phi,
               r.phi_emitter};
  });
  StudyResult out;
  out.table = {{"delta", "abs_t2", "abs_r2", "abs_s2", "re_t", "im_t", "re_r", "im_r", "phi", "phi_emitter"}, rows};
  out.summary["delta_e_base"] = base.delta_e;
  out.summary["delta_c_base"] = base.delta_c;
  return out;
}

inline StudyResult detected_stats(const Scenario& s, size_t workers) {
  const CavitySystem base = detail::base_system(s);
  const double T = *s.T;
  const auto& xs = s.scan->values;
  struct Point {
    Row row;
    std::vector<std::string> warnings;
  };
  const auto pts = parallel_map<Point>(xs.size(), workers, [&](size_t i) {
    const CavitySystem p = detail::shifted(base, xs[i]);
    DetectedStats d;
    if (s.finite_window) {
      const ClassicalState st = solve_classical(p);
      const FluctuationSystem f = build_fluctuation_system(p, st);
      const auto stab = stability(f.M);
      if (!stab.is_stable) throw NumericalError("operating point is unstable at delta = " + format_double(xs[i]));
      const auto [b, a] = detected_mean_amplitudes(p, st, T);
      d = detected_statistics(detected_correlations_finite_T(f, T), b, a, T, -stab.spectral_abscissa);
    } else {
      d = detect_transmission(p, T);
    }
    const double n_coh = std::norm(d.mean_amp_t);
    return Point{Row{xs[i], d.n_det, n_coh, d.var_x, d.var_y, d.var_n, d.var_n_closed, d.g2, d.g2_closed,
                     d.n_det > 0.0 ? d.var_n / d.n_det : std::numeric_limits<double>::quiet_NaN()},
                 d.warnings};
  });
  StudyResult out;
  out.table.header = {"delta", "n_det", "n_coherent", "var_x", "var_y", "var_n", "var_n_closed", "g2", "g2_closed",
                      "fano"};
  std::set<std::string> warnings;
  for (const auto& p : pts) {
    out.table.rows.push_back(p.row);
    warnings.insert(p.warnings.begin(), p.warnings.end());
  }
  out.summary["T"] = T;
  out.summary["finite_window"] = s.finite_window;
  out.summary["warnings"] = std::vector<std::string>(warnings.begin(), warnings.end());
  return out;
}

inline StudyResult cooperativity_scan(const Scenario& s, size_t workers) {
  ChainSpec spec = detail::chain_spec(s);
  const auto& xs = s.scan->values;
  const size_t per = xs.size();
  const auto rows = parallel_map<CooperativityRow>(per * s.symmetries.size(), workers, [&](size_t i) {
    return cooperativity_point(spec, static_cast<size_t>(xs[i % per]), s.symmetries[i / per]);
  });
  StudyResult out;
  out.table.header = {"symmetry", "N", "delta_e_match", "gamma_eff", "C_eff"};
  json fits = json::object();
  for (size_t k = 0; k < s.symmetries.size(); ++k) {
    std::vector<CooperativityRow> block(rows.begin() + static_cast<long>(k * per), rows.begin() + static_cast<long>((k + 1) * per));
    for (const auto& r : block)
      out.table.rows.push_back(Row{to_string(s.symmetries[k]), static_cast<double>(r.N), r.delta_e_match, r.gamma_eff, r.C_eff});
    fits[to_string(s.symmetries[k])] = detail::fit_json(fit_rows(block, [](const CooperativityRow& r) { return r.C_eff; }));
  }
  out.summary["fits"] = fits;
  return out;
}

inline StudyResult kerr_scan(const Scenario& s, size_t workers) {
  const auto& xs = s.scan->values;
  const std::string& axis = s.scan->axis;
  const size_t per = xs.size();
  const auto rows = parallel_map<KerrRow>(per * s.symmetries.size(), workers, [&](size_t i) {
    const Symmetry sym = s.symmetries[i / per];
    const double x = xs[i % per];
    if (axis == "N") {
      const auto n = static_cast<size_t>(x);
      CavitySystem sys = detail::system(s, n, s.geometry.spacing, sym);
      sys = detail::apply_matching(s, sys, sym);
      return kerr_row(sys, n, s.geometry.spacing, sym, true);
    }
    if (axis == "d") {
      CavitySystem sys = detail::apply_matching(s, detail::system(s, 2, x, sym), sym);
      return kerr_row(sys, 2, x, sym, true);
    }
    CavitySystem base = detail::apply_matching(s, detail::system(s, s.geometry.N, s.geometry.spacing, sym), sym);
    KerrRow r = kerr_detuning_point(base, x, sym);
    r.delta = base.delta_e + x;
    return r;
  });
  StudyResult out;
  out.table.header = {"symmetry", axis, "N", "d", "delta_e", "norm_beta3", "t_lin_abs2", "t_nl_abs2", "max_population"};
  json fits = json::object();
  for (size_t k = 0; k < s.symmetries.size(); ++k) {
    std::vector<KerrRow> block(rows.begin() + static_cast<long>(k * per), rows.begin() + static_cast<long>((k + 1) * per));
    for (size_t i = 0; i < per; ++i) {
      const auto& r = block[i];
      out.table.rows.push_back(Row{to_string(s.symmetries[k]), xs[i], static_cast<double>(r.N), r.d, r.delta, r.norm_beta3,
                                   r.t_lin_abs2, r.t_nl_abs2, r.max_population});
    }
    if (axis == "N") fits[to_string(s.symmetries[k])] = detail::fit_json(fit_rows(block, [](const KerrRow& r) { return r.norm_beta3; }));
  }
  if (axis == "N") out.summary["fits"] = fits;
  return out;
}

inline StudyResult radiation_map(const Scenario& s, size_t workers) {
  const auto ens = detail::ensemble(s, s.geometry.N, s.geometry.spacing);
  ens.validate();
  const size_t n = ens.size();
  const auto ex = freespace::exciton_state(n, s.exciton);
  const CMat rho = freespace::coherence_matrix(ex.coeffs);
  const auto& g = s.grid;
  const double dx = (g.x_max - g.x_min) / static_cast<double>(g.nx - 1);
  const double dy = (g.y_max - g.y_min) / static_cast<double>(g.ny - 1);
  const auto lines = parallel_map<std::vector<double>>(g.ny, workers, [&](size_t iy) {
    std::vector<double> line(g.nx);
    for (size_t ix = 0; ix < g.nx; ++ix) {
      const Vec3 r(g.x_min + dx * static_cast<double>(ix), g.y_min + dy * static_cast<double>(iy), g.z);
      line[ix] = freespace::radiation_intensity(ens, rho, r).value_or(std::numeric_limits<double>::quiet_NaN());
    }
    return line;
  });
  double max_i = 0.0, integral = 0.0;
  size_t skipped = 0;
  for (const auto& line : lines)
    for (double v : line) {
      if (std::isnan(v)) {
        ++skipped;
        continue;
      }
      max_i = std::max(max_i, v);
      integral += v * dx * dy;
    }
  StudyResult out;
  out.table.header = {"x", "y", "intensity", "normalized"};
  for (size_t iy = 0; iy < g.ny; ++iy)
    for (size_t ix = 0; ix < g.nx; ++ix) {
      const double v = lines[iy][ix];
      out.table.rows.push_back(Row{g.x_min + dx * static_cast<double>(ix), g.y_min + dy * static_cast<double>(iy), v,
                                   max_i > 0.0 ? v / max_i : v});
    }
  const auto k = greens::coupling_kernels(ens);
  out.summary["max_intensity"] = max_i;
  out.summary["plane_integral"] = integral;
  out.summary["skipped_points"] = skipped;
  out.summary["collective_decay_rate"] = freespace::collective_decay_rate(ex.coeffs, k.gamma_matrix);
  out.summary["exciton_energy_shift"] = ex.coeffs.dot(k.omega * ex.coeffs);
  return out;
}

inline StudyResult free_decay(const Scenario& s, size_t /*workers*/) {
  const auto ens = detail::ensemble(s, s.geometry.N, s.geometry.spacing);
  ens.validate();
  const size_t n = ens.size();
  const auto k = greens::coupling_kernels(ens);
  const auto ex = freespace::exciton_state(n, s.exciton);
  const auto states = oracle::free_decay_evolution(k, oracle::single_excitation_state(ex.coeffs), s.scan->values);
  const double rate = freespace::collective_decay_rate(ex.coeffs, k.gamma_matrix);
  StudyResult out;
  out.table.header = {"t", "excitation", "single_rate_estimate"};
  if (!s.partition.empty()) out.table.header.push_back("log_negativity");
  for (size_t i = 0; i < states.size(); ++i) {
    const double t = s.scan->values[i];
    Row row{t, oracle::excitation_number(states[i].rho, n), std::exp(-2.0 * rate * t)};
    if (!s.partition.empty()) row.emplace_back(oracle::logarithmic_negativity(states[i].rho, n, s.partition));
    out.table.rows.push_back(std::move(row));
  }
  out.summary["initial_decay_rate"] = rate;
  const RVec lambdas = freespace::diagonal_decay_channels(k.gamma_matrix).lambdas;
  out.summary["decay_channels"] = std::vector<double>(lambdas.data(), lambdas.data() + lambdas.size());
  return out;
}

inline StudyResult oracle_check(const Scenario& s, size_t workers) {
  const CavitySystem base = detail::base_system(s);
  const auto& xs = s.scan->values;
  const bool eta_axis = s.scan->axis == "eta";
  const auto rows = parallel_map<Row>(xs.size(), workers, [&](size_t i) {
    CavitySystem p = base;
    if (eta_axis)
      p.eta = xs[i];
    else
      p = detail::shifted(base, xs[i]);
    const auto res = oracle::oracle_steady_state(p);
    const auto o = oracle::observables(res.state);
    const ClassicalState st = solve_classical(p);
    const auto f = build_fluctuation_system(p, st);
    const auto q = intracavity_quadratures(solve_lyapunov(f));
    auto rel = [](cplx a, cplx b) { return std::abs(b) > 0.0 ? std::abs(a - b) / std::abs(b) : std::abs(a - b); };
    double rel_s = 0.0;
    for (size_t j = 0; j < p.size(); ++j) rel_s = std::max(rel_s, rel(o.s[j], st.beta(static_cast<Eigen::Index>(j))));
    return Row{xs[i],     o.a.real(), o.a.imag(), st.alpha.real(), st.alpha.imag(), rel(o.a, st.alpha), rel_s,
               o.var_x,   o.var_y,    q.var_x,    q.var_y,         o.g2,            static_cast<double>(res.n_max)};
  });
  StudyResult out;
  out.table = {{s.scan->axis, "oracle_re_a", "oracle_im_a", "meanfield_re_a", "meanfield_im_a", "rel_err_a", "max_rel_err_s",
                "oracle_var_x", "oracle_var_y", "linear_var_x", "linear_var_y", "oracle_g2", "n_max"},
               rows};
  return out;
}

inline StudyResult run_study(const Scenario& s, size_t workers) {
  switch (s.study) {
  case Study::response_scan: return response_scan(s, workers);
  case Study::detected_stats: return detected_stats(s, workers);
  case Study::cooperativity_scan: return cooperativity_scan(s, workers);
  case Study::kerr_scan: return kerr_scan(s, workers);
  case Study::radiation_map: return radiation_map(s, workers);
  case Study::free_decay: return free_decay(s, workers);
  case Study::oracle_check: return oracle_check(s, workers);
  }
  throw std::logic_error("unhandled study");
}

/// Resolved parameters with every default filled in.
inline json resolved_parameters(const Scenario& s) {
  auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  json j;
  j["study"] = to_string(s.study);
  j["name"] = s.name;
  json geo;
  geo["N"] = s.geometry.N;
  geo["dipole"] = vec(s.geometry.dipole);
  if (s.geometry.positions.empty()) {
    geo["spacing"] = s.geometry.spacing;
    geo["axis"] = vec(s.geometry.axis);
  } else {
    geo["positions"] = json::array();
    for (const auto& p : s.geometry.positions) geo["positions"].push_back(vec(p));
  }
  j["geometry"] = geo;
  json r;
  r["gamma"] = s.rates.gamma;
  if (s.study != Study::radiation_map && s.study != Study::free_decay) {
    r["kappa_A"] = s.rates.kappa_A;
    r["kappa_B"] = s.rates.kappa_B;
    if (s.rates.G)
      r["G"] = std::vector<double>(s.rates.G->data(), s.rates.G->data() + s.rates.G->size());
    else
      r["g"] = s.rates.g;
    r["eta"] = s.rates.eta;
    r["delta_c"] = s.rates.delta_c;
    r["delta_e"] = s.rates.delta_e;
    j["coupling"] = to_string(s.coupling);
    json syms = json::array();
    for (auto sym : s.symmetries) syms.push_back(to_string(sym));
    j["symmetries"] = syms;
    j["matching"] = s.matching.collective ? json{{"collective", s.matching.m}} : json("none");
  }
  j["rates"] = r;
  if (s.scan) j["scan"] = {{"axis", s.scan->axis}, {"values", s.scan->values}};
  if (s.T) j["detection"] = {{"T", *s.T}, {"finite_window", s.finite_window}};
  if (s.study == Study::radiation_map || s.study == Study::free_decay) {
    j["state"] = {{"exciton", s.exciton}, {"partition", s.partition}};
  }
  if (s.study == Study::radiation_map)
    j["grid"] = {{"x_range", {s.grid.x_min, s.grid.x_max}}, {"y_range", {s.grid.y_min, s.grid.y_max}},
                 {"z", s.grid.z}, {"nx", s.grid.nx}, {"ny", s.grid.ny}};
  j["output"] = {{"directory", s.output_directory}, {"formats", s.formats}};
  return j;
}

struct RunOutput {
  std::vector<std::filesystem::path> files;
  StudyResult result;
};

/// Runs the scenario and writes `<study>.csv` (and `<study>.json` when
/// requested) plus `manifest.json` into `dir`.
inline RunOutput run_and_write(const Scenario& s, const std::filesystem::path& dir, size_t workers) {
  RunOutput out;
  out.result = run_study(s, workers);
  std::filesystem::create_directories(dir);
  const std::string stem = to_string(s.study);
  auto write = [&](const std::string& name, const std::string& text) {
    const auto path = dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << text;
    out.files.push_back(path);
  };
  json outputs = json::array();
  for (const auto& fmt : s.formats) {
    if (fmt == "csv") {
      write(stem + ".csv", to_csv(out.result.table));
      outputs.push_back(stem + ".csv");
    } else if (fmt == "json") {
      write(stem + ".json", to_json(out.result.table).dump(2) + "\n");
      outputs.push_back(stem + ".json");
    }
  }
  json manifest;
  manifest["tool"] = "purcell-lab";
  manifest["version"] = PURCELL_LAB_VERSION;
  manifest["study"] = stem;
  manifest["parameters"] = resolved_parameters(s);
  manifest["outputs"] = outputs;
  manifest["rows"] = out.result.table.rows.size();
  manifest["columns"] = out.result.table.header;
  manifest["summary"] = out.result.summary;
  manifest["float_format"] = "shortest round-trip decimal (at most 17 significant digits)";
  write("manifest.json", manifest.dump(2) + "\n");
  return out;
}

} // namespace purcell::studies
