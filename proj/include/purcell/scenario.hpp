#pragma once

#include "purcell/steadystate.hpp"

#include "json.hpp"

#include <array>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace purcell::scenario {

using json = nlohmann::json;

/// Schema violation; `field()` is the dotted path of the offending entry.
class ScenarioError : public std::runtime_error {
public:
  ScenarioError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const { return field_; }

private:
  std::string field_;
};

enum class Study { response_scan, detected_stats, cooperativity_scan, kerr_scan, radiation_map, free_decay, oracle_check };

inline constexpr std::array<std::pair<Study, const char*>, 7> kStudies{{
    {Study::response_scan, "response_scan"},
    {Study::detected_stats, "detected_stats"},
    {Study::cooperativity_scan, "cooperativity_scan"},
    {Study::kerr_scan, "kerr_scan"},
    {Study::radiation_map, "radiation_map"},
    {Study::free_decay, "free_decay"},
    {Study::oracle_check, "oracle_check"},
}};

inline const char* to_string(Study s) {
  for (const auto& [k, name] : kStudies)
    if (k == s) return name;
  return "?";
}

inline const char* study_description(Study s) {
  switch (s) {
  case Study::response_scan: return "transmission, reflection and scattering intensities versus laser detuning";
  case Study::detected_stats: return "detected photon statistics (quadratures, number variance, g2) versus detuning";
  case Study::cooperativity_scan: return "matched effective cooperativity versus emitter number, with power-law fits";
  case Study::kerr_scan: return "collective Kerr correction versus N, emitter spacing or laser detuning";
  case Study::radiation_map: return "free-space radiation intensity of a single-excitation state on a plane";
  case Study::free_decay: return "master-equation free decay of an exciton state: population and negativity";
  case Study::oracle_check: return "master-equation steady state versus mean-field and linearized predictions";
  }
  return "";
}

struct Geometry {
  size_t N = 1;
  double spacing = 0.1; ///< in transition wavelengths
  Vec3 dipole = Vec3::UnitZ();
  Vec3 axis = Vec3::UnitX();
  std::vector<Vec3> positions; ///< explicit positions override the chain
};

struct Rates {
  double kappa_A = 1.0, kappa_B = 1.0;
  double gamma = 0.05;
  double g = 0.0;
  std::optional<RVec> G;
  double eta = 0.0;
  double delta_c = 0.0, delta_e = 0.0;
};

struct Scan {
  std::string axis;
  std::vector<double> values;
};

/// Cavity/emitter frequency matching. m = 0 addresses the state picked out by
/// the coupling symmetry (m = 1 symmetric, m = N alternating).
struct Matching {
  bool collective = false;
  size_t m = 0;
};

struct Grid {
  double x_min = -2.0, x_max = 2.0, y_min = -2.0, y_max = 2.0, z = 2.0;
  size_t nx = 41, ny = 41;
};

struct Scenario {
  Study study = Study::response_scan;
  std::string name;
  Geometry geometry;
  Rates rates;
  Symmetry coupling = Symmetry::symmetric;
  std::vector<Symmetry> symmetries;
  std::optional<Scan> scan;
  std::optional<double> T;
  bool finite_window = false;
  Matching matching;
  size_t exciton = 1;
  std::vector<size_t> partition;
  Grid grid;
  std::string output_directory = "out";
  std::vector<std::string> formats{"csv", "json"};
  json source; ///< the document as read
};

namespace detail {

inline std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline const json& need(const json& obj, const std::string& parent, const std::string& key) {
  const std::string path = join(parent, key);
  if (!obj.is_object() || !obj.contains(key)) throw ScenarioError(path, "required field is missing");
  return obj.at(key);
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ScenarioError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ScenarioError(path, "must be finite");
  return x;
}

inline size_t count(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) throw ScenarioError(path, "expected a non-negative integer");
  const auto x = v.get<long long>();
  if (x < 0) throw ScenarioError(path, "expected a non-negative integer");
  return static_cast<size_t>(x);
}

inline Vec3 vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw ScenarioError(path, "expected an array of 3 numbers");
  return {number(v[0], path + "[0]"), number(v[1], path + "[1]"), number(v[2], path + "[2]")};
}

inline double opt_number(const json& obj, const std::string& parent, const std::string& key, double fallback) {
  return obj.contains(key) ? number(obj.at(key), join(parent, key)) : fallback;
}

inline void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ScenarioError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) throw ScenarioError(join(path, k), "unknown field");
  }
}

inline Geometry parse_geometry(const json& g) {
  allow_keys(g, "geometry", {"N", "spacing", "dipole", "axis", "positions"});
  Geometry out;
  if (g.contains("dipole")) {
    out.dipole = vec3(g.at("dipole"), "geometry.dipole");
    if (out.dipole.norm() == 0.0) throw ScenarioError("geometry.dipole", "must be nonzero");
    out.dipole.normalize();
  }
  if (g.contains("positions")) {
    const auto& p = g.at("positions");
    if (!p.is_array() || p.empty()) throw ScenarioError("geometry.positions", "expected a nonempty array of 3-vectors");
    for (size_t i = 0; i < p.size(); ++i) out.positions.push_back(vec3(p[i], "geometry.positions[" + std::to_string(i) + "]"));
    for (size_t i = 0; i < out.positions.size(); ++i)
      for (size_t j = i + 1; j < out.positions.size(); ++j)
        if ((out.positions[i] - out.positions[j]).norm() == 0.0)
          throw ScenarioError("geometry.positions", "emitters " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
    out.N = out.positions.size();
    if (g.contains("N") && count(g.at("N"), "geometry.N") != out.N)
      throw ScenarioError("geometry.N", "does not match the number of positions");
    return out;
  }
  out.N = count(need(g, "geometry", "N"), "geometry.N");
  if (out.N < 1) throw ScenarioError("geometry.N", "must be at least 1");
  out.spacing = opt_number(g, "geometry", "spacing", out.spacing);
  if (out.spacing <= 0.0) throw ScenarioError("geometry.spacing", "must be positive");
  if (g.contains("axis")) {
    out.axis = vec3(g.at("axis"), "geometry.axis");
    if (out.axis.norm() == 0.0) throw ScenarioError("geometry.axis", "must be nonzero");
    out.axis.normalize();
  }
  return out;
}

inline Rates parse_rates(const json& r, size_t n) {
  allow_keys(r, "rates", {"kappa_A", "kappa_B", "gamma", "g", "G", "eta", "delta_c", "delta_e"});
  Rates out;
  out.kappa_A = opt_number(r, "rates", "kappa_A", 1.0);
  out.kappa_B = opt_number(r, "rates", "kappa_B", 1.0);
  if (out.kappa_A <= 0.0) throw ScenarioError("rates.kappa_A", "must be positive");
  if (out.kappa_B <= 0.0) throw ScenarioError("rates.kappa_B", "must be positive");
  out.gamma = number(need(r, "rates", "gamma"), "rates.gamma");
  if (out.gamma <= 0.0) throw ScenarioError("rates.gamma", "must be positive");
  if (r.contains("G")) {
    if (r.contains("g")) throw ScenarioError("rates.G", "give either g or G, not both");
    const auto& v = r.at("G");
    if (!v.is_array() || v.size() != n) throw ScenarioError("rates.G", "expected an array with one coupling per emitter");
    RVec G(static_cast<Eigen::Index>(n));
    for (size_t j = 0; j < n; ++j) G(static_cast<Eigen::Index>(j)) = number(v[j], "rates.G[" + std::to_string(j) + "]");
    out.G = G;
  } else {
    out.g = number(need(r, "rates", "g"), "rates.g");
  }
  out.eta = opt_number(r, "rates", "eta", 0.0);
  if (out.eta < 0.0) throw ScenarioError("rates.eta", "must be non-negative");
  out.delta_c = opt_number(r, "rates", "delta_c", 0.0);
  out.delta_e = opt_number(r, "rates", "delta_e", 0.0);
  return out;
}

inline Scan parse_scan(const json& s) {
  allow_keys(s, "scan", {"axis", "range", "points", "values"});
  Scan out;
  const auto& axis = need(s, "scan", "axis");
  if (!axis.is_string()) throw ScenarioError("scan.axis", "expected a string");
  out.axis = axis.get<std::string>();
  if (s.contains("values")) {
    if (s.contains("range") || s.contains("points")) throw ScenarioError("scan.values", "give either values or range/points");
    const auto& v = s.at("values");
    if (!v.is_array() || v.empty()) throw ScenarioError("scan.values", "expected a nonempty array");
    for (size_t i = 0; i < v.size(); ++i) out.values.push_back(number(v[i], "scan.values[" + std::to_string(i) + "]"));
    return out;
  }
  const auto& range = need(s, "scan", "range");
  if (!range.is_array() || range.size() != 2) throw ScenarioError("scan.range", "expected [start, stop]");
  const double a = number(range[0], "scan.range[0]"), b = number(range[1], "scan.range[1]");
  if (!(b > a)) throw ScenarioError("scan.range", "range is empty (stop must exceed start)");
  const size_t points = count(need(s, "scan", "points"), "scan.points");
  if (points < 2) throw ScenarioError("scan.points", "must be at least 2");
  for (size_t i = 0; i < points; ++i)
    out.values.push_back(i + 1 == points ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  return out;
}

inline Symmetry parse_symmetry(const json& v, const std::string& path) {
  if (!v.is_string()) throw ScenarioError(path, "expected one of symmetric, alternating, independent");
  try {
    return symmetry_from_string(v.get<std::string>());
  } catch (const std::invalid_argument&) {
    throw ScenarioError(path, "expected one of symmetric, alternating, independent");
  }
}

inline Matching parse_matching(const json& m, size_t n) {
  Matching out;
  if (m.is_string()) {
    const auto v = m.get<std::string>();
    if (v != "none" && v != "collective")
      throw ScenarioError("matching", "expected \"none\", \"collective\" or {\"collective\": m}");
    out.collective = v == "collective";
    return out;
  }
  allow_keys(m, "matching", {"collective"});
  out.collective = true;
  out.m = count(need(m, "matching", "collective"), "matching.collective");
  if (out.m < 1 || out.m > n) throw ScenarioError("matching.collective", "exciton index must lie in [1, N]");
  return out;
}

inline void require_axis(const Scenario& s, std::initializer_list<const char*> allowed) {
  if (!s.scan) throw ScenarioError("scan", "required field is missing");
  for (const char* a : allowed)
    if (s.scan->axis == a) return;
  std::string list;
  for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
  throw ScenarioError("scan.axis", "must be one of: " + list);
}

inline void require_integer_values(const Scan& scan, double lo) {
  for (size_t i = 0; i < scan.values.size(); ++i) {
    const double v = scan.values[i];
    if (v != std::floor(v) || v < lo) throw ScenarioError("scan.values", "entries must be integers >= " + std::to_string(int(lo)));
  }
}

} // namespace detail

/// Parses and validates a scenario document.
inline Scenario parse(const json& doc) {
  using namespace detail;
  allow_keys(doc, "", {"study", "name", "geometry", "rates", "coupling", "symmetries", "scan", "detection", "matching",
                       "state", "grid", "output"});
  Scenario s;
  s.source = doc;
  const auto& study = need(doc, "", "study");
  if (!study.is_string()) throw ScenarioError("study", "expected a string");
  bool found = false;
  for (const auto& [k, name] : kStudies)
    if (study.get<std::string>() == name) {
      s.study = k;
      found = true;
    }
  if (!found) throw ScenarioError("study", "unknown study '" + study.get<std::string>() + "'");
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) throw ScenarioError("name", "expected a string");
    s.name = doc.at("name").get<std::string>();
  }

  s.geometry = parse_geometry(need(doc, "", "geometry"));
  const size_t n = s.geometry.N;
  const bool free_space = s.study == Study::radiation_map || s.study == Study::free_decay;
  if (free_space) {
    const auto& r = need(doc, "", "rates");
    allow_keys(r, "rates", {"gamma"});
    s.rates.gamma = number(need(r, "rates", "gamma"), "rates.gamma");
    if (s.rates.gamma <= 0.0) throw ScenarioError("rates.gamma", "must be positive");
  } else {
    s.rates = parse_rates(need(doc, "", "rates"), n);
  }

  if (doc.contains("coupling")) s.coupling = parse_symmetry(doc.at("coupling"), "coupling");
  if (doc.contains("symmetries")) {
    const auto& v = doc.at("symmetries");
    if (!v.is_array() || v.empty()) throw ScenarioError("symmetries", "expected a nonempty array");
    for (size_t i = 0; i < v.size(); ++i) s.symmetries.push_back(parse_symmetry(v[i], "symmetries[" + std::to_string(i) + "]"));
  }
  if (doc.contains("scan")) s.scan = parse_scan(doc.at("scan"));
  if (doc.contains("detection")) {
    const auto& d = doc.at("detection");
    allow_keys(d, "detection", {"T", "finite_window"});
    s.T = number(need(d, "detection", "T"), "detection.T");
    if (*s.T <= 0.0) throw ScenarioError("detection.T", "must be positive");
    if (d.contains("finite_window")) {
      if (!d.at("finite_window").is_boolean()) throw ScenarioError("detection.finite_window", "expected a boolean");
      s.finite_window = d.at("finite_window").get<bool>();
    }
  }
  if (doc.contains("matching")) s.matching = parse_matching(doc.at("matching"), n);
  if (doc.contains("state")) {
    const auto& st = doc.at("state");
    allow_keys(st, "state", {"exciton", "partition"});
    s.exciton = count(need(st, "state", "exciton"), "state.exciton");
    if (s.exciton < 1 || s.exciton > n) throw ScenarioError("state.exciton", "must lie in [1, N]");
    if (st.contains("partition")) {
      const auto& p = st.at("partition");
      if (!p.is_array() || p.empty() || p.size() >= n) throw ScenarioError("state.partition", "expected a nonempty proper subset of emitter indices");
      for (size_t i = 0; i < p.size(); ++i) {
        const size_t j = count(p[i], "state.partition[" + std::to_string(i) + "]");
        if (j >= n) throw ScenarioError("state.partition[" + std::to_string(i) + "]", "emitter index out of range");
        for (size_t k : s.partition)
          if (k == j) throw ScenarioError("state.partition[" + std::to_string(i) + "]", "duplicate emitter index");
        s.partition.push_back(j);
      }
    }
  }
  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    allow_keys(g, "grid", {"x_range", "y_range", "z", "nx", "ny"});
    auto range = [&](const char* key, double& lo, double& hi) {
      if (!g.contains(key)) return;
      const std::string path = std::string("grid.") + key;
      const auto& r = g.at(key);
      if (!r.is_array() || r.size() != 2) throw ScenarioError(path, "expected [min, max]");
      lo = number(r[0], path + "[0]");
      hi = number(r[1], path + "[1]");
      if (!(hi > lo)) throw ScenarioError(path, "range is empty (max must exceed min)");
    };
    range("x_range", s.grid.x_min, s.grid.x_max);
    range("y_range", s.grid.y_min, s.grid.y_max);
    s.grid.z = opt_number(g, "grid", "z", s.grid.z);
    if (g.contains("nx")) s.grid.nx = count(g.at("nx"), "grid.nx");
    if (g.contains("ny")) s.grid.ny = count(g.at("ny"), "grid.ny");
    if (s.grid.nx < 2) throw ScenarioError("grid.nx", "must be at least 2");
    if (s.grid.ny < 2) throw ScenarioError("grid.ny", "must be at least 2");
  }
  if (doc.contains("output")) {
    const auto& o = doc.at("output");
    allow_keys(o, "output", {"directory", "formats"});
    if (o.contains("directory")) {
      if (!o.at("directory").is_string() || o.at("directory").get<std::string>().empty())
        throw ScenarioError("output.directory", "expected a nonempty string");
      s.output_directory = o.at("directory").get<std::string>();
    }
    if (o.contains("formats")) {
      const auto& f = o.at("formats");
      if (!f.is_array() || f.empty()) throw ScenarioError("output.formats", "expected a nonempty array");
      s.formats.clear();
      for (size_t i = 0; i < f.size(); ++i) {
        const std::string path = "output.formats[" + std::to_string(i) + "]";
        if (!f[i].is_string() || (f[i] != "csv" && f[i] != "json")) throw ScenarioError(path, "expected \"csv\" or \"json\"");
        s.formats.push_back(f[i].get<std::string>());
      }
    }
  }

  // study-specific requirements
  switch (s.study) {
  case Study::response_scan:
    require_axis(s, {"delta"});
    break;
  case Study::detected_stats:
    require_axis(s, {"delta"});
    if (!s.T) throw ScenarioError("detection", "required field is missing");
    break;
  case Study::cooperativity_scan:
    require_axis(s, {"N"});
    require_integer_values(*s.scan, 1.0);
    if (s.rates.G) throw ScenarioError("rates.G", "cooperativity scans build G from g and the symmetry");
    if (!s.geometry.positions.empty()) throw ScenarioError("geometry.positions", "cooperativity scans need a chain geometry");
    break;
  case Study::kerr_scan:
    require_axis(s, {"N", "d", "delta"});
    if (s.rates.eta <= 0.0) throw ScenarioError("rates.eta", "Kerr scans need a positive drive");
    if (s.scan->axis == "N") require_integer_values(*s.scan, 1.0);
    if (s.scan->axis == "d") {
      if (n != 2) throw ScenarioError("geometry.N", "distance scans use exactly 2 emitters");
      for (double d : s.scan->values)
        if (d <= 0.0) throw ScenarioError("scan.values", "distances must be positive");
    }
    if (s.scan->axis != "delta" && s.rates.G) throw ScenarioError("rates.G", "N and d scans build G from g and the symmetry");
    if (s.scan->axis != "delta" && !s.geometry.positions.empty())
      throw ScenarioError("geometry.positions", "N and d scans need a chain geometry");
    break;
  case Study::radiation_map:
    break;
  case Study::free_decay:
    require_axis(s, {"t"});
    if (n > 6) throw ScenarioError("geometry.N", "free decay supports at most 6 emitters");
    for (double t : s.scan->values)
      if (t < 0.0) throw ScenarioError("scan.values", "times must be non-negative");
    for (size_t i = 1; i < s.scan->values.size(); ++i)
      if (s.scan->values[i] < s.scan->values[i - 1]) throw ScenarioError("scan.values", "times must be non-decreasing");
    break;
  case Study::oracle_check:
    require_axis(s, {"delta", "eta"});
    if (n > 3) throw ScenarioError("geometry.N", "the master-equation oracle supports at most 3 emitters");
    for (double e : s.scan->values)
      if (s.scan->axis == "eta" && e < 0.0) throw ScenarioError("scan.values", "drive amplitudes must be non-negative");
    break;
  }
  if (s.symmetries.empty()) {
    if (s.study == Study::cooperativity_scan)
      s.symmetries = {Symmetry::symmetric, Symmetry::alternating, Symmetry::independent};
    else
      s.symmetries = {s.coupling};
  }
  return s;
}

inline Scenario load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("<file>", "cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return parse(doc);
}

} // namespace purcell::scenario
