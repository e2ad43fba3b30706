#include "cli_app.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "lirlab/covering.hpp"
#include "lirlab/doubling.hpp"
#include "lirlab/lir.hpp"

namespace fs = std::filesystem;

namespace lirlab::cli {

// ---------------------------------------------------------------- config parsing

const std::vector<std::string>& known_checks()
{
  // pipeline order
  static const std::vector<std::string> order = {
      "radius",   "comparability",  "cover",  "ellipticity",   "solve",         "decomposition", "series",
      "local_estimate", "chain",    "bootstrap", "global",     "interpolation", "scaling",       "double"};
  return order;
}

namespace {

std::string join_path(const std::string& base, const std::string& key)
{
  return base.empty() ? key : base + "." + key;
}

std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

const json* find(const json& obj, const std::string& key)
{
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_number(const json& v, const std::string& path)
{
  if (!v.is_number()) throw ConfigInvalid(path, "expected a number");
  return v.get<double>();
}

long long get_integer(const json& v, const std::string& path)
{
  if (!v.is_number_integer()) throw ConfigInvalid(path, "expected an integer");
  return v.get<long long>();
}

std::string get_string(const json& v, const std::string& path)
{
  if (!v.is_string()) throw ConfigInvalid(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> get_numbers(const json& v, const std::string& path)
{
  if (!v.is_array()) throw ConfigInvalid(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_number(v[i], index_path(path, i)));
  return out;
}

std::vector<int> get_ints(const json& v, const std::string& path)
{
  if (!v.is_array()) throw ConfigInvalid(path, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(static_cast<int>(get_integer(v[i], index_path(path, i))));
  return out;
}

Rational parse_rational(const std::string& s, const std::string& path)
{
  try {
    const auto slash = s.find('/');
    std::size_t used = 0;
    if (slash == std::string::npos) {
      const long long p = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return Rational(p);
    }
    const long long p = std::stoll(s.substr(0, slash), &used);
    if (used != slash) throw std::invalid_argument(s);
    const std::string qs = s.substr(slash + 1);
    const long long q = std::stoll(qs, &used);
    if (used != qs.size() || q == 0) throw std::invalid_argument(s);
    return Rational(p, q);
  } catch (const std::exception&) {
    throw ConfigInvalid(path, "expected an integer or a fraction p/q, got \"" + s + "\"");
  }
}

Rational get_rational(const json& v, const std::string& path)
{
  if (v.is_number_integer()) return Rational(v.get<long long>());
  if (v.is_string()) return parse_rational(v.get<std::string>(), path);
  if (v.is_number()) {
    // finite decimals such as 1.5 are accepted when they are exact in base 2 with a small denominator
    const double d = v.get<double>();
    for (long long q = 1; q <= 1024; q *= 2)
      if (std::abs(d * q - std::round(d * q)) < 1e-12) return Rational(static_cast<long long>(std::round(d * q)), q);
    throw ConfigInvalid(path, "use a fraction string such as \"3/2\"");
  }
  throw ConfigInvalid(path, "expected an integer or a fraction string");
}

void reject_unknown(const json& obj, const std::string& path, const std::vector<std::string>& allowed)
{
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigInvalid(join_path(path, it.key()), "unknown key");
}

const json& require_object(const json& v, const std::string& path)
{
  if (!v.is_object()) throw ConfigInvalid(path, "expected an object");
  return v;
}

void parse_manifold(const json& v, ExperimentConfig& c)
{
  const std::string P = "manifold";
  require_object(v, P);
  reject_unknown(v, P, {"kind", "dimension", "periods", "amplitude", "frequency", "boundary_length"});
  const json* k = find(v, "kind");
  if (!k) throw ConfigInvalid(P + ".kind", "missing");
  const std::string kind = get_string(*k, P + ".kind");
  const json* d = find(v, "dimension");
  if (!d) throw ConfigInvalid(P + ".dimension", "missing");
  const long long n = get_integer(*d, P + ".dimension");
  if (n < 1 || n > 3) throw ConfigInvalid(P + ".dimension", "must be 1, 2 or 3");
  std::vector<double> periods(n, 2 * pi);
  if (const json* p = find(v, "periods")) {
    periods = get_numbers(*p, P + ".periods");
    if (static_cast<long long>(periods.size()) != n) throw ConfigInvalid(P + ".periods", "needs one entry per axis");
    for (std::size_t i = 0; i < periods.size(); ++i)
      if (!(periods[i] > 0)) throw ConfigInvalid(index_path(P + ".periods", i), "must be positive");
  }
  if (kind == "flat_torus") {
    c.manifold = ManifoldModel::flat(periods);
  } else if (kind == "bumpy_torus") {
    const json* a = find(v, "amplitude");
    if (!a) throw ConfigInvalid(P + ".amplitude", "missing");
    const double amp = get_number(*a, P + ".amplitude");
    if (!(std::abs(amp) < 1)) throw ConfigInvalid(P + ".amplitude", "must satisfy |a| < 1");
    std::vector<int> freq(n, 1);
    if (const json* f = find(v, "frequency")) {
      freq = get_ints(*f, P + ".frequency");
      if (static_cast<long long>(freq.size()) != n) throw ConfigInvalid(P + ".frequency", "needs one entry per axis");
    }
    c.manifold = ManifoldModel::bumpy(periods, amp, freq);
  } else if (kind == "cylinder_with_boundary") {
    if (n < 2) throw ConfigInvalid(P + ".dimension", "a cylinder needs dimension >= 2");
    const json* b = find(v, "boundary_length");
    if (!b) throw ConfigInvalid(P + ".boundary_length", "missing");
    const double L = get_number(*b, P + ".boundary_length");
    if (!(L > 0)) throw ConfigInvalid(P + ".boundary_length", "must be positive");
    c.manifold = ManifoldModel::cylinder(periods, L);
  } else {
    throw ConfigInvalid(P + ".kind", "unknown manifold kind \"" + kind + "\"");
  }
}

void check_grid(const std::vector<int>& g, std::size_t dim, const std::string& path)
{
  if (g.size() != dim) throw ConfigInvalid(path, "needs " + std::to_string(dim) + " entries");
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] < 4) throw ConfigInvalid(index_path(path, i), "resolution must be >= 4");
}

}  // namespace

ExperimentConfig parse_config(const json& doc)
{
  if (!doc.is_object()) throw ConfigInvalid("$", "configuration must be a JSON object");
  ExperimentConfig c;
  c.raw = doc;
  reject_unknown(doc, "", {"version", "seed", "manifold", "grid", "operator", "epsilon", "m", "r", "r_sweep", "center",
                           "checks", "radius_field", "series", "instances", "global", "double", "interpolation",
                           "scaling", "output"});
  const json* v = find(doc, "version");
  if (!v) throw ConfigInvalid("version", "missing");
  if (get_integer(*v, "version") != schema_version)
    throw ConfigInvalid("version", "unsupported schema version (expected " + std::to_string(schema_version) + ")");
  const json* s = find(doc, "seed");
  if (!s) throw ConfigInvalid("seed", "missing (runs must be seeded)");
  if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0))
    throw ConfigInvalid("seed", "expected a nonnegative integer");
  c.seed = s->get<std::uint64_t>();

  const json* mf = find(doc, "manifold");
  if (!mf) throw ConfigInvalid("manifold", "missing");
  parse_manifold(*mf, c);
  const std::size_t n = static_cast<std::size_t>(c.manifold.dimension);

  const json* g = find(doc, "grid");
  if (!g) throw ConfigInvalid("grid", "missing");
  c.grid = get_ints(*g, "grid");
  check_grid(c.grid, n, "grid");

  if (const json* o = find(doc, "operator")) {
    require_object(*o, "operator");
    reject_unknown(*o, "operator", {"kind", "c"});
    if (const json* k = find(*o, "kind")) c.op = get_string(*k, "operator.kind");
    if (c.op != "laplacian" && c.op != "dirac" && c.op != "degenerate")
      throw ConfigInvalid("operator.kind", "unknown operator \"" + c.op + "\"");
    if (const json* cc = find(*o, "c")) c.op_c = get_number(*cc, "operator.c");
    if (!(c.op_c >= 0)) throw ConfigInvalid("operator.c", "must be >= 0");
    if (c.op == "dirac" && n != 3) throw ConfigInvalid("operator.kind", "the Dirac-type operator needs dimension 3");
    if (c.op == "dirac" && c.op_c != 0) throw ConfigInvalid("operator.c", "only the Laplacian takes a zeroth-order term");
  }
  if (const json* e = find(doc, "epsilon")) c.epsilon = get_number(*e, "epsilon");
  if (!(c.epsilon > 0 && c.epsilon < 1)) throw ConfigInvalid("epsilon", "must lie in (0, 1)");
  if (const json* m = find(doc, "m")) c.m = static_cast<int>(get_integer(*m, "m"));
  if (c.m < 1) throw ConfigInvalid("m", "must be >= 1");
  if (const json* r = find(doc, "r")) c.r = get_rational(*r, "r");
  if (!(c.r >= 1)) throw ConfigInvalid("r", "must be >= 1");
  if (const json* rs = find(doc, "r_sweep")) c.r_sweep = get_numbers(*rs, "r_sweep");
  if (c.r_sweep.empty()) throw ConfigInvalid("r_sweep", "must not be empty");
  for (std::size_t i = 0; i < c.r_sweep.size(); ++i)
    if (!(c.r_sweep[i] > 0)) throw ConfigInvalid(index_path("r_sweep", i), "must be positive");
  c.center.assign(n, 0.0);
  if (const json* ce = find(doc, "center")) {
    c.center = get_numbers(*ce, "center");
    if (c.center.size() != n) throw ConfigInvalid("center", "needs one coordinate per axis");
  }
  if (const json* ch = find(doc, "checks")) {
    if (!ch->is_array()) throw ConfigInvalid("checks", "expected an array of check names");
    for (std::size_t i = 0; i < ch->size(); ++i) {
      const std::string name = get_string((*ch)[i], index_path("checks", i));
      const auto& kc = known_checks();
      if (std::find(kc.begin(), kc.end(), name) == kc.end())
        throw ConfigInvalid(index_path("checks", i), "unknown check \"" + name + "\"");
      c.checks.push_back(name);
    }
  }
  if (const json* rf = find(doc, "radius_field")) {
    require_object(*rf, "radius_field");
    reject_unknown(*rf, "radius_field", {"mode", "csv", "value", "value_b"});
    if (const json* md = find(*rf, "mode")) c.radius.mode = get_string(*md, "radius_field.mode");
    if (c.radius.mode != "computed" && c.radius.mode != "injected" && c.radius.mode != "constant" &&
        c.radius.mode != "two_scale")
      throw ConfigInvalid("radius_field.mode", "expected computed, injected, constant or two_scale");
    if (const json* cv = find(*rf, "csv")) c.radius.csv = get_string(*cv, "radius_field.csv");
    if (c.radius.mode == "injected" && c.radius.csv.empty()) throw ConfigInvalid("radius_field.csv", "missing");
    if (const json* vv = find(*rf, "value")) c.radius.value = get_number(*vv, "radius_field.value");
    if (const json* vb = find(*rf, "value_b")) c.radius.value_b = get_number(*vb, "radius_field.value_b");
    if (!(c.radius.value > 0 && c.radius.value <= 1)) throw ConfigInvalid("radius_field.value", "must lie in (0, 1]");
    if (!(c.radius.value_b > 0 && c.radius.value_b <= 1))
      throw ConfigInvalid("radius_field.value_b", "must lie in (0, 1]");
  }
  if (const json* se = find(doc, "series")) {
    require_object(*se, "series");
    reject_unknown(*se, "series", {"radius"});
    if (const json* r = find(*se, "radius")) c.series_radius = get_number(*r, "series.radius");
    if (!(c.series_radius > 0)) throw ConfigInvalid("series.radius", "must be positive");
  }
  if (const json* in = find(doc, "instances")) c.instances = static_cast<int>(get_integer(*in, "instances"));
  if (c.instances < 2) throw ConfigInvalid("instances", "need at least 2 (one training, one holdout)");
  if (const json* gl = find(doc, "global")) {
    require_object(*gl, "global");
    reject_unknown(*gl, "global", {"refine"});
    if (const json* rf = find(*gl, "refine")) {
      if (!rf->is_boolean()) throw ConfigInvalid("global.refine", "expected a boolean");
      c.global_refine = rf->get<bool>();
    }
    if (c.global_refine && c.radius.mode == "injected")
      throw ConfigInvalid("global.refine", "an injected radius CSV is tied to one grid; refinement is unavailable");
  }
  if (const json* db = find(doc, "double")) {
    require_object(*db, "double");
    reject_unknown(*db, "double", {"L", "delta", "grid", "refinement"});
    if (const json* L = find(*db, "L")) c.double_L = get_number(*L, "double.L");
    if (!(c.double_L > 0)) throw ConfigInvalid("double.L", "must be positive");
    if (const json* d = find(*db, "delta")) c.double_delta = get_number(*d, "double.delta");
    if (!(c.double_delta >= 0)) throw ConfigInvalid("double.delta", "must be >= 0");
    if (const json* gg = find(*db, "grid")) c.double_grid = get_ints(*gg, "double.grid");
    check_grid(c.double_grid, 2, "double.grid");
    if (const json* rr = find(*db, "refinement")) c.double_refinement = get_ints(*rr, "double.refinement");
    for (std::size_t i = 0; i < c.double_refinement.size(); ++i)
      if (c.double_refinement[i] < 8) throw ConfigInvalid(index_path("double.refinement", i), "must be >= 8");
  }
  if (const json* ip = find(doc, "interpolation")) {
    require_object(*ip, "interpolation");
    reject_unknown(*ip, "interpolation", {"n", "m", "k"});
    if (const json* x = find(*ip, "n")) c.interp_n = static_cast<int>(get_integer(*x, "interpolation.n"));
    if (const json* x = find(*ip, "m")) c.interp_m = static_cast<int>(get_integer(*x, "interpolation.m"));
    if (const json* x = find(*ip, "k")) c.interp_k = static_cast<int>(get_integer(*x, "interpolation.k"));
    if (c.interp_n < 0) throw ConfigInvalid("interpolation.n", "must be >= 1");
    if (c.interp_m < 0) throw ConfigInvalid("interpolation.m", "must be >= 1");
    if (c.interp_k < 0) throw ConfigInvalid("interpolation.k", "must be >= 1");
  }
  if (const json* sc = find(doc, "scaling")) {
    require_object(*sc, "scaling");
    reject_unknown(*sc, "scaling", {"n", "m", "r"});
    if (const json* x = find(*sc, "n")) c.scaling_n = static_cast<int>(get_integer(*x, "scaling.n"));
    if (const json* x = find(*sc, "m")) c.scaling_m = static_cast<int>(get_integer(*x, "scaling.m"));
    if (const json* x = find(*sc, "r")) c.scaling_r = get_rational(*x, "scaling.r");
    if (c.scaling_n < 0 || c.scaling_n > 3) throw ConfigInvalid("scaling.n", "must be 1, 2 or 3");
    if (c.scaling_m < 0) throw ConfigInvalid("scaling.m", "must be >= 1");
    if (c.scaling_r != Rational(0) && !(c.scaling_r >= Rational(1))) throw ConfigInvalid("scaling.r", "must be >= 1");
  }
  if (const json* out = find(doc, "output")) {
    require_object(*out, "output");
    reject_unknown(*out, "output", {"dir"});
    if (const json* d = find(*out, "dir")) c.out_dir = get_string(*d, "output.dir");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path)
{
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IOError, "cannot read " + path);
  json doc;
  try {
    is >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigInvalid("$", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

// ---------------------------------------------------------------- report helpers

namespace {

// every reported number carries the tolerance it was checked against (0 for exact quantities)
json val(double v, double tol) { return json{{"value", v}, {"tolerance", tol}}; }

json rational_json(const Rational& q) { return to_string(q); }

json exponent_json(const ExtendedExponent& e) { return e.str(); }

json estimate_json(const EstimateReport& rep)
{
  json inst = json::array();
  for (const auto& i : rep.instances)
    inst.push_back({{"label", i.label},
                    {"R", i.R},
                    {"lhs", i.lhs},
                    {"rhs", i.rhs},
                    {"terms", i.terms},
                    {"training", i.training},
                    {"ok", i.ok}});
  json j = {{"id", rep.id},
            {"term_names", rep.term_names},
            {"envelope", rep.envelope},
            {"constants", rep.constants},
            {"fit_margin", rep.fit_margin},
            {"fit_ok", rep.fit_ok},
            {"min_slack", val(rep.min_slack, 1.0)},
            {"holdout_envelope_slack", rep.holdout_envelope_slack},
            {"comparison_tolerance", 1e-12},
            {"instances", inst}};
  if (!rep.Rs.empty()) {
    j["Rs"] = rep.Rs;
    j["scale_per_R"] = rep.scale_per_R;
    j["slope"] = val(rep.slope, 0.2);
    j["independent_constants"] = rep.independent_constants;
    j["independent_slopes"] = rep.independent_slopes;
  }
  if (!rep.note.empty()) j["note"] = rep.note;
  return j;
}

void write_estimate_csv(const std::string& path, const EstimateReport& rep)
{
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IOError, "cannot write " + path);
  os.precision(17);
  os << "label,R,lhs,rhs,training,ok";
  for (const auto& t : rep.term_names) os << ",\"" << t << "\"";
  os << "\n";
  for (const auto& i : rep.instances) {
    os << i.label << "," << i.R << "," << i.lhs << "," << i.rhs << "," << i.training << "," << i.ok;
    for (double t : i.terms) os << "," << t;
    os << "\n";
  }
}

std::size_t nearest_node(const Grid& g, const std::vector<double>& x)
{
  std::vector<int> c(g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    int q = static_cast<int>(std::lround(x[a] / g.spacing(a)));
    if (g.periodic[a])
      q = (q % g.shape[a] + g.shape[a]) % g.shape[a];
    else
      q = std::clamp(q, 0, g.shape[a] - 1);
    c[a] = q;
  }
  return g.ravel(c);
}

// Lazily built pipeline stages shared by the checks of one run.
struct Pipeline {
  const ExperimentConfig& cfg;
  std::optional<MetricField> metric;
  std::optional<AdmissibleRadiusField> field;
  std::optional<AdmissibleCover> cover;
  std::optional<EllipticOperator> op;
  std::unique_ptr<MinNormSolver> solver;

  explicit Pipeline(const ExperimentConfig& c) : cfg(c) {}

  const MetricField& mf()
  {
    if (!metric) metric = build_metric(cfg.manifold, cfg.grid);
    return *metric;
  }

  static std::vector<double> source_values(const RadiusSource& src, const MetricField& m)
  {
    std::vector<double> v(m.grid.size(), src.value);
    if (src.mode == "two_scale")
      for (std::size_t i = 0; i < v.size(); ++i)
        if (m.grid.coords(i)[0] >= 0.5 * m.grid.lengths[0] - 1e-12) v[i] = src.value_b;
    return v;
  }

  static AdmissibleRadiusField make_field(const ExperimentConfig& c, const MetricField& m)
  {
    if (c.radius.mode == "computed") return radius_field(m, c.epsilon, c.m);
    std::vector<double> v = c.radius.mode == "injected" ? read_radius_csv(c.radius.csv) : source_values(c.radius, m);
    return inject_radius_field(m, std::move(v), c.epsilon, c.m, c.seed);
  }

  const AdmissibleRadiusField& radius()
  {
    if (!field) field = make_field(cfg, mf());
    return *field;
  }

  const AdmissibleCover& cov()
  {
    if (!cover) cover = build_cover(radius(), mf());
    return *cover;
  }

  static EllipticOperator make_operator(const ExperimentConfig& c, const MetricField& m)
  {
    if (c.op == "dirac") return dirac_operator(m);
    if (c.op == "degenerate") return degenerate_operator(m, 0);
    return hodge_laplacian(m, c.op_c);
  }

  const EllipticOperator& D()
  {
    if (!op) op = make_operator(cfg, mf());
    return *op;
  }

  const MinNormSolver& S()
  {
    if (!solver) solver = std::make_unique<MinNormSolver>(D());
    return *solver;
  }
};

// Seeded right-hand sides orthogonal to the harmonic space.
std::vector<GridSection> orthogonal_data(const MinNormSolver& S, int count, std::uint64_t seed)
{
  const MetricField& mf = S.op().metric();
  std::vector<GridSection> out;
  for (int i = 0; i < count; ++i) {
    GridSection w = band_limited_section(mf.grid, S.op().rank(), seed + 1000 + i);
    project_out(w, S.harmonic(), mf);
    out.push_back(std::move(w));
  }
  return out;
}

json check_radius(Pipeline& p, const std::string& dir)
{
  const auto& f = p.radius();
  write_radius_csv((fs::path(dir) / "radius.csv").string(), f, p.mf().grid);
  return {{"pass", true},
          {"provenance", f.provenance == RadiusProvenance::computed ? "computed" : "injected"},
          {"epsilon", f.epsilon},
          {"m", f.m},
          {"min", val(f.min(), 0.0)},
          {"max", val(f.max(), 0.0)},
          {"csv", "radius.csv"}};
}

json check_comparability(Pipeline& p)
{
  auto rep = comparability_check(p.radius(), p.mf(), 10000, p.cfg.seed);
  return {{"pass", rep.pass()},
          {"pairs", rep.pairs},
          {"premise_hits", rep.premise_hits},
          {"violations", val(static_cast<double>(rep.violations), 0.0)}};
}

json check_cover(Pipeline& p, const std::string& dir)
{
  const auto& cv = p.cov();
  auto st = overlap_stats(cv, p.mf(), p.cfg.seed);
  auto au = audit_cover(cv, p.radius(), p.mf());
  write_cover_csv((fs::path(dir) / "cover.csv").string(), cv, p.mf().grid);
  return {{"pass", st.pass && st.integral_pass && au.disjoint && au.vitali && au.covered},
          {"balls", cv.balls.size()},
          {"max_overlap", val(st.max, st.bound)},
          {"bound", st.bound},
          {"integral_lhs", val(st.integral_lhs, st.integral_rhs)},
          {"integral_rhs", st.integral_rhs},
          {"disjoint", au.disjoint},
          {"vitali", au.vitali},
          {"covered", au.covered},
          {"csv", "cover.csv"}};
}

json check_ellipticity(Pipeline& p)
{
  auto rep = ellipticity_audit(p.D(), 1000, 1e8, p.cfg.seed, false);
  return {{"pass", rep.pass},
          {"samples", rep.samples},
          {"condition_cap", 1e8},
          {"min_symbol_norm", val(rep.min_norm, 0.0)},
          {"max_inverse_norm", val(rep.max_inv_norm, 1e8)},
          {"c1_bound", rep.c1_bound}};
}

json check_solve(Pipeline& p, std::ostream& log)
{
  const auto& S = p.S();
  const auto& mf = p.mf();
  GridSection w = orthogonal_data(S, 1, p.cfg.seed)[0];
  SolveTrace tr;
  GridSection u = S.solve(w, &tr);
  const double res = l2(p.D().apply(u) - w, mf) / l2(w, mf);
  log << "residual = " << std::scientific << std::setprecision(3) << res << std::defaultfloat << "\n";
  GridSection a = band_limited_section(mf.grid, S.op().rank(), p.cfg.seed + 7);
  GridSection b = band_limited_section(mf.grid, S.op().rank(), p.cfg.seed + 8);
  GridSection Da = p.D().apply(a);
  const double adj = std::abs(inner(Da, b, mf) - inner(a, p.D().apply_adjoint(b), mf)) / (l2(Da, mf) * l2(b, mf));
  return {{"pass", res <= 1e-8 && adj <= 1e-10},
          {"path", tr.spectral ? "spectral" : "gmres"},
          {"iterations", tr.iterations},
          {"harmonic_dimension", S.harmonic().size()},
          {"kernel_dimension", S.kernel().size()},
          {"residual", val(res, 1e-8)},
          {"adjointness", val(adj, 1e-10)}};
}

json check_decomposition(Pipeline& p)
{
  const auto& S = p.S();
  double res = 0.0, orth = 0.0;
  for (int i = 0; i < p.cfg.instances; ++i) {
    auto v = band_limited_section(p.mf().grid, S.op().rank(), p.cfg.seed + 500 + i);
    auto d = direct_decomposition(S, v);
    res = std::max(res, d.residual);
    orth = std::max(orth, d.orthogonality);
  }
  return {{"pass", res <= 1e-8 && orth <= 1e-10},
          {"instances", p.cfg.instances},
          {"max_residual", val(res, 1e-8)},
          {"max_orthogonality", val(orth, 1e-10)}};
}

json check_series(Pipeline& p)
{
  const auto& S = p.S();
  GridSection w = band_limited_section(p.mf().grid, S.op().rank(), p.cfg.seed + 11);
  auto res = local_series_solve(S, w, nearest_node(p.mf().grid, p.cfg.center), p.cfg.series_radius);
  json trace = json::array();
  for (const auto& s : res.trace) trace.push_back({{"k", s.k}, {"h_norm", s.h_norm}, {"bound", s.bound}});
  return {{"pass", res.decay_ok && res.projection_residual <= 1e-9 && res.smallness <= res.smallness_limit},
          {"radius", p.cfg.series_radius},
          {"smallness", val(res.smallness, res.smallness_limit)},
          {"decay_ok", res.decay_ok},
          {"stop_level", 1e-10},
          {"trace", trace},
          {"projection_residual", val(res.projection_residual, 1e-9)},
          {"ball_residual", val(res.ball_residual, 1e-8)}};
}

void split_estimate(const EstimateReport& rep, json& check, json& info)
{
  check["pass"] = rep.pass;
  check["fit_ok"] = rep.fit_ok;
  check["min_slack"] = val(rep.min_slack, 1.0);
  if (!rep.Rs.empty()) check["slope"] = val(rep.slope, 0.2);
  info = estimate_json(rep);
}

json check_local(Pipeline& p, const std::string& dir, json& info)
{
  const auto& mf = p.mf();
  const auto x = nearest_node(mf.grid, p.cfg.center);
  const auto c = mf.grid.coords(x);
  auto rep = verify_local_estimate(
      p.D(), [&](double R) { return local_test_family(mf.grid, c, R, p.cfg.seed); }, x, p.cfg.r_sweep,
      to_double(p.cfg.r));
  write_estimate_csv((fs::path(dir) / "local_estimate.csv").string(), rep);
  json j;
  split_estimate(rep, j, info);
  j["csv"] = "local_estimate.csv";
  return j;
}

json check_chain(Pipeline& p, const std::string& dir, json& info)
{
  const auto& mf = p.mf();
  const auto x = nearest_node(mf.grid, p.cfg.center);
  const double R = p.cfg.r_sweep.size() > 1 ? p.cfg.r_sweep[1] : p.cfg.r_sweep[0];
  auto rep = verify_chain(p.D(), local_test_family(mf.grid, mf.grid.coords(x), R, p.cfg.seed + 1), x, R,
                          to_double(p.cfg.r), 1);
  write_estimate_csv((fs::path(dir) / "chain.csv").string(), rep);
  json j;
  split_estimate(rep, j, info);
  j["R"] = R;
  j["csv"] = "chain.csv";
  return j;
}

json check_bootstrap(Pipeline& p, json& info)
{
  const auto& S = p.S();
  auto om = orthogonal_data(S, p.cfg.instances, p.cfg.seed);
  std::mt19937_64 rng(p.cfg.seed + 3);
  std::uniform_int_distribution<std::size_t> pick(0, p.mf().grid.size() - 1);
  std::vector<std::size_t> centers;
  for (int i = 0; i < p.cfg.instances; ++i) centers.push_back(pick(rng));
  auto rep = bootstrap(S, p.D(), om, centers, p.cfg.r_sweep.front(), p.cfg.r);
  json chain = json::array();
  for (const auto& t : rep.chain.t) chain.push_back(exponent_json(t));
  info = {{"lebesgue", estimate_json(rep.lebesgue)},
          {"sobolev", estimate_json(rep.sobolev)},
          {"interpolated", estimate_json(rep.interpolated)}};
  return {{"pass", rep.pass},
          {"chain", chain},
          {"l", rep.chain.l},
          {"steps", val(rep.steps, 0.0)},
          {"step_bound", rep.bound},
          {"steps_match", rep.steps_match},
          {"instances", rep.instances.size()},
          {"lebesgue_pass", rep.lebesgue.pass},
          {"sobolev_pass", rep.sobolev.pass},
          {"interpolated_pass", rep.interpolated.pass},
          {"min_slack",
           val(std::min({rep.lebesgue.min_slack, rep.sobolev.min_slack, rep.interpolated.min_slack}), 1.0)}};
}

struct GlobalRun {
  GlobalReport rep;
  std::size_t balls = 0;
};

GlobalRun run_global(const ExperimentConfig& cfg, const MetricField& mf, const AdmissibleRadiusField& field,
                     const AdmissibleCover& cover, const EllipticOperator& D, const MinNormSolver& S)
{
  auto om = orthogonal_data(S, std::max(cfg.instances, 2), cfg.seed + 40);
  (void)mf;
  return {verify_global_weighted(S, D, om, field, cover, cfg.r), cover.balls.size()};
}

json check_global(Pipeline& p, json& info)
{
  auto g = run_global(p.cfg, p.mf(), p.radius(), p.cov(), p.D(), p.S());
  json j = {{"pass", g.rep.pass},
            {"weighted", g.rep.weighted},
            {"l", g.rep.chain.l},
            {"balls", g.balls},
            {"cover_sandwich", g.rep.cover_sandwich},
            {"cover_direct_ratio", val(g.rep.cover_direct_ratio, p.cov().bound)},
            {"lebesgue_pass", g.rep.lebesgue.pass},
            {"sobolev_pass", g.rep.sobolev.pass},
            {"min_slack", val(std::min(g.rep.lebesgue.min_slack, g.rep.sobolev.min_slack), 1.0)}};
  info = {{"lebesgue", estimate_json(g.rep.lebesgue)}, {"sobolev", estimate_json(g.rep.sobolev)}};
  if (p.cfg.global_refine) {
    ExperimentConfig fine = p.cfg;
    for (auto& v : fine.grid) v *= 2;
    auto mf2 = build_metric(fine.manifold, fine.grid);
    auto f2 = Pipeline::make_field(fine, mf2);
    auto c2 = build_cover(f2, mf2);
    auto D2 = Pipeline::make_operator(fine, mf2);
    MinNormSolver S2(D2);
    auto g2 = run_global(fine, mf2, f2, c2, D2, S2);
    const double C1 = g.rep.lebesgue.envelope.empty() ? NAN : g.rep.lebesgue.envelope[0];
    const double C2 = g2.rep.lebesgue.envelope.empty() ? NAN : g2.rep.lebesgue.envelope[0];
    const double drift = std::abs(C2 / C1 - 1.0);
    j["refined_grid"] = fine.grid;
    j["refined_pass"] = g2.rep.pass;
    j["constant_drift"] = val(drift, 0.2);
    j["pass"] = g.rep.pass && g2.rep.pass && drift <= 0.2;
    info["refined_lebesgue"] = estimate_json(g2.rep.lebesgue);
    info["refined_sobolev"] = estimate_json(g2.rep.sobolev);
  }
  return j;
}

json check_interpolation(Pipeline& p)
{
  const int n = p.cfg.interp_n ? p.cfg.interp_n : p.mf().n();
  const int m = p.cfg.interp_m ? p.cfg.interp_m : p.D().order;
  int k = p.cfg.interp_k;
  if (!k) {
    // largest k with t_k finite
    k = 0;
    while (!chain_exponent(n, m, k + 1).infinite) ++k;
    if (k == 0) throw Error(ErrorCode::InfiniteExponent, "t_1 is infinite; no interpolation exponents to check");
  }
  GridSection w = band_limited_section(p.mf().grid, 1, p.cfg.seed + 21);
  auto rep = verify_interpolation_weights(w, p.mf(), p.radius(), n, m, k);
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"j", r.j},
                    {"theta", rational_json(r.e.theta)},
                    {"alpha", rational_json(r.e.alpha)},
                    {"beta", rational_json(r.e.beta)},
                    {"t_j", exponent_json(r.e.t_j)},
                    {"lhs", val(r.lhs, 1e-12)},
                    {"rhs", r.rhs},
                    {"ok", r.ok},
                    {"stein_weiss_ratio", r.stein_weiss_ratio}});
  return {{"pass", rep.pass}, {"n", n}, {"m", m}, {"k", k}, {"rows", rows}};
}

std::vector<std::function<double(const double*)>> scaling_family(int n)
{
  std::vector<std::function<double(const double*)>> fam;
  fam.push_back([n](const double* y) {
    double s = 0.0;
    for (int a = 0; a < n; ++a) s += y[a] * y[a];
    return std::exp(-s);
  });
  fam.push_back([n](const double* y) {
    double s = 0.0;
    for (int a = 0; a < n; ++a) s += (a + 1) * y[a];
    return std::cos(1.5 * s);
  });
  fam.push_back([n](const double* y) {
    double s = 1.0;
    for (int a = 0; a < n; ++a) s += 0.5 * y[a] * (1 + a * y[a]);
    return s;
  });
  fam.push_back([n](const double* y) {
    double s = 0.0;
    for (int a = 0; a < n; ++a) s += (y[a] - 0.2) * (y[a] - 0.2);
    return 1.0 / (1.0 + 4.0 * s);
  });
  return fam;
}

json check_scaling(const ExperimentConfig& cfg, json& info)
{
  const int n = cfg.scaling_n ? cfg.scaling_n : cfg.manifold.dimension;
  const int m = cfg.scaling_m ? cfg.scaling_m : 1;
  const Rational r = cfg.scaling_r != Rational(0) ? cfg.scaling_r : cfg.r;
  const auto t = sobolev_exponent(r, m, n);
  if (t.infinite) throw Error(ErrorCode::InfiniteExponent, "S_m(r) is infinite for these parameters");
  auto rep = scaling_check(scaling_family(n), n, cfg.r_sweep, m, to_double(r), t.as_double());
  json rows = json::array();
  for (const auto& row : rep.rows)
    rows.push_back({{"R", row.R},
                    {"order", row.order},
                    {"lhs", row.lhs},
                    {"rhs", row.rhs},
                    {"error", val(row.error, row.tolerance)},
                    {"ok", row.ok}});
  info = {{"Rs", rep.Rs}, {"C", rep.C}, {"slope", rep.slope}};
  return {{"pass", rep.identities_ok && rep.constant_ok && rep.lemma_ok},
          {"lemma_ok", rep.lemma_ok},
          {"lemma_min_slack", val(rep.lemma_min_slack, 1.0)},
          {"n", n},
          {"m", m},
          {"r", rational_json(r)},
          {"t", exponent_json(t)},
          {"h", rep.h},
          {"identities_ok", rep.identities_ok},
          {"rows", rows},
          {"Rs", rep.Rs},
          {"C", rep.C},
          {"spread", val(rep.spread, 0.05)}};
}

json double_run(const ExperimentConfig& cfg, const std::vector<int>& grid)
{
  auto dd = build_double(cfg.double_L, cfg.double_delta, grid);
  auto D = hodge_laplacian(dd.gamma, cfg.op_c);
  MinNormSolver S(D);
  const double L = cfg.double_L;
  auto w = sample_scalar(dd.cylinder.grid, [L](const std::vector<double>& x) {
    return cplx(std::sin(pi * x[1] / L) * std::cos(x[0]));
  });
  auto rep = boundary_solve(dd, S, D, w, to_double(cfg.r));
  return {{"grid", grid},
          {"harmonic_dimension", S.harmonic().size()},
          {"gram_condition", val(rep.extension.gram_condition, 1e8)},
          {"orthogonality", val(rep.extension.orthogonality, 1e-10)},
          {"restriction_exact", rep.extension.restriction_exact},
          {"spectral_residual", val(rep.spectral_residual, 1e-6)},
          {"fd_residual", rep.fd_residual},
          {"sobolev_ratio", rep.sobolev_ratio},
          {"pass", rep.pass}};
}

json check_double(const ExperimentConfig& cfg)
{
  if (cfg.op != "laplacian") throw Error(ErrorCode::InvalidModel, "the doubling check uses the Laplacian");
  json j = double_run(cfg, cfg.double_grid);
  if (!cfg.double_refinement.empty()) {
    json levels = json::array();
    bool decreasing = true;
    double prev = INFINITY;
    for (int N : cfg.double_refinement) {
      json lv = double_run(cfg, {N, N});
      const double fd = lv["fd_residual"].get<double>();
      if (!(fd < prev)) decreasing = false;
      prev = fd;
      levels.push_back({{"N", N}, {"fd_residual", fd}, {"spectral_residual", lv["spectral_residual"]}});
    }
    j["refinement"] = levels;
    j["fd_decreasing"] = decreasing;
    j["pass"] = j["pass"].get<bool>() && decreasing;
  }
  return j;
}

json environment_json()
{
  json env = {{"compiler", __VERSION__},
              {"cxx_standard", static_cast<long>(__cplusplus)},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)}};
  return env;
}

}  // namespace

json run_experiment(const ExperimentConfig& cfg, const std::string& command, std::ostream& log)
{
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  fs::create_directories(cfg.out_dir);
  json report;
  report["schema_version"] = schema_version;
  report["command"] = command;
  report["config"] = cfg.raw;
  report["environment"] = environment_json();
  report["conventions"] = {{"laplacian", "nonnegative: Delta = -sum_ij g^ij (d_i d_j - Gamma^k_ij d_k)"},
                           {"grid", "row-major, node-major sections, periodic spacing L/N"},
                           {"fit_margin", fit_margin}};
  json checks = json::object(), info = json::object(), timing = json::object();
  bool verdict = true, io_error = false;
  Pipeline p(cfg);
  for (const auto& name : known_checks()) {
    if (std::find(cfg.checks.begin(), cfg.checks.end(), name) == cfg.checks.end()) continue;
    const auto t0 = clock::now();
    json res, inf;
    try {
      if (name == "radius") res = check_radius(p, cfg.out_dir);
      else if (name == "comparability") res = check_comparability(p);
      else if (name == "cover") res = check_cover(p, cfg.out_dir);
      else if (name == "ellipticity") res = check_ellipticity(p);
      else if (name == "solve") res = check_solve(p, log);
      else if (name == "decomposition") res = check_decomposition(p);
      else if (name == "series") res = check_series(p);
      else if (name == "local_estimate") res = check_local(p, cfg.out_dir, inf);
      else if (name == "chain") res = check_chain(p, cfg.out_dir, inf);
      else if (name == "bootstrap") res = check_bootstrap(p, inf);
      else if (name == "global") res = check_global(p, inf);
      else if (name == "interpolation") res = check_interpolation(p);
      else if (name == "scaling") res = check_scaling(cfg, inf);
      else if (name == "double") res = check_double(cfg);
    } catch (const Error& e) {
      res = {{"pass", false}, {"error", error_name(e.code())}, {"message", e.what()}};
      if (!std::isnan(e.value())) res["error_value"] = e.value();
      io_error = io_error || e.code() == ErrorCode::IOError;
    }
    const bool ok = res.value("pass", false);
    verdict = verdict && ok;
    log << (ok ? "PASS " : "FAIL ") << name << std::endl;
    checks[name] = res;
    if (!inf.is_null()) info[name] = inf;
    timing[name] = std::chrono::duration<double>(clock::now() - t0).count();
  }
  report["checks"] = checks;
  report["informational"] = info;
  report["verdict"] = verdict ? "pass" : "fail";
  if (io_error) report["io_error"] = true;
  timing["total"] = std::chrono::duration<double>(clock::now() - t_start).count();
  report["timing"] = timing;
  {
    const auto path = fs::path(cfg.out_dir) / "report.json";
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::IOError, "cannot write " + path.string());
    os << report.dump(2) << "\n";
  }
  render_plots(report, cfg.out_dir);
  return report;
}

// ---------------------------------------------------------------- exponents

json exponent_report(int n, int m, const Rational& r)
{
  auto ch = exponent_chain(n, m, r);
  json chain = json::array();
  for (const auto& t : ch.t) chain.push_back(exponent_json(t));
  json rep = {{"n", n}, {"m", m}, {"r", rational_json(r)}, {"chain", chain}, {"l", ch.l}};
  const Rational tau(m, n);
  rep["tau"] = rational_json(tau);
  rep["step_bound"] = step_bound(r, Rational(2), tau);
  rep["simulated_steps"] = simulate_steps(r, Rational(2), tau);
  json weights = json::array();
  WeightParams wp{n, m, r, 1, 1};
  auto add = [&](WeightKind k, const WeightParams& q, const std::string& label) {
    try {
      auto w = make_weight(k, q);
      weights.push_back({{"weight", label}, {"exponent", rational_json(w.exponent)}, {"norm", w.norm}});
    } catch (const Error& e) {
      weights.push_back({{"weight", label}, {"error", error_name(e.code())}});
    }
  };
  add(WeightKind::w_l, wp, "w_l");
  add(WeightKind::v_r, wp, "v_r");
  add(WeightKind::v_r_prime, wp, "v'_r");
  add(WeightKind::v_r_ball, wp, "v_r(ball)");
  for (int j = 1; j <= ch.l; ++j) {
    WeightParams q = wp;
    q.j = j;
    add(WeightKind::w_j, q, "w_" + std::to_string(j));
  }
  int kmax = 0;
  while (!chain_exponent(n, m, kmax + 1).infinite) ++kmax;
  for (int j = 1; j <= kmax; ++j) {
    WeightParams q = wp;
    q.j = j;
    q.k = kmax;
    add(WeightKind::alpha_j, q, "alpha_" + std::to_string(j) + " (k=" + std::to_string(kmax) + ")");
    add(WeightKind::beta_j, q, "beta_" + std::to_string(j) + " (k=" + std::to_string(kmax) + ")");
  }
  rep["weights"] = weights;
  return rep;
}

std::string exponent_table(const json& rep)
{
  std::ostringstream os;
  os << "n = " << rep["n"].get<int>() << ", m = " << rep["m"].get<int>() << ", r = " << rep["r"].get<std::string>()
     << "\n";
  os << "chain: (";
  const auto& ch = rep["chain"];
  for (std::size_t i = 0; i < ch.size(); ++i) os << (i ? "," : "") << ch[i].get<std::string>();
  os << ")\n";
  os << "l = " << rep["l"].get<int>() << "\n";
  os << "tau = " << rep["tau"].get<std::string>() << ", step_bound(r, 2, tau) = " << rep["step_bound"].get<int>()
     << ", simulated steps = " << rep["simulated_steps"].get<int>() << "\n";
  os << "weights:\n";
  for (const auto& w : rep["weights"]) {
    os << "  " << std::left << std::setw(16) << w["weight"].get<std::string>();
    if (w.contains("error"))
      os << w["error"].get<std::string>() << "\n";
    else
      os << "R^" << std::setw(10) << w["exponent"].get<std::string>() << " on " << w["norm"].get<std::string>()
         << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------- plots

namespace {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

void write_svg(const std::string& path, const std::string& title, const std::string& xlabel,
               const std::string& ylabel, const std::vector<Series>& series, bool logx, bool logy)
{
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  auto tx = [&](double v) { return logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return logy ? std::log10(v) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((logx && !(s.x[i] > 0)) || (logy && !(s.y[i] > 0)) || !std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
        continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double v) { return ml + (tx(v) - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (ty(v) - y0) / (y1 - y0) * (H - mt - mb); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IOError, "cannot write " + path);
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  auto fmt = [](double v, bool lg) {
    std::ostringstream s;
    s << std::setprecision(3) << (lg ? std::pow(10.0, v) : v);
    return s.str();
  };
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + k * (x1 - x0) / 4, yv = y0 + k * (y1 - y0) / 4;
    const double X = ml + k * (W - ml - mr) / 4, Y = H - mb - k * (H - mt - mb) / 4;
    os << "<text x=\"" << X << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << fmt(xv, logx) << "</text>\n";
    os << "<text x=\"" << ml - 6 << "\" y=\"" << Y + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv, logy)
       << "</text>\n";
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
     << ")\" text-anchor=\"middle\" font-size=\"12\">" << ylabel << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* col = colors[s % 5];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if ((logx && !(series[s].x[i] > 0)) || (logy && !(series[s].y[i] > 0))) continue;
      os << px(series[s].x[i]) << "," << py(series[s].y[i]) << " ";
    }
    os << "\"/>\n";
    os << "<text x=\"" << W - mr - 150 << "\" y=\"" << mt + 16 * (s + 1) << "\" font-size=\"12\" fill=\"" << col
       << "\">" << series[s].name << "</text>\n";
  }
  os << "</svg>\n";
}

std::vector<double> numbers(const json& a)
{
  std::vector<double> v;
  for (const auto& x : a) v.push_back(x.is_number() ? x.get<double>() : NAN);
  return v;
}

}  // namespace

std::vector<std::string> render_plots(const json& report, const std::string& dir)
{
  std::vector<std::string> written;
  fs::create_directories(dir);
  const json checks = report.value("checks", json::object());
  const json info = report.value("informational", json::object());
  auto out = [&](const std::string& f) {
    written.push_back(f);
    return (fs::path(dir) / f).string();
  };
  if (info.contains("local_estimate") && info["local_estimate"].contains("Rs")) {
    const auto& le = info["local_estimate"];
    std::vector<Series> s{{"fitted scale", numbers(le["Rs"]), numbers(le["scale_per_R"])}};
    write_svg(out("local_estimate.svg"), "local estimate: fitted scale vs R", "R", "scale", s, true, true);
  }
  if (checks.contains("series") && checks["series"].contains("trace")) {
    Series h{"||h_k||", {}, {}}, b{"4^-k ||h_0||", {}, {}};
    for (const auto& t : checks["series"]["trace"]) {
      h.x.push_back(t["k"].get<double>());
      h.y.push_back(t["h_norm"].get<double>());
      b.x.push_back(t["k"].get<double>());
      b.y.push_back(t["bound"].get<double>());
    }
    write_svg(out("series.svg"), "series solver trace", "k", "norm", {h, b}, false, true);
  }
  if (checks.contains("scaling") && checks["scaling"].contains("C")) {
    std::vector<Series> s{{"C(R)", numbers(checks["scaling"]["Rs"]), numbers(checks["scaling"]["C"])}};
    write_svg(out("scaling.svg"), "Sobolev constant vs R", "R", "C", s, true, false);
  }
  if (checks.contains("double") && checks["double"].contains("refinement")) {
    Series f{"fd residual", {}, {}}, sp{"spectral residual", {}, {}};
    for (const auto& lv : checks["double"]["refinement"]) {
      f.x.push_back(lv["N"].get<double>());
      f.y.push_back(lv["fd_residual"].get<double>());
      sp.x.push_back(lv["N"].get<double>());
      sp.y.push_back(lv["spectral_residual"]["value"].get<double>());
    }
    write_svg(out("double_refinement.svg"), "doubled cylinder residual vs N", "N", "residual", {f, sp}, true, true);
  }
  return written;
}

// ---------------------------------------------------------------- command line

namespace {

const std::map<std::string, std::vector<std::string>>& subcommand_checks()
{
  static const std::map<std::string, std::vector<std::string>> m = {
      {"radius", {"radius", "comparability"}},
      {"cover", {"radius", "comparability", "cover"}},
      {"solve", {"ellipticity", "solve"}},
      {"verify-lir", {"local_estimate", "chain"}},
      {"verify-global", {"radius", "cover", "global"}},
      {"double", {"double"}},
  };
  return m;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Local-to-global elliptic regularity experiments", "lirlab-cli"};
  app.require_subcommand(1);
  std::string config_path, out_dir, input_path, radius_csv, r_str, en_str;
  std::uint64_t seed = 0;
  std::vector<int> grid;
  double epsilon = 0.0;
  int m_override = 0, en = 0, em = 0;

  auto add_common = [&](CLI::App* sc) {
    sc->add_option("--config", config_path, "experiment configuration (JSON)")->required();
    sc->add_option("--out", out_dir, "output directory");
    sc->add_option("--seed", seed, "override the configured seed");
    sc->add_option("--grid", grid, "override the grid resolution, e.g. 128,128")->delimiter(',');
    sc->add_option("--epsilon", epsilon, "override epsilon");
    sc->add_option("--m", m_override, "override m");
    sc->add_option("--r", r_str, "override r (integer or p/q)");
  };
  std::map<std::string, CLI::App*> subs;
  subs["run"] = app.add_subcommand("run", "run the checks listed in the configuration");
  for (const auto& [name, checks] : subcommand_checks()) {
    (void)checks;
    subs[name] = app.add_subcommand(name, "run the " + name + " pipeline");
  }
  for (auto& [name, sc] : subs) add_common(sc);
  subs["verify-global"]->add_option("--radius-csv", radius_csv, "inject this radius field (CSV)");
  auto* ex = app.add_subcommand("exponents", "exponent chain, step bound and weight tables");
  ex->add_option("--n", en, "dimension")->required();
  ex->add_option("--m", em, "operator order")->required();
  ex->add_option("--r", en_str, "target exponent (integer or p/q)")->required();
  ex->add_option("--out", out_dir, "write exponents.json here");
  auto* rp = app.add_subcommand("report", "re-render the plots of an existing report");
  rp->add_option("--in", input_path, "report.json")->required();
  rp->add_option("--out", out_dir, "plot directory (defaults to the report's directory)");

  std::vector<const char*> argv{"lirlab-cli"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 2;
  }

  try {
    if (ex->parsed()) {
      if (en < 1 || em < 1) throw ConfigInvalid(en < 1 ? "n" : "m", "must be >= 1");
      const Rational r = parse_rational(en_str, "r");
      json rep;
      try {
        rep = exponent_report(en, em, r);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::IOError) throw;
        err << e.what() << "\n";
        return 1;
      }
      out << exponent_table(rep);
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream os(fs::path(out_dir) / "exponents.json");
        if (!os) throw Error(ErrorCode::IOError, "cannot write exponents.json");
        os << rep.dump(2) << "\n";
      }
      return 0;
    }
    if (rp->parsed()) {
      std::ifstream is(input_path);
      if (!is) throw Error(ErrorCode::IOError, "cannot read " + input_path);
      json rep;
      try {
        is >> rep;
      } catch (const json::parse_error& e) {
        throw ConfigInvalid("$", std::string("report is not valid JSON: ") + e.what());
      }
      const std::string dir = out_dir.empty() ? fs::path(input_path).parent_path().string() : out_dir;
      for (const auto& f : render_plots(rep, dir.empty() ? "." : dir)) out << "wrote " << f << "\n";
      return rep.value("verdict", "fail") == "pass" ? 0 : 1;
    }
    std::string command;
    for (const auto& [name, sc] : subs)
      if (sc->parsed()) command = name;

    std::ifstream is(config_path);
    if (!is) throw Error(ErrorCode::IOError, "cannot read " + config_path);
    json doc;
    try {
      is >> doc;
    } catch (const json::parse_error& e) {
      throw ConfigInvalid("$", std::string("not valid JSON: ") + e.what());
    }
    // command-line overrides are applied to the document so they are validated and echoed like the file
    if (subs[command]->count("--seed")) doc["seed"] = seed;
    if (!grid.empty()) doc["grid"] = grid;
    if (subs[command]->count("--epsilon")) doc["epsilon"] = epsilon;
    if (subs[command]->count("--m")) doc["m"] = m_override;
    if (!r_str.empty()) doc["r"] = r_str;
    if (!radius_csv.empty()) {
      doc["radius_field"]["mode"] = "injected";
      doc["radius_field"]["csv"] = radius_csv;
    }
    if (!out_dir.empty()) doc["output"]["dir"] = out_dir;
    ExperimentConfig cfg = parse_config(doc);
    if (command == "verify-lir" && cfg.op == "dirac")
      cfg.checks = {"bootstrap"};
    else if (command != "run")
      cfg.checks = subcommand_checks().at(command);
    json rep = run_experiment(cfg, command, out);
    out << "verdict: " << rep["verdict"].get<std::string>() << " (" << (fs::path(cfg.out_dir) / "report.json").string()
        << ")\n";
    if (rep.value("io_error", false)) return 2;
    return rep["verdict"] == "pass" ? 0 : 1;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::IOError ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    err << "IOError: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace lirlab::cli
