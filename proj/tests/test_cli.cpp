#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_app.hpp"

using namespace lirlab;
using namespace lirlab::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
  auto p = fs::temp_directory_path() / "lirlab_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_config(const fs::path& dir, json doc)
{
  doc["output"]["dir"] = (dir / "out").string();
  const auto path = (dir / "config.json").string();
  std::ofstream(path) << doc.dump();
  return path;
}

struct Run {
  int code = -1;
  std::string out, err;
};

Run invoke(const std::vector<std::string>& args)
{
  std::ostringstream o, e;
  Run r;
  r.code = run_cli(args, o, e);
  r.out = o.str();
  r.err = e.str();
  return r;
}

json read_json(const fs::path& p)
{
  std::ifstream is(p);
  json j;
  is >> j;
  return j;
}

json base(int dim, std::vector<int> grid)
{
  return {{"version", 1}, {"seed", 1}, {"manifold", {{"kind", "flat_torus"}, {"dimension", dim}}}, {"grid", grid}};
}

std::string invalid_field(const json& doc)
{
  try {
    parse_config(doc);
  } catch (const ConfigInvalid& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(Config, ErrorsNameTheOffendingField)
{
  auto d = base(2, {8, 8});
  EXPECT_EQ(invalid_field(d), "");
  auto eps = d;
  eps["epsilon"] = 1.5;
  EXPECT_EQ(invalid_field(eps), "epsilon");
  auto seedless = d;
  seedless.erase("seed");
  EXPECT_EQ(invalid_field(seedless), "seed");
  auto check = d;
  check["checks"] = {"nope"};
  EXPECT_EQ(invalid_field(check), "checks[0]");
  auto periods = d;
  periods["manifold"]["periods"] = {1.0};
  EXPECT_EQ(invalid_field(periods), "manifold.periods");
  auto neg = d;
  neg["manifold"]["periods"] = {1.0, -2.0};
  EXPECT_EQ(invalid_field(neg), "manifold.periods[1]");
  auto unknown = d;
  unknown["bogus"] = 1;
  EXPECT_EQ(invalid_field(unknown), "bogus");
  auto version = d;
  version["version"] = 2;
  EXPECT_EQ(invalid_field(version), "version");
  auto dirac = d;
  dirac["operator"] = {{"kind", "dirac"}};
  EXPECT_EQ(invalid_field(dirac), "operator.kind");
}

TEST(Config, RationalExponentsAndDefaults)
{
  auto d = base(2, {8, 8});
  d["r"] = "3/2";
  auto cfg = parse_config(d);
  EXPECT_EQ(cfg.r, Rational(3, 2));
  EXPECT_DOUBLE_EQ(cfg.epsilon, 0.1);
  EXPECT_EQ(cfg.m, 2);
  d["r"] = 2.5;
  EXPECT_EQ(parse_config(d).r, Rational(5, 2));
  d["r"] = "x/2";
  EXPECT_EQ(invalid_field(d), "r");
}

TEST(Cli, EmptyCheckListPasses)
{
  auto dir = scratch("empty");
  auto d = base(2, {8, 8});
  d["checks"] = json::array();
  auto r = invoke({"run", "--config", write_config(dir, d)});
  EXPECT_EQ(r.code, 0) << r.err;
  auto rep = read_json(dir / "out" / "report.json");
  EXPECT_EQ(rep["verdict"], "pass");
  EXPECT_EQ(rep["schema_version"], schema_version);
  EXPECT_TRUE(rep["checks"].empty());
}

TEST(Cli, ExponentTable)
{
  auto dir = scratch("exponents");
  auto r = invoke({"exponents", "--n", "3", "--m", "1", "--r", "4", "--out", dir.string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("chain: (2,6,inf)"), std::string::npos);
  EXPECT_NE(r.out.find("l = 1"), std::string::npos);
  EXPECT_NE(r.out.find("step_bound(r, 2, tau) = 2"), std::string::npos);
  auto rep = read_json(dir / "exponents.json");
  EXPECT_EQ(rep["l"], 1);
  // r below 2 exhausts the chain: a module failure, not a usage error
  EXPECT_EQ(invoke({"exponents", "--n", "3", "--m", "1", "--r", "3/2"}).code, 1);
  EXPECT_EQ(invoke({"exponents", "--n", "0", "--m", "1", "--r", "4"}).code, 2);
}

TEST(Cli, SolvePrintsResidual)
{
  auto dir = scratch("solve");
  auto d = base(3, {8, 8, 8});
  d["operator"] = {{"kind", "dirac"}};
  auto r = invoke({"solve", "--config", write_config(dir, d)});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("residual = "), std::string::npos);
  EXPECT_NE(r.out.find("PASS solve"), std::string::npos);
  auto rep = read_json(dir / "out" / "report.json");
  EXPECT_LT(rep["checks"]["solve"]["residual"]["value"].get<double>(), 1e-8);
  EXPECT_EQ(rep["checks"]["solve"]["harmonic_dimension"], 2);
}

TEST(Cli, VerifyGlobalWithInjectedRadius)
{
  auto dir = scratch("global");
  auto d = base(3, {16, 16, 16});
  d["operator"] = {{"kind", "dirac"}};
  d["r"] = 4;
  d["instances"] = 6;
  auto mf = build_metric(ManifoldModel::flat({2 * pi, 2 * pi, 2 * pi}), {16, 16, 16});
  std::vector<double> R(mf.grid.size(), 1.0);
  for (std::size_t i = 0; i < R.size(); ++i)
    if (mf.grid.coords(i)[0] >= pi) R[i] = 0.5;
  const auto csv = (dir / "radius.csv").string();
  write_radius_csv(csv, inject_radius_field(mf, R, 0.1, 2), mf.grid);
  auto r = invoke({"verify-global", "--config", write_config(dir, d), "--radius-csv", csv});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  auto rep = read_json(dir / "out" / "report.json");
  EXPECT_EQ(rep["checks"]["radius"]["provenance"], "injected");
  EXPECT_TRUE(rep["checks"]["global"]["weighted"].get<bool>());
  EXPECT_TRUE(rep["checks"]["global"]["pass"].get<bool>());
}

TEST(Cli, RunsAreDeterministic)
{
  auto a = scratch("det_a"), b = scratch("det_b");
  auto d = base(1, {256});
  d["checks"] = {"radius", "cover", "solve", "local_estimate", "chain"};
  ASSERT_EQ(invoke({"run", "--config", write_config(a, d)}).code, 0);
  ASSERT_EQ(invoke({"run", "--config", write_config(b, d)}).code, 0);
  auto ra = read_json(a / "out" / "report.json"), rb = read_json(b / "out" / "report.json");
  for (auto* r : {&ra, &rb}) {
    r->erase("timing");
    (*r)["config"].erase("output");
  }
  EXPECT_EQ(ra, rb);
}

TEST(Cli, OverridesAreValidatedAndEchoed)
{
  auto dir = scratch("override");
  auto d = base(2, {8, 8});
  d["checks"] = json::array();
  const auto path = write_config(dir, d);
  auto r = invoke({"run", "--config", path, "--seed", "7", "--grid", "16,16"});
  EXPECT_EQ(r.code, 0) << r.err;
  auto rep = read_json(dir / "out" / "report.json");
  EXPECT_EQ(rep["config"]["seed"], 7);
  EXPECT_EQ(rep["config"]["grid"], json({16, 16}));
  auto bad = invoke({"run", "--config", path, "--epsilon", "1.5"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("field \"epsilon\""), std::string::npos);
}

TEST(Cli, MissingOrMalformedInputsExitTwo)
{
  EXPECT_EQ(invoke({"run", "--config", "/nonexistent/config.json"}).code, 2);
  auto dir = scratch("malformed");
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(invoke({"run", "--config", (dir / "bad.json").string()}).code, 2);
  EXPECT_EQ(invoke({"run"}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"report", "--in", "/nonexistent/report.json"}).code, 2);
}

TEST(Cli, ModuleErrorsAreRecorded)
{
  auto dir = scratch("module_error");
  auto d = base(2, {16, 16});
  d["operator"] = {{"kind", "degenerate"}};
  d["checks"] = {"ellipticity"};
  auto r = invoke({"run", "--config", write_config(dir, d)});
  EXPECT_EQ(r.code, 1);
  auto rep = read_json(dir / "out" / "report.json");
  EXPECT_EQ(rep["verdict"], "fail");
  EXPECT_FALSE(rep["checks"]["ellipticity"]["pass"].get<bool>());
  EXPECT_EQ(rep["checks"]["ellipticity"]["min_symbol_norm"]["value"], 0.0);

  // a module exception is caught and named in the check entry
  auto dir2 = scratch("module_error_interp");
  auto e = base(2, {16, 16});
  e["checks"] = {"interpolation"};
  EXPECT_EQ(invoke({"run", "--config", write_config(dir2, e)}).code, 1);
  auto rep2 = read_json(dir2 / "out" / "report.json");
  EXPECT_EQ(rep2["checks"]["interpolation"]["error"], "InfiniteExponent");
  EXPECT_FALSE(rep2["checks"]["interpolation"]["pass"].get<bool>());
}

TEST(Cli, ReportReRendersPlots)
{
  auto dir = scratch("rerender");
  auto d = base(1, {512});
  d["checks"] = {"local_estimate"};
  ASSERT_EQ(invoke({"run", "--config", write_config(dir, d)}).code, 0);
  auto plots = dir / "plots";
  auto r = invoke({"report", "--in", (dir / "out" / "report.json").string(), "--out", plots.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(plots / "local_estimate.svg"));
  EXPECT_NE(r.out.find("wrote"), std::string::npos);
}

TEST(Cli, EndToEndFlatTorus)
{
  auto dir = scratch("e2e");
  auto d = base(2, {128, 128});
  d["r"] = 2;
  d["checks"] = {"cover", "local_estimate"};
  auto r = invoke({"run", "--config", write_config(dir, d)});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  auto rep = read_json(dir / "out" / "report.json");
  EXPECT_EQ(rep["verdict"], "pass");
  EXPECT_EQ(rep["checks"]["cover"]["max_overlap"]["value"], 1);
  EXPECT_LE(std::abs(rep["checks"]["local_estimate"]["slope"]["value"].get<double>()), 0.2);
  for (const char* f : {"report.json", "cover.csv", "local_estimate.csv", "local_estimate.svg"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
}
