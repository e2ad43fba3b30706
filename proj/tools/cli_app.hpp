#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "lirlab/exponents.hpp"
#include "lirlab/geometry.hpp"

namespace lirlab::cli {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

// Thrown for schema violations; `field` is the JSON path of the offending entry.
class ConfigInvalid : public Error {
public:
  ConfigInvalid(const std::string& field, const std::string& msg)
      : Error(ErrorCode::ConfigInvalid, "field \"" + field + "\": " + msg), field_(field)
  {
  }
  const std::string& field() const { return field_; }

private:
  std::string field_;
};

struct RadiusSource {
  std::string mode = "computed";  // computed | injected | constant | two_scale
  std::string csv;                // injected
  double value = 1.0;             // constant; two_scale: value on x_0 < L_0/2
  double value_b = 0.5;           // two_scale: value on x_0 >= L_0/2
};

struct ExperimentConfig {
  int version = schema_version;
  std::uint64_t seed = 0;
  ManifoldModel manifold;
  std::vector<int> grid;
  std::string op = "laplacian";  // laplacian | dirac | degenerate
  double op_c = 0.0;
  double epsilon = 0.1;
  int m = 2;
  Rational r{2};
  std::vector<double> r_sweep{1.0, 0.5, 0.25, 0.125};
  std::vector<double> center;
  std::vector<std::string> checks;
  RadiusSource radius;
  double series_radius = 0.3;
  int instances = 10;
  bool global_refine = false;
  double double_L = pi, double_delta = 0.0;
  std::vector<int> double_grid{128, 128};
  std::vector<int> double_refinement;
  int interp_n = 0, interp_m = 0, interp_k = 0;  // 0: derive from the manifold and operator
  int scaling_n = 0, scaling_m = 0;
  Rational scaling_r{0};
  std::string out_dir = "lirlab-out";
  json raw;
};

const std::vector<std::string>& known_checks();

ExperimentConfig parse_config(const json& doc);
ExperimentConfig load_config(const std::string& path);

// Runs `checks` in pipeline order and writes report.json, CSV tables and SVG plots to
// cfg.out_dir. Module errors are recorded in the report, never thrown.
json run_experiment(const ExperimentConfig& cfg, const std::string& command, std::ostream& log);

// Arithmetic tables for the exponent chain, step bound and weights.
json exponent_report(int n, int m, const Rational& r);
std::string exponent_table(const json& rep);

// Re-renders every plot described by a report into dir; returns the files written.
std::vector<std::string> render_plots(const json& report, const std::string& dir);

// Entry point; exit codes 0 pass, 1 check failure, 2 config or IO error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lirlab::cli
