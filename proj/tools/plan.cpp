// plan: command-line front end.
//
//   plan run <scenario-file> --out <dir> [--epsilon v] [--intervals n] [--setting 1|2] [--trace] [--single-start]
//   plan builtin <scenario1|scenario2|scenario2-cond2> --out <dir> [--print]
//   plan compare <dirA> <dirB>
//   plan field <scenario-file> --t 1.0 --x 0,50 --y -10,10 --nx 101 --ny 41 --out field.csv
//
// Exit status: 0 converged, 2 solver diagnostics, 1 bad input.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sevplan/sevplan.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitSolver = 2;

struct Overrides {
  std::optional<double> epsilon;
  std::optional<std::size_t> intervals;
  std::optional<int> setting;
  bool trace{false};
  bool single_start{false};
};

int solve_and_write(sevplan::Scenario sc, const std::string& out, const Overrides& ov) {
  if (ov.epsilon) sc.ocp.epsilon = *ov.epsilon;
  if (ov.intervals) sc.ocp.num_intervals = *ov.intervals;
  if (ov.setting) sc.rating_setting = *ov.setting;

  sevplan::RunOptions opts;
  opts.trace = ov.trace;
  opts.swerve_starts = !ov.single_start;
  const sevplan::RunArtifacts art = sevplan::run(sc, out, opts);
  const auto& r = art.report;
  std::printf("%s: J1* = %s, J2 = %s (level one %s, level two %s, %.2f s)\n", sc.name.c_str(),
              sevplan::format_number(r.J1_star).c_str(), sevplan::format_number(r.J2_level2).c_str(),
              sevplan::to_string(r.level1.status).c_str(), sevplan::to_string(r.level2.status).c_str(),
              r.wall_time_seconds);
  if (!art.converged) {
    std::fprintf(stderr, "solver did not converge; best iterate written to %s\n", out.c_str());
    return kExitSolver;
  }
  return kExitOk;
}

std::pair<double, double> parse_range(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw sevplan::InputError("range must look like lo,hi: " + s);
  try {
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw sevplan::InputError("range must look like lo,hi: " + s);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum collision-severity trajectory planner"};
  app.require_subcommand(1);

  Overrides ov;
  std::string scenario_file, out_dir;
  auto* run_cmd = app.add_subcommand("run", "solve a scenario file and write artifacts");
  run_cmd->add_option("scenario", scenario_file, "scenario file")->required();
  run_cmd->add_option("--out", out_dir, "output directory")->required();
  run_cmd->add_option("--epsilon", ov.epsilon, "severity budget slack");
  run_cmd->add_option("--intervals", ov.intervals, "number of control intervals")->check(CLI::PositiveNumber);
  run_cmd->add_option("--setting", ov.setting, "rating setting")->check(CLI::IsMember({1, 2}));
  run_cmd->add_flag("--trace", ov.trace, "write per-iteration solver traces");
  run_cmd->add_flag("--single-start", ov.single_start, "level one from zero controls only");

  std::string builtin_name;
  bool print_only = false;
  auto* builtin_cmd = app.add_subcommand("builtin", "solve a built-in scenario");
  builtin_cmd->add_option("name", builtin_name, "scenario1, scenario2 or scenario2-cond2")->required();
  builtin_cmd->add_option("--out", out_dir, "output directory");
  builtin_cmd->add_flag("--print", print_only, "print the scenario file instead of solving");
  builtin_cmd->add_flag("--trace", ov.trace, "write per-iteration solver traces");
  builtin_cmd->add_flag("--single-start", ov.single_start, "level one from zero controls only");

  std::string dir_a, dir_b;
  auto* compare_cmd = app.add_subcommand("compare", "compare two run directories");
  compare_cmd->add_option("dirA", dir_a)->required();
  compare_cmd->add_option("dirB", dir_b)->required();

  double field_t = 0.0, ego_speed = -1.0, ego_heading = 0.0;
  std::string xr = "0,50", yr = "-10,10", field_out;
  std::size_t nx = 101, ny = 41;
  auto* field_cmd = app.add_subcommand("field", "rasterize the severity map at one instant");
  field_cmd->add_option("scenario", scenario_file)->required();
  field_cmd->add_option("--t", field_t, "time in seconds");
  field_cmd->add_option("--x", xr, "x range lo,hi");
  field_cmd->add_option("--y", yr, "y range lo,hi");
  field_cmd->add_option("--nx", nx)->check(CLI::Range(2, 100000));
  field_cmd->add_option("--ny", ny)->check(CLI::Range(2, 100000));
  field_cmd->add_option("--speed", ego_speed, "ego speed (defaults to the scenario's)");
  field_cmd->add_option("--heading", ego_heading, "ego heading (defaults to the scenario's)");
  field_cmd->add_option("--out", field_out, "CSV file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*run_cmd) return solve_and_write(sevplan::load_scenario(scenario_file), out_dir, ov);

    if (*builtin_cmd) {
      if (print_only) {
        std::cout << sevplan::builtin_scenario_text(builtin_name);
        return kExitOk;
      }
      if (out_dir.empty()) throw sevplan::InputError("--out is required unless --print is given");
      return solve_and_write(sevplan::builtin_scenario(builtin_name), out_dir, ov);
    }

    if (*compare_cmd) {
      const auto a = sevplan::load_run(dir_a);
      const auto b = sevplan::load_run(dir_b);
      std::cout << sevplan::compare(a, b).to_json().dump(2) << '\n';
      return kExitOk;
    }

    if (*field_cmd) {
      const sevplan::Scenario sc = sevplan::load_scenario(scenario_file);
      const sevplan::OcpSpec spec = sevplan::to_ocp_spec(sc);
      const auto [x0, x1] = parse_range(xr);
      const auto [y0, y1] = parse_range(yr);
      const double speed = ego_speed >= 0.0 ? ego_speed : sc.ego.v;
      const double heading = field_cmd->count("--heading") ? ego_heading : sc.ego.phi;
      const auto samples = sevplan::rasterize_severity(field_t, spec.obstacles, x0, x1, nx, y0, y1, ny,
                                                       speed, heading);
      if (field_out.empty()) {
        sevplan::write_raster_csv(std::cout, samples);
      } else {
        std::ofstream f(field_out, std::ios::binary);
        if (!f) throw sevplan::InputError("cannot write " + field_out);
        sevplan::write_raster_csv(f, samples);
      }
      return kExitOk;
    }
  } catch (const sevplan::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitInput;
  } catch (const sevplan::ValidationError& e) {
    std::fprintf(stderr, "invalid scenario: %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitInput;
}
