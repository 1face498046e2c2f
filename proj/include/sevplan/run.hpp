#pragma once

// Run orchestration and artifact files:
//
//   trajectory.csv  t,x,y,phi,v,delta,cost_state_J1      (every integration node)
//   controls.csv    interval_index,t_start,a,delta_s     (level-two controls)
//   severity.csv    t,<obstacle ids...>,total_rate
//   summary.json    objectives, solver statuses, iteration counts, wall time
//   scenario.json   the scenario actually solved (after CLI overrides)

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sevplan/errors.hpp"
#include "sevplan/format.hpp"
#include "sevplan/ocp.hpp"
#include "sevplan/scenario.hpp"

namespace sevplan {

inline void write_trajectory_csv(std::ostream& os, const ObjectiveReport& rep) {
  os << "t,x,y,phi,v,delta,cost_state_J1\n";
  for (std::size_t n = 0; n < rep.trajectory.t.size(); ++n) {
    const VehicleState& s = rep.trajectory.states[n];
    os << format_number(rep.trajectory.t[n]) << ',' << format_number(s.x) << ','
       << format_number(s.y) << ',' << format_number(s.phi) << ',' << format_number(s.v) << ','
       << format_number(s.delta) << ',' << format_number(rep.cost_state[n]) << '\n';
  }
}

inline void write_controls_csv(std::ostream& os, std::span<const double> z, const OcpSpec& spec) {
  const TimeGrid grid = spec.grid();
  os << "interval_index,t_start,a,delta_s\n";
  for (std::size_t k = 0; k < spec.num_intervals; ++k)
    os << k << ',' << format_number(grid.interval_start(k)) << ',' << format_number(z[2 * k]) << ','
       << format_number(z[2 * k + 1]) << '\n';
}

inline void write_severity_csv(std::ostream& os, const ObjectiveReport& rep, const OcpSpec& spec) {
  os << 't';
  for (const auto& o : spec.obstacles) os << ',' << o.id;
  os << ",total_rate\n";
  for (std::size_t n = 0; n < rep.trajectory.t.size(); ++n) {
    os << format_number(rep.trajectory.t[n]);
    double total = 0.0;
    for (double cs : rep.severity[n]) {
      os << ',' << format_number(cs);
      total += cs * cs;
    }
    os << ',' << format_number(total) << '\n';
  }
}

inline nlohmann::json summary_json(const Scenario& sc, const SolveReport& rep) {
  nlohmann::json j;
  j["name"] = sc.name;
  j["rating_setting"] = sc.rating_setting;
  j["J1_star"] = rep.J1_star;
  j["J2_level1"] = rep.J2_level1;
  j["J2_level2"] = rep.J2_level2;
  j["J1_at_z2"] = rep.J1_at_z2;
  j["epsilon"] = rep.epsilon;
  j["budget"] = rep.J1_star + rep.epsilon;
  j["status_level1"] = to_string(rep.level1.status);
  j["status_level2"] = to_string(rep.level2.status);
  j["iterations_level1"] = rep.level1.iterations;
  j["iterations_level2"] = rep.level2.iterations;
  j["outer_iterations_level1"] = rep.level1.outer_iterations;
  j["outer_iterations_level2"] = rep.level2.outer_iterations;
  j["function_evaluations_level1"] = rep.level1.function_evaluations;
  j["function_evaluations_level2"] = rep.level2.function_evaluations;
  j["max_violation_level2"] = rep.level2.max_constraint_violation;
  j["level1_start"] = rep.level1_start;
  j["wall_time_seconds"] = rep.wall_time_seconds;
  return j;
}

struct RunOptions {
  OcpSolveOptions solve;
  bool trace{false};  ///< write solver_trace_level{1,2}.csv
  bool swerve_starts{true};  ///< add swerve_starts() when solve.extra_starts is empty
};

struct RunArtifacts {
  std::filesystem::path trajectory_csv;
  std::filesystem::path controls_csv;
  std::filesystem::path severity_csv;
  std::filesystem::path summary_json;
  std::filesystem::path scenario_json;
  SolveReport report;
  bool converged{false};
};

/// Solves the scenario with both levels and writes all artifacts to out_dir.
inline RunArtifacts run(const Scenario& sc, const std::filesystem::path& out_dir,
                        const RunOptions& options = {}) {
  const OcpSpec spec = to_ocp_spec(sc);
  std::filesystem::create_directories(out_dir);

  OcpSolveOptions solve = options.solve;
  if (options.swerve_starts && solve.extra_starts.empty()) solve.extra_starts = swerve_starts(spec);
  std::ofstream trace1, trace2;
  if (options.trace) {
    trace1.open(out_dir / "solver_trace_level1.csv");
    trace2.open(out_dir / "solver_trace_level2.csv");
    solve.level1.trace = &trace1;
    solve.level2.trace = &trace2;
  }

  RunArtifacts art;
  art.report = two_level_solve(spec, solve);
  art.converged = art.report.level1.status == SolverStatus::converged &&
                  art.report.level2.status == SolverStatus::converged;

  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw InputError("cannot write " + p.string());
    return f;
  };
  art.trajectory_csv = out_dir / "trajectory.csv";
  art.controls_csv = out_dir / "controls.csv";
  art.severity_csv = out_dir / "severity.csv";
  art.summary_json = out_dir / "summary.json";
  art.scenario_json = out_dir / "scenario.json";
  {
    auto f = open(art.trajectory_csv);
    write_trajectory_csv(f, art.report.path2);
  }
  {
    auto f = open(art.controls_csv);
    write_controls_csv(f, art.report.z2, spec);
  }
  {
    auto f = open(art.severity_csv);
    write_severity_csv(f, art.report.path2, spec);
  }
  {
    auto f = open(art.summary_json);
    f << summary_json(sc, art.report).dump(2) << '\n';
  }
  {
    auto f = open(art.scenario_json);
    f << serialize_scenario(sc);
  }
  return art;
}

// ---------------------------------------------------------------------------
// Reading artifacts back and comparing runs.

namespace detail {

inline std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& p,
                                                         std::vector<std::string>& header) {
  std::ifstream in(p);
  if (!in) throw InputError("cannot open " + p.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(p.string() + ": empty file");
  header.clear();
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      // from_chars keeps subnormals, which stod rejects as out of range.
      double value = 0.0;
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || end != cell.data() + cell.size() || ec != std::errc())
        throw InputError(p.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      row.push_back(value);
    }
    if (row.size() != header.size())
      throw InputError(p.string() + ":" + std::to_string(lineno) + ": wrong column count");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// A finished run as read back from its output directory.
struct LoadedRun {
  Scenario scenario;
  Trajectory trajectory;
  std::vector<double> cost_state;
  std::vector<double> delta_s;  ///< per interval
  std::vector<double> t_start;  ///< per interval
  nlohmann::json summary;
};

inline LoadedRun load_run(const std::filesystem::path& dir) {
  LoadedRun r;
  r.scenario = load_scenario(dir / "scenario.json");
  std::vector<std::string> header;
  const auto rows = detail::read_numeric_csv(dir / "trajectory.csv", header);
  const std::vector<std::string> expected{"t", "x", "y", "phi", "v", "delta", "cost_state_J1"};
  if (header != expected) throw InputError((dir / "trajectory.csv").string() + ": unexpected header");
  for (const auto& row : rows) {
    r.trajectory.t.push_back(row[0]);
    r.trajectory.states.push_back({row[1], row[2], row[3], row[4], row[5]});
    r.cost_state.push_back(row[6]);
  }
  const auto crows = detail::read_numeric_csv(dir / "controls.csv", header);
  for (const auto& row : crows) {
    r.t_start.push_back(row[1]);
    r.delta_s.push_back(row[3]);
  }
  std::ifstream in(dir / "summary.json");
  if (!in) throw InputError("cannot open " + (dir / "summary.json").string());
  try {
    r.summary = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError((dir / "summary.json").string() + ": " + e.what());
  }
  return r;
}

/// Signed distance from an obstacle-frame point to the shape's core
/// (positive outside, negative inside).
inline double core_signed_distance(double px, double py, const ShapeParams& shape) {
  const double a = shape.half_length_a;
  const double b = shape.half_width_b;
  const double ax = std::abs(px), ay = std::abs(py);
  if (shape.kind == ShapeKind::rectangle) {
    const double qx = ax - a, qy = ay - b;
    const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
    return outside + std::min(std::max(qx, qy), 0.0);
  }
  if (a == b) return std::hypot(px, py) - a;
  // Ellipse: nearest boundary point by coarse sampling of the first quadrant
  // plus golden-section refinement on the parameter angle.
  auto dist2 = [&](double th) {
    const double dx = a * std::cos(th) - ax, dy = b * std::sin(th) - ay;
    return dx * dx + dy * dy;
  };
  const int samples = 256;
  const double quarter = std::numbers::pi / 2.0;
  int best = 0;
  double best_d = dist2(0.0);
  for (int i = 1; i <= samples; ++i) {
    const double d = dist2(quarter * i / samples);
    if (d < best_d) best_d = d, best = i;
  }
  double lo = quarter * std::max(0, best - 1) / samples;
  double hi = quarter * std::min(samples, best + 1) / samples;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 80; ++it) {
    const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
    if (dist2(m1) < dist2(m2)) hi = m2;
    else lo = m1;
  }
  const double d = std::sqrt(dist2(0.5 * (lo + hi)));
  const bool inside = (ax / a) * (ax / a) + (ay / b) * (ay / b) < 1.0;
  return inside ? -d : d;
}

/// How a path passes one obstacle.
struct PassRecord {
  std::string id;
  double min_center_distance{std::numeric_limits<double>::infinity()};
  double min_core_clearance{std::numeric_limits<double>::infinity()};
  double t_closest{0.0};
  /// Offset of the ego from the obstacle center along the ego's left normal at
  /// closest approach: > 0 means the obstacle is passed on the ego's right.
  double lateral_offset{0.0};
  int side{0};  ///< sign of lateral_offset
};

inline PassRecord pass_record(const Trajectory& traj, const Obstacle& obstacle) {
  const PreparedObstacle p(obstacle);
  PassRecord r;
  r.id = obstacle.id;
  for (std::size_t n = 0; n < traj.t.size(); ++n) {
    const VehicleState& s = traj.states[n];
    const Point2 c = p.center(traj.t[n]);
    const double dist = std::hypot(s.x - c.x, s.y - c.y);
    const Point2 f = p.to_frame(traj.t[n], s.x, s.y);
    r.min_core_clearance = std::min(r.min_core_clearance, core_signed_distance(f.x, f.y, p.shape()));
    if (dist < r.min_center_distance) {
      r.min_center_distance = dist;
      r.t_closest = traj.t[n];
      r.lateral_offset = -std::sin(s.phi) * (s.x - c.x) + std::cos(s.phi) * (s.y - c.y);
    }
  }
  r.side = r.lateral_offset > 0.0 ? 1 : (r.lateral_offset < 0.0 ? -1 : 0);
  return r;
}

struct ObstacleComparison {
  std::string id;
  PassRecord a;
  PassRecord b;
  double delta_center() const { return b.min_center_distance - a.min_center_distance; }
  double delta_core() const { return b.min_core_clearance - a.min_core_clearance; }
  bool side_flipped() const { return a.side != 0 && b.side != 0 && a.side != b.side; }
};

struct Comparison {
  std::vector<ObstacleComparison> obstacles;  ///< ids present in both runs
  double delta_J1{0.0};
  double delta_J2{0.0};

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["delta_J1"] = delta_J1;
    j["delta_J2"] = delta_J2;
    j["obstacles"] = nlohmann::json::array();
    for (const auto& o : obstacles) {
      auto side = [](const PassRecord& p) { return p.side; };
      j["obstacles"].push_back({{"id", o.id},
                                {"min_center_distance_a", o.a.min_center_distance},
                                {"min_center_distance_b", o.b.min_center_distance},
                                {"min_core_clearance_a", o.a.min_core_clearance},
                                {"min_core_clearance_b", o.b.min_core_clearance},
                                {"side_a", side(o.a)},
                                {"side_b", side(o.b)},
                                {"lateral_offset_a", o.a.lateral_offset},
                                {"lateral_offset_b", o.b.lateral_offset},
                                {"delta_center", o.delta_center()},
                                {"delta_core", o.delta_core()},
                                {"side_flipped", o.side_flipped()}});
    }
    return j;
  }
};

/// Compares two trajectories on the same time grid, obstacle by obstacle.
inline Comparison compare(const Trajectory& ta, std::span<const Obstacle> oa, const Trajectory& tb,
                          std::span<const Obstacle> ob) {
  if (ta.t.size() != tb.t.size()) throw InputError("compare: runs use different time grids");
  for (std::size_t n = 0; n < ta.t.size(); ++n)
    if (std::abs(ta.t[n] - tb.t[n]) > 1e-9 * (1.0 + std::abs(ta.t[n])))
      throw InputError("compare: runs use different time grids");
  Comparison c;
  for (const auto& a : oa) {
    auto it = std::find_if(ob.begin(), ob.end(), [&](const Obstacle& o) { return o.id == a.id; });
    if (it == ob.end()) continue;
    c.obstacles.push_back({a.id, pass_record(ta, a), pass_record(tb, *it)});
  }
  return c;
}

inline Comparison compare(const LoadedRun& a, const LoadedRun& b) {
  const OcpSpec sa = to_ocp_spec(a.scenario);
  const OcpSpec sb = to_ocp_spec(b.scenario);
  Comparison c = compare(a.trajectory, sa.obstacles, b.trajectory, sb.obstacles);
  c.delta_J1 = b.summary.at("J1_star").get<double>() - a.summary.at("J1_star").get<double>();
  c.delta_J2 = b.summary.at("J2_level2").get<double>() - a.summary.at("J2_level2").get<double>();
  return c;
}

}  // namespace sevplan
