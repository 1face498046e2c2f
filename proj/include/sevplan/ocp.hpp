#pragma once

// Direct single-shooting transcription of the two severity optimal control
// problems:
//
//   level 1:  minimize J1 = sum_i int cs_i(t, x, y, v)^2 dt
//   level 2:  minimize J2 = int delta_s(t)^2 dt   s.t.  J1 <= J1* + eps
//
// both subject to the vehicle ODE, box bounds on (a, delta_s) and fixed initial
// state. Controls are piecewise constant on a uniform grid; J1 is carried as an
// extra state integrated by the same RK4 scheme as the vehicle.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sevplan/errors.hpp"
#include "sevplan/nlp_solver.hpp"
#include "sevplan/severity_field.hpp"
#include "sevplan/vehicle_model.hpp"

namespace sevplan {

struct ControlBounds {
  double a_min{-8.0};
  double a_max{3.0};
  double delta_min{-0.5};
  double delta_max{0.5};

  friend bool operator==(const ControlBounds&, const ControlBounds&) = default;
};

struct OcpSpec {
  VehicleState initial;
  VehicleParams vehicle;
  std::vector<Obstacle> obstacles;
  std::size_t num_intervals{40};
  std::size_t substeps_per_interval{4};
  double t0{0.0};
  double tf{4.0};
  ControlBounds bounds;
  /// Severity budget slack; unset means 1e-3 * (1 + J1*).
  std::optional<double> epsilon;

  TimeGrid grid() const { return {t0, tf, num_intervals, substeps_per_interval}; }
  std::size_t dimension() const { return 2 * num_intervals; }

  void validate() const {
    if (num_intervals < 2) throw InputError("OcpSpec: num_intervals must be >= 2");
    grid().validate();
    sevplan::validate(vehicle);
    if (!(bounds.a_min <= bounds.a_max)) throw InputError("OcpSpec: a_min > a_max");
    if (!(bounds.delta_min <= bounds.delta_max)) throw InputError("OcpSpec: delta_min > delta_max");
    if (!(std::isfinite(bounds.a_min) && std::isfinite(bounds.a_max) &&
          std::isfinite(bounds.delta_min) && std::isfinite(bounds.delta_max)))
      throw InputError("OcpSpec: control bounds must be finite");
    if (std::max(std::abs(bounds.delta_min), std::abs(bounds.delta_max)) >= kSteeringLimit)
      throw InputError("OcpSpec: steering bounds reach the tan singularity");
    if (epsilon && !(std::isfinite(*epsilon) && *epsilon >= 0.0))
      throw InputError("OcpSpec: epsilon must be >= 0");
    const VehicleState& s = initial;
    if (!(std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.phi) && std::isfinite(s.v) &&
          std::isfinite(s.delta)))
      throw InputError("OcpSpec: initial state must be finite");
    if (!(std::abs(s.delta) < kSteeringLimit)) throw InputError("OcpSpec: initial steering singular");
    for (const auto& o : obstacles) sevplan::validate(o);
  }
};

/// Flat controls (a_0, delta_s_0, a_1, delta_s_1, ...).
using DecisionVector = std::vector<double>;

inline std::vector<ControlSample> unpack_controls(std::span<const double> z) {
  if (z.size() % 2 != 0) throw InputError("decision vector length must be even");
  std::vector<ControlSample> u(z.size() / 2);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = {z[2 * k], z[2 * k + 1]};
  return u;
}

inline DecisionVector pack_controls(std::span<const ControlSample> u) {
  DecisionVector z(2 * u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    z[2 * k] = u[k].accel_a;
    z[2 * k + 1] = u[k].steer_cmd_delta_s;
  }
  return z;
}

inline std::vector<double> lower_bounds(const OcpSpec& spec) {
  std::vector<double> lo(spec.dimension());
  for (std::size_t k = 0; k < spec.num_intervals; ++k) {
    lo[2 * k] = spec.bounds.a_min;
    lo[2 * k + 1] = spec.bounds.delta_min;
  }
  return lo;
}

inline std::vector<double> upper_bounds(const OcpSpec& spec) {
  std::vector<double> hi(spec.dimension());
  for (std::size_t k = 0; k < spec.num_intervals; ++k) {
    hi[2 * k] = spec.bounds.a_max;
    hi[2 * k + 1] = spec.bounds.delta_max;
  }
  return hi;
}

/// All-zero controls, clamped into the bounds.
inline DecisionVector zero_controls(const OcpSpec& spec) {
  DecisionVector z(spec.dimension(), 0.0);
  return project(z, lower_bounds(spec), upper_bounds(spec));
}

inline void check_decision(std::span<const double> z, const OcpSpec& spec) {
  if (z.size() != spec.dimension())
    throw InputError("decision vector has " + std::to_string(z.size()) + " entries, expected " +
                     std::to_string(spec.dimension()));
  const auto lo = lower_bounds(spec);
  const auto hi = upper_bounds(spec);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) throw InputError("decision vector entry is not finite");
    if (z[i] < lo[i] - 1e-9 || z[i] > hi[i] + 1e-9)
      throw InputError("decision vector entry " + std::to_string(i) + " outside control bounds");
  }
}

/// Closed form for piecewise-constant steering: sum_k delta_s_k^2 * dt.
inline double eval_J2(std::span<const double> z, const OcpSpec& spec) {
  check_decision(z, spec);
  const double dt = spec.grid().interval_length();
  double sum = 0.0;
  for (std::size_t k = 0; k < spec.num_intervals; ++k) sum += z[2 * k + 1] * z[2 * k + 1];
  return sum * dt;
}

namespace detail {

/// Vehicle state plus the running severity cost.
struct AugmentedState {
  VehicleState s;
  double cost{0.0};
};

/// Integrates the augmented system on the spec's grid. Keeps the interval-start
/// states of the last full pass so finite differences can restart mid-horizon.
class SeverityShooter {
 public:
  explicit SeverityShooter(const OcpSpec& spec)
      : spec_(spec), grid_(spec.grid()), field_(spec.obstacles), h_(grid_.step()) {}

  const OcpSpec& spec() const { return spec_; }
  const SeverityField& field() const { return field_; }

  /// J1 for controls z, integrating from interval `first` using the cached state.
  double run(std::span<const double> z, std::size_t first = 0, bool cache = false) {
    if (cache) starts_.assign(spec_.num_intervals + 1, {});
    AugmentedState a = first == 0 ? AugmentedState{spec_.initial, 0.0} : starts_[first];
    for (std::size_t k = first; k < spec_.num_intervals; ++k) {
      if (cache) starts_[k] = a;
      const ControlSample u{z[2 * k], z[2 * k + 1]};
      for (std::size_t j = 0; j < spec_.substeps_per_interval; ++j) {
        const double t = grid_.node_time(k * spec_.substeps_per_interval + j);
        try {
          a = step(a, u, t);
        } catch (const SingularityError&) {
          throw SingularityError("severity objective: steering singularity",
                                 static_cast<std::ptrdiff_t>(k));
        }
      }
    }
    if (cache) starts_[spec_.num_intervals] = a;
    return a.cost;
  }

  /// Same integration, recording every node.
  void record(std::span<const double> z, Trajectory& traj, std::vector<double>& cost) {
    traj.t.clear();
    traj.states.clear();
    cost.clear();
    AugmentedState a{spec_.initial, 0.0};
    traj.t.push_back(grid_.node_time(0));
    traj.states.push_back(a.s);
    cost.push_back(0.0);
    for (std::size_t k = 0; k < spec_.num_intervals; ++k) {
      const ControlSample u{z[2 * k], z[2 * k + 1]};
      for (std::size_t j = 0; j < spec_.substeps_per_interval; ++j) {
        const std::size_t idx = k * spec_.substeps_per_interval + j;
        try {
          a = step(a, u, grid_.node_time(idx));
        } catch (const SingularityError&) {
          throw SingularityError("severity objective: steering singularity",
                                 static_cast<std::ptrdiff_t>(k));
        }
        traj.t.push_back(grid_.node_time(idx + 1));
        traj.states.push_back(a.s);
        cost.push_back(a.cost);
      }
    }
  }

  /// Structured central differences: perturbing interval k only re-integrates from k.
  void gradient(std::span<const double> z, double fz, std::span<double> grad, double fd_step) {
    run(z, 0, true);
    const auto lo = lower_bounds(spec_);
    const auto hi = upper_bounds(spec_);
    fd_gradient(z, fz, lo, hi, fd_step,
                [&](std::size_t i, std::span<const double> zp) { return run(zp, i / 2, false); },
                grad);
  }

 private:
  double rate(double t, const VehicleState& s) const { return field_.rate(t, s.x, s.y, s.v, s.phi); }

  AugmentedState step(const AugmentedState& a, const ControlSample& u, double t) const {
    const VehicleParams& p = spec_.vehicle;
    const double h = h_;
    const StateRate k1 = dynamics(a.s, u, p);
    const double r1 = rate(t, a.s);
    const VehicleState s2 = axpy(a.s, 0.5 * h, k1);
    const StateRate k2 = dynamics(s2, u, p);
    const double r2 = rate(t + 0.5 * h, s2);
    const VehicleState s3 = axpy(a.s, 0.5 * h, k2);
    const StateRate k3 = dynamics(s3, u, p);
    const double r3 = rate(t + 0.5 * h, s3);
    const VehicleState s4 = axpy(a.s, h, k3);
    const StateRate k4 = dynamics(s4, u, p);
    const double r4 = rate(t + h, s4);
    StateRate k;
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
    return {axpy(a.s, h, k), a.cost + h * ((r1 + 2.0 * r2 + 2.0 * r3 + r4) / 6.0)};
  }

  const OcpSpec& spec_;
  TimeGrid grid_;
  SeverityField field_;
  double h_;
  std::vector<AugmentedState> starts_;
};

}  // namespace detail

struct ObjectiveReport {
  double J1{0.0};
  double J2{0.0};
  Trajectory trajectory;
  std::vector<double> cost_state;              ///< running J1 at every node
  std::vector<std::vector<double>> severity;   ///< [node][obstacle] cs values
};

/// J1 and the full trajectory for controls z.
inline ObjectiveReport eval_J1(std::span<const double> z, const OcpSpec& spec) {
  spec.validate();
  check_decision(z, spec);
  detail::SeverityShooter shooter(spec);
  ObjectiveReport rep;
  shooter.record(z, rep.trajectory, rep.cost_state);
  rep.J1 = rep.cost_state.back();
  rep.J2 = eval_J2(z, spec);
  rep.severity.resize(rep.trajectory.t.size(), std::vector<double>(spec.obstacles.size()));
  for (std::size_t n = 0; n < rep.trajectory.t.size(); ++n) {
    const VehicleState& s = rep.trajectory.states[n];
    shooter.field().severities(rep.trajectory.t[n], s.x, s.y, s.v, s.phi, rep.severity[n]);
  }
  return rep;
}

/// J1 alone, without recording the trajectory.
inline double eval_J1_value(std::span<const double> z, const OcpSpec& spec) {
  spec.validate();
  check_decision(z, spec);
  detail::SeverityShooter shooter(spec);
  return shooter.run(z);
}

/// Solver settings for the two levels and the level-one start policy.
struct OcpSolveOptions {
  SolverConfig level1;
  SolverConfig level2;
  /// Extra level-one starts besides the caller's guess; the lowest J1 wins.
  std::vector<DecisionVector> extra_starts;
};

/// Two level-one seeds: swerve left then back, and the mirror image. Each
/// phase lasts a fifth of the horizon.
inline std::vector<DecisionVector> swerve_starts(const OcpSpec& spec, double amplitude = 0.15) {
  const std::size_t n = std::max<std::size_t>(1, spec.num_intervals / 5);
  std::vector<DecisionVector> out;
  for (double sign : {1.0, -1.0}) {
    DecisionVector z = zero_controls(spec);
    for (std::size_t k = 0; k < spec.num_intervals && k < 2 * n; ++k)
      z[2 * k + 1] = std::clamp(k < n ? sign * amplitude : -sign * amplitude, spec.bounds.delta_min,
                                spec.bounds.delta_max);
    out.push_back(std::move(z));
  }
  return out;
}

struct Ocp1Result {
  DecisionVector z;
  double J1{0.0};
  SolverResult solver;
  std::size_t start_index{0};  ///< which start produced z (0 = caller's guess)
};

struct Ocp2Result {
  DecisionVector z;
  double J1{0.0};
  double J2{0.0};
  double budget{0.0};
  double epsilon{0.0};
  SolverResult solver;
};

inline double default_epsilon(double J1_star) { return 1e-3 * (1.0 + J1_star); }

namespace detail {

inline Ocp1Result solve_ocp1_from(const OcpSpec& spec, const DecisionVector& guess,
                                  const SolverConfig& config) {
  SeverityShooter shooter(spec);
  const double initial = shooter.run(guess);
  if (!std::isfinite(initial)) throw InputError("solve_ocp1: J1 not finite at initial guess");
  // One scale per problem, shared by all starts: the severity of driving on unchanged.
  const double baseline = std::max(initial, shooter.run(zero_controls(spec)));
  const double scale = baseline > 0.0 ? baseline : 1.0;

  NlpProblem prob;
  prob.dimension = spec.dimension();
  prob.lower = lower_bounds(spec);
  prob.upper = upper_bounds(spec);
  prob.objective = [&](std::span<const double> z) {
    try {
      return shooter.run(z) / scale;
    } catch (const SingularityError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  prob.objective_gradient = [&](std::span<const double> z, double fz, std::span<double> g) {
    shooter.gradient(z, fz * scale, g, config.fd_step);
    for (double& v : g) v /= scale;
  };

  Ocp1Result r;
  r.solver = minimize(prob, guess, config);
  r.z = r.solver.x_best;
  r.J1 = shooter.run(r.z);
  return r;
}

}  // namespace detail

/// Level one: minimal total severity. The best of the caller's guess and any
/// `extra_starts` is returned; J1(z) <= J1(initial_guess) always holds.
inline Ocp1Result solve_ocp1(const OcpSpec& spec, const DecisionVector& initial_guess,
                             const OcpSolveOptions& options = {}) {
  spec.validate();
  check_decision(initial_guess, spec);
  Ocp1Result best = detail::solve_ocp1_from(spec, initial_guess, options.level1);
  for (std::size_t s = 0; s < options.extra_starts.size(); ++s) {
    check_decision(options.extra_starts[s], spec);
    Ocp1Result r = detail::solve_ocp1_from(spec, options.extra_starts[s], options.level1);
    r.start_index = s + 1;
    if (r.J1 < best.J1) best = std::move(r);
  }
  return best;
}

/// Level two: minimal steering effort inside the severity budget J1* + eps.
inline Ocp2Result solve_ocp2(const OcpSpec& spec, double J1_star, const DecisionVector& warm_start,
                             const OcpSolveOptions& options = {}) {
  spec.validate();
  check_decision(warm_start, spec);
  if (!(std::isfinite(J1_star) && J1_star >= 0.0)) throw InputError("solve_ocp2: J1* must be >= 0");

  const double eps = spec.epsilon.value_or(default_epsilon(J1_star));
  const double budget = J1_star + eps;
  const double cscale = 1.0 + J1_star;
  const double dt = spec.grid().interval_length();
  const std::size_t n = spec.dimension();
  const SolverConfig& config = options.level2;

  detail::SeverityShooter shooter(spec);
  NlpProblem prob;
  prob.dimension = n;
  prob.lower = lower_bounds(spec);
  prob.upper = upper_bounds(spec);
  prob.objective = [&](std::span<const double> z) {
    double sum = 0.0;
    for (std::size_t k = 0; k < spec.num_intervals; ++k) sum += z[2 * k + 1] * z[2 * k + 1];
    return sum * dt;
  };
  prob.objective_gradient = [&](std::span<const double> z, double, std::span<double> g) {
    for (std::size_t k = 0; k < spec.num_intervals; ++k) {
      g[2 * k] = 0.0;
      g[2 * k + 1] = 2.0 * z[2 * k + 1] * dt;
    }
  };
  prob.inequality_constraints.push_back([&](std::span<const double> z) {
    try {
      return (shooter.run(z) - budget) / cscale;
    } catch (const SingularityError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  });
  prob.constraint_gradients.push_back([&](std::span<const double> z, double gz, std::span<double> g) {
    shooter.gradient(z, gz * cscale + budget, g, config.fd_step);
    for (double& v : g) v /= cscale;
  });

  Ocp2Result r;
  r.epsilon = eps;
  r.budget = budget;
  r.solver = minimize(prob, warm_start, config);
  r.z = r.solver.x_best;
  r.J1 = shooter.run(r.z);
  r.J2 = eval_J2(r.z, spec);
  return r;
}

struct SolveReport {
  double J1_star{0.0};
  double J2_level1{0.0};   ///< J2 at the level-one solution
  double J2_level2{0.0};
  double J1_at_z2{0.0};
  double epsilon{0.0};
  DecisionVector z1;
  DecisionVector z2;
  SolverResult level1;
  SolverResult level2;
  std::size_t level1_start{0};
  ObjectiveReport path1;   ///< trajectory and severities at z1
  ObjectiveReport path2;   ///< trajectory and severities at z2
  double wall_time_seconds{0.0};
};

/// Both levels: level one from `initial_guess` (zero controls by default),
/// level two warm-started at the level-one solution.
inline SolveReport two_level_solve(const OcpSpec& spec, const OcpSolveOptions& options = {},
                                   std::optional<DecisionVector> initial_guess = std::nullopt) {
  const auto started = std::chrono::steady_clock::now();
  spec.validate();
  const DecisionVector guess = initial_guess ? *initial_guess : zero_controls(spec);

  SolveReport rep;
  Ocp1Result l1 = solve_ocp1(spec, guess, options);
  Ocp2Result l2 = solve_ocp2(spec, l1.J1, l1.z, options);

  rep.J1_star = l1.J1;
  rep.J2_level1 = eval_J2(l1.z, spec);
  rep.J2_level2 = l2.J2;
  rep.J1_at_z2 = l2.J1;
  rep.epsilon = l2.epsilon;
  rep.z1 = l1.z;
  rep.z2 = l2.z;
  rep.level1 = std::move(l1.solver);
  rep.level2 = std::move(l2.solver);
  rep.level1_start = l1.start_index;
  rep.path1 = eval_J1(rep.z1, spec);
  rep.path2 = eval_J1(rep.z2, spec);
  rep.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rep;
}

/// Level one for two specs whose ratings dominate pointwise (J1(z; high) >= J1(z; low)
/// for every z). Each spec is also re-solved from the other's solution and keeps
/// the better result, which makes J1*(low) <= J1*(high) hold for the returned pair.
struct OrderedPair {
  Ocp1Result low;
  Ocp1Result high;
};

inline OrderedPair cross_warm_start_ocp1(const OcpSpec& low, const OcpSpec& high,
                                         const OcpSolveOptions& options = {}) {
  OrderedPair out{solve_ocp1(low, zero_controls(low), options),
                  solve_ocp1(high, zero_controls(high), options)};
  OcpSolveOptions single = options;
  single.extra_starts.clear();
  Ocp1Result high_from_low = solve_ocp1(high, out.low.z, single);
  if (high_from_low.J1 < out.high.J1) out.high = std::move(high_from_low);
  // Last, so that J1*(low) <= J1(z_high; low) <= J1*(high).
  Ocp1Result low_from_high = solve_ocp1(low, out.high.z, single);
  if (low_from_high.J1 < out.low.J1) out.low = std::move(low_from_high);
  return out;
}

}  // namespace sevplan
