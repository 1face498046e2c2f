#pragma once

// Kinematic single-track vehicle with a first-order steering lag:
//
//   x'     = v cos(phi)
//   y'     = v sin(phi)
//   phi'   = v tan(delta) / L
//   v'     = a
//   delta' = (delta_s - delta) / dT
//
// (x, y) is the rear-axle midpoint. Controls (a, delta_s) are held constant
// over each integration step.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "sevplan/errors.hpp"
#include "sevplan/severity_field.hpp"

namespace sevplan {

struct VehicleParams {
  double wheelbase_L{2.7};      ///< [m]
  double steering_lag_dT{0.2};  ///< [s]
};

struct VehicleState {
  double x{0.0};
  double y{0.0};
  double phi{0.0};
  double v{0.0};
  double delta{0.0};

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct ControlSample {
  double accel_a{0.0};
  double steer_cmd_delta_s{0.0};

  friend bool operator==(const ControlSample&, const ControlSample&) = default;
};

/// Time derivative of (x, y, phi, v, delta).
using StateRate = std::array<double, 5>;

/// |delta| must stay below this to keep tan(delta) well conditioned.
inline constexpr double kSteeringLimit = std::numbers::pi / 2.0 - 1e-3;

inline void validate(const VehicleParams& p) {
  if (!(std::isfinite(p.wheelbase_L) && p.wheelbase_L > 0.0))
    throw DomainError("wheelbase must be finite and > 0");
  if (!(std::isfinite(p.steering_lag_dT) && p.steering_lag_dT > 0.0))
    throw DomainError("steering lag must be finite and > 0");
}

inline EgoPoint ego_point(const VehicleState& s) { return {s.x, s.y, s.phi, s.v}; }

inline double severity_rate(double t, const VehicleState& s, std::span<const Obstacle> obstacles) {
  return severity_rate(t, ego_point(s), obstacles);
}

inline SeverityGradient severity_gradient(double t, const VehicleState& s,
                                          std::span<const Obstacle> obstacles) {
  return severity_gradient(t, ego_point(s), obstacles);
}

inline StateRate dynamics(const VehicleState& s, const ControlSample& u, const VehicleParams& p) {
  if (!(std::abs(s.delta) < kSteeringLimit))
    throw SingularityError("steering angle at or beyond the tan singularity guard");
  return {s.v * std::cos(s.phi), s.v * std::sin(s.phi), s.v * std::tan(s.delta) / p.wheelbase_L,
          u.accel_a, (u.steer_cmd_delta_s - s.delta) / p.steering_lag_dT};
}

namespace detail {

inline VehicleState axpy(const VehicleState& s, double h, const StateRate& k) {
  return {s.x + h * k[0], s.y + h * k[1], s.phi + h * k[2], s.v + h * k[3], s.delta + h * k[4]};
}

}  // namespace detail

/// One classical Runge-Kutta step of length h with the control held constant.
inline VehicleState rk4_step(const VehicleState& s, const ControlSample& u, const VehicleParams& p,
                             double h) {
  if (!(h > 0.0)) throw InputError("rk4_step: step must be > 0");
  const StateRate k1 = dynamics(s, u, p);
  const StateRate k2 = dynamics(detail::axpy(s, 0.5 * h, k1), u, p);
  const StateRate k3 = dynamics(detail::axpy(s, 0.5 * h, k2), u, p);
  const StateRate k4 = dynamics(detail::axpy(s, h, k3), u, p);
  StateRate k;
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
  return detail::axpy(s, h, k);
}

/// States at every integration node, t.size() == states.size().
struct Trajectory {
  std::vector<double> t;
  std::vector<VehicleState> states;
};

/// Uniform time grid shared by the simulator and the transcription:
/// `intervals` control intervals of `substeps` RK4 steps each.
struct TimeGrid {
  double t0{0.0};
  double tf{1.0};
  std::size_t intervals{1};
  std::size_t substeps{1};

  double interval_length() const { return (tf - t0) / static_cast<double>(intervals); }
  double step() const { return (tf - t0) / static_cast<double>(intervals * substeps); }
  std::size_t nodes() const { return intervals * substeps + 1; }
  double node_time(std::size_t idx) const {
    return idx == intervals * substeps ? tf : t0 + static_cast<double>(idx) * step();
  }
  double interval_start(std::size_t k) const { return node_time(k * substeps); }

  void validate() const {
    if (!(std::isfinite(t0) && std::isfinite(tf) && tf > t0)) throw InputError("time grid needs tf > t0");
    if (intervals < 1) throw InputError("time grid needs at least one interval");
    if (substeps < 1) throw InputError("time grid needs substeps_per_interval >= 1");
  }
};

/// Integrates from `initial` with piecewise-constant controls (one per interval).
inline Trajectory simulate(const VehicleState& initial, std::span<const ControlSample> controls,
                           const VehicleParams& params, double t0, double tf,
                           std::size_t substeps_per_interval) {
  if (controls.empty()) throw InputError("simulate: no controls");
  validate(params);
  const TimeGrid grid{t0, tf, controls.size(), substeps_per_interval};
  grid.validate();
  const double h = grid.step();

  Trajectory out;
  out.t.reserve(grid.nodes());
  out.states.reserve(grid.nodes());
  out.t.push_back(grid.node_time(0));
  out.states.push_back(initial);

  VehicleState s = initial;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    for (std::size_t j = 0; j < substeps_per_interval; ++j) {
      try {
        s = rk4_step(s, controls[k], params, h);
      } catch (const SingularityError&) {
        throw SingularityError("simulate: steering singularity", static_cast<std::ptrdiff_t>(k));
      }
      out.t.push_back(grid.node_time(k * substeps_per_interval + j + 1));
      out.states.push_back(s);
    }
  }
  return out;
}

}  // namespace sevplan
