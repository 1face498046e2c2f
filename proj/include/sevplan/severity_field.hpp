#pragma once

// Collision-severity fields of static and moving obstacles.
//
// Each obstacle carries a normalized shape function (value 1 on its core,
// quartic-exponential decay across a fuzzy margin), a constant-velocity pose,
// and a rating C. The severity seen by an ego point moving with velocity v is
//
//     cs = C * |v_ego - v_obstacle| * f(x_p / a, y_p / b)
//
// where (x_p, y_p) are the ego coordinates in the obstacle frame.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sevplan/errors.hpp"
#include "sevplan/format.hpp"

namespace sevplan {

enum class ShapeKind { circle, rectangle };

struct ShapeParams {
  ShapeKind kind{ShapeKind::circle};
  double half_length_a{1.0};  ///< [m], along the obstacle's x axis
  double half_width_b{1.0};   ///< [m], along the obstacle's y axis
  double fuzzy_d{0.5};        ///< decay length, in units of the normalized shape
};

/// Constant-velocity straight-line motion; the field keeps its initial orientation.
struct ObstacleMotion {
  double center_x0{0.0};
  double center_y0{0.0};
  double heading0{0.0};           ///< [rad] orientation of the shape
  double speed{0.0};              ///< [m/s], >= 0
  double heading_of_travel{0.0};  ///< [rad]
};

struct Obstacle {
  std::string id;
  ShapeParams shape;
  ObstacleMotion motion;
  double severity_C{0.0};
};

struct Point2 {
  double x{0.0};
  double y{0.0};
};

inline void validate(const ShapeParams& s) {
  if (!(std::isfinite(s.half_length_a) && s.half_length_a > 0.0))
    throw DomainError("shape half_length_a must be finite and > 0");
  if (!(std::isfinite(s.half_width_b) && s.half_width_b > 0.0))
    throw DomainError("shape half_width_b must be finite and > 0");
  if (!(std::isfinite(s.fuzzy_d) && s.fuzzy_d > 0.0))
    throw DomainError("shape fuzzy_d must be finite and > 0");
}

inline void validate(const ObstacleMotion& m) {
  if (!(std::isfinite(m.center_x0) && std::isfinite(m.center_y0) && std::isfinite(m.heading0) &&
        std::isfinite(m.heading_of_travel)))
    throw DomainError("obstacle motion must be finite");
  if (!(std::isfinite(m.speed) && m.speed >= 0.0))
    throw DomainError("obstacle speed must be finite and >= 0");
}

inline void validate(const Obstacle& o) {
  validate(o.shape);
  validate(o.motion);
  if (!(std::isfinite(o.severity_C) && o.severity_C >= 0.0))
    throw DomainError("obstacle '" + o.id + "': severity rating must be finite and >= 0");
}

namespace detail {

inline void check_shape_args(double x, double y, double d) {
  if (!std::isfinite(x) || !std::isfinite(y)) throw DomainError("shape argument is not finite");
  if (!(std::isfinite(d) && d > 0.0)) throw DomainError("fuzzy margin d must be > 0");
}

inline double quartic_decay(double excess, double d) {
  const double s = excess / d;
  const double s2 = s * s;
  return std::exp(-(s2 * s2));
}

}  // namespace detail

/// Unit disc with fuzzy margin: 1 for |(x,y)|_2 <= 1, exp(-((r-1)/d)^4) outside.
inline double unit_circle_shape(double x, double y, double d) {
  detail::check_shape_args(x, y, d);
  const double r = std::sqrt(x * x + y * y);
  if (r <= 1.0) return 1.0;
  return detail::quartic_decay(r - 1.0, d);
}

enum class RectRegion { core, edge, corner };

/// Which branch of the unit-square shape applies at (x, y).
inline RectRegion rect_region(double x, double y) {
  const double ax = std::abs(x);
  const double ay = std::abs(y);
  if (ax <= 1.0 && ay <= 1.0) return RectRegion::core;
  if (ax <= 1.0 || ay <= 1.0) return RectRegion::edge;
  return RectRegion::corner;
}

/// Unit square with fuzzy margin. Edge bands decay with the max-norm excess,
/// corner quadrants with the Euclidean distance to the nearest corner (+-1, +-1).
inline double unit_rect_shape(double x, double y, double d) {
  detail::check_shape_args(x, y, d);
  const double ax = std::abs(x);
  const double ay = std::abs(y);
  switch (rect_region(x, y)) {
    case RectRegion::core:
      return 1.0;
    case RectRegion::edge:
      return detail::quartic_decay(std::max(ax, ay) - 1.0, d);
    case RectRegion::corner:
      break;
  }
  return detail::quartic_decay(std::sqrt((ax - 1.0) * (ax - 1.0) + (ay - 1.0) * (ay - 1.0)), d);
}

/// Shape value at obstacle-frame coordinates (meters), scaled by the half extents.
inline double scaled_shape(double x, double y, const ShapeParams& shape) {
  validate(shape);
  const double xn = x / shape.half_length_a;
  const double yn = y / shape.half_width_b;
  return shape.kind == ShapeKind::circle ? unit_circle_shape(xn, yn, shape.fuzzy_d)
                                         : unit_rect_shape(xn, yn, shape.fuzzy_d);
}

inline Point2 obstacle_center(double t, const ObstacleMotion& m) {
  return {m.center_x0 + m.speed * t * std::cos(m.heading_of_travel),
          m.center_y0 + m.speed * t * std::sin(m.heading_of_travel)};
}

/// World point -> obstacle frame: R(phi_c)^T ((x, y) - c(t)).
inline Point2 to_obstacle_frame(double t, double x, double y, const ObstacleMotion& m) {
  const Point2 c = obstacle_center(t, m);
  const double dx = x - c.x;
  const double dy = y - c.y;
  const double cph = std::cos(m.heading0);
  const double sph = std::sin(m.heading0);
  return {dx * cph + dy * sph, -dx * sph + dy * cph};
}

/// Obstacle with its trigonometry cached, for evaluation inside integrators.
/// Produces the same values as the free functions above.
class PreparedObstacle {
 public:
  explicit PreparedObstacle(const Obstacle& o)
      : shape_(o.shape),
        motion_(o.motion),
        rating_(o.severity_C),
        cos_pose_(std::cos(o.motion.heading0)),
        sin_pose_(std::sin(o.motion.heading0)),
        cos_travel_(std::cos(o.motion.heading_of_travel)),
        sin_travel_(std::sin(o.motion.heading_of_travel)),
        vel_x_(o.motion.speed * cos_travel_),
        vel_y_(o.motion.speed * sin_travel_),
        reach_(1.0 + 5.25 * o.shape.fuzzy_d) {
    validate(o);
  }

  Point2 center(double t) const {
    return {motion_.center_x0 + motion_.speed * t * cos_travel_,
            motion_.center_y0 + motion_.speed * t * sin_travel_};
  }

  Point2 to_frame(double t, double x, double y) const {
    const Point2 c = center(t);
    const double dx = x - c.x;
    const double dy = y - c.y;
    return {dx * cos_pose_ + dy * sin_pose_, -dx * sin_pose_ + dy * cos_pose_};
  }

  double shape_value(double t, double x, double y) const {
    const Point2 p = to_frame(t, x, y);
    const double xn = p.x / shape_.half_length_a;
    const double yn = p.y / shape_.half_width_b;
    // exp(-s^4) is exactly 0.0 in double once s > 5.25; both shapes have excess >= |xn| - 1.
    if ((std::abs(xn) > reach_ || std::abs(yn) > reach_) && std::isfinite(xn) && std::isfinite(yn)) return 0.0;
    return shape_.kind == ShapeKind::circle ? unit_circle_shape(xn, yn, shape_.fuzzy_d)
                                            : unit_rect_shape(xn, yn, shape_.fuzzy_d);
  }

  /// Euclidean norm of the ego velocity minus the obstacle velocity.
  double relative_speed(double ego_vx, double ego_vy) const {
    const double dx = ego_vx - vel_x_, dy = ego_vy - vel_y_;
    return std::sqrt(dx * dx + dy * dy);
  }

  /// Severity for an ego point at (x, y) moving with velocity (vx, vy).
  double severity(double t, double x, double y, double vx, double vy) const {
    if (rating_ == 0.0) return 0.0;
    const double f = shape_value(t, x, y);
    if (f == 0.0) return 0.0;
    return rating_ * relative_speed(vx, vy) * f;
  }

  const ShapeParams& shape() const { return shape_; }
  const ObstacleMotion& motion() const { return motion_; }
  double rating() const { return rating_; }

 private:
  ShapeParams shape_;
  ObstacleMotion motion_;
  double rating_;
  double cos_pose_, sin_pose_;
  double cos_travel_, sin_travel_;
  double vel_x_, vel_y_;
  double reach_;
};

/// Collision severity C * V_r * f for an ego at (x, y) with speed v and heading.
inline double severity(double t, double x, double y, double v, double heading,
                       const Obstacle& obstacle) {
  if (!std::isfinite(v) || !std::isfinite(heading)) throw DomainError("ego speed/heading not finite");
  const PreparedObstacle p(obstacle);
  return p.severity(t, x, y, v * std::cos(heading), v * std::sin(heading));
}

/// The obstacle set the optimizer sees: prepared once, evaluated many times.
class SeverityField {
 public:
  SeverityField() = default;
  explicit SeverityField(std::span<const Obstacle> obstacles) {
    prepared_.reserve(obstacles.size());
    for (const auto& o : obstacles) prepared_.emplace_back(o);
  }

  std::size_t size() const { return prepared_.size(); }
  bool empty() const { return prepared_.empty(); }
  const PreparedObstacle& operator[](std::size_t i) const { return prepared_[i]; }

  /// Sum of squared severities, the running cost of the severity objective.
  double rate(double t, double x, double y, double v, double phi) const {
    if (prepared_.empty()) return 0.0;
    const double vx = v * std::cos(phi);
    const double vy = v * std::sin(phi);
    double sum = 0.0;
    for (const auto& p : prepared_) {
      const double cs = p.severity(t, x, y, vx, vy);
      sum += cs * cs;
    }
    return sum;
  }

  /// Per-obstacle severities, written into `out` (size must match).
  void severities(double t, double x, double y, double v, double phi, std::span<double> out) const {
    const double vx = v * std::cos(phi);
    const double vy = v * std::sin(phi);
    for (std::size_t i = 0; i < prepared_.size(); ++i) out[i] = prepared_[i].severity(t, x, y, vx, vy);
  }

 private:
  std::vector<PreparedObstacle> prepared_;
};

/// Ego kinematic quantities the severity depends on.
struct EgoPoint {
  double x{0.0};
  double y{0.0};
  double phi{0.0};
  double v{0.0};
};

inline double severity_rate(double t, const EgoPoint& ego, std::span<const Obstacle> obstacles) {
  return SeverityField(obstacles).rate(t, ego.x, ego.y, ego.v, ego.phi);
}

struct SeverityGradient {
  double d_x{0.0};
  double d_y{0.0};
  double d_v{0.0};
  double d_phi{0.0};
};

/// Central-difference gradient of severity_rate with respect to (x, y, v, phi).
/// `rel_step` sets h = max(rel_step, rel_step * |component|).
inline SeverityGradient severity_gradient(double t, const EgoPoint& ego,
                                          std::span<const Obstacle> obstacles,
                                          double rel_step = 1e-6) {
  SeverityGradient g;
  if (obstacles.empty()) return g;
  const SeverityField field(obstacles);
  auto diff = [&](double EgoPoint::*member) {
    const double c = ego.*member;
    const double h = std::max(rel_step, rel_step * std::abs(c));
    EgoPoint lo = ego, hi = ego;
    lo.*member = c - h;
    hi.*member = c + h;
    const double fp = field.rate(t, hi.x, hi.y, hi.v, hi.phi);
    const double fm = field.rate(t, lo.x, lo.y, lo.v, lo.phi);
    return (fp - fm) / ((c + h) - (c - h));
  };
  g.d_x = diff(&EgoPoint::x);
  g.d_y = diff(&EgoPoint::y);
  g.d_v = diff(&EgoPoint::v);
  g.d_phi = diff(&EgoPoint::phi);
  return g;
}

struct RasterSample {
  double x;
  double y;
  double value;
};

/// Total severity sum_i cs_i on a regular nx-by-ny grid at time t, for an ego
/// moving with the given speed and heading. Debug/plotting aid.
inline std::vector<RasterSample> rasterize_severity(double t, std::span<const Obstacle> obstacles,
                                                    double x_min, double x_max, std::size_t nx,
                                                    double y_min, double y_max, std::size_t ny,
                                                    double ego_speed, double ego_heading) {
  if (nx < 2 || ny < 2) throw InputError("raster needs at least 2x2 samples");
  const SeverityField field(obstacles);
  std::vector<double> cs(field.size());
  std::vector<RasterSample> out;
  out.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    const double y = y_min + (y_max - y_min) * static_cast<double>(j) / static_cast<double>(ny - 1);
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(nx - 1);
      field.severities(t, x, y, ego_speed, ego_heading, cs);
      double total = 0.0;
      for (double c : cs) total += c;
      out.push_back({x, y, total});
    }
  }
  return out;
}

inline void write_raster_csv(std::ostream& os, std::span<const RasterSample> samples) {
  os << "x,y,value\n";
  for (const auto& s : samples)
    os << format_number(s.x) << ',' << format_number(s.y) << ',' << format_number(s.value) << '\n';
}

}  // namespace sevplan
