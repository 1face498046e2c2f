#pragma once

// Scenario files, rating tables, run orchestration and CSV artifacts.
//
// A scenario is a JSON document (with '#' line comments allowed) holding the
// ego initial state, vehicle parameters, transcription settings, the rating
// setting and the obstacle list.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sevplan/errors.hpp"
#include "sevplan/format.hpp"
#include "sevplan/ocp.hpp"
#include "sevplan/severity_field.hpp"
#include "sevplan/vehicle_model.hpp"

namespace sevplan {

enum class ObjectClass { pedestrian, bus, car, bus_station, building };

inline constexpr std::array<std::pair<ObjectClass, std::string_view>, 5> kObjectClassNames{{
    {ObjectClass::pedestrian, "pedestrian"},
    {ObjectClass::bus, "bus"},
    {ObjectClass::car, "car"},
    {ObjectClass::bus_station, "bus_station"},
    {ObjectClass::building, "building"},
}};

inline std::string_view to_string(ObjectClass c) {
  for (const auto& [k, name] : kObjectClassNames)
    if (k == c) return name;
  return "unknown";
}

inline std::optional<ObjectClass> object_class_from(std::string_view name) {
  for (const auto& [k, n] : kObjectClassNames)
    if (n == name) return k;
  return std::nullopt;
}

/// Severity rating C per object class.
struct RatingTable {
  std::map<ObjectClass, double> values;

  double at(ObjectClass c) const { return values.at(c); }

  /// The two rating settings; setting 2 raises pedestrians to 200.
  static RatingTable setting(int which) {
    RatingTable t;
    t.values = {{ObjectClass::pedestrian, 40.0},
                {ObjectClass::bus, 30.0},
                {ObjectClass::car, 20.0},
                {ObjectClass::bus_station, 10.0},
                {ObjectClass::building, 10.0}};
    if (which == 2) {
      t.values[ObjectClass::pedestrian] = 200.0;
    } else if (which != 1) {
      throw InputError("rating setting must be 1 or 2");
    }
    return t;
  }

  /// pedestrians >= buses >= cars >= bus stations == buildings, all >= 0.
  void validate() const {
    for (const auto& [c, v] : kObjectClassNames) {
      auto it = values.find(c);
      if (it == values.end()) throw ValidationError("rating table lacks class '" + std::string(v) + "'");
      if (!(std::isfinite(it->second) && it->second >= 0.0))
        throw ValidationError("rating for '" + std::string(v) + "' must be finite and >= 0");
    }
    const double ped = at(ObjectClass::pedestrian), bus = at(ObjectClass::bus),
                 car = at(ObjectClass::car), stop = at(ObjectClass::bus_station),
                 bld = at(ObjectClass::building);
    if (!(ped >= bus && bus >= car && car >= stop && stop == bld))
      throw ValidationError(
          "rating table must satisfy pedestrian >= bus >= car >= bus_station == building");
  }
};

/// Footprint used when a scenario omits the shape of an obstacle.
inline std::optional<ShapeParams> default_shape(ObjectClass c) {
  switch (c) {
    case ObjectClass::car: return ShapeParams{ShapeKind::rectangle, 2.25, 0.9, 0.5};
    case ObjectClass::bus: return ShapeParams{ShapeKind::rectangle, 6.0, 1.25, 0.5};
    case ObjectClass::pedestrian: return ShapeParams{ShapeKind::circle, 0.3, 0.3, 0.5};
    case ObjectClass::bus_station: return ShapeParams{ShapeKind::rectangle, 2.0, 1.0, 0.5};
    case ObjectClass::building: return std::nullopt;
  }
  return std::nullopt;
}

struct ScenarioObstacle {
  std::string id;
  ObjectClass object_class{ObjectClass::car};
  ShapeParams shape;
  ObstacleMotion motion;
  std::optional<double> rating_override;

  friend bool operator==(const ScenarioObstacle& a, const ScenarioObstacle& b) {
    auto shape_eq = [](const ShapeParams& x, const ShapeParams& y) {
      return x.kind == y.kind && x.half_length_a == y.half_length_a &&
             x.half_width_b == y.half_width_b && x.fuzzy_d == y.fuzzy_d;
    };
    auto motion_eq = [](const ObstacleMotion& x, const ObstacleMotion& y) {
      return x.center_x0 == y.center_x0 && x.center_y0 == y.center_y0 && x.heading0 == y.heading0 &&
             x.speed == y.speed && x.heading_of_travel == y.heading_of_travel;
    };
    return a.id == b.id && a.object_class == b.object_class && shape_eq(a.shape, b.shape) &&
           motion_eq(a.motion, b.motion) && a.rating_override == b.rating_override;
  }
};

struct OcpSettings {
  double t0{0.0};
  double tf{4.0};
  std::size_t num_intervals{40};
  std::size_t substeps_per_interval{4};
  ControlBounds bounds;
  std::optional<double> epsilon;

  friend bool operator==(const OcpSettings&, const OcpSettings&) = default;
};

struct Scenario {
  std::string name;
  VehicleState ego;
  VehicleParams vehicle;
  OcpSettings ocp;
  int rating_setting{1};
  /// Per-class replacements applied on top of the selected setting.
  std::map<ObjectClass, double> rating_table_overrides;
  std::vector<ScenarioObstacle> obstacles;

  RatingTable ratings() const {
    RatingTable t = RatingTable::setting(rating_setting);
    for (const auto& [c, v] : rating_table_overrides) t.values[c] = v;
    return t;
  }

  friend bool operator==(const Scenario& a, const Scenario& b) {
    return a.name == b.name && a.ego == b.ego && a.vehicle.wheelbase_L == b.vehicle.wheelbase_L &&
           a.vehicle.steering_lag_dT == b.vehicle.steering_lag_dT && a.ocp == b.ocp &&
           a.rating_setting == b.rating_setting &&
           a.rating_table_overrides == b.rating_table_overrides && a.obstacles == b.obstacles;
  }
};

/// Resolved severity rating of one obstacle.
inline double obstacle_rating(const Scenario& sc, const ScenarioObstacle& o) {
  return o.rating_override ? *o.rating_override : sc.ratings().at(o.object_class);
}

inline void validate(const Scenario& sc) {
  const VehicleState& e = sc.ego;
  if (!(std::isfinite(e.x) && std::isfinite(e.y) && std::isfinite(e.phi) && std::isfinite(e.v) &&
        std::isfinite(e.delta)))
    throw ValidationError("ego initial state must be finite");
  if (!(std::abs(e.delta) < kSteeringLimit)) throw ValidationError("ego steering angle is singular");
  if (sc.rating_setting != 1 && sc.rating_setting != 2)
    throw ValidationError("ratings.setting must be 1 or 2");
  sc.ratings().validate();
  std::set<std::string> ids;
  for (const auto& o : sc.obstacles) {
    if (o.id.empty()) throw ValidationError("obstacle id must not be empty");
    if (!ids.insert(o.id).second) throw ValidationError("duplicate obstacle id '" + o.id + "'");
    if (o.rating_override && !(std::isfinite(*o.rating_override) && *o.rating_override >= 0.0))
      throw ValidationError("obstacle '" + o.id + "': rating_override must be >= 0");
    try {
      sevplan::validate(o.shape);
      sevplan::validate(o.motion);
    } catch (const DomainError& err) {
      throw ValidationError("obstacle '" + o.id + "': " + err.what());
    }
  }
}

inline OcpSpec to_ocp_spec(const Scenario& sc) {
  validate(sc);
  OcpSpec spec;
  spec.initial = sc.ego;
  spec.vehicle = sc.vehicle;
  spec.num_intervals = sc.ocp.num_intervals;
  spec.substeps_per_interval = sc.ocp.substeps_per_interval;
  spec.t0 = sc.ocp.t0;
  spec.tf = sc.ocp.tf;
  spec.bounds = sc.ocp.bounds;
  spec.epsilon = sc.ocp.epsilon;
  for (const auto& o : sc.obstacles)
    spec.obstacles.push_back({o.id, o.shape, o.motion, obstacle_rating(sc, o)});
  try {
    spec.validate();
  } catch (const InputError& err) {
    throw ValidationError(err.what());
  } catch (const DomainError& err) {
    throw ValidationError(err.what());
  }
  return spec;
}

namespace detail {

using json = nlohmann::json;

/// Drops '#' comments (outside of strings) so the rest parses as plain JSON.
inline std::string strip_hash_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false, escaped = false, in_comment = false;
  for (char c : text) {
    if (in_comment) {
      if (c == '\n') {
        in_comment = false;
        out.push_back(c);
      }
      continue;
    }
    if (in_string) {
      out.push_back(c);
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '#') {
      in_comment = true;
      continue;
    }
    if (c == '"') in_string = true;
    out.push_back(c);
  }
  return out;
}

inline std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

/// Object reader that tracks which keys were consumed and rejects the rest.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(path_, "expected an object");
  }

  void mark(const std::string& key) { used_.insert(key); }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ParseError(field(key), "missing required field");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ParseError(field(key), "expected a number");
    return v.get<double>();
  }

  double number_or(const std::string& key, double fallback) {
    used_.insert(key);
    return has(key) ? number(key) : fallback;
  }

  std::optional<double> optional_number(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  std::size_t count_or(const std::string& key, std::size_t fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ParseError(field(key), "expected a non-negative integer");
    return static_cast<std::size_t>(v.get<long long>());
  }

  std::string string(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ParseError(field(key), "expected a string");
    return v.get<std::string>();
  }

  std::string field(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ParseError(field(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline ShapeKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "circle") return ShapeKind::circle;
  if (s == "rectangle") return ShapeKind::rectangle;
  throw ParseError(where, "shape kind must be 'circle' or 'rectangle'");
}

}  // namespace detail

/// Parses and validates a scenario document.
inline Scenario parse_scenario(std::string_view text) {
  using detail::Fields;
  using detail::json;
  const std::string cleaned = detail::strip_hash_comments(text);
  json doc;
  try {
    doc = json::parse(cleaned);
  } catch (const json::parse_error& e) {
    throw ParseError("line " + std::to_string(detail::line_of(cleaned, e.byte == 0 ? 0 : e.byte - 1)),
                     e.what());
  }

  Scenario sc;
  Fields top(doc, "scenario");
  sc.name = top.string("name");

  {
    Fields ego(top.raw("ego"), "ego");
    sc.ego.x = ego.number("x");
    sc.ego.y = ego.number("y");
    sc.ego.phi = ego.number("phi");
    sc.ego.v = ego.number("v");
    sc.ego.delta = ego.number_or("delta", 0.0);
    ego.finish();
  }
  if (top.has("vehicle")) {
    Fields veh(top.raw("vehicle"), "vehicle");
    sc.vehicle.wheelbase_L = veh.number_or("wheelbase", sc.vehicle.wheelbase_L);
    sc.vehicle.steering_lag_dT = veh.number_or("steering_lag", sc.vehicle.steering_lag_dT);
    veh.finish();
  } else {
    top.mark("vehicle");
  }
  top.mark("ocp");
  top.mark("ratings");
  if (top.has("ocp")) {
    Fields ocp(top.raw("ocp"), "ocp");
    OcpSettings& o = sc.ocp;
    o.t0 = ocp.number_or("t0", o.t0);
    o.tf = ocp.number_or("tf", o.tf);
    o.num_intervals = ocp.count_or("num_intervals", o.num_intervals);
    o.substeps_per_interval = ocp.count_or("substeps_per_interval", o.substeps_per_interval);
    o.bounds.a_min = ocp.number_or("a_min", o.bounds.a_min);
    o.bounds.a_max = ocp.number_or("a_max", o.bounds.a_max);
    o.bounds.delta_min = ocp.number_or("delta_min", o.bounds.delta_min);
    o.bounds.delta_max = ocp.number_or("delta_max", o.bounds.delta_max);
    o.epsilon = ocp.optional_number("epsilon");
    ocp.finish();
  }
  if (top.has("ratings")) {
    Fields rat(top.raw("ratings"), "ratings");
    if (rat.has("setting")) {
      const std::size_t s = rat.count_or("setting", 1);
      if (s != 1 && s != 2) throw ParseError("ratings.setting", "must be 1 or 2");
      sc.rating_setting = static_cast<int>(s);
    } else {
      rat.mark("setting");
    }
    if (rat.has("table")) {
      Fields table(rat.raw("table"), "ratings.table");
      for (const auto& [c, name] : kObjectClassNames)
        if (auto v = table.optional_number(std::string(name))) sc.rating_table_overrides[c] = *v;
      table.finish();
    } else {
      rat.mark("table");
    }
    rat.finish();
  }

  const json& obstacles = top.raw("obstacles");
  if (!obstacles.is_array()) throw ParseError("scenario.obstacles", "expected an array");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const std::string path = "obstacles[" + std::to_string(i) + "]";
    Fields of(obstacles[i], path);
    ScenarioObstacle o;
    o.id = of.string("id");
    const std::string cls = of.string("class");
    const auto parsed_class = object_class_from(cls);
    if (!parsed_class) throw ParseError(of.field("class"), "unknown object class '" + cls + "'");
    o.object_class = *parsed_class;

    const auto fallback = default_shape(o.object_class);
    if (of.has("shape")) {
      Fields sf(of.raw("shape"), path + ".shape");
      const bool need_all = !fallback;
      ShapeParams s = fallback.value_or(ShapeParams{});
      if (need_all || sf.has("kind")) s.kind = detail::parse_kind(sf.string("kind"), sf.field("kind"));
      s.half_length_a = need_all ? sf.number("a") : sf.number_or("a", s.half_length_a);
      s.half_width_b = need_all ? sf.number("b") : sf.number_or("b", s.half_width_b);
      s.fuzzy_d = sf.number_or("d", s.fuzzy_d);
      sf.finish();
      o.shape = s;
    } else {
      if (!fallback) throw ParseError(of.field("shape"), "class '" + cls + "' requires an explicit shape");
      o.shape = *fallback;
      of.mark("shape");
    }

    Fields mf(of.raw("motion"), path + ".motion");
    o.motion.center_x0 = mf.number("x0");
    o.motion.center_y0 = mf.number("y0");
    o.motion.heading0 = mf.number_or("heading0", 0.0);
    o.motion.speed = mf.number_or("speed", 0.0);
    o.motion.heading_of_travel = mf.number_or("travel_heading", o.motion.heading0);
    mf.finish();

    o.rating_override = of.optional_number("rating_override");
    of.finish();
    sc.obstacles.push_back(std::move(o));
  }
  top.finish();

  to_ocp_spec(sc);
  return sc;
}

/// Full (no defaults omitted) JSON form; parse(serialize(s)) == s.
inline std::string serialize_scenario(const Scenario& sc) {
  using detail::json;
  json doc;
  doc["name"] = sc.name;
  doc["ego"] = {{"x", sc.ego.x}, {"y", sc.ego.y}, {"phi", sc.ego.phi}, {"v", sc.ego.v},
                {"delta", sc.ego.delta}};
  doc["vehicle"] = {{"wheelbase", sc.vehicle.wheelbase_L},
                    {"steering_lag", sc.vehicle.steering_lag_dT}};
  json ocp = {{"t0", sc.ocp.t0},
              {"tf", sc.ocp.tf},
              {"num_intervals", sc.ocp.num_intervals},
              {"substeps_per_interval", sc.ocp.substeps_per_interval},
              {"a_min", sc.ocp.bounds.a_min},
              {"a_max", sc.ocp.bounds.a_max},
              {"delta_min", sc.ocp.bounds.delta_min},
              {"delta_max", sc.ocp.bounds.delta_max}};
  ocp["epsilon"] = sc.ocp.epsilon ? json(*sc.ocp.epsilon) : json(nullptr);
  doc["ocp"] = ocp;
  json ratings = {{"setting", sc.rating_setting}};
  if (!sc.rating_table_overrides.empty()) {
    json table = json::object();
    for (const auto& [c, v] : sc.rating_table_overrides) table[std::string(to_string(c))] = v;
    ratings["table"] = table;
  }
  doc["ratings"] = ratings;
  json obs = json::array();
  for (const auto& o : sc.obstacles) {
    json jo = {{"id", o.id},
               {"class", std::string(to_string(o.object_class))},
               {"shape",
                {{"kind", o.shape.kind == ShapeKind::circle ? "circle" : "rectangle"},
                 {"a", o.shape.half_length_a},
                 {"b", o.shape.half_width_b},
                 {"d", o.shape.fuzzy_d}}},
               {"motion",
                {{"x0", o.motion.center_x0},
                 {"y0", o.motion.center_y0},
                 {"heading0", o.motion.heading0},
                 {"speed", o.motion.speed},
                 {"travel_heading", o.motion.heading_of_travel}}}};
    if (o.rating_override) jo["rating_override"] = *o.rating_override;
    obs.push_back(jo);
  }
  doc["obstacles"] = obs;
  return doc.dump(2) + "\n";
}

inline Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open scenario file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace sevplan
