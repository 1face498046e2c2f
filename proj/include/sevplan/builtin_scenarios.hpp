#pragma once

// The two intersection layouts. Every value marked "# default" is a modelling
// choice of this library (headings, footprints, margins, horizon, bounds).

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "sevplan/errors.hpp"
#include "sevplan/scenario.hpp"

namespace sevplan {

inline constexpr std::string_view kScenario1 = R"json({
  "name": "scenario1",
  "ego": {"x": 50.0, "y": 1.75, "v": 10.0,
          "phi": 3.141592653589793,          # default: driving towards -x
          "delta": 0.0},                     # default
  "vehicle": {"wheelbase": 2.7,              # default
              "steering_lag": 0.2},          # default
  "ocp": {"t0": 0.0, "tf": 4.0,              # default
          "num_intervals": 40,               # default
          "substeps_per_interval": 4,        # default
          "a_min": -0.5, "a_max": 0.5,       # default: near-constant speed
          "delta_min": -0.2, "delta_max": 0.2,  # default: about 3.5 m/s^2 lateral at 10 m/s
          "epsilon": null},                  # default: 1e-3 * (1 + J1*)
  "ratings": {"setting": 1},
  "obstacles": [
    {"id": "static_car_1", "class": "car", "shape": {"d": 1.7},  # default
     "motion": {"x0": 21.0, "y0": -5.0}},
    {"id": "static_car_2", "class": "car", "shape": {"d": 1.7},  # default
     "motion": {"x0": 26.0, "y0": -5.0}},
    {"id": "static_car_3", "class": "car", "shape": {"d": 1.7},  # default
     "motion": {"x0": 30.0, "y0": 1.75}},
    {"id": "bus", "class": "bus", "shape": {"d": 1.224},  # default
     "motion": {"x0": 16.0, "y0": 1.75}},
    {"id": "pedestrian_1", "class": "pedestrian", "shape": {"d": 5.0},        # default
     "motion": {"x0": 20.0, "y0": 3.5}},
    {"id": "pedestrian_2", "class": "pedestrian",
     "motion": {"x0": 24.0, "y0": 3.5, "speed": 1.0,
                "heading0": -1.5707963267948966},   # default: crossing towards the lane
     "shape": {"d": 5.0}},                           # default
    {"id": "moving_car_1", "class": "car",
     "motion": {"x0": -1.75, "y0": 18.5, "speed": 10.0,
                "heading0": -1.5707963267948966},   # default: southbound
     "shape": {"d": 1.7}},                           # default
    {"id": "moving_car_2", "class": "car",
     "motion": {"x0": 1.75, "y0": -18.5, "speed": 10.0,
                "heading0": 1.5707963267948966},    # default: northbound
     "shape": {"d": 1.7}},                           # default
    {"id": "building_north", "class": "building",
     "shape": {"kind": "rectangle", "a": 27.0, "b": 3.0, "d": 0.5},   # default
     "motion": {"x0": 33.0, "y0": 8.5}},                               # default
    {"id": "building_south", "class": "building",
     "shape": {"kind": "rectangle", "a": 27.0, "b": 3.0, "d": 0.5},   # default
     "motion": {"x0": 33.0, "y0": -10.0}}                              # default
  ]
}
)json";

inline constexpr std::string_view kScenario2 = R"json({
  "name": "scenario2",
  "ego": {"x": 50.0, "y": 1.75, "v": 10.0,
          "phi": 3.141592653589793,          # default: driving towards -x
          "delta": 0.0},                     # default
  "vehicle": {"wheelbase": 2.7,              # default
              "steering_lag": 0.2},          # default
  "ocp": {"t0": 0.0, "tf": 4.0,              # default
          "num_intervals": 40,               # default
          "substeps_per_interval": 4,        # default
          "a_min": -0.5, "a_max": 0.5,       # default: near-constant speed
          "delta_min": -0.2, "delta_max": 0.2,  # default: about 3.5 m/s^2 lateral at 10 m/s
          "epsilon": null},                  # default: 1e-3 * (1 + J1*)
  "ratings": {"setting": 1},
  "obstacles": [
    {"id": "static_car", "class": "car", "shape": {"d": 1.7},  # default
     "motion": {"x0": 30.0, "y0": 1.75}},
    {"id": "bus", "class": "bus", "shape": {"d": 1.224},  # default
     "motion": {"x0": 16.0, "y0": 1.75}},
    {"id": "pedestrian_1", "class": "pedestrian", "shape": {"d": 5.0},        # default
     "motion": {"x0": 20.0, "y0": 3.5}},
    {"id": "pedestrian_2", "class": "pedestrian",
     "motion": {"x0": 24.0, "y0": 3.5, "speed": 1.0,
                "heading0": -1.5707963267948966},   # default: crossing towards the lane
     "shape": {"d": 5.0}},                           # default
    {"id": "pedestrian_3", "class": "pedestrian", "shape": {"d": 5.0},  # default
     "motion": {"x0": 23.0, "y0": -5.0}},
    {"id": "pedestrian_4", "class": "pedestrian", "shape": {"d": 5.0},  # default
     "motion": {"x0": 24.0, "y0": -5.0}},
    {"id": "pedestrian_5", "class": "pedestrian", "shape": {"d": 5.0},  # default
     "motion": {"x0": 25.0, "y0": -5.0}},
    {"id": "pedestrian_6", "class": "pedestrian", "shape": {"d": 5.0},  # default
     "motion": {"x0": 26.0, "y0": -5.0}},
    {"id": "moving_car_1", "class": "car",
     "motion": {"x0": -1.75, "y0": 18.5, "speed": 10.0,
                "heading0": -1.5707963267948966},   # default: southbound
     "shape": {"d": 1.7}},                           # default
    {"id": "moving_car_2", "class": "car",
     "motion": {"x0": 1.75, "y0": -18.5, "speed": 10.0,
                "heading0": 1.5707963267948966},    # default: northbound
     "shape": {"d": 1.7}},                           # default
    {"id": "building_north", "class": "building",
     "shape": {"kind": "rectangle", "a": 27.0, "b": 3.0, "d": 0.5},   # default
     "motion": {"x0": 33.0, "y0": 8.5}},                               # default
    {"id": "building_south", "class": "building",
     "shape": {"kind": "rectangle", "a": 27.0, "b": 3.0, "d": 0.5},   # default
     "motion": {"x0": 33.0, "y0": -10.0}}                              # default
  ]
}
)json";

inline constexpr std::array<std::string_view, 3> kBuiltinNames{"scenario1", "scenario2",
                                                               "scenario2-cond2"};

/// Scenario text of a built-in by name.
inline std::string builtin_scenario_text(std::string_view name) {
  if (name == "scenario1") return std::string(kScenario1);
  if (name == "scenario2") return std::string(kScenario2);
  if (name == "scenario2-cond2") {
    // Condition 2: pedestrian 2 (a child crossing) rated 200, everything else as scenario 2.
    std::string text(kScenario2);
    const std::string name_from = "\"name\": \"scenario2\"";
    text.replace(text.find(name_from), name_from.size(), "\"name\": \"scenario2-cond2\"");
    const std::string anchor = "\"id\": \"pedestrian_2\", \"class\": \"pedestrian\",";
    text.replace(text.find(anchor), anchor.size(), anchor + " \"rating_override\": 200.0,");
    return text;
  }
  throw InputError("unknown built-in scenario '" + std::string(name) +
                   "' (expected scenario1, scenario2 or scenario2-cond2)");
}

inline Scenario builtin_scenario(std::string_view name) {
  return parse_scenario(builtin_scenario_text(name));
}

}  // namespace sevplan
