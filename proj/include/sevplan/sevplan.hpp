#pragma once

#include "sevplan/errors.hpp"
#include "sevplan/format.hpp"
#include "sevplan/severity_field.hpp"
#include "sevplan/vehicle_model.hpp"
#include "sevplan/nlp_solver.hpp"
#include "sevplan/ocp.hpp"
#include "sevplan/scenario.hpp"
#include "sevplan/builtin_scenarios.hpp"
#include "sevplan/run.hpp"
