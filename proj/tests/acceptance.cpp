// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sevplan/sevplan.hpp"

using namespace sevplan;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass{true};
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double time_limit, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit > 0.0) o.require(secs <= time_limit, "runtime " + fmt("%.1f", secs) + " s > " + fmt("%.0f", time_limit) + " s");
  if (!o.pass) ++failures;
  std::printf("C%-2d %s  %s  [%.1f s]  %s\n", id, o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
  std::fflush(stdout);
}

double circle_ref(double x, double y, double d) {
  const double r = std::sqrt(x * x + y * y);
  return r <= 1.0 ? 1.0 : std::exp(-std::pow((r - 1.0) / d, 4.0));
}

double rect_ref(double x, double y, double d) {
  const double ax = std::fabs(x), ay = std::fabs(y);
  if (ax <= 1.0 && ay <= 1.0) return 1.0;
  if (ax > 1.0 && ay > 1.0) {
    const double e = std::sqrt((ax - 1.0) * (ax - 1.0) + (ay - 1.0) * (ay - 1.0));
    return std::exp(-std::pow(e / d, 4.0));
  }
  return std::exp(-std::pow(((ax > 1.0 ? ax : ay) - 1.0) / d, 4.0));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

OcpSpec with_setting(Scenario sc, int setting) {
  sc.rating_setting = setting;
  return to_ocp_spec(sc);
}

const Obstacle& find(const OcpSpec& s, const std::string& id) {
  for (const auto& o : s.obstacles)
    if (o.id == id) return o;
  throw InputError("no obstacle " + id);
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "sevplan_acceptance";
  fs::remove_all(work);

  criterion(1, "shape functions", 5.0, [](Outcome& o) {
    double worst = 0.0;
    for (double d : {0.25, 0.5, 1.0})
      for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j) {
          const double x = -3.0 + 6.0 * i / 99.0, y = -3.0 + 6.0 * j / 99.0;
          // In units of the rounding bound, which grows with |ln f| through the exponent.
          const double fc = circle_ref(x, y, d), fr = rect_ref(x, y, d);
          auto units = [](double got, double want) {
            const double diff = std::fabs(got - want);
            // Below the normal range only absolute agreement to DBL_MIN is meaningful.
            if (want < std::numeric_limits<double>::min()) return diff <= std::numeric_limits<double>::min() ? 0.0 : 1e300;
            return diff / (std::numeric_limits<double>::epsilon() * want * (1 - std::log(want)));
          };
          worst = std::max({worst, units(unit_circle_shape(x, y, d), fc), units(unit_rect_shape(x, y, d), fr)});
        }
    o.require(worst <= 16.0, "closed form off by " + fmt("%.2f", worst) + " rounding units");
    o.note("closed form within " + fmt("%.2f", worst) + " rounding units");

    int bad = 0;
    for (int i = 0; i <= 400; ++i)
      for (int j = 0; j <= 400; ++j) {
        const double x = -4.0 + 8.0 * i / 400.0, y = -4.0 + 8.0 * j / 400.0;
        const double ax = std::fabs(x), ay = std::fabs(y);
        const int hits = (ax <= 1 && ay <= 1) + ((ax <= 1) != (ay <= 1)) + (ax > 1 && ay > 1);
        const RectRegion r = rect_region(x, y);
        const RectRegion want = ax <= 1 && ay <= 1 ? RectRegion::core
                                : ax > 1 && ay > 1 ? RectRegion::corner
                                                   : RectRegion::edge;
        if (hits != 1 || r != want || !std::isfinite(unit_rect_shape(x, y, 0.5))) ++bad;
      }
    o.require(bad == 0, std::to_string(bad) + " partition errors");

    const double h = 1e-3;
    double jump = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double th = 2.0 * kPi * k / 100.0, c = std::cos(th), s = std::sin(th);
      auto f = [&](double r) { return unit_circle_shape(r * c, r * s, 0.5); };
      const double j0 = std::fabs(f(1.0 + 1e-12) - f(1.0 - 1e-12));
      const double j1 = std::fabs((f(1.0 + h) - f(1.0)) / h - (f(1.0) - f(1.0 - h)) / h);
      const double j2 = std::fabs((f(1.0 + h) - 2.0 * f(1.0) + f(1.0 - h)) / (h * h));
      jump = std::max({jump, j0, j1, j2});
    }
    o.require(jump <= 1e-4, "seam jump " + fmt("%.2e", jump));
    o.note("seam jump " + fmt("%.1e", jump));
  });

  criterion(2, "severity identities", 5.0, [](Outcome& o) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> pos(-10, 10), ang(-kPi, kPi), spd(0, 15), rat(1, 300), lam(0.1, 10);
    double lin = 0.0, rigid = 0.0, still = 0.0;
    for (int k = 0; k < 1000; ++k) {
      Obstacle ob{"o",
                  {k % 2 ? ShapeKind::circle : ShapeKind::rectangle, 0.5 + spd(rng) / 5, 0.5 + spd(rng) / 5, 0.5 + spd(rng) / 10},
                  {pos(rng) / 2, pos(rng) / 2, ang(rng), spd(rng) / 3, ang(rng)},
                  rat(rng)};
      const double t = spd(rng) / 5, x = pos(rng) / 2, y = pos(rng) / 2, v = spd(rng), ph = ang(rng);
      const double base = severity(t, x, y, v, ph, ob);
      Obstacle scaled = ob;
      const double l = lam(rng);
      scaled.severity_C *= l;
      lin = std::max(lin, std::fabs(severity(t, x, y, v, ph, scaled) - l * base) / (1.0 + std::fabs(l * base)));

      // Ego moving with the obstacle.
      still = std::max(still, std::fabs(severity(t, x, y, ob.motion.speed, ob.motion.heading_of_travel, ob)));

      const double rot = ang(rng), tx = pos(rng), ty = pos(rng), cr = std::cos(rot), sr = std::sin(rot);
      Obstacle moved = ob;
      moved.motion.center_x0 = cr * ob.motion.center_x0 - sr * ob.motion.center_y0 + tx;
      moved.motion.center_y0 = sr * ob.motion.center_x0 + cr * ob.motion.center_y0 + ty;
      moved.motion.heading0 += rot;
      moved.motion.heading_of_travel += rot;
      const double mv = severity(t, cr * x - sr * y + tx, sr * x + cr * y + ty, v, ph + rot, moved);
      rigid = std::max(rigid, std::fabs(mv - base));
    }
    o.require(lin <= 1e-12, "linearity " + fmt("%.2e", lin));
    o.require(still == 0.0, "zero relative speed " + fmt("%.2e", still));
    o.require(rigid <= 1e-9, "rigid motion " + fmt("%.2e", rigid));
    o.note("linearity " + fmt("%.1e", lin) + ", rigid " + fmt("%.1e", rigid));
  });

  criterion(3, "integrator order and steering lag", 5.0, [](Outcome& o) {
    const VehicleParams p;
    const VehicleState s0{0, 0, 0.3, 8, 0};
    std::vector<ControlSample> u;
    for (int k = 0; k < 10; ++k) u.push_back({0.8 * std::sin(0.7 * k), 0.3 * std::cos(0.9 * k)});
    auto end = [&](std::size_t sub) { return simulate(s0, u, p, 0.0, 2.0, sub).states.back(); };
    const VehicleState ref = end(256);
    auto err = [&](std::size_t sub) {
      const VehicleState e = end(sub);
      return std::hypot(e.x - ref.x, e.y - ref.y, e.phi - ref.phi) + std::fabs(e.v - ref.v) + std::fabs(e.delta - ref.delta);
    };
    // Least-squares slope of log(err) against log(h).
    std::vector<double> lx, ly;
    for (std::size_t sub : {2u, 4u, 8u, 16u}) {
      lx.push_back(std::log(1.0 / sub));
      ly.push_back(std::log(err(sub)));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / lx.size(), my += ly[i] / lx.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) num += (lx[i] - mx) * (ly[i] - my), den += (lx[i] - mx) * (lx[i] - mx);
    const double order = num / den;
    o.require(order >= 3.8, "order " + fmt("%.2f", order));

    const double D = 0.3;
    const std::vector<ControlSample> hold(20, ControlSample{0.0, D});
    const Trajectory tr = simulate({0, 0, 0, 5, 0}, hold, p, 0.0, 2.0, 4);
    double lag = 0.0;
    for (std::size_t n = 0; n < tr.t.size(); ++n)
      lag = std::max(lag, std::fabs(tr.states[n].delta - D * (1.0 - std::exp(-tr.t[n] / p.steering_lag_dT))));
    o.require(lag <= 1e-6, "lag error " + fmt("%.2e", lag));
    o.note("order " + fmt("%.2f", order) + ", lag error " + fmt("%.1e", lag));
  });

  criterion(4, "solver suite", 10.0, [](Outcome& o) {
    const SolverConfig cfg;
    NlpProblem q;
    q.dimension = 1;
    q.objective = [](std::span<const double> x) { return (x[0] - 2.0) * (x[0] - 2.0); };
    q.lower = {0.0};
    q.upper = {1.0};
    NlpProblem c;
    c.dimension = 2;
    c.objective = [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; };
    c.inequality_constraints.push_back([](std::span<const double> x) { return 1.0 - x[0] - x[1]; });
    c.lower = {-10, -10};
    c.upper = {10, 10};
    NlpProblem r;
    r.dimension = 2;
    r.objective = [](std::span<const double> x) {
      return 100.0 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + (1.0 - x[0]) * (1.0 - x[0]);
    };
    r.lower = {-2, -2};
    r.upper = {2, 2};

    const SolverResult rq = minimize(q, std::vector<double>{0.0}, cfg);
    o.require(rq.x_best[0] == 1.0 && std::fabs(rq.objective_value - 1.0) <= 1e-12, "bound-active quadratic");
    const SolverResult rc = minimize(c, std::vector<double>{2.0, 0.0}, cfg);
    o.require(std::fabs(rc.x_best[0] - 0.5) <= 1e-4 && std::fabs(rc.x_best[1] - 0.5) <= 1e-4 &&
                  rc.max_constraint_violation <= 1e-6 && rc.multipliers.size() == 1 &&
                  std::fabs(rc.multipliers[0] - 1.0) <= 1e-3,
              "symmetric constrained quadratic");
    for (std::size_t i = 1; i < rc.violation_history.size(); ++i)
      o.require(rc.violation_history[i] <= rc.violation_history[i - 1], "violation history increases");
    const SolverResult rr = minimize(r, std::vector<double>{-1.2, 1.0}, cfg);
    o.require(std::fabs(rr.x_best[0] - 1.0) <= 1e-3 && std::fabs(rr.x_best[1] - 1.0) <= 1e-3, "Rosenbrock");

    const NlpProblem* probs[] = {&q, &c, &r};
    const SolverResult* res[] = {&rq, &rc, &rr};
    for (int i = 0; i < 3; ++i) {
      o.require(res[i]->status == SolverStatus::converged, "status " + to_string(res[i]->status));
      const KktReport k = check_kkt(*probs[i], res[i]->x_best, cfg);
      o.require(k.projected_gradient_norm <= 10.0 * cfg.optimality_tolerance &&
                    k.max_violation <= cfg.constraint_tolerance,
                "check_kkt rejects a converged status");
    }
  });

  // Shared by criteria 5, 6 and 10.
  RunArtifacts s1;
  bool s1_ok = false;
  criterion(5, "two-level contract on scenario 1", 60.0, [&](Outcome& o) {
    s1 = run(builtin_scenario("scenario1"), work / "scenario1_a");
    s1_ok = true;
    const SolveReport& r = s1.report;
    o.require(r.J1_at_z2 <= r.J1_star + r.epsilon + 1e-6 * (1.0 + r.J1_star), "severity budget");
    o.require(r.J2_level2 <= r.J2_level1, "J2 not reduced");
    o.require(r.level1.status == SolverStatus::converged, "level 1 " + to_string(r.level1.status));
    o.require(r.level2.status == SolverStatus::converged, "level 2 " + to_string(r.level2.status));
    o.require(r.level1.outer_iterations <= 20 && r.level2.outer_iterations <= 20, "outer iterations");
    o.require(r.wall_time_seconds <= 60.0, "wall time");
    o.note("J1* " + fmt("%.6g", r.J1_star) + ", J1(z2) " + fmt("%.6g", r.J1_at_z2) + ", J2 " +
           fmt("%.4g", r.J2_level1) + " -> " + fmt("%.4g", r.J2_level2) + ", solve " +
           fmt("%.1f", r.wall_time_seconds) + " s");
  });

  RunArtifacts s2, s2c;
  criterion(6, "pedestrians kept further away than parked cars", 0.0, [&](Outcome& o) {
    if (!s1_ok) s1 = run(builtin_scenario("scenario1"), work / "scenario1_a");
    s2 = run(builtin_scenario("scenario2"), work / "scenario2");
    const OcpSpec sp1 = to_ocp_spec(builtin_scenario("scenario1"));
    const OcpSpec sp2 = to_ocp_spec(builtin_scenario("scenario2"));
    double car = 1e300, ped = 1e300;
    for (const char* id : {"static_car_1", "static_car_2"})
      car = std::min(car, pass_record(s1.report.path2.trajectory, find(sp1, id)).min_core_clearance);
    for (const char* id : {"pedestrian_3", "pedestrian_4", "pedestrian_5", "pedestrian_6"})
      ped = std::min(ped, pass_record(s2.report.path2.trajectory, find(sp2, id)).min_core_clearance);
    o.require(ped >= car + 0.2, "pedestrian clearance not 0.2 m beyond car clearance");
    o.note("parked-car clearance " + fmt("%.3f", car) + " m, pedestrian clearance " + fmt("%.3f", ped) + " m");
  });

  criterion(7, "raised rating for pedestrian 2", 0.0, [&](Outcome& o) {
    if (s2.trajectory_csv.empty()) s2 = run(builtin_scenario("scenario2"), work / "scenario2");
    s2c = run(builtin_scenario("scenario2-cond2"), work / "scenario2-cond2");
    const OcpSpec sp1 = to_ocp_spec(builtin_scenario("scenario2"));
    const OcpSpec sp2 = to_ocp_spec(builtin_scenario("scenario2-cond2"));
    o.require(sp2.bounds.a_min >= -0.5 && sp2.bounds.a_max <= 0.5, "acceleration not pinned");
    const PassRecord a = pass_record(s2.report.path2.trajectory, find(sp1, "pedestrian_2"));
    const PassRecord b = pass_record(s2c.report.path2.trajectory, find(sp2, "pedestrian_2"));
    o.require(a.side != b.side && a.side != 0 && b.side != 0, "side of pass unchanged");
    o.require(b.min_center_distance > a.min_center_distance, "distance to pedestrian 2 not increased");
    const double v0 = sp2.initial.v;
    double dv = 0.0;
    for (const RunArtifacts* r : {&s2, &s2c})
      for (const auto& s : r->report.path2.trajectory.states) dv = std::max(dv, std::fabs(s.v - v0));
    o.require(dv <= 0.5, "speed deviates " + fmt("%.3f", dv) + " m/s from v0");
    o.note("side " + std::to_string(a.side) + " -> " + std::to_string(b.side) + ", distance " +
           fmt("%.3f", a.min_center_distance) + " -> " + fmt("%.3f", b.min_center_distance) +
           " m, max |v - v0| " + fmt("%.3f", dv));
  });

  criterion(8, "rating setting 2 never lowers J1*", 0.0, [&](Outcome& o) {
    const Scenario sc = builtin_scenario("scenario2");
    const OcpSpec low = with_setting(sc, 1), high = with_setting(sc, 2);
    OcpSolveOptions opts;
    opts.extra_starts = swerve_starts(low);
    const OrderedPair p = cross_warm_start_ocp1(low, high, opts);
    o.require(p.high.J1 >= p.low.J1, "J1*(setting 2) < J1*(setting 1)");
    o.require(p.low.solver.status == SolverStatus::converged && p.high.solver.status == SolverStatus::converged,
              "level 1 not converged");
    o.note("J1* setting 1 " + fmt("%.6g", p.low.J1) + ", setting 2 " + fmt("%.6g", p.high.J1));
  });

  criterion(9, "gradient and quadrature consistency", 0.0, [&](Outcome& o) {
    const OcpSpec spec = to_ocp_spec(builtin_scenario("scenario1"));
    // Same points with every rectangle swapped for the inscribed ellipse, for the diagnosis only.
    OcpSpec smooth = spec;
    for (auto& ob : smooth.obstacles) ob.shape.kind = ShapeKind::circle;
    const auto lo = lower_bounds(spec), hi = upper_bounds(spec);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss;
    double rmin = 1e300, rmax = -1e300;
    int inside = 0, inside_smooth = 0;
    auto richardson = [](const OcpSpec& sp, const DecisionVector& z, const DecisionVector& dir, double h) {
      auto D = [&](double step) {
        DecisionVector zp = z, zm = z;
        for (std::size_t i = 0; i < z.size(); ++i) zp[i] += step * dir[i], zm[i] -= step * dir[i];
        return (eval_J1_value(zp, sp) - eval_J1_value(zm, sp)) / (2.0 * step);
      };
      const double d1 = D(h), d2 = D(h / 2), d4 = D(h / 4);
      return (d1 - d2) / (d2 - d4);
    };
    for (int k = 0; k < 20; ++k) {
      // Uniform in the central half of the box so every stencil stays feasible.
      DecisionVector z(spec.dimension()), dir(spec.dimension());
      double norm = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double mid = 0.5 * (lo[i] + hi[i]), half = 0.5 * (hi[i] - lo[i]);
        z[i] = mid + 0.5 * half * std::uniform_real_distribution<double>(-1, 1)(rng);
        dir[i] = gauss(rng);
        norm += dir[i] * dir[i];
      }
      for (double& d : dir) d /= std::sqrt(norm);
      const double ratio = richardson(spec, z, dir, 0.04);
      rmin = std::min(rmin, ratio);
      rmax = std::max(rmax, ratio);
      inside += ratio >= 3.5 && ratio <= 4.5;
      const double rs = richardson(smooth, z, dir, 0.04);
      inside_smooth += rs >= 3.5 && rs <= 4.5;
    }
    o.require(inside == 20, "Richardson ratio outside [3.5, 4.5]");
    o.note("ratio " + fmt("%.3f", rmin) + ".." + fmt("%.3f", rmax) + ", " + std::to_string(inside) +
           "/20 in range (" + std::to_string(inside_smooth) + "/20 with rectangles as ellipses)");

    if (!s1_ok) s1 = run(builtin_scenario("scenario1"), work / "scenario1_a");
    OcpSpec fine = spec;
    fine.substeps_per_interval *= 2;
    const double j = eval_J1_value(s1.report.z1, spec), jf = eval_J1_value(s1.report.z1, fine);
    o.require(std::fabs(jf - j) <= 1e-6 * (1.0 + j), "substep doubling changes J1 by " + fmt("%.3e", jf - j));
    o.note("substep doubling dJ1 " + fmt("%.2e", jf - j) + " (tol " + fmt("%.2e", 1e-6 * (1.0 + j)) + ")");
  });

  criterion(10, "determinism and round trip", 0.0, [&](Outcome& o) {
    if (!s1_ok) s1 = run(builtin_scenario("scenario1"), work / "scenario1_a");
    run(builtin_scenario("scenario1"), work / "scenario1_b");
    for (const char* f : {"trajectory.csv", "controls.csv", "severity.csv", "scenario.json"})
      o.require(slurp(work / "scenario1_a" / f) == slurp(work / "scenario1_b" / f), std::string(f) + " differs");
    for (auto name : kBuiltinNames) {
      const Scenario a = builtin_scenario(name);
      const std::string text = serialize_scenario(a);
      const Scenario b = parse_scenario(text);
      o.require(a == b && serialize_scenario(b) == text, "round trip of " + std::string(name));
    }
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
