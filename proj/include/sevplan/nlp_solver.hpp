#pragma once

// Small dense NLP solver:
//
//   minimize f(x)  subject to  g_i(x) <= 0,  lower <= x <= upper.
//
// Outer loop: Powell-Hestenes-Rockafellar augmented Lagrangian over the
// inequality constraints. Inner loop: projected limited-memory BFGS with an
// active-set split and projected Armijo backtracking, so every iterate lies in
// the box exactly. Gradients come from central finite differences unless the
// problem supplies its own.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sevplan/errors.hpp"
#include "sevplan/format.hpp"

namespace sevplan {

using ScalarFn = std::function<double(std::span<const double>)>;
/// Writes the gradient of a scalar function at x into `grad`; receives f(x) to save a call.
using GradientFn = std::function<void(std::span<const double> x, double fx, std::span<double> grad)>;

struct NlpProblem {
  std::size_t dimension{0};
  ScalarFn objective;
  std::vector<ScalarFn> inequality_constraints;  ///< feasible iff value <= 0
  std::vector<double> lower;
  std::vector<double> upper;

  /// Optional gradient providers. When empty the solver differentiates numerically.
  GradientFn objective_gradient;
  std::vector<GradientFn> constraint_gradients;

  void validate() const {
    if (dimension == 0) throw InputError("NlpProblem: dimension must be positive");
    if (!objective) throw InputError("NlpProblem: objective missing");
    if (lower.size() != dimension || upper.size() != dimension)
      throw InputError("NlpProblem: bounds size mismatch");
    for (std::size_t i = 0; i < dimension; ++i) {
      if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] > upper[i])
        throw InputError("NlpProblem: bounds must be finite with lower <= upper (index " +
                         std::to_string(i) + ")");
    }
    for (const auto& g : inequality_constraints)
      if (!g) throw InputError("NlpProblem: empty constraint callable");
    if (!constraint_gradients.empty() && constraint_gradients.size() != inequality_constraints.size())
      throw InputError("NlpProblem: constraint_gradients must be empty or match constraints");
  }
};

struct SolverConfig {
  int max_outer_iterations{20};
  int max_inner_iterations{200};
  double optimality_tolerance{1e-6};
  double constraint_tolerance{1e-6};
  double fd_step{1e-6};
  double penalty_initial{10.0};
  double penalty_growth{10.0};
  int lbfgs_memory{12};
  /// When set, one CSV row per accepted inner step: iteration,objective,violation,step_norm.
  std::ostream* trace{nullptr};

  void validate() const {
    if (max_outer_iterations <= 0 || max_inner_iterations <= 0 || lbfgs_memory <= 0)
      throw InputError("SolverConfig: iteration limits must be positive");
    if (!(optimality_tolerance > 0.0 && constraint_tolerance > 0.0 && fd_step > 0.0 &&
          penalty_initial > 0.0))
      throw InputError("SolverConfig: tolerances, fd_step and penalty must be positive");
    if (!(penalty_growth > 1.0)) throw InputError("SolverConfig: penalty_growth must exceed 1");
  }
};

enum class SolverStatus { converged, max_iterations, stalled };

inline std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::max_iterations: return "max_iterations";
    case SolverStatus::stalled: return "stalled";
  }
  return "unknown";
}

struct SolverResult {
  std::vector<double> x_best;
  double objective_value{0.0};
  double max_constraint_violation{0.0};
  SolverStatus status{SolverStatus::stalled};
  int iterations{0};        ///< accepted inner steps, summed over outer iterations
  int outer_iterations{0};
  long function_evaluations{0};
  std::vector<double> multipliers;          ///< one per inequality constraint
  double projected_gradient_norm{0.0};      ///< of the Lagrangian at x_best
  std::vector<double> violation_history;    ///< max violation after each outer iteration
};

struct KktReport {
  double projected_gradient_norm{0.0};  ///< ||x - P(x - grad L)||_inf
  double max_violation{0.0};
  double complementarity{0.0};          ///< max_i |lambda_i g_i|
  std::vector<double> multipliers;
};

inline std::vector<double> project(std::span<const double> x, std::span<const double> lo,
                                   std::span<const double> hi) {
  std::vector<double> p(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) p[i] = std::clamp(x[i], lo[i], hi[i]);
  return p;
}

/// Central differences with step fd_step * (1 + |x_i|); second-order one-sided
/// stencils where the central stencil would leave the box.
/// `eval_at(i, xp)` returns the function at xp, which differs from x only in entry i.
template <class EvalAt>
void fd_gradient(std::span<const double> x, double fx, std::span<const double> lo,
                 std::span<const double> hi, double fd_step, EvalAt&& eval_at, std::span<double> grad) {
  std::vector<double> xp(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double h = fd_step * (1.0 + std::abs(xi));
    auto at = [&](double v) {
      xp[i] = v;
      const double r = eval_at(i, std::span<const double>(xp));
      xp[i] = xi;
      return r;
    };
    if ((xi - h >= lo[i] && xi + h <= hi[i]) || hi[i] - lo[i] < 2.0 * h) {
      const double xplus = xi + h, xminus = xi - h;
      grad[i] = (at(xplus) - at(xminus)) / (xplus - xminus);
    } else if (xi + 2.0 * h <= hi[i]) {
      grad[i] = (-3.0 * fx + 4.0 * at(xi + h) - at(xi + 2.0 * h)) / (2.0 * h);
    } else {
      grad[i] = (3.0 * fx - 4.0 * at(xi - h) + at(xi - 2.0 * h)) / (2.0 * h);
    }
  }
}

namespace detail {

struct Counted {
  const NlpProblem& problem;
  const SolverConfig& config;
  long evaluations{0};

  double f(std::span<const double> x) {
    ++evaluations;
    return problem.objective(x);
  }
  double g(std::size_t i, std::span<const double> x) {
    ++evaluations;
    return problem.inequality_constraints[i](x);
  }
  void grad_f(std::span<const double> x, double fx, std::span<double> out) {
    if (problem.objective_gradient) {
      problem.objective_gradient(x, fx, out);
      return;
    }
    fd_gradient(x, fx, problem.lower, problem.upper, config.fd_step,
                [&](std::size_t, std::span<const double> xp) { return f(xp); }, out);
  }
  void grad_g(std::size_t c, std::span<const double> x, double gx, std::span<double> out) {
    if (!problem.constraint_gradients.empty() && problem.constraint_gradients[c]) {
      problem.constraint_gradients[c](x, gx, out);
      return;
    }
    fd_gradient(x, gx, problem.lower, problem.upper, config.fd_step,
                [&](std::size_t, std::span<const double> xp) { return g(c, xp); }, out);
  }
};

inline double projected_gradient_inf(std::span<const double> x, std::span<const double> grad,
                                     std::span<const double> lo, std::span<const double> hi) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = std::clamp(x[i] - grad[i], lo[i], hi[i]);
    m = std::max(m, std::abs(x[i] - p));
  }
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Augmented-Lagrangian merit and its pieces at one point.
struct MeritPoint {
  std::vector<double> x;
  double f{0.0};
  std::vector<double> g;
  double merit{0.0};
  std::vector<double> grad;  ///< gradient of the merit
  bool finite{true};
};

inline double max_violation(std::span<const double> g) {
  double v = 0.0;
  for (double gi : g) v = std::max(v, gi);
  return v;
}

class AugmentedLagrangian {
 public:
  AugmentedLagrangian(Counted& eval, std::span<const double> lambda, double mu)
      : eval_(eval), lambda_(lambda.begin(), lambda.end()), mu_(mu) {}

  MeritPoint value(std::vector<double> x) {
    MeritPoint p;
    p.x = std::move(x);
    p.f = eval_.f(p.x);
    p.g.resize(lambda_.size());
    p.merit = p.f;
    for (std::size_t i = 0; i < lambda_.size(); ++i) {
      p.g[i] = eval_.g(i, p.x);
      const double shifted = std::max(0.0, p.g[i] + lambda_[i] / mu_);
      p.merit += 0.5 * mu_ * shifted * shifted - lambda_[i] * lambda_[i] / (2.0 * mu_);
    }
    p.finite = std::isfinite(p.merit);
    return p;
  }

  void gradient(MeritPoint& p) {
    const std::size_t n = p.x.size();
    p.grad.assign(n, 0.0);
    eval_.grad_f(p.x, p.f, p.grad);
    std::vector<double> gg(n);
    for (std::size_t i = 0; i < lambda_.size(); ++i) {
      const double weight = std::max(0.0, lambda_[i] + mu_ * p.g[i]);
      if (weight == 0.0) continue;
      eval_.grad_g(i, p.x, p.g[i], gg);
      for (std::size_t j = 0; j < n; ++j) p.grad[j] += weight * gg[j];
    }
  }

  std::vector<double> updated_multipliers(std::span<const double> g) const {
    std::vector<double> out(lambda_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, lambda_[i] + mu_ * g[i]);
    return out;
  }

 private:
  Counted& eval_;
  std::vector<double> lambda_;
  double mu_;
};

/// One L-BFGS curvature pair.
struct CurvaturePair {
  std::vector<double> s, y;
  double rho;
};
using CurvatureMemory = std::deque<CurvaturePair>;

struct InnerOutcome {
  MeritPoint point;
  int accepted{0};
  bool converged{false};
  bool stalled{false};
};

/// Projected L-BFGS on the merit function, starting from a projected point.
inline InnerOutcome minimize_merit(AugmentedLagrangian& al, MeritPoint start, const NlpProblem& problem,
                                   const SolverConfig& config, int& trace_counter, CurvatureMemory& memory) {
  const auto& lo = problem.lower;
  const auto& hi = problem.upper;
  const std::size_t n = problem.dimension;

  InnerOutcome out;
  MeritPoint cur = std::move(start);
  if (cur.grad.empty()) al.gradient(cur);


  double box_scale = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (hi[i] > lo[i]) box_scale = std::min(box_scale, hi[i] - lo[i]);
  if (!std::isfinite(box_scale)) box_scale = 1.0;
  const double first_step = std::min(1.0, 0.1 * box_scale);

  for (int it = 0; it < config.max_inner_iterations; ++it) {
    const double pg = projected_gradient_inf(cur.x, cur.grad, lo, hi);
    if (pg <= config.optimality_tolerance) {
      out.converged = true;
      break;
    }

    // Variables pinned at a bound with the gradient pushing outward stay fixed.
    std::vector<char> fixed(n, 0);
    const double bound_eps = 1e-12;
    for (std::size_t i = 0; i < n; ++i) {
      if ((cur.x[i] <= lo[i] + bound_eps && cur.grad[i] > 0.0) ||
          (cur.x[i] >= hi[i] - bound_eps && cur.grad[i] < 0.0))
        fixed[i] = 1;
    }
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = fixed[i] ? 0.0 : cur.grad[i];

    auto steepest = [&] {
      double qn = 0.0;
      for (double v : q) qn = std::max(qn, std::abs(v));
      std::vector<double> d(n);
      const double scale = qn > 0.0 ? first_step / qn : 0.0;
      for (std::size_t i = 0; i < n; ++i) d[i] = -scale * q[i];
      return d;
    };

    std::vector<double> dir;
    if (memory.empty()) {
      dir = steepest();
    } else {
      // Two-loop recursion restricted to the free variables.
      std::vector<double> r = q;
      std::vector<double> alpha(memory.size());
      for (std::size_t m = memory.size(); m-- > 0;) {
        alpha[m] = memory[m].rho * dot(memory[m].s, r);
        for (std::size_t i = 0; i < n; ++i)
          if (!fixed[i]) r[i] -= alpha[m] * memory[m].y[i];
      }
      const auto& last = memory.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (double& v : r) v *= gamma;
      for (std::size_t m = 0; m < memory.size(); ++m) {
        const double beta = memory[m].rho * dot(memory[m].y, r);
        for (std::size_t i = 0; i < n; ++i)
          if (!fixed[i]) r[i] += memory[m].s[i] * (alpha[m] - beta);
      }
      dir.resize(n);
      for (std::size_t i = 0; i < n; ++i) dir[i] = fixed[i] ? 0.0 : -r[i];
      if (dot(dir, cur.grad) >= 0.0) {
        memory.clear();
        dir = steepest();
      }
    }

    // Backtracking on the projected path; a unit step that passes Armijo while the
    // slope is still steeply negative is extended until the curvature condition holds.
    auto line_search = [&](const std::vector<double>& d, MeritPoint& accepted) {
      auto trial_at = [&](double step, double& decrease) {
        std::vector<double> xt(n);
        for (std::size_t i = 0; i < n; ++i) xt[i] = std::clamp(cur.x[i] + step * d[i], lo[i], hi[i]);
        decrease = 0.0;
        for (std::size_t i = 0; i < n; ++i) decrease += cur.grad[i] * (xt[i] - cur.x[i]);
        return al.value(std::move(xt));
      };
      auto acceptable = [&](const MeritPoint& t, double decrease) {
        return t.finite && t.merit <= cur.merit + 1e-4 * decrease && t.merit <= cur.merit;
      };
      double step = 1.0;
      for (int ls = 0; ls < 40; ++ls) {
        double decrease = 0.0;
        MeritPoint trial = trial_at(step, decrease);
        if (decrease >= 0.0 && ls > 0) return false;
        if (acceptable(trial, decrease)) {
          if (ls == 0) {
            for (int grow = 0; grow < 10; ++grow) {
              al.gradient(trial);
              double slope = 0.0;
              for (std::size_t i = 0; i < n; ++i) slope += trial.grad[i] * d[i];
              double slope0 = 0.0;
              for (std::size_t i = 0; i < n; ++i) slope0 += cur.grad[i] * d[i];
              if (slope >= 0.9 * slope0) break;
              double dec2 = 0.0;
              MeritPoint further = trial_at(2.0 * step, dec2);
              if (!acceptable(further, dec2) || further.merit >= trial.merit || further.x == trial.x) break;
              trial = std::move(further);
              step *= 2.0;
            }
          }
          accepted = std::move(trial);
          return true;
        }
        step *= 0.5;
      }
      return false;
    };

    MeritPoint next;
    bool ok = line_search(dir, next);
    if (!ok && !memory.empty()) {
      memory.clear();
      ok = line_search(steepest(), next);
    }
    if (!ok) {
      out.stalled = true;
      break;
    }
    if (next.grad.empty()) al.gradient(next);

    CurvaturePair p;
    p.s.resize(n);
    p.y.resize(n);
    double step_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = next.x[i] - cur.x[i];
      p.y[i] = next.grad[i] - cur.grad[i];
      step_norm = std::max(step_norm, std::abs(p.s[i]));
    }
    const double sy = dot(p.s, p.y);
    if (sy > 1e-10 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y)) && sy > 0.0) {
      p.rho = 1.0 / sy;
      memory.push_back(std::move(p));
      if (static_cast<int>(memory.size()) > config.lbfgs_memory) memory.pop_front();
    }

    const bool merit_stuck = next.merit == cur.merit;
    cur = std::move(next);
    ++out.accepted;
    if (config.trace) {
      *config.trace << ++trace_counter << ',' << format_number(cur.f) << ','
                    << format_number(max_violation(cur.g)) << ',' << format_number(step_norm) << '\n';
    }
    if (merit_stuck && step_norm == 0.0) {
      out.stalled = true;
      break;
    }
  }
  if (!out.converged && !out.stalled) {
    out.converged = projected_gradient_inf(cur.x, cur.grad, lo, hi) <= config.optimality_tolerance;
  }
  out.point = std::move(cur);
  return out;
}

}  // namespace detail

/// First-order optimality measures at x. Without `multipliers`, estimates them by
/// nonnegative least squares on the near-active constraints.
inline KktReport check_kkt(const NlpProblem& problem, std::span<const double> x,
                           const SolverConfig& config,
                           std::optional<std::span<const double>> multipliers = std::nullopt) {
  problem.validate();
  if (x.size() != problem.dimension) throw InputError("check_kkt: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < problem.lower[i] || x[i] > problem.upper[i])
      throw InputError("check_kkt: point outside bounds");

  detail::Counted eval{problem, config};
  const std::size_t n = problem.dimension;
  const std::size_t m = problem.inequality_constraints.size();

  const double fx = eval.f(x);
  std::vector<double> gf(n);
  eval.grad_f(x, fx, gf);
  std::vector<double> gvals(m);
  std::vector<std::vector<double>> gg(m, std::vector<double>(n));
  for (std::size_t c = 0; c < m; ++c) {
    gvals[c] = eval.g(c, x);
    eval.grad_g(c, x, gvals[c], gg[c]);
  }

  KktReport rep;
  rep.max_violation = detail::max_violation(gvals);
  if (multipliers) {
    if (multipliers->size() != m) throw InputError("check_kkt: multiplier count mismatch");
    rep.multipliers.assign(multipliers->begin(), multipliers->end());
  } else {
    // Projected coordinate descent on min_{lambda >= 0} ||(grad f + sum lambda_c grad g_c)_free||^2.
    rep.multipliers.assign(m, 0.0);
    std::vector<char> free(n, 0);
    for (std::size_t i = 0; i < n; ++i) free[i] = x[i] > problem.lower[i] && x[i] < problem.upper[i];
    const double active_tol = std::max(10.0 * config.constraint_tolerance, 1e-8);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = free[i] ? gf[i] : 0.0;
    for (int sweep = 0; sweep < 50; ++sweep) {
      for (std::size_t c = 0; c < m; ++c) {
        if (gvals[c] < -active_tol) continue;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!free[i]) continue;
          num += gg[c][i] * r[i];
          den += gg[c][i] * gg[c][i];
        }
        if (den == 0.0) continue;
        const double next = std::max(0.0, rep.multipliers[c] - num / den);
        const double change = next - rep.multipliers[c];
        for (std::size_t i = 0; i < n; ++i)
          if (free[i]) r[i] += change * gg[c][i];
        rep.multipliers[c] = next;
      }
    }
  }

  std::vector<double> gl = gf;
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t i = 0; i < n; ++i) gl[i] += rep.multipliers[c] * gg[c][i];
  rep.projected_gradient_norm = detail::projected_gradient_inf(x, gl, problem.lower, problem.upper);
  for (std::size_t c = 0; c < m; ++c)
    rep.complementarity = std::max(rep.complementarity, std::abs(rep.multipliers[c] * gvals[c]));
  return rep;
}

/// Minimizes the problem from x0 (projected into the box first).
inline SolverResult minimize(const NlpProblem& problem, std::span<const double> x0,
                             const SolverConfig& config,
                             std::optional<std::span<const double>> initial_multipliers = std::nullopt) {
  problem.validate();
  config.validate();
  if (x0.size() != problem.dimension) throw InputError("minimize: x0 dimension mismatch");

  const std::size_t m = problem.inequality_constraints.size();
  detail::Counted eval{problem, config};
  std::vector<double> lambda(m, 0.0);
  if (initial_multipliers) {
    if (initial_multipliers->size() != m) throw InputError("minimize: multiplier count mismatch");
    for (std::size_t i = 0; i < m; ++i) lambda[i] = std::max(0.0, (*initial_multipliers)[i]);
  }
  double mu = config.penalty_initial;

  if (config.trace) *config.trace << "iteration,objective,violation,step_norm\n";
  int trace_counter = 0;

  SolverResult res;
  std::vector<double> x = project(x0, problem.lower, problem.upper);
  {
    const double f0 = eval.f(x);
    if (!std::isfinite(f0)) throw InputError("minimize: objective is not finite at x0");
  }

  struct Candidate {
    std::vector<double> x;
    double f;
    double violation;
    double pg;
    std::vector<double> multipliers;
  };
  std::optional<Candidate> best;
  auto better = [&](const Candidate& c) {
    if (!best) return true;
    const bool c_feas = c.violation <= config.constraint_tolerance;
    const bool b_feas = best->violation <= config.constraint_tolerance;
    if (c_feas != b_feas) return c_feas;
    if (c_feas) return c.f <= best->f;
    return c.violation <= best->violation;
  };

  double prev_violation = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool stalled = false;
  // Curvature pairs carry over between outer iterations until the penalty changes.
  detail::CurvatureMemory memory;
  double memory_mu = mu;
  for (int outer = 0; outer < config.max_outer_iterations; ++outer) {
    if (mu != memory_mu) {
      memory.clear();
      memory_mu = mu;
    }
    detail::AugmentedLagrangian al(eval, lambda, mu);
    detail::MeritPoint start = al.value(x);
    auto inner = detail::minimize_merit(al, std::move(start), problem, config, trace_counter, memory);
    res.iterations += inner.accepted;
    ++res.outer_iterations;

    x = inner.point.x;
    const double violation = std::max(0.0, detail::max_violation(inner.point.g));
    const std::vector<double> next_lambda = al.updated_multipliers(inner.point.g);
    // The merit gradient equals the Lagrangian gradient at the updated multipliers.
    const double pg = detail::projected_gradient_inf(x, inner.point.grad, problem.lower, problem.upper);
    res.violation_history.push_back(violation);

    Candidate cand{x, inner.point.f, violation, pg, next_lambda};
    if (better(cand)) best = cand;

    if (violation <= config.constraint_tolerance && pg <= config.optimality_tolerance) {
      converged = true;
      best = cand;
      break;
    }
    if (m == 0) {
      // Nothing to update; the next outer iteration just continues the descent.
      if (inner.stalled && inner.accepted == 0) {
        stalled = true;
        break;
      }
      continue;
    }
    if (inner.stalled && inner.accepted == 0 && violation <= config.constraint_tolerance) {
      stalled = true;
      break;
    }
    if (violation > config.constraint_tolerance && violation > 0.25 * prev_violation)
      mu *= config.penalty_growth;
    prev_violation = violation;
    lambda = next_lambda;
  }

  res.x_best = best->x;
  res.objective_value = best->f;
  res.max_constraint_violation = best->violation;
  res.multipliers = best->multipliers;
  res.projected_gradient_norm = best->pg;
  res.function_evaluations = eval.evaluations;
  if (converged) {
    res.status = SolverStatus::converged;
  } else if (stalled) {
    res.status = SolverStatus::stalled;
  } else if (res.outer_iterations >= config.max_outer_iterations) {
    res.status = SolverStatus::max_iterations;
  } else {
    res.status = SolverStatus::stalled;
  }
  return res;
}

}  // namespace sevplan
