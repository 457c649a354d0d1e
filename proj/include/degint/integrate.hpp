#pragma once

// Time integration of Hamiltonian vector fields and drift monitoring.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "degint/errors.hpp"
#include "degint/matrix.hpp"
#include "degint/poisson.hpp"

namespace degint {

using VectorField = std::function<ComplexVector(PointView)>;

/// Returns a flag name when the state must not be integrated further
/// (e.g. "collision"), or nullopt.
using StateGuard = std::function<std::optional<std::string>(PointView)>;

namespace flags {
inline constexpr const char* kCollision = "collision";
inline constexpr const char* kFactorizationDivisor = "factorization-divisor";
inline constexpr const char* kToleranceFailure = "tolerance-failure";
inline constexpr const char* kNonFinite = "non-finite";
inline constexpr const char* kStepUnderflow = "step-underflow";
}  // namespace flags

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double min_step = std::numeric_limits<double>::infinity();
  double max_step = 0.0;

  void record(double h) {
    ++accepted;
    min_step = std::min(min_step, h);
    max_step = std::max(max_step, h);
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<ComplexVector> states;
  StepStats stats;
  std::vector<std::string> flags;

  bool ok() const { return flags.empty(); }
  const ComplexVector& back() const { return states.back(); }

  void push(double t, ComplexVector x) {
    times.push_back(t);
    states.push_back(std::move(x));
  }
};

inline VectorField hamiltonian_field(const PoissonChart& chart, const Observable& h) {
  return [chart, h](PointView x) { return ham_vector_field(chart, h, x); };
}

namespace detail {

inline bool all_finite(std::span<const Complex> v) {
  return std::all_of(v.begin(), v.end(), [](Complex z) { return is_finite(z); });
}

inline ComplexVector axpy(PointView x, double h, std::initializer_list<std::pair<double, const ComplexVector*>> terms) {
  ComplexVector out(x.begin(), x.end());
  for (const auto& [c, k] : terms) {
    if (c == 0.0) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += h * c * (*k)[i];
  }
  return out;
}

inline void push_flag(std::vector<std::string>& fl, const std::string& f) {
  if (std::find(fl.begin(), fl.end(), f) == fl.end()) fl.push_back(f);
}

}  // namespace detail

inline ComplexVector rk4_step(const VectorField& f, PointView x, double h) {
  const ComplexVector k1 = f(x);
  const ComplexVector k2 = f(detail::axpy(x, h, {{0.5, &k1}}));
  const ComplexVector k3 = f(detail::axpy(x, h, {{0.5, &k2}}));
  const ComplexVector k4 = f(detail::axpy(x, h, {{1.0, &k3}}));
  return detail::axpy(x, h, {{1.0 / 6.0, &k1}, {1.0 / 3.0, &k2}, {1.0 / 3.0, &k3}, {1.0 / 6.0, &k4}});
}

/// Classical fourth-order Runge-Kutta with fixed step; the last step is
/// shortened to land on t_max.
inline Trajectory rk4(const VectorField& f, PointView x0, double t_max, double dt, const StateGuard& guard = {}) {
  if (!(dt > 0.0)) throw DimensionMismatch("rk4: dt must be positive");
  Trajectory traj;
  traj.push(0.0, ComplexVector(x0.begin(), x0.end()));
  double t = 0.0;
  while (t < t_max - 1e-14 * std::max(1.0, t_max)) {
    const double h = std::min(dt, t_max - t);
    ComplexVector next = rk4_step(f, traj.back(), h);
    if (!detail::all_finite(next)) {
      detail::push_flag(traj.flags, flags::kNonFinite);
      break;
    }
    if (guard) {
      if (auto flag = guard(next)) {
        detail::push_flag(traj.flags, *flag);
        break;
      }
    }
    t += h;
    traj.stats.record(h);
    traj.push(t, std::move(next));
  }
  return traj;
}

inline Trajectory rk4(const PoissonChart& chart, const Observable& h, PointView x0, double t_max, double dt) {
  return rk4(hamiltonian_field(chart, h), x0, t_max, dt);
}

/// One Dormand-Prince 5(4) step: the fifth-order solution and the
/// embedded error estimate.
struct DopriStep {
  ComplexVector x;
  ComplexVector error;
};

inline DopriStep dopri_step(const VectorField& f, PointView x, double h) {
  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                          a54 = -212.0 / 729.0;
  static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                          a65 = -5103.0 / 18656.0;
  static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                          b6 = 11.0 / 84.0;
  static constexpr double e1 = b1 - 5179.0 / 57600.0, e3 = b3 - 7571.0 / 16695.0, e4 = b4 - 393.0 / 640.0,
                          e5 = b5 + 92097.0 / 339200.0, e6 = b6 - 187.0 / 2100.0, e7 = -1.0 / 40.0;
  const ComplexVector k1 = f(x);
  const ComplexVector k2 = f(detail::axpy(x, h, {{a21, &k1}}));
  const ComplexVector k3 = f(detail::axpy(x, h, {{a31, &k1}, {a32, &k2}}));
  const ComplexVector k4 = f(detail::axpy(x, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
  const ComplexVector k5 = f(detail::axpy(x, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
  const ComplexVector k6 = f(detail::axpy(x, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
  ComplexVector x5 = detail::axpy(x, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
  const ComplexVector k7 = f(x5);
  ComplexVector err(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
  }
  return DopriStep{std::move(x5), std::move(err)};
}

struct AdaptiveOptions {
  double tol = 1e-10;
  double initial_step = 1e-3;
  double max_step = std::numeric_limits<double>::infinity();
  StateGuard guard;
};

/// Dormand-Prince 5(4) with local error control: every accepted step has
/// max_i |err_i| / (1 + |x_i|) <= tol.
inline Trajectory adaptive(const VectorField& f, PointView x0, double t_max, const AdaptiveOptions& opt) {
  if (!(opt.tol >= 1e-13 && opt.tol <= 1e-6)) throw DimensionMismatch("adaptive: tol must lie in [1e-13, 1e-6]");
  Trajectory traj;
  traj.push(0.0, ComplexVector(x0.begin(), x0.end()));
  if (t_max <= 0.0) return traj;
  double t = 0.0;
  double h = std::min({opt.initial_step, opt.max_step, t_max});
  while (t < t_max) {
    h = std::min(h, t_max - t);
    if (h < default_tolerances().step_underflow) {
      detail::push_flag(traj.flags, flags::kStepUnderflow);
      break;
    }
    const ComplexVector& x = traj.back();
    DopriStep step = dopri_step(f, x, h);
    if (!detail::all_finite(step.x)) {
      ++traj.stats.rejected;
      h *= 0.25;
      continue;
    }
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double scale = 1.0 + std::max(std::abs(x[i]), std::abs(step.x[i]));
      err = std::max(err, std::abs(step.error[i]) / scale);
    }
    err /= opt.tol;
    if (err <= 1.0) {
      if (opt.guard) {
        if (auto flag = opt.guard(step.x)) {
          detail::push_flag(traj.flags, *flag);
          break;
        }
      }
      t = (t_max - (t + h) < 1e-14 * std::max(1.0, t_max)) ? t_max : t + h;
      traj.stats.record(h);
      traj.push(t, std::move(step.x));
      const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h = std::min(h * factor, opt.max_step);
    } else {
      ++traj.stats.rejected;
      h *= std::clamp(0.9 * std::pow(err, -0.25), 0.1, 0.9);
    }
  }
  return traj;
}

inline Trajectory adaptive(const PoissonChart& chart, const Observable& h, PointView x0, double t_max, double tol) {
  AdaptiveOptions opt;
  opt.tol = tol;
  return adaptive(hamiltonian_field(chart, h), x0, t_max, opt);
}

/// Implicit midpoint rule, solved by fixed-point iteration. Symplectic for
/// constant Poisson structures; offered for long runs.
inline Trajectory implicit_midpoint(const VectorField& f, PointView x0, double t_max, double dt,
                                    double iteration_tol = 1e-14, int max_iterations = 100) {
  if (!(dt > 0.0)) throw DimensionMismatch("implicit_midpoint: dt must be positive");
  Trajectory traj;
  traj.push(0.0, ComplexVector(x0.begin(), x0.end()));
  double t = 0.0;
  while (t < t_max - 1e-14 * std::max(1.0, t_max)) {
    const double h = std::min(dt, t_max - t);
    const ComplexVector& x = traj.back();
    ComplexVector next = rk4_step(f, x, h);
    bool converged = false;
    for (int it = 0; it < max_iterations; ++it) {
      ComplexVector mid(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) mid[i] = 0.5 * (x[i] + next[i]);
      const ComplexVector k = f(mid);
      double change = 0.0, scale = 1.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const Complex updated = x[i] + h * k[i];
        change = std::max(change, std::abs(updated - next[i]));
        scale = std::max(scale, std::abs(updated));
        next[i] = updated;
      }
      if (change <= iteration_tol * scale) {
        converged = true;
        break;
      }
    }
    if (!converged || !detail::all_finite(next)) {
      detail::push_flag(traj.flags, converged ? flags::kNonFinite : flags::kToleranceFailure);
      break;
    }
    t += h;
    traj.stats.record(h);
    traj.push(t, std::move(next));
  }
  return traj;
}

// Drift monitoring -------------------------------------------------------------

struct DriftRecord {
  std::string name;
  Complex initial;
  double max_abs = 0.0;
  double max_rel = 0.0;
};

struct OracleResidual {
  std::string name;
  double value = 0.0;
};

struct ConservationReport {
  std::vector<DriftRecord> drifts;
  std::vector<OracleResidual> oracle_residuals;
  StepStats steps;
  std::vector<std::string> flags;

  bool ok() const { return flags.empty(); }

  bool has_flag(const std::string& f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }

  const DriftRecord& drift(const std::string& name) const {
    for (const auto& d : drifts)
      if (d.name == name) return d;
    throw DimensionMismatch("ConservationReport: no observable named " + name);
  }

  double max_abs_drift() const {
    double m = 0.0;
    for (const auto& d : drifts) m = std::max(m, d.max_abs);
    return m;
  }

  void add_residual(std::string name, double value) { oracle_residuals.push_back({std::move(name), value}); }
  void add_flag(const std::string& f) { detail::push_flag(flags, f); }
};

/// Evaluates each observable along the trajectory. Relative drift is
/// max_abs / |initial| (max_abs itself when |initial| < 1e-12). When
/// `declared_tolerance` is finite, any drift above it raises the
/// tolerance-failure flag.
inline ConservationReport monitor(const Trajectory& traj, std::span<const Observable> observables,
                                  double declared_tolerance = std::numeric_limits<double>::infinity()) {
  ConservationReport report;
  report.steps = traj.stats;
  report.flags = traj.flags;
  for (const auto& obs : observables) {
    DriftRecord rec{obs.name, traj.states.empty() ? Complex{} : obs(traj.states.front()), 0.0, 0.0};
    for (const auto& x : traj.states) rec.max_abs = std::max(rec.max_abs, std::abs(obs(x) - rec.initial));
    rec.max_rel = std::abs(rec.initial) > 1e-12 ? rec.max_abs / std::abs(rec.initial) : rec.max_abs;
    if (rec.max_abs > declared_tolerance) report.add_flag(flags::kToleranceFailure);
    report.drifts.push_back(std::move(rec));
  }
  return report;
}

/// Integrates with the adaptive method and monitors the declared conserved
/// set; success is never reported with a drift above 100 * tol.
inline ConservationReport adaptive_conservation(const PoissonChart& chart, const Observable& h, PointView x0,
                                                double t_max, std::span<const Observable> conserved,
                                                const AdaptiveOptions& opt, Trajectory* out = nullptr) {
  Trajectory traj = adaptive(hamiltonian_field(chart, h), x0, t_max, opt);
  ConservationReport rep = monitor(traj, conserved, 100.0 * opt.tol);
  if (out) *out = std::move(traj);
  return rep;
}

/// Times in (0, t_end] at which event(x) changes sign between consecutive
/// samples, refined by bisection on a single Dormand-Prince step from the
/// sample before the crossing. A zero at t = 0 is not reported.
struct EventCrossing {
  double time;
  int direction;  // +1 for - to +, -1 for + to -
};

inline std::vector<EventCrossing> locate_crossings(const VectorField& f, const Trajectory& traj,
                                                   const std::function<double(PointView)>& event) {
  std::vector<EventCrossing> out;
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const double g0 = event(traj.states[k]);
    const double g1 = event(traj.states[k + 1]);
    if (g0 == 0.0 || (g0 > 0.0) == (g1 > 0.0)) continue;
    double lo = 0.0, hi = traj.times[k + 1] - traj.times[k];
    for (int it = 0; it < 80 && hi - lo > 1e-15 * std::max(1.0, traj.times[k]); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double gm = event(dopri_step(f, traj.states[k], mid).x);
      if ((gm > 0.0) == (g0 > 0.0)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    out.push_back({traj.times[k] + 0.5 * (lo + hi), g1 > 0.0 ? +1 : -1});
  }
  return out;
}

}  // namespace degint
