#pragma once

// Exact flows of conjugation-invariant Hamiltonians on SL_n with the standard
// Poisson-Lie structure: x(t) = g_+(t)^-1 x g_+(t) = g_-(t)^-1 x g_-(t),
// where g_+(t) g_-(t)^-1 = exp(t xi) and xi is the left differential of H.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "degint/errors.hpp"
#include "degint/integrate.hpp"
#include "degint/matrix.hpp"
#include "degint/poisson.hpp"
#include "degint/tolerances.hpp"

namespace degint::facto {

struct TracePower {
  unsigned k = 1;
};

/// A Hamiltonian given as an observable on the n x n entries (row-major).
struct Custom {
  Observable observable;
};

struct InvariantHamiltonian {
  std::variant<TracePower, Custom> kind;

  static InvariantHamiltonian trace_power(unsigned k) { return {TracePower{k}}; }
  static InvariantHamiltonian custom(Observable f) { return {Custom{std::move(f)}}; }

  std::string name() const {
    if (const auto* tp = std::get_if<TracePower>(&kind)) return tp->k == 1 ? "tr x" : "tr x^" + std::to_string(tp->k);
    return std::get<Custom>(kind).observable.name;
  }

  Complex operator()(const ComplexMatrix& x) const {
    if (const auto* tp = std::get_if<TracePower>(&kind)) return matrix_power(x, tp->k).trace();
    return std::get<Custom>(kind).observable(x.entries());
  }

  /// Observable on the Sklyanin chart of size n.
  Observable observable(std::size_t n) const {
    if (const auto* tp = std::get_if<TracePower>(&kind)) return trace_power_observable(n * n, 0, n, tp->k, name());
    return std::get<Custom>(kind).observable;
  }
};

inline double conjugation_invariance_defect(const InvariantHamiltonian& h, const ComplexMatrix& x,
                                            const ComplexMatrix& g) {
  return std::abs(h(g * x * inverse(g)) - h(x));
}

/// Matrix xi with <xi, X> = d/dt H(exp(tX) x) at t = 0 under the trace form,
/// projected to sl_n. For tr x^k this is k x^k minus its trace part; custom
/// Hamiltonians use central differences over the matrix units.
inline ComplexMatrix left_differential(const InvariantHamiltonian& h, const ComplexMatrix& x,
                                       const Tolerances& tol = default_tolerances()) {
  const std::size_t n = x.size();
  if (const auto* tp = std::get_if<TracePower>(&h.kind)) {
    if (tp->k == 0) return ComplexMatrix(n);
    return traceless(Complex{static_cast<double>(tp->k), 0.0} * matrix_power(x, tp->k));
  }
  const double step = tol.fd_step;
  ComplexMatrix xi(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const ComplexMatrix e = ComplexMatrix::unit(n, i, j);
      const Complex fp = h(mat_exp(Complex{step, 0.0} * e) * x);
      const Complex fm = h(mat_exp(Complex{-step, 0.0} * e) * x);
      xi(j, i) = (fp - fm) / (2.0 * step);
    }
  return traceless(xi);
}

struct FlowResult {
  ComplexMatrix x;            // g_+^-1 x0 g_+
  ComplexMatrix via_g_minus;  // g_-^-1 x0 g_-
  ULPair factors;
  double plus_minus_residual = 0.0;
};

/// Full flow data at time t. Throws FactorizationNotDefined when exp(t xi)
/// has left the domain of the UL splitting.
inline FlowResult factorization_flow_detail(const ComplexMatrix& x0, const InvariantHamiltonian& h, double t,
                                            const Tolerances& tol = default_tolerances()) {
  const ComplexMatrix xi = left_differential(h, x0, tol);
  const ComplexMatrix m = mat_exp(Complex{t, 0.0} * xi);
  FlowResult res{ComplexMatrix(x0.size()), ComplexMatrix(x0.size()), ul_split_factorize(m, tol), 0.0};
  res.x = inverse(res.factors.g_plus) * x0 * res.factors.g_plus;
  res.via_g_minus = inverse(res.factors.g_minus) * x0 * res.factors.g_minus;
  res.plus_minus_residual = max_abs_diff(res.x, res.via_g_minus) / std::max(1.0, x0.max_abs());
  return res;
}

inline ComplexMatrix factorization_flow(const ComplexMatrix& x0, const InvariantHamiltonian& h, double t,
                                        const Tolerances& tol = default_tolerances()) {
  FlowResult res = factorization_flow_detail(x0, h, t, tol);
  if (res.plus_minus_residual > tol.dual_path) {
    throw ConsistencyError("factorization_flow: g_+ and g_- conjugations disagree (" +
                           std::to_string(res.plus_minus_residual) + ")");
  }
  return std::move(res.x);
}

/// Reference solution: RK4 on the Sklyanin bivector with fixed step.
inline ComplexMatrix sklyanin_rk4(const ComplexMatrix& x0, const InvariantHamiltonian& h, double t, double dt) {
  const std::size_t n = x0.size();
  const PoissonChart chart = chart_sklyanin(n);
  const Trajectory traj = rk4(chart, h.observable(n), x0.entries(), t, dt);
  if (!traj.ok()) throw NonFiniteValue("sklyanin_rk4: integration aborted (" + traj.flags.front() + ")");
  return matrix_block(traj.back(), 0, n);
}

struct SweepReport {
  double semigroup_residual = 0.0;  // max over pairs of |x(t1+t2) - x_{x(t1)}(t2)|
  double plus_minus_residual = 0.0;
  double invariant_drift = 0.0;     // max |tr x(t)^k - tr x0^k|, k <= n
  double determinant_drift = 0.0;
  std::size_t evaluations = 0;
  std::vector<std::string> flags;

  bool ok() const { return flags.empty(); }
};

/// Semigroup and conservation checks over every ordered pair (t1, t2) drawn
/// from the grid.
inline SweepReport flow_consistency_sweep(const ComplexMatrix& x0, const InvariantHamiltonian& h,
                                          std::span<const double> t_grid,
                                          const Tolerances& tol = default_tolerances()) {
  SweepReport rep;
  const unsigned n = static_cast<unsigned>(x0.size());
  const ComplexVector inv0 = traces_of_powers(x0, n);
  const Complex det0 = determinant(x0);
  const double scale = std::max(1.0, x0.max_abs());
  const auto record = [&](const FlowResult& r) {
    ++rep.evaluations;
    rep.plus_minus_residual = std::max(rep.plus_minus_residual, r.plus_minus_residual);
    rep.invariant_drift = std::max(rep.invariant_drift, max_abs_diff(traces_of_powers(r.x, n), inv0));
    rep.determinant_drift = std::max(rep.determinant_drift, std::abs(determinant(r.x) - det0));
  };
  try {
    for (double t1 : t_grid)
      for (double t2 : t_grid) {
        const FlowResult direct = factorization_flow_detail(x0, h, t1 + t2, tol);
        const FlowResult first = factorization_flow_detail(x0, h, t1, tol);
        const FlowResult second = factorization_flow_detail(first.x, h, t2, tol);
        record(direct);
        record(first);
        record(second);
        rep.semigroup_residual = std::max(rep.semigroup_residual, max_abs_diff(direct.x, second.x) / scale);
      }
  } catch (const FactorizationNotDefined&) {
    detail::push_flag(rep.flags, flags::kFactorizationDivisor);
  }
  if (rep.semigroup_residual > tol.facto_semigroup || rep.plus_minus_residual > tol.facto_gpm ||
      rep.invariant_drift > tol.facto_invariants * scale) {
    detail::push_flag(rep.flags, flags::kToleranceFailure);
  }
  return rep;
}

}  // namespace degint::facto
