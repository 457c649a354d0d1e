#pragma once

// Kepler system on R^6 with the canonical chart (p1, p2, p3, q1, q2, q3):
//   H = p^2 / 2 - gamma / |q|,  M = p x q,  A = p x M + gamma q / |q|.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "degint/errors.hpp"
#include "degint/integrate.hpp"
#include "degint/poisson.hpp"

namespace degint::kepler {

using Vec3 = std::array<double, 3>;

/// Signs fixed by direct expansion under {p_i, q_j} = delta_ij:
///   (A, A) = gamma^2 + kNormRelationSign * 2 (M, M) H
///   {A_i, A_j} = kLenzBracketSign * 2 H eps_ijk M_k
inline constexpr int kNormRelationSign = +1;
inline constexpr int kLenzBracketSign = -1;

struct KeplerState {
  Vec3 p{};
  Vec3 q{};
  double gamma = 1.0;
};

struct P5Point {
  Vec3 M{};
  Vec3 A{};
  double H = 0.0;
};

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline P5Point project_to_p5(const KeplerState& s, const Tolerances& tol = default_tolerances()) {
  const double r = norm(s.q);
  if (r < tol.collision_radius) throw Collision("project_to_p5: |q| below collision threshold");
  P5Point out;
  out.M = cross(s.p, s.q);
  const Vec3 pm = cross(s.p, out.M);
  for (int i = 0; i < 3; ++i) out.A[i] = pm[i] + s.gamma * s.q[i] / r;
  out.H = 0.5 * dot(s.p, s.p) - s.gamma / r;
  return out;
}

/// (M, A); vanishes identically.
inline double orthogonality_defect(const P5Point& pt) { return dot(pt.M, pt.A); }

/// (A, A) - gamma^2 - s 2 (M, M) H with the signed relation above.
inline double norm_relation_defect(const P5Point& pt, double gamma) {
  return dot(pt.A, pt.A) - gamma * gamma - kNormRelationSign * 2.0 * dot(pt.M, pt.M) * pt.H;
}

enum class LevelSurface { NegativeEnergy, ZeroEnergy, PositiveEnergy };

struct LevelSurfaceInfo {
  LevelSurface kind;
  std::string leaf;  // "S2xS2", "TS2", "hyperboloid"
  double radius;     // S2 radius for E <= 0; NaN for the hyperboloid
};

inline LevelSurfaceInfo classify_level_surface(double energy, double gamma = 1.0) {
  if (energy < 0.0) return {LevelSurface::NegativeEnergy, "S2xS2", gamma / std::sqrt(2.0 * std::abs(energy))};
  if (energy == 0.0) return {LevelSurface::ZeroEnergy, "TS2", gamma};
  return {LevelSurface::PositiveEnergy, "hyperboloid", std::numeric_limits<double>::quiet_NaN()};
}

/// Radial period 2 pi gamma / (2|E|)^{3/2} of a bound orbit.
inline double period_formula(double energy, double gamma) {
  if (energy >= 0.0) throw Error("period_formula: unbound orbit");
  return 2.0 * std::numbers::pi * gamma / std::pow(2.0 * std::abs(energy), 1.5);
}

// Chart embedding ----------------------------------------------------------------

inline PoissonChart chart() { return chart_canonical(3); }

inline ComplexVector to_point(const KeplerState& s) {
  return {s.p[0], s.p[1], s.p[2], s.q[0], s.q[1], s.q[2]};
}

inline KeplerState from_point(PointView x, double gamma) {
  return KeplerState{{x[0].real(), x[1].real(), x[2].real()}, {x[3].real(), x[4].real(), x[5].real()}, gamma};
}

namespace detail {
// Holomorphic |q| = sqrt(q . q); agrees with the Euclidean norm on real points.
inline Complex radius(PointView x) { return std::sqrt(x[3] * x[3] + x[4] * x[4] + x[5] * x[5]); }

inline Complex m_component(PointView x, int i) {
  // M = p x q
  const Complex p[3] = {x[0], x[1], x[2]}, q[3] = {x[3], x[4], x[5]};
  const int j = (i + 1) % 3, k = (i + 2) % 3;
  return p[j] * q[k] - p[k] * q[j];
}
}  // namespace detail

inline Observable hamiltonian(double gamma) {
  return Observable{"H",
                    [gamma](PointView x) {
                      return 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) - gamma / detail::radius(x);
                    },
                    [gamma](PointView x) {
                      const Complex r = detail::radius(x);
                      const Complex c = gamma / (r * r * r);
                      return ComplexVector{x[0], x[1], x[2], c * x[3], c * x[4], c * x[5]};
                    }};
}

inline Observable angular_momentum(int i) {
  return Observable{"M" + std::to_string(i + 1), [i](PointView x) { return detail::m_component(x, i); }, {}};
}

inline Observable lenz(int i, double gamma) {
  return Observable{"A" + std::to_string(i + 1), [i, gamma](PointView x) {
                      // A = p x M + gamma q / |q|
                      const int j = (i + 1) % 3, k = (i + 2) % 3;
                      const Complex pm = x[j] * detail::m_component(x, k) - x[k] * detail::m_component(x, j);
                      return pm + gamma * x[3 + i] / detail::radius(x);
                    },
                    {}};
}

/// M1..M3, A1..A3, H in that order.
inline std::vector<Observable> integrals(double gamma) {
  std::vector<Observable> out;
  for (int i = 0; i < 3; ++i) out.push_back(angular_momentum(i));
  for (int i = 0; i < 3; ++i) out.push_back(lenz(i, gamma));
  out.push_back(hamiltonian(gamma));
  return out;
}

inline StateGuard collision_guard(const Tolerances& tol = default_tolerances()) {
  return [threshold = tol.collision_radius](PointView x) -> std::optional<std::string> {
    if (std::abs(detail::radius(x)) < threshold) return std::string(flags::kCollision);
    return std::nullopt;
  };
}

/// Integrates Hamilton's equations with the adaptive method and reports the
/// drift of M, A and H. A collision truncates the run and sets the flag.
/// On a plunging orbit the step size underflows while |q| is still around
/// 1e-8, before the 1e-12 guard can fire; the origin is the only singularity
/// of the field, so an underflow with |q| < 1e-6 |q0| is reported as a
/// collision as well.
inline ConservationReport orbit_conservation_report(const KeplerState& s0, double t_max, double tol = 1e-10,
                                                    Trajectory* trajectory = nullptr) {
  const PoissonChart c = chart();
  const std::vector<Observable> conserved = integrals(s0.gamma);
  AdaptiveOptions opt;
  opt.tol = tol;
  opt.initial_step = 1e-3;
  opt.guard = collision_guard();
  const ComplexVector x0 = to_point(s0);
  Trajectory traj;
  ConservationReport rep = adaptive_conservation(c, hamiltonian(s0.gamma), x0, t_max, conserved, opt, &traj);
  const bool underflow = std::find(traj.flags.begin(), traj.flags.end(), flags::kStepUnderflow) != traj.flags.end();
  if (underflow && std::abs(detail::radius(traj.back())) < 1e-6 * std::abs(detail::radius(x0))) {
    rep.add_flag(flags::kCollision);
  }
  if (trajectory) *trajectory = std::move(traj);
  return rep;
}

/// Radial period measured as the time between successive apsis passages of
/// the same kind (zeros of q . p with equal crossing direction).
inline std::optional<double> measure_radial_period(const KeplerState& s0, double horizon, double tol = 1e-12) {
  const PoissonChart c = chart();
  AdaptiveOptions opt;
  opt.tol = tol;
  opt.guard = collision_guard();
  const VectorField f = hamiltonian_field(c, hamiltonian(s0.gamma));
  const ComplexVector x0 = to_point(s0);
  const Trajectory traj = adaptive(f, x0, horizon, opt);
  const auto radial = [](PointView x) { return (x[0] * x[3] + x[1] * x[4] + x[2] * x[5]).real(); };
  std::vector<EventCrossing> crossings = locate_crossings(f, traj, radial);
  if (radial(x0) == 0.0 && traj.states.size() > 1) {
    // Start at an apsis: count t = 0 as a crossing in the direction of departure.
    crossings.insert(crossings.begin(), EventCrossing{0.0, radial(traj.states[1]) > 0.0 ? +1 : -1});
  }
  for (std::size_t a = 0; a < crossings.size(); ++a)
    for (std::size_t b = a + 1; b < crossings.size(); ++b)
      if (crossings[b].direction == crossings[a].direction) return crossings[b].time - crossings[a].time;
  return std::nullopt;
}

}  // namespace degint::kepler
