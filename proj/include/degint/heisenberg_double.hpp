#pragma once

// Relativistic spin Calogero-Moser / Ruijsenaars systems on the Heisenberg
// double G x G with group-valued moment map mu(x, y) = x y x^-1 y^-1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "degint/calogero.hpp"
#include "degint/errors.hpp"
#include "degint/integrate.hpp"
#include "degint/matrix.hpp"
#include "degint/poisson.hpp"
#include "degint/tolerances.hpp"

namespace degint::hdouble {

struct DoublePoint {
  ComplexMatrix x;
  ComplexMatrix y;

  std::size_t size() const { return x.size(); }

  bool is_special(double tol = 1e-9) const {
    return std::abs(determinant(x) - 1.0) <= tol && std::abs(determinant(y) - 1.0) <= tol;
  }

  /// Rescales both factors by the principal n-th root of their determinants.
  DoublePoint normalized_to_sl() const {
    const auto scale = [](const ComplexMatrix& m) {
      const Complex d = determinant(m);
      if (d == Complex{}) throw SingularMatrix("DoublePoint: singular factor");
      return Complex{1.0, 0.0} / std::pow(d, 1.0 / static_cast<double>(m.size())) * m;
    };
    return DoublePoint{scale(x), scale(y)};
  }

  ComplexVector coordinates() const {
    ComplexVector out;
    append_matrix(out, x);
    append_matrix(out, y);
    return out;
  }

  static DoublePoint from_coordinates(PointView z, std::size_t n) {
    if (z.size() != 2 * n * n) throw DimensionMismatch("DoublePoint: expected 2 n^2 coordinates");
    return DoublePoint{matrix_block(z, 0, n), matrix_block(z, n * n, n)};
  }
};

inline ComplexMatrix moment(const DoublePoint& pt) { return pt.x * pt.y * inverse(pt.x) * inverse(pt.y); }

/// (x, y) -> (y^-1, y x y^-1).
inline DoublePoint duality_map(const DoublePoint& pt) {
  const ComplexMatrix yi = inverse(pt.y);
  return DoublePoint{yi, pt.y * pt.x * yi};
}

/// (x', y') -> (x' y' x'^-1, x'^-1).
inline DoublePoint duality_map_inverse(const DoublePoint& pt) {
  const ComplexMatrix xi = inverse(pt.x);
  return DoublePoint{pt.x * pt.y * xi, xi};
}

/// y x^-1 y^-1; together with x it determines the first projection.
inline ComplexMatrix twisted_moment(const DoublePoint& pt) { return pt.y * inverse(pt.x) * inverse(pt.y); }

struct RankOneClass {
  Complex q = 1.0;
  ComplexVector phi;
  ComplexVector psi;

  /// z = phi psi^T + q^-1 1.
  ComplexMatrix z() const {
    const std::size_t n = phi.size();
    ComplexMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = phi[i] * psi[j] + (i == j ? 1.0 / q : Complex{});
    return m;
  }

  /// |(phi, psi) - (q^{n-1} - q^-1)|.
  double pairing_defect() const {
    Complex s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) s += phi[i] * psi[i];
    return std::abs(s - expected_pairing(q, phi.size()));
  }

  static Complex expected_pairing(Complex q, std::size_t n) {
    return std::pow(q, static_cast<double>(n) - 1.0) - 1.0 / q;
  }

  /// Target spectrum (q^{n-1}, q^-1, ..., q^-1), sorted like eigenvalues().
  static ComplexVector expected_spectrum(Complex q, std::size_t n) {
    ComplexVector e(n, 1.0 / q);
    e[0] = std::pow(q, static_cast<double>(n) - 1.0);
    std::sort(e.begin(), e.end(), lex_less);
    return e;
  }
};

/// Largest distance from each computed eigenvalue to the matching target.
/// Both lists are sorted lexicographically; for a repeated eigenvalue the
/// perturbation of a non-normal matrix can split it, so the comparison is
/// made after greedy nearest matching.
inline double spectrum_distance(ComplexVector computed, ComplexVector target) {
  if (computed.size() != target.size()) throw DimensionMismatch("spectrum_distance: size mismatch");
  double worst = 0.0;
  for (const auto& t : target) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < computed.size(); ++i)
      if (std::abs(computed[i] - t) < bd) bd = std::abs(computed[i] - t), best = i;
    worst = std::max(worst, bd);
    computed.erase(computed.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return worst;
}

// Fibers of the two projections -------------------------------------------------

/// Element V diag(lambda) V^-1 of the centralizer of a matrix with simple spectrum.
inline ComplexMatrix centralizer_element(const ComplexMatrix& m, std::span<const Complex> lambda,
                                         const Tolerances& tol = default_tolerances()) {
  const Spectrum s = spectral(m, tol);
  if (lambda.size() != m.size()) throw DimensionMismatch("centralizer_element: wrong number of eigenvalues");
  return s.vectors * ComplexMatrix::diagonal(lambda) * inverse(s.vectors);
}

/// Invariants of the first projection: tr x^a, tr mu~^b, tr(x^a mu~^b), a, b in 1..n.
inline ComplexVector pi1_invariants(const DoublePoint& pt) {
  const ComplexMatrix mt = twisted_moment(pt);
  ComplexVector out = traces_of_powers(pt.x, static_cast<unsigned>(pt.size()));
  for (const auto& v : traces_of_powers(mt, static_cast<unsigned>(pt.size()))) out.push_back(v);
  for (const auto& v : calogero::pair_invariants(pt.x, mt, static_cast<unsigned>(pt.size()))) out.push_back(v);
  return out;
}

/// Invariants of the second projection: tr y^b, tr mu^a, tr(y^a mu^b).
inline ComplexVector pi2_invariants(const DoublePoint& pt) {
  const ComplexMatrix mu = moment(pt);
  ComplexVector out = traces_of_powers(pt.y, static_cast<unsigned>(pt.size()));
  for (const auto& v : traces_of_powers(mu, static_cast<unsigned>(pt.size()))) out.push_back(v);
  for (const auto& v : calogero::pair_invariants(pt.y, mu, static_cast<unsigned>(pt.size()))) out.push_back(v);
  return out;
}

struct FiberCheckReport {
  std::vector<double> margins;  // word-invariant separation of G(x, yz) and G(xz', y)
  double min_margin = 0.0;
  std::size_t pairs = 0;
  std::size_t inconclusive = 0;
  std::size_t coincident = 0;
  double pi1_defect = 0.0;  // variation of pi1 invariants over the sampled F1 points
  double pi2_defect = 0.0;  // variation of pi2 invariants over the sampled F2 points

  bool separated() const { return inconclusive == 0; }
};

/// Samples z in Z_x and z' in Z_y, given by their eigenvalues on the
/// eigenbases of x and y, and compares G(x, yz) with G(xz', y).
inline FiberCheckReport fiber_check(const DoublePoint& pt, std::span<const ComplexVector> z_eigs,
                                    std::span<const ComplexVector> zp_eigs,
                                    const Tolerances& tol = default_tolerances()) {
  FiberCheckReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  const ComplexVector base1 = pi1_invariants(pt), base2 = pi2_invariants(pt);
  const auto is_one = [](const ComplexVector& v) {
    for (const auto& e : v)
      if (e != Complex{1.0, 0.0}) return false;
    return true;
  };
  for (const auto& ze : z_eigs) {
    const ComplexMatrix z = centralizer_element(pt.x, ze, tol);
    const DoublePoint f1{pt.x, pt.y * z};
    rep.pi1_defect = std::max(rep.pi1_defect, max_abs_diff(pi1_invariants(f1), base1));
    for (const auto& zpe : zp_eigs) {
      const ComplexMatrix zp = centralizer_element(pt.y, zpe, tol);
      const DoublePoint f2{pt.x * zp, pt.y};
      rep.pi2_defect = std::max(rep.pi2_defect, max_abs_diff(pi2_invariants(f2), base2));
      const double m = calogero::separation_margin(f1.x, f1.y, f2.x, f2.y);
      ++rep.pairs;
      rep.margins.push_back(m);
      if (is_one(ze) && is_one(zpe)) {
        ++rep.coincident;
        continue;
      }
      rep.min_margin = std::min(rep.min_margin, m);
      if (m < tol.separation_margin) ++rep.inconclusive;
    }
  }
  if (rep.pairs == rep.coincident) rep.min_margin = 0.0;
  return rep;
}

// Rank-one reduction ---------------------------------------------------------------

namespace detail {

inline void check_reduction_point(std::span<const Complex> x, Complex q, const Tolerances& tol) {
  const std::size_t n = x.size();
  if (q == Complex{}) throw SingularPoint("rank-one reduction: q = 0");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(x[i]) < tol.regular_gap) throw SingularPoint("rank-one reduction: zero eigenvalue of x");
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (std::abs(x[i] - x[j]) < tol.regular_gap) throw SingularPoint("rank-one reduction: repeated eigenvalue");
      if (std::abs(x[i] / x[j] - 1.0 / q) < tol.regular_gap) {
        throw SingularPoint("rank-one reduction: vanishing denominator x_i/x_j - q^-1");
      }
    }
  }
}

}  // namespace detail

/// y_ii = u_i prod_{j!=i} (1 - q^-1 x_j/x_i) / (1 - x_j/x_i).
inline ComplexVector y_diagonal_from_u(std::span<const Complex> x, std::span<const Complex> u, Complex q) {
  const std::size_t n = x.size();
  if (u.size() != n) throw DimensionMismatch("y_diagonal_from_u: size mismatch");
  ComplexVector d(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex v = u[i];
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) v *= (1.0 - x[j] / (q * x[i])) / (1.0 - x[j] / x[i]);
    d[i] = v;
  }
  return d;
}

/// y_ij = (1 - q^-1) y_jj / (x_i/x_j - q^-1) for i != j; this places
/// x y x^-1 y^-1 in the class of q.
inline ComplexMatrix build_y(std::span<const Complex> x, Complex q, std::span<const Complex> y_diag) {
  const std::size_t n = x.size();
  ComplexMatrix y(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      y(i, j) = i == j ? y_diag[i] : (1.0 - 1.0 / q) * y_diag[j] / (x[i] / x[j] - 1.0 / q);
  return y;
}

/// The arrangement y_ij = (1 - q^-1) y_jj / (1 - q^-1 x_i/x_j). Kept for
/// comparison only: it lands in the class of q^-1 instead of q.
inline ComplexMatrix build_y_printed(std::span<const Complex> x, Complex q, std::span<const Complex> y_diag) {
  const std::size_t n = x.size();
  ComplexMatrix y(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      y(i, j) = i == j ? y_diag[i] : (1.0 - 1.0 / q) * y_diag[j] / (1.0 - x[i] / (q * x[j]));
  return y;
}

/// Solves sum_i v_i / (a_j - q^-1 a_i) = 1 and returns w_i = v_i / a_i.
inline ComplexVector solve_displayed_system(std::span<const Complex> a, Complex q, double* residual = nullptr,
                                            const Tolerances& tol = default_tolerances()) {
  const std::size_t n = a.size();
  ComplexMatrix c(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const Complex den = a[j] - a[i] / q;
      if (std::abs(den) < tol.cauchy_denominator) throw SingularMatrix("displayed system: vanishing denominator");
      c(j, i) = 1.0 / den;
    }
  const ComplexVector ones(n, Complex{1.0, 0.0});
  const ComplexVector v = solve(c, ones);
  if (residual) {
    const ComplexVector r = c * v;
    double m = 0.0;
    for (const auto& e : r) m = std::max(m, std::abs(e - 1.0));
    *residual = m;
  }
  ComplexVector w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = v[i] / a[i];
  return w;
}

/// (1 - q^-1) a_i^-1 prod_{j!=i} (1 - q a_j/a_i)/(1 - a_j/a_i).
inline ComplexVector phi_psi_printed(std::span<const Complex> a, Complex q) {
  const std::size_t n = a.size();
  ComplexVector w(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex v = (1.0 - 1.0 / q) / a[i];
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) v *= (1.0 - q * a[j] / a[i]) / (1.0 - a[j] / a[i]);
    w[i] = v;
  }
  return w;
}

/// The printed product without the a_i^-1 prefactor.
inline ComplexVector phi_psi_corrected(std::span<const Complex> a, Complex q) {
  ComplexVector w = phi_psi_printed(a, q);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= a[i];
  return w;
}

struct ReductionResult {
  DoublePoint point;
  ComplexMatrix mu;
  ComplexVector phi_psi;           // oracle w_i = phi_i psi_i (phi = 1)
  double system_residual = 0.0;    // linear-solve residual of the displayed system
  double diagonal_residual = 0.0;  // |diag(mu) - q^-1 - w|
  double rank_one_residual = 0.0;  // |mu - (1 w^T + q^-1 1)|
  double eigen_residual = 0.0;     // distance of the spectrum of mu to (q^{n-1}, q^-1, ...)
  double pairing_residual = 0.0;   // |sum w - (q^{n-1} - q^-1)|
  double printed_residual = 0.0;   // printed closed form vs oracle
  double corrected_residual = 0.0; // corrected closed form vs oracle
};

/// x = diag(x_eigs), phi = 1, y from build_y with the given diagonal. The
/// displayed linear system, evaluated at a = x^-1, is the oracle for
/// phi_i psi_i; membership of mu in the class of q is checked by eigenvalues.
inline ReductionResult rank_one_reduction(std::span<const Complex> x_eigs, Complex q, std::span<const Complex> y_diag,
                                          const Tolerances& tol = default_tolerances()) {
  const std::size_t n = x_eigs.size();
  if (y_diag.size() != n) throw DimensionMismatch("rank_one_reduction: size mismatch");
  detail::check_reduction_point(x_eigs, q, tol);
  ReductionResult res;
  res.point = DoublePoint{ComplexMatrix::diagonal(x_eigs), build_y(x_eigs, q, y_diag)};
  res.mu = moment(res.point);

  ComplexVector a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = 1.0 / x_eigs[i];
  res.phi_psi = solve_displayed_system(a, q, &res.system_residual, tol);

  const double scale = std::max(1.0, res.mu.max_abs());
  for (std::size_t i = 0; i < n; ++i) {
    res.diagonal_residual = std::max(res.diagonal_residual, std::abs(res.mu(i, i) - 1.0 / q - res.phi_psi[i]));
    for (std::size_t j = 0; j < n; ++j) {
      const Complex target = res.phi_psi[j] + (i == j ? 1.0 / q : Complex{});
      res.rank_one_residual = std::max(res.rank_one_residual, std::abs(res.mu(i, j) - target));
    }
  }
  res.diagonal_residual /= scale;
  res.rank_one_residual /= scale;
  res.eigen_residual = spectrum_distance(eigenvalues(res.mu), RankOneClass::expected_spectrum(q, n));
  Complex sum = 0.0;
  for (const auto& w : res.phi_psi) sum += w;
  res.pairing_residual = std::abs(sum - RankOneClass::expected_pairing(q, n));
  res.printed_residual = calogero::relative_vector_residual(phi_psi_printed(a, q), res.phi_psi);
  res.corrected_residual = calogero::relative_vector_residual(phi_psi_corrected(a, q), res.phi_psi);

  const double worst = std::max({res.diagonal_residual, res.rank_one_residual, res.eigen_residual});
  if (worst > tol.dual_path_fail) {
    throw ReductionFailed("rank_one_reduction: consistency violated (diagonal " +
                          std::to_string(res.diagonal_residual) + ", rank-one " +
                          std::to_string(res.rank_one_residual) + ", spectrum " + std::to_string(res.eigen_residual) +
                          ")");
  }
  return res;
}

// Reduced Hamiltonians --------------------------------------------------------------

enum class Orientation {
  Printed,  // ratio x_a / x_b in the H2 product
  Swapped,  // ratio x_b / x_a
};

inline const char* to_string(Orientation o) { return o == Orientation::Printed ? "printed" : "swapped"; }

struct RelativisticHamiltonians {
  ComplexVector reduced;  // tr y, tr y^2 from the reduced formulas
  ComplexVector matrix;   // tr y^k, k = 1..kmax, from the reconstructed y
  Complex character = 0.0;  // (tr y^2 - (tr y)^2) / 2, i.e. -e_2(y)
  Complex h2 = 0.0;         // product formula in the selected orientation
  Orientation orientation = Orientation::Swapped;
  double trace_residual = 0.0;
  double printed_h2_residual = 0.0;
  double swapped_h2_residual = 0.0;
};

/// -q^-1 sum_{i<j} u_i u_j prod_{a in {i,j}, b not in {i,j}} (1 - q^-1 r_ab)/(1 - r_ab).
inline Complex h2_product(std::span<const Complex> x, std::span<const Complex> u, Complex q, Orientation o) {
  const std::size_t n = x.size();
  Complex s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      Complex t = u[i] * u[j];
      for (std::size_t a : {i, j})
        for (std::size_t b = 0; b < n; ++b) {
          if (b == i || b == j) continue;
          const Complex r = o == Orientation::Printed ? x[a] / x[b] : x[b] / x[a];
          t *= (1.0 - r / q) / (1.0 - r);
        }
      s += t;
    }
  return -s / q;
}

inline RelativisticHamiltonians relativistic_hamiltonians(std::span<const Complex> x, std::span<const Complex> u,
                                                          Complex q, unsigned kmax = 2,
                                                          const Tolerances& tol = default_tolerances()) {
  const std::size_t n = x.size();
  detail::check_reduction_point(x, q, tol);
  const ComplexVector d = y_diagonal_from_u(x, u, q);
  const ComplexMatrix y = build_y(x, q, d);
  RelativisticHamiltonians out;
  Complex tr1 = 0.0, tr2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) tr1 += d[j];
  const Complex c = 1.0 - 1.0 / q;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      tr2 += c * c * d[i] * d[j] / ((1.0 - x[i] / (q * x[j])) * (1.0 - x[j] / (q * x[i])));
  out.reduced = {tr1, tr2};
  out.matrix = traces_of_powers(y, std::max(kmax, 2u));
  for (std::size_t k = 0; k < 2; ++k)
    out.trace_residual =
        std::max(out.trace_residual, calogero::relative_scalar_residual(out.reduced[k], out.matrix[k]));
  out.character = 0.5 * (out.matrix[1] - out.matrix[0] * out.matrix[0]);
  const Complex hp = h2_product(x, u, q, Orientation::Printed);
  const Complex hs = h2_product(x, u, q, Orientation::Swapped);
  out.printed_h2_residual = calogero::relative_scalar_residual(hp, out.character);
  out.swapped_h2_residual = calogero::relative_scalar_residual(hs, out.character);
  out.orientation = out.swapped_h2_residual <= out.printed_h2_residual ? Orientation::Swapped : Orientation::Printed;
  out.h2 = out.orientation == Orientation::Swapped ? hs : hp;
  const double h2_residual = std::min(out.printed_h2_residual, out.swapped_h2_residual);
  if (out.trace_residual > tol.dual_path_fail || h2_residual > tol.dual_path_fail) {
    throw ConsistencyError("relativistic_hamiltonians: reduced and matrix paths disagree (traces " +
                           std::to_string(out.trace_residual) + ", H2 " + std::to_string(h2_residual) + ")");
  }
  return out;
}

// Flows on the double --------------------------------------------------------------

enum class FlowSide {
  X,  // H = tr x: relativistic Calogero-Moser side, first projection
  Y,  // H = tr y: Ruijsenaars side, second projection
};

inline Observable point_observable(std::string name, std::size_t n,
                                   std::function<Complex(const DoublePoint&)> f) {
  return Observable{std::move(name), [n, f = std::move(f)](PointView z) { return f(DoublePoint::from_coordinates(z, n)); },
                    {}};
}

/// Conserved set of the chosen side: power traces of x (or y), of the twisted
/// moment (or moment), their joint traces, and the determinant.
inline std::vector<Observable> projection_observables(std::size_t n, FlowSide side) {
  std::vector<Observable> out;
  const bool xs = side == FlowSide::X;
  const std::string base = xs ? "x" : "y";
  const std::string mom = xs ? "mut" : "mu";
  const auto factor = [xs](const DoublePoint& p) { return xs ? p.x : p.y; };
  const auto other = [xs](const DoublePoint& p) { return xs ? twisted_moment(p) : moment(p); };
  for (unsigned a = 1; a <= n; ++a) {
    out.push_back(point_observable("tr " + base + "^" + std::to_string(a), n,
                                   [=](const DoublePoint& p) { return matrix_power(factor(p), a).trace(); }));
  }
  for (unsigned b = 1; b <= n; ++b) {
    out.push_back(point_observable("tr " + mom + "^" + std::to_string(b), n,
                                   [=](const DoublePoint& p) { return matrix_power(other(p), b).trace(); }));
  }
  for (unsigned a = 1; a <= 2; ++a)
    for (unsigned b = 1; b <= 2; ++b) {
      out.push_back(point_observable("tr " + base + "^" + std::to_string(a) + " " + mom + "^" + std::to_string(b), n,
                                     [=](const DoublePoint& p) {
                                       return (matrix_power(factor(p), a) * matrix_power(other(p), b)).trace();
                                     }));
    }
  out.push_back(point_observable("det " + base, n, [=](const DoublePoint& p) { return determinant(factor(p)); }));
  return out;
}

/// Integrates H = tr x (side X) or H = tr y (side Y) on the double bivector
/// by RK4 and monitors the invariants of the matching projection.
inline ConservationReport double_flow_conservation(const DoublePoint& pt, FlowSide side, double t_max, double dt,
                                                   double declared_tolerance = 1e-7, Trajectory* out = nullptr) {
  const std::size_t n = pt.size();
  if (n > 3) throw DimensionMismatch("double_flow_conservation: n <= 3 required");
  const PoissonChart chart = chart_heisenberg_double(n);
  const Observable h = trace_power_observable(chart.dim, side == FlowSide::X ? 0 : n * n, n, 1,
                                              side == FlowSide::X ? "tr x" : "tr y");
  const ComplexVector z0 = pt.coordinates();
  Trajectory traj = rk4(chart, h, z0, t_max, dt);
  const std::vector<Observable> obs = projection_observables(n, side);
  ConservationReport rep = monitor(traj, obs, declared_tolerance);
  if (out) *out = std::move(traj);
  return rep;
}

}  // namespace degint::hdouble
