#pragma once

// Rational spin Calogero-Moser and rational spin Ruijsenaars systems for SL_n
// with rank-one orbits. Gauge: phi_i = 1 throughout; only the products
// phi_i psi_i and ratios phi_i / phi_j enter any formula.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "degint/errors.hpp"
#include "degint/matrix.hpp"
#include "degint/tolerances.hpp"

namespace degint::calogero {

struct CMPoint {
  ComplexVector p;
  ComplexVector q;  // additive positions h in the rational case, angles in the compact case
  Complex kappa = 0.0;

  std::size_t size() const { return p.size(); }
};

struct SpinData {
  ComplexMatrix mu;

  /// mu = phi psi^T - kappa 1, with the Cartan constraint mu_ii = 0.
  static SpinData rank_one(std::span<const Complex> phi, std::span<const Complex> psi, Complex kappa,
                           const Tolerances& tol = default_tolerances()) {
    const std::size_t n = phi.size();
    if (psi.size() != n) throw DimensionMismatch("SpinData::rank_one: phi/psi size mismatch");
    ComplexMatrix mu(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) mu(i, j) = phi[i] * psi[j] - (i == j ? kappa : Complex{});
    return from_matrix(std::move(mu), tol);
  }

  static SpinData from_matrix(ComplexMatrix mu, const Tolerances& tol = default_tolerances()) {
    for (std::size_t i = 0; i < mu.size(); ++i) {
      if (std::abs(mu(i, i)) > tol.triangular * std::max(1.0, mu.max_abs())) {
        throw DimensionMismatch("SpinData: diagonal entry " + std::to_string(i) + " is not zero");
      }
    }
    return SpinData{std::move(mu)};
  }
};

struct RuijPoint {
  ComplexVector h;
  ComplexVector u;
  Complex kappa = 0.0;

  std::size_t size() const { return h.size(); }
};

enum class Denominator {
  Rational,       // (h_i - h_j)^2
  Trigonometric,  // 4 sin^2((q_i - q_j) / 2), compact real form
};

namespace detail {

inline Complex denominator(const CMPoint& pt, std::size_t i, std::size_t j, Denominator kind) {
  const Complex d = pt.q[i] - pt.q[j];
  const Complex den = kind == Denominator::Rational ? d * d : 4.0 * std::sin(d / 2.0) * std::sin(d / 2.0);
  if (std::abs(den) < 1e-16) {
    throw SingularPoint("calogero: coincident positions " + std::to_string(i) + ", " + std::to_string(j));
  }
  return den;
}

inline Complex bilinear(std::span<const Complex> a) {
  Complex s = 0.0;
  for (const auto& v : a) s += v * v;
  return s;
}

inline void check_sizes(const CMPoint& pt) {
  if (pt.q.size() != pt.p.size()) throw DimensionMismatch("CMPoint: p and q sizes differ");
}

inline void check_regular(const RuijPoint& pt, const Tolerances& tol) {
  const std::size_t n = pt.size();
  if (pt.u.size() != n) throw DimensionMismatch("RuijPoint: h and u sizes differ");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (std::abs(pt.h[i] - pt.h[j]) < tol.regular_gap) throw SingularPoint("RuijPoint: coincident h");
      if (std::abs(pt.h[i] - pt.h[j] + pt.kappa) < tol.regular_gap) {
        throw SingularPoint("RuijPoint: h_i - h_j + kappa vanishes");
      }
    }
}

}  // namespace detail

/// <p,p> + sum_{i<j} kappa^2 / (4 sin^2((q_i - q_j)/2)).
inline Complex h_cm(const CMPoint& pt) {
  detail::check_sizes(pt);
  Complex h = detail::bilinear(pt.p);
  for (std::size_t i = 0; i < pt.size(); ++i)
    for (std::size_t j = i + 1; j < pt.size(); ++j)
      h += pt.kappa * pt.kappa / detail::denominator(pt, i, j, Denominator::Trigonometric);
  return h;
}

/// Rational analogue <p,p> + sum_{i<j} kappa^2 / (h_i - h_j)^2.
inline Complex h_cm_rational(const CMPoint& pt) {
  detail::check_sizes(pt);
  Complex h = detail::bilinear(pt.p);
  for (std::size_t i = 0; i < pt.size(); ++i)
    for (std::size_t j = i + 1; j < pt.size(); ++j)
      h += pt.kappa * pt.kappa / detail::denominator(pt, i, j, Denominator::Rational);
  return h;
}

/// Spin Hamiltonian <p,p> + sum_{i<j} mu_ij mu_ji / D_ij.
inline Complex h_scm(const CMPoint& pt, const SpinData& spin, Denominator kind = Denominator::Rational) {
  detail::check_sizes(pt);
  if (spin.mu.size() != pt.size()) throw DimensionMismatch("h_scm: spin matrix size mismatch");
  Complex h = detail::bilinear(pt.p);
  for (std::size_t i = 0; i < pt.size(); ++i)
    for (std::size_t j = i + 1; j < pt.size(); ++j)
      h += spin.mu(i, j) * spin.mu(j, i) / detail::denominator(pt, i, j, kind);
  return h;
}

using MatrixGradient = std::function<ComplexMatrix(const ComplexMatrix&)>;

/// Gradient of F(X) = tr(X^2)/2 under the trace form.
inline MatrixGradient quadratic_casimir_gradient() {
  return [](const ComplexMatrix& x) { return x; };
}

/// Flow of a central function F on T*G: (X, g) -> (X, exp(t grad F(X)) g).
inline std::pair<ComplexMatrix, ComplexMatrix> cm_central_flow(const ComplexMatrix& x, const ComplexMatrix& g,
                                                               const MatrixGradient& grad_f, double t) {
  return {x, mat_exp(Complex{t, 0.0} * grad_f(x)) * g};
}

/// tr(a^i b^j) for 1 <= i, j <= max_power, row-major in (i, j).
inline ComplexVector pair_invariants(const ComplexMatrix& a, const ComplexMatrix& b, unsigned max_power = 3) {
  ComplexVector out;
  for (unsigned i = 1; i <= max_power; ++i) {
    const ComplexMatrix ai = matrix_power(a, i);
    for (unsigned j = 1; j <= max_power; ++j) out.push_back((ai * matrix_power(b, j)).trace());
  }
  return out;
}

// Rational Ruijsenaars: the Cauchy system for w_i = phi_i psi_i ------------------

/// Cauchy-type matrix C_ji = 1 / (h_i - h_j + kappa).
inline ComplexMatrix cauchy_matrix(std::span<const Complex> h, Complex kappa, const Tolerances& tol) {
  const std::size_t n = h.size();
  ComplexMatrix c(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const Complex den = h[i] - h[j] + kappa;
      if (std::abs(den) < tol.cauchy_denominator) throw SingularMatrix("cauchy_matrix: vanishing denominator");
      c(j, i) = 1.0 / den;
    }
  return c;
}

inline double cauchy_residual(std::span<const Complex> h, Complex kappa, std::span<const Complex> w,
                              const Tolerances& tol = default_tolerances()) {
  const ComplexVector r = cauchy_matrix(h, kappa, tol) * w;
  double m = 0.0;
  for (const auto& v : r) m = std::max(m, std::abs(v - 1.0));
  return m;
}

/// Solves sum_i w_i / (h_i - h_j + kappa) = 1 by a dense solve.
inline ComplexVector solve_phi_psi_oracle(std::span<const Complex> h, Complex kappa,
                                          const Tolerances& tol = default_tolerances()) {
  const ComplexMatrix c = cauchy_matrix(h, kappa, tol);
  const ComplexVector ones(h.size(), Complex{1.0, 0.0});
  ComplexVector w;
  try {
    w = solve(c, ones);
  } catch (const SingularMatrix&) {
    throw SingularMatrix("solve_phi_psi_oracle: singular Cauchy matrix");
  }
  if (cauchy_residual(h, kappa, w, tol) > tol.cauchy_residual * std::max(1.0, c.max_abs())) {
    throw SingularMatrix("solve_phi_psi_oracle: residual above tolerance (ill-conditioned Cauchy matrix)");
  }
  return w;
}

enum class Normalization { Printed, KappaCorrected };

inline const char* to_string(Normalization n) {
  return n == Normalization::Printed ? "printed" : "kappa-corrected";
}

struct ClosedFormSelection {
  ComplexVector values;
  Normalization selected = Normalization::KappaCorrected;
  double printed_residual = 0.0;
  double corrected_residual = 0.0;
  bool within_match_tolerance = false;
};

inline double relative_vector_residual(std::span<const Complex> a, std::span<const Complex> b) {
  double scale = 1.0;
  for (const auto& v : b) scale = std::max(scale, std::abs(v));
  return max_abs_diff(a, b) / scale;
}

/// Evaluates prod_{j!=i} (h_i - h_j + kappa)/(h_i - h_j) and its kappa-scaled
/// variant, and keeps the one that solves the Cauchy system.
inline ClosedFormSelection phi_psi_closed_form(std::span<const Complex> h, Complex kappa,
                                               const Tolerances& tol = default_tolerances()) {
  const std::size_t n = h.size();
  ComplexVector printed(n), corrected(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex prod = 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) prod *= (h[i] - h[j] + kappa) / (h[i] - h[j]);
    printed[i] = prod;
    corrected[i] = kappa * prod;
  }
  const ComplexVector oracle = solve_phi_psi_oracle(h, kappa, tol);
  ClosedFormSelection sel;
  sel.printed_residual = relative_vector_residual(printed, oracle);
  sel.corrected_residual = relative_vector_residual(corrected, oracle);
  const bool corrected_wins = sel.corrected_residual <= sel.printed_residual;
  sel.selected = corrected_wins ? Normalization::KappaCorrected : Normalization::Printed;
  sel.values = corrected_wins ? corrected : printed;
  const double best = std::min(sel.printed_residual, sel.corrected_residual);
  if (best > tol.closed_form_reject) {
    throw FormulaMismatch("phi_psi_closed_form: no normalization matches the oracle (printed residual " +
                          std::to_string(sel.printed_residual) + ", corrected residual " +
                          std::to_string(sel.corrected_residual) + ")");
  }
  sel.within_match_tolerance = best <= tol.closed_form_match;
  return sel;
}

// Reconstruction of g and the characters -----------------------------------------

inline ComplexVector g_diagonal(const RuijPoint& pt) {
  const std::size_t n = pt.size();
  ComplexVector d(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex v = pt.u[i];
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) v *= (pt.h[i] - pt.h[j] + pt.kappa) / (pt.h[i] - pt.h[j]);
    d[i] = v;
  }
  return d;
}

/// g_ii = u_i prod_{j!=i} (h_i - h_j + kappa)/(h_i - h_j),
/// g_ij = kappa g_jj / (h_i - h_j + kappa).
inline ComplexMatrix reconstruct_g(const RuijPoint& pt, const Tolerances& tol = default_tolerances()) {
  detail::check_regular(pt, tol);
  const std::size_t n = pt.size();
  const ComplexVector d = g_diagonal(pt);
  ComplexMatrix g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g(i, j) = i == j ? d[i] : pt.kappa * d[j] / (pt.h[i] - pt.h[j] + pt.kappa);
  return g;
}

/// mu = phi psi^T - kappa 1 with phi = 1 and psi = w.
inline ComplexMatrix rank_one_moment(std::span<const Complex> w, Complex kappa) {
  const std::size_t n = w.size();
  ComplexMatrix mu(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) mu(i, j) = w[j] - (i == j ? kappa : Complex{});
  return mu;
}

/// max |(h_i - h_j) g_ij - sum_k mu_ik g_kj| / max(1, |g|) with mu built from the oracle w.
inline double relation_residual(const RuijPoint& pt, const Tolerances& tol = default_tolerances()) {
  const ComplexMatrix g = reconstruct_g(pt, tol);
  const ComplexMatrix mu = rank_one_moment(solve_phi_psi_oracle(pt.h, pt.kappa, tol), pt.kappa);
  const ComplexMatrix mg = mu * g;
  double m = 0.0;
  for (std::size_t i = 0; i < pt.size(); ++i)
    for (std::size_t j = 0; j < pt.size(); ++j) m = std::max(m, std::abs((pt.h[i] - pt.h[j]) * g(i, j) - mg(i, j)));
  return m / std::max(1.0, g.max_abs());
}

struct CharacterPaths {
  ComplexVector reduced;  // tr g, tr g^2 from the reduced formulas
  ComplexVector matrix;   // tr g^k, k = 1..kmax, from the reconstructed matrix
  double residual = 0.0;  // relative disagreement on the reduced entries
};

inline double relative_scalar_residual(Complex a, Complex b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

/// tr g and tr g^2 with the (h_i - h_j + kappa) factors cancelled by hand, so
/// only coincident h is singular. g_ij g_ji = kappa^2 u_i u_j / (h_ij h_ji)
/// times the diagonal products with j (resp. i) left out.
inline std::array<Complex, 2> ruij_traces_regular(const RuijPoint& pt, const Tolerances& tol = default_tolerances()) {
  const std::size_t n = pt.size();
  if (pt.u.size() != n) throw DimensionMismatch("RuijPoint: h and u sizes differ");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(pt.h[i] - pt.h[j]) < tol.regular_gap) throw SingularPoint("RuijPoint: coincident h");
  const auto partial = [&](std::size_t i, std::size_t skip) {
    Complex v = 1.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i && k != skip) v *= (pt.h[i] - pt.h[k] + pt.kappa) / (pt.h[i] - pt.h[k]);
    return v;
  };
  Complex tr1 = 0.0, tr2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Complex d = pt.u[i] * partial(i, n);
    tr1 += d;
    tr2 += d * d;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Complex hij = pt.h[i] - pt.h[j];
      tr2 += -pt.kappa * pt.kappa * pt.u[i] * pt.u[j] / (hij * hij) * partial(i, j) * partial(j, i);
    }
  }
  return {tr1, tr2};
}

inline CharacterPaths ruij_characters(const RuijPoint& pt, unsigned kmax = 2,
                                      const Tolerances& tol = default_tolerances()) {
  const ComplexMatrix g = reconstruct_g(pt, tol);
  const std::size_t n = pt.size();
  const ComplexVector d = g.diag();
  CharacterPaths out;
  Complex tr1 = 0.0, tr2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) tr1 += d[i];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const Complex hij = pt.h[i] - pt.h[j];
      tr2 += pt.kappa * pt.kappa * d[i] * d[j] / ((hij + pt.kappa) * (-hij + pt.kappa));
    }
  out.reduced = {tr1, tr2};
  out.matrix = traces_of_powers(g, std::max(kmax, 1u));
  for (std::size_t k = 0; k < std::min<std::size_t>(2, out.matrix.size()); ++k)
    out.residual = std::max(out.residual, relative_scalar_residual(out.reduced[k], out.matrix[k]));
  if (out.residual > tol.dual_path_fail) {
    throw ConsistencyError("ruij_characters: reduced and matrix traces disagree (" + std::to_string(out.residual) +
                           ")");
  }
  return out;
}

struct HamiltonianPaths {
  Complex via_traces;    // (tr g^2 - (tr g)^2) / 2
  Complex via_products;  // -sum_{i<j} u_i u_j prod (h_a - h_b + kappa)/(h_a - h_b)
  double residual = 0.0;
};

inline HamiltonianPaths h_rational_ruijsenaars_paths(const RuijPoint& pt,
                                                     const Tolerances& tol = default_tolerances()) {
  const ComplexMatrix g = reconstruct_g(pt, tol);
  const ComplexVector tr = traces_of_powers(g, 2);
  HamiltonianPaths out;
  out.via_traces = 0.5 * (tr[1] - tr[0] * tr[0]);
  const std::size_t n = pt.size();
  Complex sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      Complex term = pt.u[i] * pt.u[j];
      for (std::size_t a : {i, j})
        for (std::size_t b = 0; b < n; ++b) {
          if (b == i || b == j) continue;
          term *= (pt.h[a] - pt.h[b] + pt.kappa) / (pt.h[a] - pt.h[b]);
        }
      sum += term;
    }
  out.via_products = -sum;
  out.residual = relative_scalar_residual(out.via_products, out.via_traces);
  return out;
}

inline Complex h_rational_ruijsenaars(const RuijPoint& pt, const Tolerances& tol = default_tolerances()) {
  const HamiltonianPaths paths = h_rational_ruijsenaars_paths(pt, tol);
  if (paths.residual > tol.dual_path_fail) {
    throw ConsistencyError("h_rational_ruijsenaars: trace and product evaluations disagree");
  }
  return paths.via_traces;
}

// Duality of fibers ---------------------------------------------------------------

/// tr(a^i b^j a^k b^l) for all exponents in {0, 1, 2}.
inline ComplexVector word_invariants(const ComplexMatrix& a, const ComplexMatrix& b) {
  const ComplexMatrix id = ComplexMatrix::identity(a.size());
  const ComplexMatrix ap[3] = {id, a, a * a};
  const ComplexMatrix bp[3] = {id, b, b * b};
  ComplexVector out;
  out.reserve(81);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const ComplexMatrix ab = ap[i] * bp[j];
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) out.push_back((ab * ap[k] * bp[l]).trace());
    }
  return out;
}

/// Largest difference of any word invariant between two pairs.
inline double separation_margin(const ComplexMatrix& a1, const ComplexMatrix& b1, const ComplexMatrix& a2,
                                const ComplexMatrix& b2) {
  return max_abs_diff(word_invariants(a1, b1), word_invariants(a2, b2));
}

struct FiberReport {
  std::vector<double> margins;  // one per compared pair
  double min_margin = 0.0;
  std::size_t pairs = 0;
  std::size_t inconclusive = 0;  // pairs with margin below the separation threshold
  std::size_t coincident = 0;    // pairs made of the base point itself

  bool separated() const { return inconclusive == 0; }
};

/// Compares F = {(x, gamma z) : z in Z_x} with F~ = {(x + c, gamma) : c in C_gamma}.
/// Pairs with z = 1 and c = 0 are the intersection point and are counted as
/// coincident rather than inconclusive.
inline FiberReport duality_fiber_check(const ComplexMatrix& x, const ComplexMatrix& gamma,
                                       std::span<const ComplexMatrix> torus, std::span<const ComplexMatrix> shifts,
                                       const Tolerances& tol = default_tolerances()) {
  FiberReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  const ComplexMatrix id = ComplexMatrix::identity(x.size());
  for (const auto& z : torus) {
    if (max_abs_diff(commutator(z, x), ComplexMatrix(x.size())) > 1e-9 * std::max(1.0, x.max_abs() * z.max_abs())) {
      throw DimensionMismatch("duality_fiber_check: torus element does not commute with x");
    }
    for (const auto& c : shifts) {
      const ComplexMatrix gz = gamma * z;
      const ComplexMatrix xc = x + c;
      const double m = separation_margin(x, gz, xc, gamma);
      ++rep.pairs;
      rep.margins.push_back(m);
      const bool base = max_abs_diff(z, id) == 0.0 && c.max_abs() == 0.0;
      if (base) {
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

}  // namespace degint::calogero
