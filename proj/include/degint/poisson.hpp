#pragma once

// Chart-based Poisson engine. A chart carries a bivector field Pi(x); every
// bracket is {f, g}(x) = grad f(x)^T Pi(x) grad g(x).
//
// Sign convention: on the canonical chart {p_i, q_j} = +delta_ij. With
// M = p x q this reproduces {M_i, M_j} = eps_ijk M_k. Hamiltonian vector
// fields are X_H = Pi grad H, so that d/dt f = {f, H}; for H = p^2/2 this
// gives qdot = -p.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "degint/errors.hpp"
#include "degint/matrix.hpp"
#include "degint/tolerances.hpp"

namespace degint {

using PointView = std::span<const Complex>;
using BivectorField = std::function<ComplexMatrix(PointView)>;

struct PoissonChart {
  std::string name;
  std::size_t dim = 0;
  std::vector<std::string> coord_labels;
  BivectorField bivector;

  void check_point(PointView x) const {
    if (x.size() != dim) {
      throw DimensionMismatch("chart " + name + ": point has " + std::to_string(x.size()) + " coordinates, expected " +
                              std::to_string(dim));
    }
  }

  ComplexMatrix operator()(PointView x) const {
    check_point(x);
    ComplexMatrix pi = bivector(x);
#ifndef NDEBUG
    const double skew = (pi + pi.transpose()).max_abs();
    if (skew > default_tolerances().antisymmetry * std::max(1.0, pi.max_abs())) {
      throw ConsistencyError("chart " + name + ": bivector is not antisymmetric");
    }
#endif
    return pi;
  }
};

struct Observable {
  std::string name;
  std::function<Complex(PointView)> eval;
  std::function<ComplexVector(PointView)> grad;  // optional exact gradient

  Complex operator()(PointView x) const { return eval(x); }
  bool has_exact_gradient() const { return static_cast<bool>(grad); }
};

/// Central finite-difference gradient along the real coordinate axes. For
/// holomorphic observables this is the complex derivative.
inline ComplexVector fd_gradient(const std::function<Complex(PointView)>& f, PointView x, double step) {
  ComplexVector work(x.begin(), x.end());
  ComplexVector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Complex saved = work[i];
    work[i] = saved + step;
    const Complex fp = f(work);
    work[i] = saved - step;
    const Complex fm = f(work);
    work[i] = saved;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

inline ComplexVector gradient(const Observable& f, PointView x, double step = default_tolerances().fd_step) {
  if (f.grad) return f.grad(x);
  return fd_gradient(f.eval, x, step);
}

inline Complex contract(const ComplexVector& a, const ComplexMatrix& pi, const ComplexVector& b) {
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == Complex{}) continue;
    Complex row = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) row += pi(i, j) * b[j];
    s += a[i] * row;
  }
  return s;
}

inline Complex bracket(const PoissonChart& chart, const Observable& f, const Observable& g, PointView x,
                       double step = default_tolerances().fd_step) {
  chart.check_point(x);
  return contract(gradient(f, x, step), chart(x), gradient(g, x, step));
}

inline ComplexVector ham_vector_field(const PoissonChart& chart, const Observable& h, PointView x,
                                      double step = default_tolerances().fd_step) {
  chart.check_point(x);
  return chart(x) * std::span<const Complex>(gradient(h, x, step));
}

// Observable algebra ---------------------------------------------------------

inline Observable coordinate(const PoissonChart& chart, std::size_t i) {
  const std::size_t dim = chart.dim;
  std::string label = i < chart.coord_labels.size() ? chart.coord_labels[i] : "x" + std::to_string(i);
  return Observable{std::move(label), [i](PointView x) { return x[i]; },
                    [i, dim](PointView) {
                      ComplexVector g(dim);
                      g[i] = 1.0;
                      return g;
                    }};
}

inline Observable constant_observable(Complex c, std::size_t dim) {
  return Observable{"const", [c](PointView) { return c; }, [dim](PointView) { return ComplexVector(dim); }};
}

inline Observable product(const Observable& f, const Observable& g) {
  Observable out{f.name + "*" + g.name, [f, g](PointView x) { return f(x) * g(x); }, {}};
  if (f.grad && g.grad) {
    out.grad = [f, g](PointView x) {
      ComplexVector gf = f.grad(x), gg = g.grad(x);
      const Complex fv = f(x), gv = g(x);
      for (std::size_t i = 0; i < gf.size(); ++i) gf[i] = gf[i] * gv + fv * gg[i];
      return gf;
    };
  }
  return out;
}

/// {f, g} as an observable (no exact gradient; differentiated by finite differences).
inline Observable bracket_observable(const PoissonChart& chart, const Observable& f, const Observable& g,
                                     double step = default_tolerances().fd_step) {
  return Observable{"{" + f.name + "," + g.name + "}",
                    [chart, f, g, step](PointView x) { return bracket(chart, f, g, x, step); }, {}};
}

inline Complex jacobi_defect(const PoissonChart& chart, const Observable& f, const Observable& g, const Observable& h,
                             PointView x, double step = default_tolerances().fd_step) {
  return bracket(chart, f, bracket_observable(chart, g, h, step), x, step) +
         bracket(chart, g, bracket_observable(chart, h, f, step), x, step) +
         bracket(chart, h, bracket_observable(chart, f, g, step), x, step);
}

/// {f, g h} - {f, g} h - g {f, h}
inline Complex leibniz_defect(const PoissonChart& chart, const Observable& f, const Observable& g, const Observable& h,
                              PointView x, double step = default_tolerances().fd_step) {
  return bracket(chart, f, product(g, h), x, step) - bracket(chart, f, g, x, step) * h(x) -
         g(x) * bracket(chart, f, h, x, step);
}

inline double antisymmetry_defect(const PoissonChart& chart, PointView x) {
  chart.check_point(x);
  const ComplexMatrix pi = chart.bivector(x);
  return (pi + pi.transpose()).max_abs();
}

// Charts -------------------------------------------------------------------

/// Coordinates (p_1..p_n, q_1..q_n) with {p_i, q_j} = delta_ij.
inline PoissonChart chart_canonical(std::size_t n) {
  std::vector<std::string> labels;
  for (std::size_t i = 1; i <= n; ++i) labels.push_back("p" + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) labels.push_back("q" + std::to_string(i));
  ComplexMatrix pi(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    pi(i, n + i) = 1.0;
    pi(n + i, i) = -1.0;
  }
  return PoissonChart{"canonical", 2 * n, std::move(labels), [pi](PointView) { return pi; }};
}

enum class LogLinearChart {
  MomentumPosition,  // (p, h):  {p_i, h_j} = delta_ij h_j, so {p_i, h_alpha} = alpha_i h_alpha
  PositionShift,     // (h, u):  {h_i, u_j} = delta_ij u_j
};

inline PoissonChart chart_cm_loglinear(std::size_t n, LogLinearChart kind = LogLinearChart::PositionShift) {
  std::vector<std::string> labels;
  const bool mp = kind == LogLinearChart::MomentumPosition;
  for (std::size_t i = 1; i <= n; ++i) labels.push_back((mp ? "p" : "h") + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) labels.push_back((mp ? "h" : "u") + std::to_string(i));
  return PoissonChart{mp ? "cm-loglinear(p,h)" : "cm-loglinear(h,u)", 2 * n, std::move(labels), [n](PointView x) {
                        ComplexMatrix pi(2 * n);
                        for (std::size_t i = 0; i < n; ++i) {
                          pi(i, n + i) = x[n + i];
                          pi(n + i, i) = -x[n + i];
                        }
                        return pi;
                      }};
}

/// Coordinates (x, u) with {x_i, u_j} = delta_ij x_i u_j.
inline PoissonChart chart_relativistic_loglinear(std::size_t n) {
  std::vector<std::string> labels;
  for (std::size_t i = 1; i <= n; ++i) labels.push_back("x" + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) labels.push_back("u" + std::to_string(i));
  return PoissonChart{"relativistic-loglinear", 2 * n, std::move(labels), [n](PointView x) {
                        ComplexMatrix pi(2 * n);
                        for (std::size_t i = 0; i < 2 * n; ++i) {
                          if (std::abs(x[i]) < 1e-12) {
                            throw SingularChart("relativistic-loglinear: coordinate " + std::to_string(i) +
                                                " is zero");
                          }
                        }
                        for (std::size_t i = 0; i < n; ++i) {
                          pi(i, n + i) = x[i] * x[n + i];
                          pi(n + i, i) = -x[i] * x[n + i];
                        }
                        return pi;
                      }};
}

/// Standard r-matrix of sl_n in the defining representation:
///   r = sum_{i<j} E_ij (x) E_ji + 1/2 (sum_i E_ii (x) E_ii - 1/n 1 (x) 1).
inline ComplexMatrix standard_r(std::size_t n) {
  if (n < 2) throw DimensionMismatch("standard_r: n must be >= 2");
  ComplexMatrix r(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) r += kron(ComplexMatrix::unit(n, i, j), ComplexMatrix::unit(n, j, i));
  for (std::size_t i = 0; i < n; ++i) r += 0.5 * kron(ComplexMatrix::unit(n, i, i), ComplexMatrix::unit(n, i, i));
  r -= (0.5 / static_cast<double>(n)) * ComplexMatrix::identity(n * n);
  return r;
}

/// Copies a tensor bracket T = {a_1, b_2} (n^2 x n^2, T((i,k),(j,l)) = {a_ij, b_kl})
/// into the block of pi starting at (row_offset, col_offset).
inline void scatter_tensor_bracket(const ComplexMatrix& t, std::size_t n, ComplexMatrix& pi, std::size_t row_offset,
                                   std::size_t col_offset) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t l = 0; l < n; ++l) pi(row_offset + i * n + j, col_offset + k * n + l) = t(i * n + k, j * n + l);
}

/// Reads an n x n matrix from a flattened row-major block of a point.
inline ComplexMatrix matrix_block(PointView x, std::size_t offset, std::size_t n) {
  if (x.size() < offset + n * n) throw DimensionMismatch("matrix_block: point too short");
  return ComplexMatrix(n, std::vector<Complex>(x.begin() + static_cast<std::ptrdiff_t>(offset),
                                               x.begin() + static_cast<std::ptrdiff_t>(offset + n * n)));
}

inline void append_matrix(ComplexVector& out, const ComplexMatrix& m) {
  out.insert(out.end(), m.entries().begin(), m.entries().end());
}

inline std::vector<std::string> matrix_labels(const std::string& symbol, std::size_t n) {
  std::vector<std::string> labels;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= n; ++j) labels.push_back(symbol + std::to_string(i) + std::to_string(j));
  return labels;
}

/// Heisenberg double G x G, coordinates (x_11 .. x_nn, y_11 .. y_nn):
///   {x1,x2} = r12 x1 x2 - x1 x2 r21 + x1 r21 x2 - x2 r12 x1
///   {x1,y2} = -r21 x1 y2 - x1 y2 r21 + x1 r21 y2 - y2 r12 x1
///   {y1,y2} = r12 y1 y2 - y1 y2 r21 + y1 r21 y2 - y2 r12 y1
inline PoissonChart chart_heisenberg_double(std::size_t n) {
  const ComplexMatrix r12 = standard_r(n);
  const ComplexMatrix flip = flip_operator(n);
  const ComplexMatrix r21 = flip * r12 * flip;
  const ComplexMatrix id = ComplexMatrix::identity(n);
  std::vector<std::string> labels = matrix_labels("x", n);
  for (auto& l : matrix_labels("y", n)) labels.push_back(l);
  const std::size_t nn = n * n;
  return PoissonChart{"heisenberg-double", 2 * nn, std::move(labels), [=](PointView z) {
                        const ComplexMatrix x = matrix_block(z, 0, n);
                        const ComplexMatrix y = matrix_block(z, nn, n);
                        const ComplexMatrix x1 = kron(x, id), x2 = kron(id, x);
                        const ComplexMatrix y1 = kron(y, id), y2 = kron(id, y);
                        const ComplexMatrix xx = r12 * x1 * x2 - x1 * x2 * r21 + x1 * r21 * x2 - x2 * r12 * x1;
                        const ComplexMatrix xy = -(r21 * x1 * y2) - x1 * y2 * r21 + x1 * r21 * y2 - y2 * r12 * x1;
                        const ComplexMatrix yy = r12 * y1 * y2 - y1 * y2 * r21 + y1 * r21 * y2 - y2 * r12 * y1;
                        ComplexMatrix pi(2 * nn);
                        scatter_tensor_bracket(xx, n, pi, 0, 0);
                        scatter_tensor_bracket(xy, n, pi, 0, nn);
                        scatter_tensor_bracket(yy, n, pi, nn, nn);
                        for (std::size_t a = 0; a < nn; ++a)
                          for (std::size_t b = 0; b < nn; ++b) pi(nn + b, a) = -pi(a, nn + b);
                        return pi;
                      }};
}

/// eta(x) = Ad_x(r) - r as an element of End(V (x) V).
inline ComplexMatrix sklyanin_eta(const ComplexMatrix& x, const ComplexMatrix& r) {
  const ComplexMatrix xx = kron(x, x);
  return xx * r * inverse(xx) - r;
}

/// Standard Poisson-Lie structure on GL_n/SL_n, coordinates x_11 .. x_nn.
/// eta(x) is transported by right translation, {x1, x2} = eta(x) x1 x2,
/// which equals x1 x2 r - r x1 x2.
inline PoissonChart chart_sklyanin(std::size_t n) {
  const ComplexMatrix r = standard_r(n);
  return PoissonChart{"sklyanin", n * n, matrix_labels("x", n), [=](PointView z) {
                        const ComplexMatrix x = matrix_block(z, 0, n);
                        const ComplexMatrix xx = kron(x, x);
                        const ComplexMatrix t = xx * r - r * xx;
                        ComplexMatrix pi(n * n);
                        scatter_tensor_bracket(t, n, pi, 0, 0);
                        return pi;
                      }};
}

// Matrix-valued observables on matrix charts ---------------------------------

/// tr(m^k) where m is the n x n block at `offset`; exact gradient
/// d tr(m^k) / d m_ij = k (m^{k-1})_ji.
inline Observable trace_power_observable(std::size_t dim, std::size_t offset, std::size_t n, unsigned k,
                                         std::string name) {
  return Observable{std::move(name),
                    [=](PointView z) { return matrix_power(matrix_block(z, offset, n), k).trace(); },
                    [=](PointView z) {
                      ComplexVector g(dim);
                      if (k == 0) return g;
                      const ComplexMatrix m = matrix_power(matrix_block(z, offset, n), k - 1);
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < n; ++j) g[offset + i * n + j] = static_cast<double>(k) * m(j, i);
                      return g;
                    }};
}

inline Observable determinant_observable(std::size_t offset, std::size_t n, std::string name) {
  return Observable{std::move(name), [=](PointView z) { return determinant(matrix_block(z, offset, n)); }, {}};
}

}  // namespace degint
