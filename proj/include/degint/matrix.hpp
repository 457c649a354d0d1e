#pragma once

// Small dense complex linear algebra. Group elements of GL_n/SL_n and Lie
// algebra elements are both realized as ComplexMatrix.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "degint/errors.hpp"
#include "degint/tolerances.hpp"

namespace degint {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

inline bool is_finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

class ComplexMatrix {
 public:
  ComplexMatrix() = default;

  explicit ComplexMatrix(std::size_t n) : n_(n), a_(n * n, Complex{0.0, 0.0}) {}

  ComplexMatrix(std::size_t n, std::vector<Complex> entries) : n_(n), a_(std::move(entries)) {
    if (a_.size() != n_ * n_) {
      throw DimensionMismatch("ComplexMatrix: expected " + std::to_string(n_ * n_) + " entries, got " +
                              std::to_string(a_.size()));
    }
    require_finite();
  }

  ComplexMatrix(std::initializer_list<std::initializer_list<Complex>> rows) : n_(rows.size()) {
    a_.reserve(n_ * n_);
    for (const auto& row : rows) {
      if (row.size() != n_) throw DimensionMismatch("ComplexMatrix: rows must form a square matrix");
      a_.insert(a_.end(), row.begin(), row.end());
    }
    require_finite();
  }

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static ComplexMatrix diagonal(std::span<const Complex> d) {
    ComplexMatrix m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    m.require_finite();
    return m;
  }

  /// Matrix unit E_ij.
  static ComplexMatrix unit(std::size_t n, std::size_t i, std::size_t j) {
    ComplexMatrix m(n);
    m(i, j) = 1.0;
    return m;
  }

  std::size_t size() const { return n_; }
  bool empty() const { return n_ == 0; }

  Complex& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

  std::span<const Complex> entries() const { return a_; }
  std::span<Complex> entries() { return a_; }

  ComplexVector diag() const {
    ComplexVector d(n_);
    for (std::size_t i = 0; i < n_; ++i) d[i] = (*this)(i, i);
    return d;
  }

  Complex trace() const {
    Complex t = 0.0;
    for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
    return t;
  }

  ComplexMatrix transpose() const {
    ComplexMatrix t(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& z : a_) m = std::max(m, std::abs(z));
    return m;
  }

  /// Induced 1-norm (max column sum).
  double norm1() const {
    double best = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n_; ++i) s += std::abs((*this)(i, j));
      best = std::max(best, s);
    }
    return best;
  }

  double frobenius() const {
    double s = 0.0;
    for (const auto& z : a_) s += std::norm(z);
    return std::sqrt(s);
  }

  bool all_finite() const {
    return std::all_of(a_.begin(), a_.end(), [](Complex z) { return is_finite(z); });
  }

  void require_finite() const {
    if (!all_finite()) throw NonFiniteValue("ComplexMatrix: non-finite entry");
  }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    check_same(o);
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
  }
  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    check_same(o);
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
    return *this;
  }
  ComplexMatrix& operator*=(Complex s) {
    for (auto& z : a_) z *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
  friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }
  friend ComplexMatrix operator-(ComplexMatrix a) { return a *= -1.0; }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    a.check_same(b);
    const std::size_t n = a.n_;
    ComplexMatrix c(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const Complex aik = a(i, k);
        if (aik == Complex{}) continue;
        for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  friend ComplexVector operator*(const ComplexMatrix& a, std::span<const Complex> v) {
    if (v.size() != a.n_) throw DimensionMismatch("matrix-vector product: size mismatch");
    ComplexVector out(a.n_, Complex{});
    for (std::size_t i = 0; i < a.n_; ++i)
      for (std::size_t j = 0; j < a.n_; ++j) out[i] += a(i, j) * v[j];
    return out;
  }

  friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

 private:
  void check_same(const ComplexMatrix& o) const {
    if (o.n_ != n_) {
      throw DimensionMismatch("ComplexMatrix: size " + std::to_string(n_) + " vs " + std::to_string(o.n_));
    }
  }

  std::size_t n_ = 0;
  std::vector<Complex> a_;
};

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) { return (a - b).max_abs(); }

inline double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
  if (a.size() != b.size()) throw DimensionMismatch("max_abs_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// ||a - b|| / max(1, ||b||) in the max-entry norm.
inline double relative_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  return max_abs_diff(a, b) / std::max(1.0, b.max_abs());
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) { return a * b - b * a; }

/// Removes the trace part: a - (tr a / n) 1.
inline ComplexMatrix traceless(const ComplexMatrix& a) {
  const Complex shift = a.trace() / static_cast<double>(a.size());
  ComplexMatrix out = a;
  for (std::size_t i = 0; i < a.size(); ++i) out(i, i) -= shift;
  return out;
}

inline ComplexMatrix matrix_power(const ComplexMatrix& a, unsigned k) {
  ComplexMatrix result = ComplexMatrix::identity(a.size());
  ComplexMatrix base = a;
  while (k > 0) {
    if (k & 1u) result = result * base;
    k >>= 1u;
    if (k > 0) base = base * base;
  }
  return result;
}

/// Kronecker product: kron(a, b)(i*n + k, j*n + l) = a(i, j) b(k, l).
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  const std::size_t n = a.size(), m = b.size();
  ComplexMatrix out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const Complex aij = a(i, j);
      if (aij == Complex{}) continue;
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t l = 0; l < m; ++l) out(i * m + k, j * m + l) = aij * b(k, l);
    }
  return out;
}

/// Tensor flip P on V (x) V, P(e_i (x) e_k) = e_k (x) e_i.
inline ComplexMatrix flip_operator(std::size_t n) {
  ComplexMatrix p(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) p(k * n + i, i * n + k) = 1.0;
  return p;
}

// ---------------------------------------------------------------------------
// LU with partial pivoting

struct LUFactors {
  ComplexMatrix lu;
  std::vector<std::size_t> perm;
  int sign = 1;
};

inline LUFactors lu_decompose(const ComplexMatrix& m) {
  const std::size_t n = m.size();
  LUFactors f{m, std::vector<std::size_t>(n), 1};
  std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
  const double scale = std::max(m.max_abs(), 1e-300);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(f.lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(f.lu(i, k)) > best) {
        best = std::abs(f.lu(i, k));
        p = i;
      }
    }
    if (best <= 1e-14 * scale) throw SingularMatrix("lu_decompose: matrix is singular to working precision");
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(p, j));
      std::swap(f.perm[k], f.perm[p]);
      f.sign = -f.sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      f.lu(i, k) /= f.lu(k, k);
      const Complex lik = f.lu(i, k);
      for (std::size_t j = k + 1; j < n; ++j) f.lu(i, j) -= lik * f.lu(k, j);
    }
  }
  return f;
}

inline ComplexVector lu_solve(const LUFactors& f, std::span<const Complex> b) {
  const std::size_t n = f.lu.size();
  if (b.size() != n) throw DimensionMismatch("lu_solve: right-hand side size mismatch");
  ComplexVector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex s = b[f.perm[i]];
    for (std::size_t j = 0; j < i; ++j) s -= f.lu(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    Complex s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= f.lu(i, j) * x[j];
    x[i] = s / f.lu(i, i);
  }
  return x;
}

inline ComplexVector solve(const ComplexMatrix& m, std::span<const Complex> b) { return lu_solve(lu_decompose(m), b); }

inline ComplexMatrix inverse(const ComplexMatrix& m) {
  const std::size_t n = m.size();
  const LUFactors f = lu_decompose(m);
  ComplexMatrix inv(n);
  ComplexVector e(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), Complex{});
    e[j] = 1.0;
    const ComplexVector col = lu_solve(f, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

inline Complex determinant(const ComplexMatrix& m) {
  LUFactors f;
  try {
    f = lu_decompose(m);
  } catch (const SingularMatrix&) {
    return 0.0;
  }
  Complex d = static_cast<double>(f.sign);
  for (std::size_t i = 0; i < m.size(); ++i) d *= f.lu(i, i);
  return d;
}

// ---------------------------------------------------------------------------
// Matrix exponential: scaling and squaring around a degree-13 Pade core.

inline ComplexMatrix mat_exp(const ComplexMatrix& a) {
  a.require_finite();
  const std::size_t n = a.size();
  constexpr double kTheta13 = 5.371920351148152;
  constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                          1187353796428800.0,  129060195264000.0,   10559470521600.0,
                          670442572800.0,      33522128640.0,       1323241920.0,
                          40840800.0,          960960.0,            16380.0,
                          182.0,               1.0};
  const double norm = a.norm1();
  if (norm == 0.0) return ComplexMatrix::identity(n);
  int s = 0;
  if (norm > kTheta13) s = static_cast<int>(std::ceil(std::log2(norm / kTheta13)));
  if (s > 1024) throw MatrixOverflow("mat_exp: norm too large to exponentiate");
  const ComplexMatrix as = a * Complex{std::ldexp(1.0, -s), 0.0};
  const ComplexMatrix id = ComplexMatrix::identity(n);
  const ComplexMatrix a2 = as * as;
  const ComplexMatrix a4 = a2 * a2;
  const ComplexMatrix a6 = a4 * a2;
  const ComplexMatrix u =
      as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  const ComplexMatrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  ComplexMatrix r = inverse(v - u) * (v + u);
  for (int k = 0; k < s; ++k) {
    r = r * r;
    if (!r.all_finite()) throw MatrixOverflow("mat_exp: overflow during squaring");
  }
  if (!r.all_finite()) throw MatrixOverflow("mat_exp: result is not finite");
  return r;
}

// ---------------------------------------------------------------------------
// Gauss-type UL splitting m = g_plus * g_minus^{-1} with reciprocal diagonals.

struct ULPair {
  ComplexMatrix g_plus;   // upper triangular
  ComplexMatrix g_minus;  // lower triangular
};

inline double lower_mass(const ComplexMatrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) s = std::max(s, std::abs(m(i, j)));
  return s;
}

inline double upper_mass(const ComplexMatrix& m) { return lower_mass(m.transpose()); }

/// Checks the ULPair invariants; returns an empty string when they hold.
inline std::string ul_pair_violation(const ULPair& p, const Tolerances& tol = default_tolerances()) {
  const double scale_plus = std::max(1.0, p.g_plus.max_abs());
  const double scale_minus = std::max(1.0, p.g_minus.max_abs());
  if (lower_mass(p.g_plus) > tol.triangular * scale_plus) return "g_plus is not upper triangular";
  if (upper_mass(p.g_minus) > tol.triangular * scale_minus) return "g_minus is not lower triangular";
  for (std::size_t i = 0; i < p.g_plus.size(); ++i) {
    if (std::abs(p.g_plus(i, i) * p.g_minus(i, i) - 1.0) > tol.ul_diagonal) {
      return "diag(g_plus) * diag(g_minus) != 1 at index " + std::to_string(i);
    }
  }
  return {};
}

/// Splits m = U D L (unit upper, diagonal, unit lower) and balances D with its
/// principal square root: g_plus = U d, g_minus = (d L)^{-1}.
inline ULPair ul_split_factorize(const ComplexMatrix& m, const Tolerances& tol = default_tolerances()) {
  m.require_finite();
  const std::size_t n = m.size();
  const double scale = m.max_abs();
  ComplexMatrix work = m;
  ComplexMatrix upper = ComplexMatrix::identity(n);
  ComplexMatrix lower = ComplexMatrix::identity(n);
  ComplexVector d(n);
  for (std::size_t k = n; k-- > 0;) {
    const Complex pivot = work(k, k);
    if (std::abs(pivot) < tol.ul_pivot * scale) {
      std::ostringstream msg;
      msg << "ul_split_factorize: trailing minor " << n - k << " vanishes (|pivot| = " << std::abs(pivot) << ")";
      throw FactorizationNotDefined(msg.str());
    }
    d[k] = pivot;
    for (std::size_t i = 0; i < k; ++i) upper(i, k) = work(i, k) / pivot;
    for (std::size_t j = 0; j < k; ++j) lower(k, j) = work(k, j) / pivot;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) work(i, j) -= upper(i, k) * pivot * lower(k, j);
  }
  ComplexVector root(n), inv_root(n);
  for (std::size_t i = 0; i < n; ++i) {
    root[i] = std::sqrt(d[i]);  // principal branch
    inv_root[i] = 1.0 / root[i];
  }
  ComplexMatrix g_plus = upper * ComplexMatrix::diagonal(root);
  // (d L)^{-1} = L^{-1} d^{-1}; L is unit lower triangular.
  ComplexMatrix lower_inv = ComplexMatrix::identity(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j + 1; i < n; ++i) {
      Complex s = 0.0;
      for (std::size_t k = j; k < i; ++k) s -= lower(i, k) * lower_inv(k, j);
      lower_inv(i, j) = s;
    }
  ComplexMatrix g_minus = lower_inv * ComplexMatrix::diagonal(inv_root);
  return ULPair{std::move(g_plus), std::move(g_minus)};
}

// ---------------------------------------------------------------------------
// Spectral decomposition for small generic (semisimple) matrices.

struct Spectrum {
  ComplexVector values;   // sorted lexicographically on (Re, Im)
  ComplexMatrix vectors;  // columns are eigenvectors
};

inline bool lex_less(Complex a, Complex b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

inline Spectrum spectral(const ComplexMatrix& m, const Tolerances& tol = default_tolerances()) {
  m.require_finite();
  const std::size_t n = m.size();
  Eigen::MatrixXcd em(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) em(i, j) = m(i, j);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(em, true);
  if (solver.info() != Eigen::Success) throw NearDegenerateSpectrum("spectral: eigen solver did not converge");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& ev = solver.eigenvalues();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lex_less(ev(a), ev(b)); });
  Spectrum s{ComplexVector(n), ComplexMatrix(n)};
  for (std::size_t k = 0; k < n; ++k) {
    s.values[k] = ev(order[k]);
    for (std::size_t i = 0; i < n; ++i) s.vectors(i, k) = solver.eigenvectors()(i, order[k]);
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      if (std::abs(s.values[a] - s.values[b]) < tol.eigen_gap) {
        throw NearDegenerateSpectrum("spectral: eigenvalue gap below threshold");
      }
    }
  return s;
}

/// Eigenvalues only, without the gap requirement (used for degenerate classes).
inline ComplexVector eigenvalues(const ComplexMatrix& m) {
  const std::size_t n = m.size();
  Eigen::MatrixXcd em(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) em(i, j) = m(i, j);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(em, false);
  ComplexVector out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = solver.eigenvalues()(k);
  std::sort(out.begin(), out.end(), lex_less);
  return out;
}

/// (tr m, tr m^2, ..., tr m^kmax) by repeated multiplication.
inline ComplexVector traces_of_powers(const ComplexMatrix& m, unsigned kmax) {
  if (kmax < 1) throw DimensionMismatch("traces_of_powers: kmax must be >= 1");
  ComplexVector out;
  out.reserve(kmax);
  ComplexMatrix p = m;
  for (unsigned k = 1; k <= kmax; ++k) {
    out.push_back(p.trace());
    if (k < kmax) p = p * m;
  }
  return out;
}

}  // namespace degint
