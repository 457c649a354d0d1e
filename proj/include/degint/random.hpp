#pragma once

// Seeded sampling of test points. Uniform variates are built directly from
// the 64-bit engine output so that draws are identical across standard
// library implementations.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "degint/matrix.hpp"

namespace degint {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  Complex complex_uniform(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi)}; }

  /// Approximately standard normal (sum of twelve uniforms).
  double gaussian() {
    double s = -6.0;
    for (int i = 0; i < 12; ++i) s += unit();
    return s;
  }

  ComplexMatrix random_matrix(std::size_t n, double scale, bool complex_entries = false) {
    ComplexMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        m(i, j) = complex_entries ? scale * complex_uniform(-1.0, 1.0) : Complex{scale * uniform(-1.0, 1.0), 0.0};
    return m;
  }

  /// exp of a random traceless matrix of size `eps`: an SL_n element near 1.
  ComplexMatrix near_identity_sl(std::size_t n, double eps, bool complex_entries = false) {
    return mat_exp(traceless(random_matrix(n, eps, complex_entries)));
  }

  /// Random element of SL_n with entries of order one (rescaled by det^{1/n}).
  ComplexMatrix random_sl(std::size_t n, double spread = 0.6) {
    for (;;) {
      ComplexMatrix m = ComplexMatrix::identity(n) + random_matrix(n, spread);
      const Complex d = determinant(m);
      if (std::abs(d) < 0.2) continue;
      return Complex{1.0, 0.0} / std::pow(d, 1.0 / static_cast<double>(n)) * m;
    }
  }

  /// Real values in [lo, hi] with pairwise gaps at least `min_gap`.
  ComplexVector distinct_reals(std::size_t n, double lo, double hi, double min_gap) {
    for (;;) {
      ComplexVector v(n);
      for (auto& e : v) e = uniform(lo, hi);
      bool ok = true;
      for (std::size_t i = 0; i < n && ok; ++i)
        for (std::size_t j = i + 1; j < n && ok; ++j) ok = std::abs(v[i] - v[j]) >= min_gap;
      if (ok) return v;
    }
  }

  /// Distinct reals shifted to sum zero.
  ComplexVector traceless_reals(std::size_t n, double lo, double hi, double min_gap) {
    ComplexVector v = distinct_reals(n, lo, hi, min_gap);
    Complex mean = 0.0;
    for (const auto& e : v) mean += e;
    mean /= static_cast<double>(n);
    for (auto& e : v) e -= mean;
    return v;
  }

  /// Positive values with pairwise ratios bounded away from 1 and product 1.
  ComplexVector unimodular_positive(std::size_t n, double log_spread, double min_log_gap) {
    ComplexVector logs = traceless_reals(n, -log_spread, log_spread, min_log_gap);
    for (auto& e : logs) e = std::exp(e.real());
    return logs;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace degint
