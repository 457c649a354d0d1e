#pragma once

// Seeded verification of antisymmetry, Leibniz rule and Jacobi identity over
// the registered charts. Test observables are random quadratic polynomials
// with exact gradients, so only the outer derivative of a bracket is taken
// by finite differences.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "degint/matrix.hpp"
#include "degint/poisson.hpp"
#include "degint/random.hpp"
#include "degint/tolerances.hpp"

namespace degint {

struct RegisteredChart {
  PoissonChart chart;
  std::function<ComplexVector(Sampler&)> sample_point;
};

inline std::vector<RegisteredChart> registered_charts() {
  std::vector<RegisteredChart> out;
  out.push_back({chart_canonical(3), [](Sampler& s) {
                   ComplexVector x(6);
                   for (auto& e : x) e = s.uniform(-2.0, 2.0);
                   return x;
                 }});
  for (auto kind : {LogLinearChart::MomentumPosition, LogLinearChart::PositionShift}) {
    out.push_back({chart_cm_loglinear(3, kind), [](Sampler& s) {
                     ComplexVector x(6);
                     for (std::size_t i = 0; i < 3; ++i) x[i] = s.uniform(-2.0, 2.0);
                     for (std::size_t i = 3; i < 6; ++i) x[i] = s.uniform(0.5, 2.0);
                     return x;
                   }});
  }
  out.push_back({chart_relativistic_loglinear(3), [](Sampler& s) {
                   ComplexVector x(6);
                   for (auto& e : x) e = s.uniform(0.5, 2.0);
                   return x;
                 }});
  out.push_back({chart_heisenberg_double(2), [](Sampler& s) {
                   ComplexVector x;
                   append_matrix(x, s.random_sl(2));
                   append_matrix(x, s.random_sl(2));
                   return x;
                 }});
  for (std::size_t n : {2u, 3u}) {
    PoissonChart c = chart_sklyanin(n);
    c.name += "(n=" + std::to_string(n) + ")";
    out.push_back({std::move(c), [n](Sampler& s) {
                     ComplexVector x;
                     append_matrix(x, s.random_sl(n));
                     return x;
                   }});
  }
  return out;
}

/// c + sum_i a_i x_i + sum_{k} b_k x_{i_k} x_{j_k} with a few random terms.
inline Observable random_quadratic(std::size_t dim, Sampler& s, std::string name) {
  struct Term {
    std::size_t i, j;
    double b;
  };
  ComplexVector a(dim);
  for (auto& e : a) e = s.uniform(-1.0, 1.0);
  std::vector<Term> terms;
  for (int k = 0; k < 4; ++k) {
    const auto i = static_cast<std::size_t>(s.unit() * static_cast<double>(dim));
    const auto j = static_cast<std::size_t>(s.unit() * static_cast<double>(dim));
    terms.push_back({i, j, s.uniform(-1.0, 1.0)});
  }
  return Observable{std::move(name),
                    [a, terms](PointView x) {
                      Complex v = 0.0;
                      for (std::size_t i = 0; i < a.size(); ++i) v += a[i] * x[i];
                      for (const auto& t : terms) v += t.b * x[t.i] * x[t.j];
                      return v;
                    },
                    [a, terms](PointView x) {
                      ComplexVector g = a;
                      for (const auto& t : terms) {
                        g[t.i] += t.b * x[t.j];
                        g[t.j] += t.b * x[t.i];
                      }
                      return g;
                    }};
}

struct ChartDefects {
  std::string chart;
  std::size_t points = 0;
  double antisymmetry = 0.0;
  double leibniz = 0.0;
  double jacobi = 0.0;

  bool within(const Tolerances& tol) const {
    return antisymmetry <= tol.antisymmetry && leibniz <= tol.leibniz && jacobi <= tol.jacobi;
  }
};

/// Worst defects of one chart over `points` seeded points; sample k uses seed + k.
inline ChartDefects verify_chart(const RegisteredChart& rc, std::uint64_t seed, std::size_t points) {
  ChartDefects d{rc.chart.name, points};
  for (std::size_t k = 0; k < points; ++k) {
    Sampler s(seed + k);
    const ComplexVector x = rc.sample_point(s);
    const Observable f = random_quadratic(rc.chart.dim, s, "f");
    const Observable g = random_quadratic(rc.chart.dim, s, "g");
    const Observable h = random_quadratic(rc.chart.dim, s, "h");
    d.antisymmetry = std::max(d.antisymmetry, antisymmetry_defect(rc.chart, x));
    d.leibniz = std::max(d.leibniz, std::abs(leibniz_defect(rc.chart, f, g, h, x)));
    d.jacobi = std::max(d.jacobi, std::abs(jacobi_defect(rc.chart, f, g, h, x)));
  }
  return d;
}

}  // namespace degint
