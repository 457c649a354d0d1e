#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "degint/facto.hpp"
#include "degint/random.hpp"

using namespace degint;
using namespace degint::facto;

namespace {

// tr x^2 on the row-major entries, with no analytic gradient.
Observable trace_square_entries(std::size_t n) {
  return Observable{"tr x^2 (custom)",
                    [n](PointView z) {
                      Complex s = 0.0;
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < n; ++j) s += z[i * n + j] * z[j * n + i];
                      return s;
                    },
                    {}};
}

}  // namespace

TEST(LeftDifferential, TraceOfDiagonal) {
  const ComplexMatrix x = ComplexMatrix::diagonal(ComplexVector{2.0, 0.5});
  const ComplexMatrix xi = left_differential(InvariantHamiltonian::trace_power(1), x);
  EXPECT_LE(max_abs_diff(xi, ComplexMatrix::diagonal(ComplexVector{0.75, -0.75})), 1e-15);
}

TEST(LeftDifferential, CustomMatchesAnalyticTracePower) {
  Sampler s(301);
  const ComplexMatrix x = s.near_identity_sl(3, 0.5, true);
  const ComplexMatrix fd = left_differential(InvariantHamiltonian::custom(trace_square_entries(3)), x);
  const ComplexMatrix exact = left_differential(InvariantHamiltonian::trace_power(2), x);
  EXPECT_LE(max_abs_diff(fd, exact), 1e-6);
  EXPECT_LE(max_abs_diff(exact, traceless(2.0 * x * x)), 1e-14);
}

TEST(LeftDifferential, ConstantHasZeroDifferential) {
  const ComplexMatrix x = ComplexMatrix{{1.0, 2.0}, {0.5, 2.0}};
  EXPECT_EQ(left_differential(InvariantHamiltonian::trace_power(0), x).max_abs(), 0.0);
  const InvariantHamiltonian c = InvariantHamiltonian::custom(constant_observable(3.0, 4));
  EXPECT_LE(left_differential(c, x).max_abs(), 1e-12);
}

TEST(LeftDifferential, CustomIsConjugationInvariant) {
  Sampler s(302);
  const InvariantHamiltonian h = InvariantHamiltonian::custom(trace_square_entries(3));
  for (int k = 0; k < 10; ++k) {
    const ComplexMatrix x = s.random_matrix(3, 1.0, true);
    EXPECT_LE(conjugation_invariance_defect(h, x, s.random_sl(3)), 1e-10);
  }
}

TEST(Flow, TimeZeroIsIdentity) {
  Sampler s(311);
  const ComplexMatrix x0 = s.near_identity_sl(3, 0.4, false);
  EXPECT_LE(max_abs_diff(factorization_flow(x0, InvariantHamiltonian::trace_power(2), 0.0), x0), 1e-14);
}

TEST(Flow, DiagonalInitialPointIsFixed) {
  const ComplexMatrix x0 = ComplexMatrix::diagonal(ComplexVector{2.0, 1.0, 0.5});
  for (unsigned k : {1u, 2u, 3u})
    EXPECT_LE(max_abs_diff(factorization_flow(x0, InvariantHamiltonian::trace_power(k), 0.7), x0), 1e-13);
}

TEST(Flow, InvariantsAndFactorsAgree) {
  Sampler s(312);
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 2 + k % 3;
    const ComplexMatrix x0 = s.near_identity_sl(n, 0.4, k % 2 == 1);
    const InvariantHamiltonian h = InvariantHamiltonian::trace_power(1 + k % 3);
    const FlowResult r = factorization_flow_detail(x0, h, 0.3);
    EXPECT_LE(r.plus_minus_residual, 1e-9);
    EXPECT_LE(max_abs_diff(traces_of_powers(r.x, static_cast<unsigned>(n)), traces_of_powers(x0, static_cast<unsigned>(n))),
              1e-10);
    EXPECT_LE(std::abs(determinant(r.x) - determinant(x0)), 1e-12);
    EXPECT_EQ(ul_pair_violation(r.factors), "");
  }
}

TEST(Flow, AgreesWithSklyaninRk4) {
  Sampler s(313);
  for (std::size_t n : {2u, 3u}) {
    const ComplexMatrix x0 = s.near_identity_sl(n, 0.3, false);
    for (unsigned k : {1u, 2u}) {
      const InvariantHamiltonian h = InvariantHamiltonian::trace_power(k);
      const ComplexMatrix exact = factorization_flow(x0, h, 0.5);
      const ComplexMatrix ref = sklyanin_rk4(x0, h, 0.5, 1e-3);
      EXPECT_LE(max_abs_diff(exact, ref), 1e-8) << "n=" << n << " k=" << k;
    }
  }
}

TEST(Flow, CustomHamiltonianMatchesTracePower) {
  Sampler s(314);
  const ComplexMatrix x0 = s.near_identity_sl(3, 0.3, false);
  const ComplexMatrix a = factorization_flow(x0, InvariantHamiltonian::trace_power(2), 0.4);
  const ComplexMatrix b = factorization_flow(x0, InvariantHamiltonian::custom(trace_square_entries(3)), 0.4);
  EXPECT_LE(max_abs_diff(a, b), 1e-6);
}

TEST(Flow, Semigroup) {
  Sampler s(315);
  const ComplexMatrix x0 = s.near_identity_sl(3, 0.4, true);
  const InvariantHamiltonian h = InvariantHamiltonian::trace_power(2);
  const ComplexMatrix half = factorization_flow(x0, h, 0.05);
  EXPECT_LE(max_abs_diff(factorization_flow(half, h, 0.05), factorization_flow(x0, h, 0.1)), 1e-12);
  const std::vector<double> grid{0.0, 0.1, 0.25, 0.4};
  const SweepReport rep = flow_consistency_sweep(x0, h, grid);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.evaluations, 48u);
  EXPECT_LE(rep.semigroup_residual, 1e-10);
}

TEST(Flow, FactorizationDivisorIsReported) {
  // xi = x0 generates a rotation whose bottom-right entry cos t vanishes at pi/2.
  const ComplexMatrix x0{{0.0, 1.0}, {-1.0, 0.0}};
  const InvariantHamiltonian h = InvariantHamiltonian::trace_power(1);
  EXPECT_THROW(factorization_flow(x0, h, std::numbers::pi / 2), FactorizationNotDefined);
  const std::vector<double> grid{0.5, std::numbers::pi / 4};
  const SweepReport rep = flow_consistency_sweep(x0, h, grid);
  EXPECT_FALSE(rep.ok());
  EXPECT_EQ(rep.flags.front(), flags::kFactorizationDivisor);
}
