#include <gtest/gtest.h>

#include <cmath>

#include "degint/heisenberg_double.hpp"
#include "degint/random.hpp"

using namespace degint;
using namespace degint::hdouble;

namespace {

ComplexVector random_diag(Sampler& s, std::size_t n) {
  ComplexVector d;
  for (std::size_t i = 0; i < n; ++i) d.push_back(s.uniform(0.5, 1.5));
  return d;
}

Complex sample_q(Sampler& s, bool complex) {
  const double r = s.uniform(1.2, 2.0);
  return complex ? std::polar(r, s.uniform(0.2, 1.0)) : Complex(r);
}

}  // namespace

TEST(Moment, Examples) {
  const DoublePoint id{ComplexMatrix::identity(3), ComplexMatrix::identity(3)};
  EXPECT_EQ(max_abs_diff(moment(id), ComplexMatrix::identity(3)), 0.0);
  const DoublePoint diag{ComplexMatrix::diagonal(ComplexVector{2.0, 0.5}), ComplexMatrix::diagonal(ComplexVector{3.0, 1.0 / 3.0})};
  EXPECT_LE(max_abs_diff(moment(diag), ComplexMatrix::identity(2)), 1e-15);
  // x y x^-1 y^-1 = [[1, -3], [0, 1]] by hand.
  const ComplexMatrix x{{1.0, 1.0}, {0.0, 1.0}};
  const ComplexMatrix y{{2.0, 0.0}, {0.0, 0.5}};
  const ComplexMatrix expected{{1.0, -3.0}, {0.0, 1.0}};
  EXPECT_LE(max_abs_diff(moment(DoublePoint{x, y}), expected), 1e-15);
}

TEST(Duality, PreservesMomentAndInverts) {
  Sampler s(201);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + k % 3;
    const DoublePoint pt{s.random_sl(n), s.random_sl(n)};
    const DoublePoint img = duality_map(pt);
    EXPECT_LE(relative_diff(moment(img), moment(pt)), 1e-12);
    const DoublePoint back = duality_map_inverse(img);
    EXPECT_LE(relative_diff(back.x, pt.x), 1e-10);
    EXPECT_LE(relative_diff(back.y, pt.y), 1e-10);
    // tr x of the image is tr y^-1.
    EXPECT_LE(std::abs(img.x.trace() - inverse(pt.y).trace()), 1e-10 * std::max(1.0, std::abs(img.x.trace())));
    EXPECT_TRUE(img.is_special());
  }
}

TEST(Duality, IdentityIsFixed) {
  const DoublePoint id{ComplexMatrix::identity(2), ComplexMatrix::identity(2)};
  const DoublePoint img = duality_map(id);
  EXPECT_EQ(max_abs_diff(img.x, id.x), 0.0);
  EXPECT_EQ(max_abs_diff(img.y, id.y), 0.0);
}

TEST(Reduction, MomentLandsInRankOneClass) {
  Sampler s(211);
  for (int k = 0; k < 60; ++k) {
    const std::size_t n = 2 + k % 4;
    const Complex q = sample_q(s, k % 2 == 1);
    const ComplexVector xe = s.unimodular_positive(n, 0.8, 0.15);
    const ComplexVector yd = random_diag(s, n);
    const ReductionResult res = rank_one_reduction(xe, q, yd);
    EXPECT_LE(res.eigen_residual, 1e-7);
    EXPECT_LE(res.rank_one_residual, 1e-10);
    EXPECT_LE(res.diagonal_residual, 1e-10);
    EXPECT_LE(res.system_residual, 1e-10);
    EXPECT_LE(res.pairing_residual, 1e-9 * std::max(1.0, std::abs(RankOneClass::expected_pairing(q, n))));
    // The corrected closed form solves the displayed system; the printed one does not.
    EXPECT_LE(res.corrected_residual, 1e-8);
    EXPECT_GT(res.printed_residual, 1e-3);
    const RankOneClass cls{q, ComplexVector(n, 1.0), res.phi_psi};
    EXPECT_LE(max_abs_diff(cls.z(), res.mu), 1e-9 * std::max(1.0, res.mu.max_abs()));
    EXPECT_LE(cls.pairing_defect(), 1e-9 * std::max(1.0, std::abs(RankOneClass::expected_pairing(q, n))));
  }
}

TEST(Reduction, PrintedArrangementLandsInInverseClass) {
  // For n = 2 both classes have spectrum {q, q^-1}, so only n >= 3 separates them.
  Sampler s(212);
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 3 + k % 2;
    const Complex q = sample_q(s, k % 2 == 1);
    const ComplexVector xe = s.unimodular_positive(n, 0.8, 0.15);
    const ComplexVector yd = random_diag(s, n);
    const ComplexMatrix x = ComplexMatrix::diagonal(xe);
    const ComplexMatrix mu = moment(DoublePoint{x, build_y_printed(xe, q, yd)});
    EXPECT_LE(spectrum_distance(eigenvalues(mu), RankOneClass::expected_spectrum(1.0 / q, n)), 1e-7);
    EXPECT_GT(spectrum_distance(eigenvalues(mu), RankOneClass::expected_spectrum(q, n)), 1e-3);
  }
}

TEST(Reduction, NearUnitQGivesDiagonalY) {
  const ComplexVector xe{2.0, 1.0, 0.5};
  const ComplexVector yd{1.0, 0.8, 1.25};
  const ComplexMatrix y = build_y(xe, 1.0 + 1e-9, yd);
  EXPECT_LE(max_abs_diff(y, ComplexMatrix::diagonal(yd)), 1e-8);
}

TEST(Reduction, SingularPointsRejected) {
  const ComplexVector yd{1.0, 1.0};
  EXPECT_THROW(rank_one_reduction(ComplexVector{1.0, 1.0}, 1.5, yd), SingularPoint);
  EXPECT_THROW(rank_one_reduction(ComplexVector{2.0, 0.5}, 0.0, yd), SingularPoint);
  // x_1 / x_2 = q^-1.
  EXPECT_THROW(rank_one_reduction(ComplexVector{1.0, 2.0}, 2.0, yd), SingularPoint);
}

TEST(Reduction, DisplayedSystemTwoByTwo) {
  // a = (1, 3), q = 2: 2 v0 - 2 v1 = 1 and 0.4 v0 + (2/3) v1 = 1 give v = (1.25, 0.75).
  const ComplexVector a{1.0, 3.0};
  double residual = 1.0;
  const ComplexVector w = solve_displayed_system(a, 2.0, &residual);
  EXPECT_LE(residual, 1e-14);
  EXPECT_LE(max_abs_diff(w, ComplexVector{1.25, 0.25}), 1e-14);
  EXPECT_LE(max_abs_diff(phi_psi_corrected(a, 2.0), w), 1e-14);
  // a_0 = a_1 / q makes a denominator vanish.
  EXPECT_THROW(solve_displayed_system(ComplexVector{1.0, 2.0}, 2.0), SingularMatrix);
}

TEST(Hamiltonians, TracesAndSwappedProduct) {
  Sampler s(221);
  for (int k = 0; k < 40; ++k) {
    const std::size_t n = 2 + k % 3;
    const Complex q = sample_q(s, k % 2 == 1);
    const ComplexVector xe = s.unimodular_positive(n, 0.8, 0.15);
    const ComplexVector u = random_diag(s, n);
    const RelativisticHamiltonians h = relativistic_hamiltonians(xe, u, q, 3);
    const ComplexVector d = y_diagonal_from_u(xe, u, q);
    Complex tr = 0.0;
    for (const auto& v : d) tr += v;
    EXPECT_LE(std::abs(h.reduced[0] - tr), 1e-12 * std::max(1.0, std::abs(tr)));
    EXPECT_LE(h.trace_residual, 1e-10);
    EXPECT_EQ(h.matrix.size(), 3u);
    if (n >= 3) {
      EXPECT_EQ(h.orientation, Orientation::Swapped);
      EXPECT_LE(h.swapped_h2_residual, 1e-9);
      EXPECT_GT(h.printed_h2_residual, 1e-3);
    }
    EXPECT_LE(calogero::relative_scalar_residual(h.h2, h.character), 1e-9);
  }
}

TEST(Hamiltonians, ZeroMomentaGiveZero) {
  const ComplexVector xe{2.0, 1.0, 0.5};
  const ComplexVector u{0.0, 0.0, 0.0};
  const RelativisticHamiltonians h = relativistic_hamiltonians(xe, u, 1.5);
  EXPECT_EQ(std::abs(h.character), 0.0);
  EXPECT_EQ(std::abs(h.h2), 0.0);
  EXPECT_EQ(std::abs(h.reduced[0]), 0.0);
}

TEST(Fibers, InvariantsAndSeparation) {
  Sampler s(231);
  for (int k = 0; k < 5; ++k) {
    const std::size_t n = 2 + k % 2;
    const DoublePoint pt{s.random_sl(n), s.random_sl(n)};
    std::vector<ComplexVector> ze{ComplexVector(n, 1.0)}, zpe{ComplexVector(n, 1.0)};
    for (int j = 0; j < 3; ++j) ze.push_back(s.unimodular_positive(n, 0.7, 0.1));
    for (int j = 0; j < 3; ++j) zpe.push_back(s.unimodular_positive(n, 0.7, 0.1));
    const FiberCheckReport rep = fiber_check(pt, ze, zpe);
    EXPECT_EQ(rep.pairs, 16u);
    EXPECT_EQ(rep.coincident, 1u);
    EXPECT_LE(rep.pi1_defect, 1e-8);
    EXPECT_LE(rep.pi2_defect, 1e-8);
    EXPECT_TRUE(rep.separated());
  }
}

TEST(Flows, ProjectionInvariantsConserved) {
  Sampler s(241);
  for (FlowSide side : {FlowSide::X, FlowSide::Y}) {
    const DoublePoint pt{s.near_identity_sl(2, 0.4, false), s.near_identity_sl(2, 0.4, false)};
    Trajectory traj;
    const ConservationReport rep = double_flow_conservation(pt, side, 1.0, 1e-2, 1e-7, &traj);
    EXPECT_TRUE(rep.ok());
    EXPECT_LE(rep.max_abs_drift(), 1e-7);
    // The flow actually moves the point.
    EXPECT_GT(max_abs_diff(traj.back(), traj.states.front()), 1e-3);
  }
}
