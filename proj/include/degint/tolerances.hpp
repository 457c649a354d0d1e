#pragma once

namespace degint {

// Every numerical threshold used by the library and the acceptance suite.
struct Tolerances {
  // matrixcore
  double triangular = 1e-12;          // off-triangle mass of UL factors, relative
  double ul_diagonal = 1e-12;         // diag(g+) * diag(g-) == 1
  double ul_pivot = 1e-12;            // |pivot| < ul_pivot * ||m|| => not factorizable
  double ul_reassembly = 1e-11;
  double eigen_gap = 1e-8;            // minimal eigenvalue separation for spectral()
  double spectral_residual = 1e-9;
  double exp_identity = 1e-11;        // exp(ta) exp(-ta) == 1
  double liouville = 1e-9;            // det exp(a) == exp(tr a), relative

  // poisson
  double fd_step = 1e-6;
  double antisymmetry = 1e-10;
  double leibniz = 1e-5;
  double jacobi = 1e-4;
  double gradient_check = 1e-5;       // exact vs finite-difference gradient, relative

  // kepler
  double collision_radius = 1e-12;
  double kepler_orthogonality = 1e-12;
  double kepler_norm_relation = 1e-9;
  double kepler_drift = 1e-8;
  double kepler_period = 1e-6;

  // calogero / double
  double regular_gap = 1e-8;          // min |h_i - h_j|
  double cauchy_denominator = 1e-10;
  double cauchy_residual = 1e-10;
  double closed_form_match = 1e-8;
  double closed_form_reject = 1e-6;
  double reconstruction = 1e-9;
  double dual_path = 1e-9;
  double dual_path_fail = 1e-6;
  double flow_invariant = 1e-9;
  double separation_margin = 1e-6;
  double rank_one_eigen = 1e-7;
  double moment_duality = 1e-12;
  double double_drift = 1e-7;

  // facto
  double facto_invariants = 1e-10;
  double facto_oracle = 1e-6;
  double facto_semigroup = 1e-7;
  double facto_gpm = 1e-9;
  double conjugation_invariance = 1e-9;

  // integrate
  double negative_control = 1e-2;
  double step_underflow = 1e-14;
};

inline const Tolerances& default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

}  // namespace degint
