#pragma once

// Reproducible experiments over all modules, with CSV / JSON / SVG output.
// Every random draw comes from Sampler(seed + index), so reruns with the same
// configuration produce byte-identical files regardless of thread count.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "degint/bracket_suite.hpp"
#include "degint/calogero.hpp"
#include "degint/errors.hpp"
#include "degint/facto.hpp"
#include "degint/heisenberg_double.hpp"
#include "degint/integrate.hpp"
#include "degint/kepler.hpp"
#include "degint/matrix.hpp"
#include "degint/poisson.hpp"
#include "degint/random.hpp"
#include "degint/tolerances.hpp"

namespace degint::cli {

using Json = nlohmann::ordered_json;

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class IoFailure : public Error {
 public:
  using Error::Error;
};

enum ExitCode : int { kSuccess = 0, kInvalidConfig = 1, kNumericalFailure = 2, kIoFailure = 3 };

struct ScenarioConfig {
  std::string scenario;
  std::size_t n = 3;
  double kappa_re = 0.3;
  double kappa_im = 0.0;
  double q_re = 1.5;
  double q_im = 0.0;
  std::optional<double> t_max;
  std::optional<double> dt;
  double tol = 1e-10;
  std::uint64_t seed = 1;
  std::size_t samples = 20;
  std::string out_csv;
  std::string out_json;
  std::string out_svg;
  bool timing = false;

  Complex kappa() const { return {kappa_re, kappa_im}; }
  Complex q() const { return {q_re, q_im}; }
};

struct ScenarioInfo {
  const char* name;
  const char* description;
};

inline const std::vector<ScenarioInfo>& scenarios() {
  static const std::vector<ScenarioInfo> list = {
      {"kepler", "Kepler orbit: drift of M, A, H and the P5 relations along an adaptive trajectory"},
      {"cm-rational", "Calogero-Moser central flow on T*SL_n: joint invariants tr(x^a (g x g^-1)^b)"},
      {"ruijsenaars-rational", "rational Ruijsenaars: Cauchy oracle, closed forms, characters, tr g flow"},
      {"relativistic-cm", "Heisenberg double, H = tr x: first-projection invariants, duality, rank-one class"},
      {"relativistic-ruijsenaars", "Heisenberg double, H = tr y: second-projection invariants, reduced Hamiltonians"},
      {"factorization-flow", "exact factorization flow on SL_n vs RK4 on the Sklyanin bracket"},
      {"verify-brackets", "antisymmetry, Leibniz and Jacobi defects for every registered chart"},
      {"duality-check", "fiber separation for the rational and relativistic dualities"},
  };
  return list;
}

inline std::string list_scenarios() {
  std::string out;
  for (const auto& s : scenarios()) out += std::string(s.name) + "  " + s.description + "\n";
  return out;
}

inline double default_dt(const std::string&) { return 1e-2; }

inline void validate(const ScenarioConfig& c) {
  const auto& list = scenarios();
  if (std::none_of(list.begin(), list.end(), [&](const ScenarioInfo& s) { return c.scenario == s.name; })) {
    throw InvalidConfig("unknown scenario '" + c.scenario + "' (use --list)");
  }
  const auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw InvalidConfig(msg);
  };
  const auto n_range = [&](std::size_t lo, std::size_t hi) {
    need(c.n >= lo && c.n <= hi, "--n must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                     "] for scenario " + c.scenario + " (got " + std::to_string(c.n) + ")");
  };
  if (c.scenario == "cm-rational" || c.scenario == "ruijsenaars-rational") n_range(2, 8);
  if (c.scenario == "relativistic-cm" || c.scenario == "relativistic-ruijsenaars") n_range(2, 3);
  if (c.scenario == "factorization-flow") n_range(2, 4);
  if (c.scenario == "duality-check" || c.scenario == "verify-brackets") n_range(2, 3);
  need(std::isfinite(c.kappa_re) && std::isfinite(c.kappa_im), "--kappa-re/--kappa-im must be finite");
  need(std::isfinite(c.q_re) && std::isfinite(c.q_im), "--q-re/--q-im must be finite");
  if (c.scenario == "ruijsenaars-rational") need(std::abs(c.kappa()) > 1e-8, "--kappa must be nonzero");
  if (c.scenario.rfind("relativistic", 0) == 0) {
    need(std::abs(c.q()) > 1e-8, "--q must be nonzero");
    need(std::abs(c.q() - 1.0) > 1e-8, "--q must differ from 1 (the rank-one class degenerates)");
  }
  if (c.t_max) need(std::isfinite(*c.t_max) && *c.t_max >= 0.0, "--t-max must be finite and non-negative");
  if (c.dt) need(std::isfinite(*c.dt) && *c.dt > 0.0, "--dt must be positive");
  need(c.tol >= 1e-13 && c.tol <= 1e-6, "--tol must lie in [1e-13, 1e-6]");
  need(c.samples >= 1 && c.samples <= 100000, "--samples must lie in [1, 100000]");
}

// Result tables --------------------------------------------------------------------

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ScenarioResult {
  Json parameters = Json::object();
  std::vector<DriftRecord> drifts;
  std::vector<OracleResidual> residuals;
  std::vector<std::string> flags;
  Table table;
  std::vector<std::string> plot_columns;

  void add_flag(const std::string& f) { detail::push_flag(flags, f); }
  void residual(std::string name, double v) { residuals.push_back({std::move(name), v}); }
  void absorb(const ConservationReport& rep) {
    for (const auto& d : rep.drifts) drifts.push_back(d);
    for (const auto& r : rep.oracle_residuals) residuals.push_back(r);
    for (const auto& f : rep.flags) add_flag(f);
  }
};

namespace detail {

inline void push_columns(std::vector<std::string>& cols, const std::string& label, bool complex_valued) {
  if (complex_valued) {
    cols.push_back(label + "_re");
    cols.push_back(label + "_im");
  } else {
    cols.push_back(label);
  }
}

inline void push_value(std::vector<double>& row, Complex z, bool complex_valued) {
  row.push_back(z.real());
  if (complex_valued) row.push_back(z.imag());
}

/// t, coordinates, then observable values at every trajectory sample.
inline Table trajectory_table(const Trajectory& traj, const std::vector<std::string>& labels,
                              std::span<const Observable> observables, bool complex_valued) {
  Table t;
  t.columns.push_back("t");
  for (const auto& l : labels) push_columns(t.columns, l, complex_valued);
  for (const auto& o : observables) push_columns(t.columns, o.name, complex_valued);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    std::vector<double> row{traj.times[k]};
    for (const auto& z : traj.states[k]) push_value(row, z, complex_valued);
    for (const auto& o : observables) push_value(row, o(traj.states[k]), complex_valued);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::vector<std::string> observable_columns(std::span<const Observable> obs, bool complex_valued,
                                                   std::size_t limit = 4) {
  std::vector<std::string> out;
  for (const auto& o : obs) {
    if (out.size() >= limit) break;
    out.push_back(complex_valued ? o.name + "_re" : o.name);
  }
  return out;
}

inline unsigned thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DEGINT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

/// Evaluates fn(0..count-1) on worker threads; results are stored by index and
/// the first exception (in index order) is rethrown.
template <class T>
std::vector<T> parallel_map(std::size_t count, const std::function<T(std::size_t)>& fn) {
  std::vector<std::optional<T>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), std::max<std::size_t>(count, 1)));
  const auto work = [&](unsigned w) {
    for (std::size_t i = w; i < count; i += workers) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  std::vector<T> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline ComplexVector real_vector(Sampler& s, std::size_t n, double lo, double hi) {
  ComplexVector v(n);
  for (auto& e : v) e = s.uniform(lo, hi);
  return v;
}

inline void flag_if(ScenarioResult& r, bool bad) {
  if (bad) r.add_flag(flags::kToleranceFailure);
}

}  // namespace detail

// Scenarios ------------------------------------------------------------------------

inline ScenarioResult run_kepler(const ScenarioConfig& c) {
  ScenarioResult r;
  Sampler s(c.seed);
  kepler::KeplerState s0;
  s0.gamma = 1.0;
  s0.q = {1.0 + 0.1 * s.uniform(-1, 1), 0.1 * s.uniform(-1, 1), 0.05 * s.uniform(-1, 1)};
  s0.p = {0.1 * s.uniform(-1, 1), 1.0 + 0.1 * s.uniform(-1, 1), 0.1 * s.uniform(-1, 1)};
  const kepler::P5Point p0 = kepler::project_to_p5(s0);
  const double energy = p0.H;
  const double t_max = c.t_max.value_or(energy < 0.0 ? kepler::period_formula(energy, s0.gamma) : 10.0);
  r.parameters["gamma"] = s0.gamma;
  r.parameters["p0"] = s0.p;
  r.parameters["q0"] = s0.q;
  r.parameters["energy"] = energy;
  r.parameters["level_surface"] = kepler::classify_level_surface(energy, s0.gamma).leaf;
  r.parameters["t_max"] = t_max;
  r.parameters["tol"] = c.tol;

  Trajectory traj;
  const ConservationReport rep = kepler::orbit_conservation_report(s0, t_max, c.tol, &traj);
  r.absorb(rep);
  double orth = 0.0, rel = 0.0;
  for (const auto& x : traj.states) {
    const kepler::P5Point pt = kepler::project_to_p5(kepler::from_point(x, s0.gamma));
    orth = std::max(orth, std::abs(kepler::orthogonality_defect(pt)));
    rel = std::max(rel, std::abs(kepler::norm_relation_defect(pt, s0.gamma)));
  }
  r.residual("orthogonality_MA", orth);
  r.residual("norm_relation", rel);
  const auto& tol = default_tolerances();
  detail::flag_if(r, orth > tol.kepler_orthogonality || rel > tol.kepler_norm_relation);
  if (energy < 0.0) {
    const double formula = kepler::period_formula(energy, s0.gamma);
    r.parameters["period_formula"] = formula;
    if (const auto measured = kepler::measure_radial_period(s0, 2.5 * formula)) {
      r.residual("period_relative_error", std::abs(*measured - formula) / formula);
      detail::flag_if(r, std::abs(*measured - formula) / formula > tol.kepler_period);
    }
  }
  if (t_max >= 1.0) {
    // Negative control: q1 is not conserved and must show visible drift.
    const std::vector<Observable> control{coordinate(kepler::chart(), 3)};
    const double drift = monitor(traj, control).drifts.front().max_abs;
    r.residual("control_q1_drift", drift);
    if (drift < tol.negative_control) r.add_flag("false-conservation");
  }
  const std::vector<Observable> obs = kepler::integrals(s0.gamma);
  r.table = detail::trajectory_table(traj, kepler::chart().coord_labels, obs, false);
  r.plot_columns = {"M3", "A1", "A2", "H"};
  return r;
}

inline ScenarioResult run_cm_rational(const ScenarioConfig& c) {
  ScenarioResult r;
  Sampler s(c.seed);
  const std::size_t n = c.n;
  const ComplexMatrix x = traceless(s.random_matrix(n, 1.0));
  const ComplexMatrix g0 = s.random_sl(n);
  const double t_max = c.t_max.value_or(1.0), dt = c.dt.value_or(default_dt(c.scenario));
  r.parameters["n"] = n;
  r.parameters["hamiltonian"] = "tr(X^2)/2";
  r.parameters["t_max"] = t_max;
  r.parameters["dt"] = dt;

  const auto grad = calogero::quadratic_casimir_gradient();
  Trajectory traj;
  for (std::size_t k = 0;; ++k) {
    const double t = std::min(t_max, static_cast<double>(k) * dt);
    const auto [xt, gt] = calogero::cm_central_flow(x, g0, grad, t);
    ComplexVector state;
    append_matrix(state, gt);
    traj.push(t, std::move(state));
    if (t >= t_max) break;
  }
  std::vector<Observable> obs;
  for (unsigned a = 1; a <= 3; ++a)
    for (unsigned b = 1; b <= 3; ++b) {
      obs.push_back(Observable{"tr x^" + std::to_string(a) + " (gxg^-1)^" + std::to_string(b),
                               [=](PointView z) {
                                 const ComplexMatrix g = matrix_block(z, 0, n);
                                 return (matrix_power(x, a) * matrix_power(g * x * inverse(g), b)).trace();
                               },
                               {}});
    }
  r.absorb(monitor(traj, obs, default_tolerances().flow_invariant));
  // Independent check of the exponential: RK4 on g' = grad F(X) g.
  const VectorField lin = [&](PointView z) {
    ComplexVector out;
    append_matrix(out, grad(x) * matrix_block(z, 0, n));
    return out;
  };
  ComplexVector z0;
  append_matrix(z0, g0);
  const Trajectory ref = rk4(lin, z0, t_max, std::min(dt, 1e-3));
  r.residual("exponential_vs_rk4", max_abs_diff(ref.back(), traj.back()));
  detail::flag_if(r, r.residuals.back().value > 1e-8);
  r.table = detail::trajectory_table(traj, matrix_labels("g", n), obs, false);
  r.plot_columns = detail::observable_columns(obs, false);
  return r;
}

inline Observable ruijsenaars_hamiltonian(std::size_t n, Complex kappa) {
  return Observable{"H",
                    [=](PointView z) {
                      calogero::RuijPoint pt{ComplexVector(z.begin(), z.begin() + n),
                                             ComplexVector(z.begin() + n, z.end()), kappa};
                      const auto tr = calogero::ruij_traces_regular(pt);
                      return 0.5 * (tr[1] - tr[0] * tr[0]);
                    },
                    {}};
}

inline Observable ruijsenaars_trace(std::size_t n, Complex kappa, unsigned k) {
  return Observable{k == 1 ? "tr g" : "tr g^" + std::to_string(k),
                    [=](PointView z) {
                      calogero::RuijPoint pt{ComplexVector(z.begin(), z.begin() + n),
                                             ComplexVector(z.begin() + n, z.end()), kappa};
                      if (k <= 2) return calogero::ruij_traces_regular(pt)[k - 1];
                      return matrix_power(calogero::reconstruct_g(pt), k).trace();
                    },
                    {}};
}

inline ScenarioResult run_ruijsenaars_rational(const ScenarioConfig& c) {
  ScenarioResult r;
  const std::size_t n = c.n;
  const Complex kappa = c.kappa();
  const bool cplx = c.kappa_im != 0.0;
  r.parameters["n"] = n;
  r.parameters["kappa"] = detail::complex_json(kappa);
  r.parameters["samples"] = c.samples;

  struct Sample {
    double cauchy, selected, rejected, relation, characters, hamiltonian;
    calogero::Normalization norm;
  };
  const auto samples = detail::parallel_map<Sample>(c.samples, [&](std::size_t i) {
    Sampler s(c.seed + i);
    const ComplexVector h = s.traceless_reals(n, -2.0, 2.0, 0.3);
    const ComplexVector u = detail::real_vector(s, n, 0.5, 1.5);
    const calogero::ClosedFormSelection sel = calogero::phi_psi_closed_form(h, kappa);
    const calogero::RuijPoint pt{h, u, kappa};
    const ComplexVector w = calogero::solve_phi_psi_oracle(h, kappa);
    return Sample{calogero::cauchy_residual(h, kappa, w),
                  std::min(sel.printed_residual, sel.corrected_residual),
                  std::max(sel.printed_residual, sel.corrected_residual),
                  calogero::relation_residual(pt),
                  calogero::ruij_characters(pt).residual,
                  calogero::h_rational_ruijsenaars_paths(pt).residual,
                  sel.selected};
  });
  double cauchy = 0, selected = 0, rejected = std::numeric_limits<double>::infinity(), relation = 0, chars = 0,
         ham = 0;
  bool mixed = false;
  for (const auto& smp : samples) {
    cauchy = std::max(cauchy, smp.cauchy);
    selected = std::max(selected, smp.selected);
    rejected = std::min(rejected, smp.rejected);
    relation = std::max(relation, smp.relation);
    chars = std::max(chars, smp.characters);
    ham = std::max(ham, smp.hamiltonian);
    mixed = mixed || smp.norm != samples.front().norm;
  }
  r.parameters["phi_psi_normalization"] = mixed ? "mixed" : calogero::to_string(samples.front().norm);
  r.residual("cauchy_system", cauchy);
  r.residual("phi_psi_selected", selected);
  r.residual("phi_psi_rejected_min", rejected);
  r.residual("relation_reconstruction", relation);
  r.residual("characters_dual_path", chars);
  r.residual("hamiltonian_dual_path", ham);
  const auto& tol = default_tolerances();
  detail::flag_if(r, cauchy > tol.cauchy_residual || selected > tol.closed_form_match ||
                         relation > tol.reconstruction || chars > tol.dual_path || ham > tol.dual_path);
  if (mixed || rejected <= tol.closed_form_match) r.add_flag("normalization-ambiguous");

  // Flow of tr g on the (h, u) chart from the first sample. Near h_i = h_j the
  // velocities behave like kappa (u_i + u_j) / (h_j - h_i), which repels for
  // Re kappa > 0; for Re kappa < 0 the flow is run backward in time so that
  // the orbit stays regular. H and tr g^2 are monitored along it.
  Sampler s(c.seed);
  ComplexVector z0 = s.traceless_reals(n, -2.0, 2.0, 0.3);
  for (const auto& e : detail::real_vector(s, n, 0.5, 1.5)) z0.push_back(e);
  const PoissonChart chart = chart_cm_loglinear(n, LogLinearChart::PositionShift);
  const double t_max = c.t_max.value_or(1.0), dt = c.dt.value_or(default_dt(c.scenario));
  const double direction = kappa.real() < 0.0 ? -1.0 : 1.0;
  r.parameters["t_max"] = t_max;
  r.parameters["dt"] = dt;
  r.parameters["flow_hamiltonian"] = direction > 0 ? "tr g" : "-tr g";
  const Observable trg = ruijsenaars_trace(n, kappa, 1);
  const Observable flow_h{trg.name, [trg, direction](PointView z) { return direction * trg(z); }, {}};
  AdaptiveOptions opt;
  opt.tol = c.tol;
  opt.max_step = dt;
  opt.guard = [n](PointView z) -> std::optional<std::string> {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (std::abs(z[i] - z[j]) < 1e-6) return std::string(flags::kCollision);
    return std::nullopt;
  };
  const Trajectory traj = adaptive(hamiltonian_field(chart, flow_h), z0, t_max, opt);
  const std::vector<Observable> obs{trg, ruijsenaars_trace(n, kappa, 2), ruijsenaars_hamiltonian(n, kappa)};
  r.absorb(monitor(traj, obs, 1e-6));
  r.table = detail::trajectory_table(traj, chart.coord_labels, obs, cplx);
  r.plot_columns = detail::observable_columns(obs, cplx);
  return r;
}

struct RelativisticSampleResiduals {
  double moment = 0.0, roundtrip = 0.0, eigen = 0.0, rank_one = 0.0, system = 0.0, corrected = 0.0, printed = 0.0;
  double traces = 0.0, h2_selected = 0.0, h2_rejected = 0.0;
  hdouble::Orientation orientation = hdouble::Orientation::Swapped;
};

inline RelativisticSampleResiduals relativistic_sample(std::size_t n, Complex q, std::uint64_t seed) {
  Sampler s(seed);
  RelativisticSampleResiduals out;
  const hdouble::DoublePoint pt{s.random_sl(n), s.random_sl(n)};
  out.moment = max_abs_diff(hdouble::moment(hdouble::duality_map(pt)), hdouble::moment(pt));
  const hdouble::DoublePoint back = hdouble::duality_map_inverse(hdouble::duality_map(pt));
  out.roundtrip = std::max(max_abs_diff(back.x, pt.x), max_abs_diff(back.y, pt.y));
  const ComplexVector x = s.unimodular_positive(n, 0.7, 0.2);
  const ComplexVector u = detail::real_vector(s, n, 0.5, 1.5);
  const hdouble::ReductionResult red = hdouble::rank_one_reduction(x, q, hdouble::y_diagonal_from_u(x, u, q));
  out.eigen = red.eigen_residual;
  out.rank_one = red.rank_one_residual;
  out.system = red.system_residual;
  out.corrected = red.corrected_residual;
  out.printed = red.printed_residual;
  const hdouble::RelativisticHamiltonians rh = hdouble::relativistic_hamiltonians(x, u, q);
  out.traces = rh.trace_residual;
  out.h2_selected = std::min(rh.printed_h2_residual, rh.swapped_h2_residual);
  out.h2_rejected = std::max(rh.printed_h2_residual, rh.swapped_h2_residual);
  out.orientation = rh.orientation;
  return out;
}

inline ScenarioResult run_relativistic(const ScenarioConfig& c, hdouble::FlowSide side) {
  ScenarioResult r;
  const std::size_t n = c.n;
  const Complex q = c.q();
  r.parameters["n"] = n;
  r.parameters["q"] = detail::complex_json(q);
  r.parameters["hamiltonian"] = side == hdouble::FlowSide::X ? "tr x" : "tr y";
  r.parameters["samples"] = c.samples;

  const auto samples = detail::parallel_map<RelativisticSampleResiduals>(
      c.samples, [&](std::size_t i) { return relativistic_sample(n, q, c.seed + i); });
  RelativisticSampleResiduals worst;
  for (const auto& smp : samples) {
    worst.moment = std::max(worst.moment, smp.moment);
    worst.roundtrip = std::max(worst.roundtrip, smp.roundtrip);
    worst.eigen = std::max(worst.eigen, smp.eigen);
    worst.rank_one = std::max(worst.rank_one, smp.rank_one);
    worst.system = std::max(worst.system, smp.system);
    worst.corrected = std::max(worst.corrected, smp.corrected);
    worst.traces = std::max(worst.traces, smp.traces);
    worst.h2_selected = std::max(worst.h2_selected, smp.h2_selected);
  }
  const auto& tol = default_tolerances();
  r.residual("duality_moment", worst.moment);
  r.residual("duality_roundtrip", worst.roundtrip);
  r.residual("rank_one_spectrum", worst.eigen);
  r.residual("rank_one_moment", worst.rank_one);
  r.residual("displayed_system", worst.system);
  r.residual("phi_psi_corrected", worst.corrected);
  detail::flag_if(r, worst.moment > tol.moment_duality || worst.roundtrip > 1e-10 || worst.eigen > tol.rank_one_eigen ||
                         worst.system > tol.cauchy_residual || worst.corrected > tol.closed_form_match);
  if (side == hdouble::FlowSide::Y) {
    r.residual("traces_dual_path", worst.traces);
    r.residual("h2_dual_path", worst.h2_selected);
    r.parameters["h2_orientation"] = hdouble::to_string(samples.front().orientation);
    detail::flag_if(r, worst.traces > tol.dual_path || worst.h2_selected > tol.dual_path);
  }

  Sampler s(c.seed);
  const hdouble::DoublePoint pt{s.random_sl(n), s.random_sl(n)};
  const double t_max = c.t_max.value_or(0.5), dt = c.dt.value_or(default_dt(c.scenario));
  r.parameters["t_max"] = t_max;
  r.parameters["dt"] = dt;
  Trajectory traj;
  r.absorb(hdouble::double_flow_conservation(pt, side, t_max, dt, tol.double_drift, &traj));
  const std::vector<Observable> obs = hdouble::projection_observables(n, side);
  r.table = detail::trajectory_table(traj, chart_heisenberg_double(n).coord_labels, obs, false);
  r.plot_columns = detail::observable_columns(obs, false);
  return r;
}

inline ScenarioResult run_factorization_flow(const ScenarioConfig& c) {
  ScenarioResult r;
  const std::size_t n = c.n;
  Sampler s(c.seed);
  const ComplexMatrix x0 = s.near_identity_sl(n, 0.3);
  const double t_max = c.t_max.value_or(0.1), dt = c.dt.value_or(default_dt(c.scenario));
  r.parameters["n"] = n;
  r.parameters["t_max"] = t_max;
  r.parameters["dt"] = dt;
  const auto& tol = default_tolerances();

  for (unsigned k : {1u, 2u}) {
    const auto h = facto::InvariantHamiltonian::trace_power(k);
    const std::string tag = k == 1 ? "tr_x" : "tr_x2";
    try {
      const facto::FlowResult fr = facto::factorization_flow_detail(x0, h, t_max);
      const ComplexMatrix ref = facto::sklyanin_rk4(x0, h, t_max, 1e-3);
      r.residual("sklyanin_rk4_" + tag, max_abs_diff(fr.x, ref));
      r.residual("g_plus_minus_" + tag, fr.plus_minus_residual);
      const double ts[] = {0.0, t_max / 4.0, t_max / 2.0};
      const facto::SweepReport sw = facto::flow_consistency_sweep(x0, h, ts);
      r.residual("semigroup_" + tag, sw.semigroup_residual);
      r.residual("invariants_" + tag, sw.invariant_drift);
      r.residual("determinant_" + tag, sw.determinant_drift);
      for (const auto& f : sw.flags) r.add_flag(f);
      detail::flag_if(r, max_abs_diff(fr.x, ref) > tol.facto_oracle || fr.plus_minus_residual > tol.facto_gpm);
    } catch (const FactorizationNotDefined&) {
      r.add_flag(flags::kFactorizationDivisor);
    }
  }

  const auto h = facto::InvariantHamiltonian::trace_power(1);
  Trajectory traj;
  for (std::size_t k = 0;; ++k) {
    const double t = std::min(t_max, static_cast<double>(k) * dt);
    try {
      ComplexVector state;
      append_matrix(state, facto::factorization_flow(x0, h, t));
      traj.push(t, std::move(state));
    } catch (const FactorizationNotDefined&) {
      r.add_flag(flags::kFactorizationDivisor);
      break;
    }
    if (t >= t_max) break;
  }
  std::vector<Observable> obs;
  for (unsigned k = 1; k <= n; ++k) obs.push_back(trace_power_observable(n * n, 0, n, k, "tr x^" + std::to_string(k)));
  obs.push_back(determinant_observable(0, n, "det x"));
  r.absorb(monitor(traj, obs, tol.facto_invariants * std::max(1.0, x0.max_abs())));
  r.table = detail::trajectory_table(traj, matrix_labels("x", n), obs, false);
  r.plot_columns = matrix_labels("x", n);
  r.plot_columns.resize(std::min<std::size_t>(4, r.plot_columns.size()));
  return r;
}

inline ScenarioResult run_verify_brackets(const ScenarioConfig& c) {
  ScenarioResult r;
  r.parameters["points_per_chart"] = c.samples;
  const std::vector<RegisteredChart> charts = registered_charts();
  const auto defects = detail::parallel_map<ChartDefects>(
      charts.size(), [&](std::size_t i) { return verify_chart(charts[i], c.seed + 7919 * i, c.samples); });
  const auto& tol = default_tolerances();
  r.table.columns = {"t", "antisymmetry", "leibniz", "jacobi"};
  Json names = Json::array();
  for (std::size_t i = 0; i < defects.size(); ++i) {
    const auto& d = defects[i];
    names.push_back(d.chart);
    r.residual(d.chart + ".antisymmetry", d.antisymmetry);
    r.residual(d.chart + ".leibniz", d.leibniz);
    r.residual(d.chart + ".jacobi", d.jacobi);
    detail::flag_if(r, !d.within(tol));
    r.table.rows.push_back({static_cast<double>(i), d.antisymmetry, d.leibniz, d.jacobi});
  }
  r.parameters["charts"] = names;
  r.plot_columns = {"leibniz", "jacobi"};
  return r;
}

inline ScenarioResult run_duality_check(const ScenarioConfig& c) {
  ScenarioResult r;
  const std::size_t n = c.n;
  r.parameters["n"] = n;
  r.parameters["samples"] = c.samples;
  struct Sample {
    double cm_margin, double_margin, pi1, pi2, moment;
    std::size_t inconclusive;
  };
  const auto samples = detail::parallel_map<Sample>(c.samples, [&](std::size_t i) {
    Sampler s(c.seed + i);
    // Rational side: F = {(x, gamma z)}, F~ = {(x + c, gamma)}.
    const ComplexVector xe = s.traceless_reals(n, -1.5, 1.5, 0.3);
    const ComplexMatrix x = ComplexMatrix::diagonal(xe);
    const ComplexMatrix gamma = s.random_sl(n);
    std::vector<ComplexMatrix> torus, shifts;
    for (int k = 0; k < 3; ++k) torus.push_back(ComplexMatrix::diagonal(s.unimodular_positive(n, 0.7, 0.1)));
    for (int k = 0; k < 3; ++k) {
      const ComplexVector ce = s.traceless_reals(n, -0.5, 0.5, 0.05);
      shifts.push_back(hdouble::centralizer_element(gamma, ce));
    }
    const calogero::FiberReport cm = calogero::duality_fiber_check(x, gamma, torus, shifts);
    // Relativistic side on the double.
    const hdouble::DoublePoint pt{s.random_sl(n), s.random_sl(n)};
    std::vector<ComplexVector> ze, zpe;
    for (int k = 0; k < 3; ++k) ze.push_back(s.unimodular_positive(n, 0.7, 0.1));
    for (int k = 0; k < 3; ++k) zpe.push_back(s.unimodular_positive(n, 0.7, 0.1));
    const hdouble::FiberCheckReport db = hdouble::fiber_check(pt, ze, zpe);
    const double mom = max_abs_diff(hdouble::moment(hdouble::duality_map(pt)), hdouble::moment(pt));
    return Sample{cm.min_margin, db.min_margin, db.pi1_defect, db.pi2_defect, mom, cm.inconclusive + db.inconclusive};
  });
  double cm_margin = std::numeric_limits<double>::infinity(), db_margin = cm_margin, pi1 = 0, pi2 = 0, mom = 0;
  std::size_t inconclusive = 0;
  r.table.columns = {"t", "cm_margin", "double_margin", "pi1_defect", "pi2_defect"};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& smp = samples[i];
    cm_margin = std::min(cm_margin, smp.cm_margin);
    db_margin = std::min(db_margin, smp.double_margin);
    pi1 = std::max(pi1, smp.pi1);
    pi2 = std::max(pi2, smp.pi2);
    mom = std::max(mom, smp.moment);
    inconclusive += smp.inconclusive;
    r.table.rows.push_back({static_cast<double>(i), smp.cm_margin, smp.double_margin, smp.pi1, smp.pi2});
  }
  r.residual("rational_min_margin", cm_margin);
  r.residual("double_min_margin", db_margin);
  r.residual("pi1_fiber_defect", pi1);
  r.residual("pi2_fiber_defect", pi2);
  r.residual("duality_moment", mom);
  r.parameters["inconclusive_pairs"] = inconclusive;
  if (inconclusive > 0) r.add_flag("inconclusive-separation");
  const auto& tol = default_tolerances();
  detail::flag_if(r, pi1 > tol.flow_invariant * 10 || pi2 > tol.flow_invariant * 10 || mom > tol.moment_duality);
  r.plot_columns = {"cm_margin", "double_margin"};
  return r;
}

inline ScenarioResult run_scenario(const ScenarioConfig& c) {
  if (c.scenario == "kepler") return run_kepler(c);
  if (c.scenario == "cm-rational") return run_cm_rational(c);
  if (c.scenario == "ruijsenaars-rational") return run_ruijsenaars_rational(c);
  if (c.scenario == "relativistic-cm") return run_relativistic(c, hdouble::FlowSide::X);
  if (c.scenario == "relativistic-ruijsenaars") return run_relativistic(c, hdouble::FlowSide::Y);
  if (c.scenario == "factorization-flow") return run_factorization_flow(c);
  if (c.scenario == "verify-brackets") return run_verify_brackets(c);
  if (c.scenario == "duality-check") return run_duality_check(c);
  throw InvalidConfig("unknown scenario '" + c.scenario + "'");
}

// Output -------------------------------------------------------------------------

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
    out += "\n";
  }
  return out;
}

inline Json report_json(const ScenarioConfig& c, const ScenarioResult& r, std::optional<double> elapsed) {
  Json j;
  j["scenario"] = c.scenario;
  j["seed"] = c.seed;
  j["parameters"] = r.parameters;
  j["drifts"] = Json::array();
  for (const auto& d : r.drifts) j["drifts"].push_back({{"name", d.name}, {"max_abs", d.max_abs}, {"max_rel", d.max_rel}});
  j["oracle_residuals"] = Json::array();
  for (const auto& o : r.residuals) j["oracle_residuals"].push_back({{"name", o.name}, {"value", o.value}});
  j["flags"] = r.flags;
  j["elapsed_seconds"] = elapsed ? Json(*elapsed) : Json(nullptr);
  return j;
}

/// Line plot of the selected columns, each shifted by its initial value.
inline std::string to_svg(const Table& t, const std::vector<std::string>& selected) {
  const double w = 640, h = 400, pad = 40;
  std::vector<std::size_t> idx;
  for (const auto& name : selected) {
    const auto it = std::find(t.columns.begin(), t.columns.end(), name);
    if (it != t.columns.end()) idx.push_back(static_cast<std::size_t>(it - t.columns.begin()));
  }
  double t0 = 0, t1 = 1, lo = 0, hi = 0;
  if (!t.rows.empty()) {
    t0 = t.rows.front()[0];
    t1 = std::max(t.rows.back()[0], t0 + 1e-300);
  }
  for (std::size_t c : idx)
    for (const auto& row : t.rows) {
      lo = std::min(lo, row[c] - t.rows.front()[c]);
      hi = std::max(hi, row[c] - t.rows.front()[c]);
    }
  if (hi - lo <= 0) hi = lo + 1;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << pad << "\" y=\"20\" font-size=\"12\">deviation from initial value vs t</text>\n";
  for (std::size_t k = 0; k < idx.size(); ++k) {
    os << "<polyline fill=\"none\" stroke=\"" << colors[k % 6] << "\" points=\"";
    for (const auto& row : t.rows) {
      const double px = pad + (row[0] - t0) / (t1 - t0) * (w - 2 * pad);
      const double py = h - pad - (row[idx[k]] - t.rows.front()[idx[k]] - lo) / (hi - lo) * (h - 2 * pad);
      os << format_number(px) << "," << format_number(py) << " ";
    }
    os << "\"/>\n";
    os << "<text x=\"" << w - 150 << "\" y=\"" << 20 + 14 * k << "\" font-size=\"11\" fill=\"" << colors[k % 6]
       << "\">" << t.columns[idx[k]] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open " + path + " for writing");
  f << content;
  if (!f) throw IoFailure("failed writing " + path);
}

/// Validates, runs and writes outputs; the JSON report goes to `out` when no
/// --out-json path is given. Returns the process exit code.
inline int run(const ScenarioConfig& c, std::ostream& out, std::ostream& log) {
  try {
    validate(c);
  } catch (const InvalidConfig& e) {
    log << "invalid configuration: " << e.what() << "\n";
    return kInvalidConfig;
  }
  const auto start = std::chrono::steady_clock::now();
  ScenarioResult result;
  try {
    result = run_scenario(c);
  } catch (const InvalidConfig& e) {
    log << "invalid configuration: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const Error& e) {
    result.add_flag("numerical-error");
    result.parameters["error"] = e.what();
    log << "numerical failure: " << e.what() << "\n";
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log << c.scenario << ": " << elapsed << " s, flags:";
  for (const auto& f : result.flags) log << " " << f;
  log << (result.flags.empty() ? " none\n" : "\n");
  try {
    if (!c.out_csv.empty()) write_file(c.out_csv, to_csv(result.table));
    const std::string report =
        report_json(c, result, c.timing ? std::optional<double>(elapsed) : std::nullopt).dump(2) + "\n";
    if (!c.out_json.empty()) {
      write_file(c.out_json, report);
    } else {
      out << report;
    }
    if (!c.out_svg.empty()) write_file(c.out_svg, to_svg(result.table, result.plot_columns));
  } catch (const IoFailure& e) {
    log << "I/O failure: " << e.what() << "\n";
    return kIoFailure;
  }
  return result.flags.empty() ? kSuccess : kNumericalFailure;
}

}  // namespace degint::cli
