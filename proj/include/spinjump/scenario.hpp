#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinjump/config.hpp"
#include "spinjump/jump_engine.hpp"
#include "spinjump/observables.hpp"
#include "spinjump/superoperator.hpp"
#include "spinjump/version.hpp"

namespace spinjump {

struct RunOutput {
  std::string timeseries_path;
  std::string summary_path;
  nlohmann::json summary;
};

namespace detail {

inline std::string csv_row(std::initializer_list<double> values) {
  std::string row;
  bool first = true;
  char buf[64];
  for (double v : values) {
    if (!first) row += ',';
    std::snprintf(buf, sizeof buf, "%.17g", v);
    row += buf;
    first = false;
  }
  row += '\n';
  return row;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string initial_to_string(const InitialState& init) {
  switch (init.kind) {
    case InitialState::Kind::S: return "S";
    case InitialState::Kind::T: return "T";
    case InitialState::Kind::Coherent: return "coherent";
    case InitialState::Kind::Amplitudes:
      return "amps:" + fmt_double(init.amp_s.real()) + "," + fmt_double(init.amp_s.imag()) +
             "," + fmt_double(init.amp_t.real()) + "," + fmt_double(init.amp_t.imag());
  }
  return "?";
}

// Physical parameters only; execution knobs like thread count must not
// leak into outputs, which are required to be reproducible across them.
inline nlohmann::json parameters_echo(const ScenarioConfig& cfg) {
  nlohmann::json p;
  p["mode"] = cfg.mode == RunMode::MasterEquation ? "master_equation" : "trajectories";
  if (cfg.mode == RunMode::MasterEquation)
    p["theory"] = to_string(cfg.theory);
  else
    p["scheme"] = to_string(cfg.scheme);
  p["basis"] = cfg.basis == BasisKind::TwoLevelST ? "two_level" : "four_level";
  p["J"] = cfg.j;
  p["delta"] = cfg.delta;
  p["k_s"] = cfg.k_s;
  p["k_t"] = cfg.k_t;
  p["initial"] = initial_to_string(cfg.initial);
  p["t_end"] = cfg.t_end;
  p["dt"] = cfg.dt;
  if (cfg.mode == RunMode::Trajectories) {
    p["n_traj"] = cfg.n_traj;
    p["record_stride"] = cfg.record_stride;
  }
  p["output_prefix"] = cfg.output_prefix;
  return p;
}

inline constexpr const char* kCsvHeader = "time,p_s,p_t,coh_mag,trace,rho_coh,flux_s,flux_t\n";

}  // namespace detail

/// Execute one scenario and write `<prefix>_timeseries.csv` and
/// `<prefix>_summary.json` under `output_dir`. Deterministic for a fixed
/// (config, seed): outputs are byte-identical across runs and thread
/// counts.
inline RunOutput run_scenario(const ScenarioConfig& cfg, const std::string& output_dir) {
  const ModelSpec model = cfg.model();
  const BasisSpec basis = model.basis;
  const Mat q_s = singlet_projector(basis);
  const Mat q_t = triplet_projector(basis);
  const PureState psi0 = cfg.initial.realize(basis);

  std::string csv{detail::kCsvHeader};
  nlohmann::json summary;
  summary["parameters"] = detail::parameters_echo(cfg);
  summary["seed"] = cfg.seed;
  summary["tool"] = kToolName;
  summary["tool_version"] = kToolVersion;

  if (cfg.mode == RunMode::MasterEquation) {
    const EvolutionTrace trace =
        integrate(cfg.theory, model, psi0.projector(), cfg.t_end, cfg.dt);
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
      const Mat& rho = trace.states[k].matrix();
      const Populations pops = populations(rho, q_s, q_t);
      csv += detail::csv_row({trace.times[k], pops.p_s, pops.p_t, pops.coherence_mag,
                              trace.states[k].trace_real(),
                              coherence_measure(rho, q_s, q_t), trace.singlet_flux[k],
                              trace.triplet_flux[k]});
    }
    const YieldReport yields = yields_from_trace(trace);
    summary["method"] = "ode_flux_integration";
    summary["singlet_yield"] = yields.singlet_yield;
    summary["triplet_yield"] = yields.triplet_yield;
    summary["survival"] = yields.survival;
    summary["coherence_clamp_events"] = trace.clamp_events;
  } else {
    const EnsembleResult ens =
        run_ensemble(cfg.scheme, model, psi0, cfg.n_traj, cfg.t_end, cfg.dt, cfg.seed,
                     cfg.record_stride, cfg.threads);
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
      const Mat& rho = ens.mean_rho[k];
      const Populations pops = populations(rho, q_s, q_t);
      csv += detail::csv_row({ens.times[k], pops.p_s, pops.p_t, pops.coherence_mag,
                              rho.trace().real(), coherence_measure(rho, q_s, q_t),
                              cfg.k_s * pops.p_s, cfg.k_t * pops.p_t});
    }
    summary["method"] = "trajectory_counting";
    summary["n_traj"] = ens.n_traj;
    summary["singlet_yield"] = ens.singlet_yield;
    summary["triplet_yield"] = ens.triplet_yield;
    summary["survival"] = ens.survival_fraction;
    summary["singlet_count"] = ens.singlet_count;
    summary["triplet_count"] = ens.triplet_count;
    summary["survivor_count"] = ens.survivor_count;
  }

  std::filesystem::create_directories(output_dir);
  RunOutput out;
  const std::filesystem::path dir{output_dir};
  const std::filesystem::path csv_path = dir / (cfg.output_prefix + "_timeseries.csv");
  const std::filesystem::path json_path = dir / (cfg.output_prefix + "_summary.json");
  detail::write_file(csv_path, csv);
  detail::write_file(json_path, summary.dump(2) + "\n");
  out.timeseries_path = csv_path.string();
  out.summary_path = json_path.string();
  out.summary = std::move(summary);
  return out;
}

/// Run the same scenario under several master-equation theories and emit a
/// joined table `<prefix>_compare.csv` plus a summary with per-theory
/// yields.
inline RunOutput compare_theories(const ScenarioConfig& cfg,
                                  const std::vector<TheorySelector>& theories,
                                  const std::string& output_dir) {
  if (theories.empty())
    throw std::invalid_argument("compare_theories: no theories given");
  const ModelSpec model = cfg.model();
  const Mat q_s = singlet_projector(model.basis);
  const Mat q_t = triplet_projector(model.basis);
  const PureState psi0 = cfg.initial.realize(model.basis);

  std::vector<EvolutionTrace> traces;
  traces.reserve(theories.size());
  for (TheorySelector theory : theories)
    traces.push_back(integrate(theory, model, psi0.projector(), cfg.t_end, cfg.dt));

  std::string csv = "time";
  for (TheorySelector theory : theories) {
    const std::string name = to_string(theory);
    csv += ",p_s_" + name + ",p_t_" + name + ",coh_mag_" + name + ",trace_" + name;
  }
  csv += '\n';
  char buf[64];
  for (std::size_t k = 0; k < traces.front().times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", traces.front().times[k]);
    csv += buf;
    for (const EvolutionTrace& trace : traces) {
      const Mat& rho = trace.states[k].matrix();
      const Populations pops = populations(rho, q_s, q_t);
      for (double v : {pops.p_s, pops.p_t, pops.coherence_mag, trace.states[k].trace_real()}) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        csv += buf;
      }
    }
    csv += '\n';
  }

  nlohmann::json summary;
  summary["parameters"] = detail::parameters_echo(cfg);
  summary["seed"] = cfg.seed;
  summary["tool"] = kToolName;
  summary["tool_version"] = kToolVersion;
  nlohmann::json per_theory;
  for (std::size_t i = 0; i < theories.size(); ++i) {
    const YieldReport yields = yields_from_trace(traces[i]);
    nlohmann::json entry;
    entry["singlet_yield"] = yields.singlet_yield;
    entry["triplet_yield"] = yields.triplet_yield;
    entry["survival"] = yields.survival;
    per_theory[to_string(theories[i])] = entry;
  }
  summary["theories"] = per_theory;

  std::filesystem::create_directories(output_dir);
  const std::filesystem::path dir{output_dir};
  const std::filesystem::path csv_path = dir / (cfg.output_prefix + "_compare.csv");
  const std::filesystem::path json_path = dir / (cfg.output_prefix + "_compare_summary.json");
  detail::write_file(csv_path, csv);
  detail::write_file(json_path, summary.dump(2) + "\n");
  return RunOutput{csv_path.string(), json_path.string(), std::move(summary)};
}

namespace detail {

inline Mat random_st_supported_pure(TrajectoryRng& rng, const BasisSpec& basis, Vec* out_psi) {
  Vec psi = Vec::Zero(basis.dim);
  // both components bounded away from zero so the state is genuinely coherent
  const double a = 0.1 + 0.8 * rng.uniform01();
  const double phi1 = 6.283185307179586 * rng.uniform01();
  const double phi2 = 6.283185307179586 * rng.uniform01();
  psi(kIndexS) = std::sqrt(a) * std::exp(kImag * phi1);
  psi(kIndexT) = std::sqrt(1.0 - a) * std::exp(kImag * phi2);
  if (out_psi != nullptr) *out_psi = psi;
  return psi * psi.adjoint();
}

inline Mat random_block_diagonal(TrajectoryRng& rng, const BasisSpec& basis) {
  Mat rho = Mat::Zero(basis.dim, basis.dim);
  const double a = rng.uniform01();
  const double c = rng.uniform01() * (1.0 - a);
  rho(kIndexS, kIndexS) = a;
  rho(kIndexT, kIndexT) = c;
  return rho;
}

inline Mat random_density(TrajectoryRng& rng, int dim) {
  Mat g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      g(i, j) = Complex(2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0);
  Mat rho = g * g.adjoint();
  rho /= rho.trace().real();
  return rho;
}

}  // namespace detail

/// Fast self-contained consistency checks over the library's structural
/// identities. Prints one line per check; returns false if any fails.
inline bool selftest(std::ostream& os) {
  bool all_ok = true;
  auto check = [&](const char* name, bool ok) {
    os << (ok ? "ok" : "FAIL") << ": " << name << "\n";
    all_ok = all_ok && ok;
  };

  for (const BasisSpec& basis : {BasisSpec::two_level(), BasisSpec::four_level()}) {
    const Mat q_s = singlet_projector(basis);
    const Mat q_t = triplet_projector(basis);
    check("projectors idempotent and orthogonal",
          max_abs_diff(q_s * q_s, q_s) == 0.0 && max_abs_diff(q_t * q_t, q_t) == 0.0 &&
              max_abs(Mat(q_s * q_t)) == 0.0);
  }

  {
    const BasisSpec basis = BasisSpec::four_level();
    const RatePair rates{1.3, 0.4};
    const Mat h = build_hamiltonian({0.7, 0.2}, basis);
    const Mat via_ops = effective_hamiltonian(h, jump_ops_traditional(rates));
    const Mat direct = effective_hamiltonian_traditional(h, rates, basis);
    check("traditional H_eff matches its Lindblad construction",
          max_abs_diff(via_ops, direct) < 1e-15);
    const Mat via_ops_jh = effective_hamiltonian(h, jump_ops_jones_hore(rates));
    const Mat direct_jh = effective_hamiltonian_jones_hore(h, rates, basis);
    check("jones-hore H_eff matches its Lindblad construction",
          max_abs_diff(via_ops_jh, direct_jh) < 1e-15);
  }

  {
    TrajectoryRng rng(0x5e1f7e57, 0);
    const BasisSpec basis = BasisSpec::two_level();
    const Mat q_s = singlet_projector(basis);
    const Mat q_t = triplet_projector(basis);
    const Mat h = build_hamiltonian({0.4, 0.3}, basis);
    const RatePair rates{1.0, 0.6};
    double worst_a = 0.0, worst_b = 0.0, worst_tr = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Mat diag = detail::random_block_diagonal(rng, basis);
      worst_a = std::max(worst_a,
                         max_abs_diff(rhs_kominis_revised(diag, h, rates, q_s, q_t),
                                      rhs_haberkorn(diag, h, rates, q_s, q_t)));
      const Mat coh = detail::random_st_supported_pure(rng, basis, nullptr);
      const RatePair equal_rates{0.8, 0.8};
      worst_b = std::max(worst_b,
                         max_abs_diff(rhs_kominis_revised(coh, h, equal_rates, q_s, q_t),
                                      rhs_jones_hore(coh, h, equal_rates, q_s, q_t)));
      const Mat any = detail::random_density(rng, 2);
      worst_tr = std::max(
          worst_tr, std::abs(rhs_kominis_nonreacting(any, h, rates, q_s).trace().real()));
    }
    check("revised equation reduces to plain selective decay without coherence",
          worst_a <= 1e-12);
    check("revised equation matches dephasing theory at full coherence, equal rates",
          worst_b <= 1e-12);
    check("measurement-only evolution is trace preserving", worst_tr <= 1e-12);
  }

  {
    const BasisSpec basis = BasisSpec::two_level();
    const ModelSpec model{basis, {0.0, 0.0}, {1.0, 0.0}};
    const EvolutionTrace trace = integrate(
        TheorySelector::Haberkorn, model,
        PureState::basis_state(basis, kIndexS).projector(), 5.0, 1e-3);
    const double err =
        std::abs(trace.states.back().trace_real() - std::exp(-5.0));
    check("pure singlet decays exponentially under selective recombination", err < 1e-8);
  }

  {
    TrajectoryRng rng(0x5e1f7e57, 1);
    const Mat h4 = build_hamiltonian({0.9, 0.35}, BasisSpec::four_level());
    const auto ops = jump_ops_jones_hore({1.1, 0.5});
    const Superoperator lsup = lindblad_superoperator(h4, ops);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Mat rho = detail::random_density(rng, 4);
      worst = std::max(worst, max_abs_diff(apply_superoperator(lsup, rho),
                                           lindblad_rhs(rho, h4, ops)));
    }
    check("vectorized generator agrees with direct evaluation", worst <= 1e-12);
  }

  {
    const ModelSpec model{BasisSpec::two_level(), {0.0, 0.3}, {1.0, 0.5}};
    const PureState psi0 = PureState::basis_state(model.basis, kIndexS);
    const EnsembleResult a =
        run_ensemble(SchemeKind::JonesHore, model, psi0, 512, 1.0, 1e-3, 42, 10, 1);
    const EnsembleResult b =
        run_ensemble(SchemeKind::JonesHore, model, psi0, 512, 1.0, 1e-3, 42, 10, 2);
    bool same = a.singlet_count == b.singlet_count && a.triplet_count == b.triplet_count &&
                a.survivor_count == b.survivor_count;
    for (std::size_t k = 0; same && k < a.mean_rho.size(); ++k)
      same = (a.mean_rho[k] - b.mean_rho[k]).cwiseAbs().maxCoeff() == 0.0;
    check("ensembles are bit-reproducible across thread counts", same);
  }

  return all_ok;
}

}  // namespace spinjump
