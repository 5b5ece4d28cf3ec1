#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "spinjump/jump_engine.hpp"
#include "spinjump/observables.hpp"
#include "spinjump/rng.hpp"

using namespace spinjump;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const BasisSpec kBasis2 = BasisSpec::two_level();
const Mat kQs = singlet_projector(kBasis2);
const Mat kQt = triplet_projector(kBasis2);

PureState random_pure(TrajectoryRng& rng) {
  const double a = 0.05 + 0.9 * rng.uniform01();
  const double p1 = 6.283185307179586 * rng.uniform01();
  const double p2 = 6.283185307179586 * rng.uniform01();
  Vec psi(2);
  psi << std::sqrt(a) * std::exp(kImag * p1), std::sqrt(1.0 - a) * std::exp(kImag * p2);
  return PureState(std::move(psi));
}

}  // namespace

TEST_CASE("no-jump propagation") {
  SECTION("Hermitian generator preserves the norm") {
    const Mat h = build_hamiltonian({3.0, 2.0}, kBasis2);
    const auto out = no_jump_propagate(PureState::coherent_st(kBasis2), h, 1e-3);
    CHECK(std::abs(out.delta_p) <= 1e-10);
  }

  SECTION("pure singlet under the traditional generator") {
    // exact norm loss 1 - exp(-k_s dt); the first-order reading is k_s dt
    const Mat heff =
        effective_hamiltonian_traditional(Mat::Zero(2, 2), {1.0, 0.0}, kBasis2);
    const auto out =
        no_jump_propagate(PureState::basis_state(kBasis2, kIndexS), heff, 1e-3);
    const double exact = -std::expm1(-1.0 * 1e-3);
    CHECK_THAT(out.delta_p, WithinRel(exact, 1e-6));
    CHECK_THAT(out.delta_p, WithinAbs(1e-3, 1e-6));
  }

  SECTION("coherent state under the state-independent generator") {
    const Mat heff =
        effective_hamiltonian_jones_hore(Mat::Zero(2, 2), {1.0, 1.0}, kBasis2);
    const auto out = no_jump_propagate(PureState::coherent_st(kBasis2), heff, 1e-3);
    const double exact = -std::expm1(-2.0 * 1e-3);
    CHECK_THAT(out.delta_p, WithinRel(exact, 1e-6));
    CHECK_THAT(out.delta_p, WithinAbs(2e-3, 1e-5));
  }

  SECTION("norm loss matches the first-order rate to second order in dt") {
    TrajectoryRng rng(21, 0);
    const Mat h = build_hamiltonian({0.7, 0.3}, kBasis2);
    const RatePair rates{1.0, 0.5};
    const Mat heff = effective_hamiltonian_traditional(h, rates, kBasis2);
    for (int i = 0; i < 100; ++i) {
      const PureState psi = random_pure(rng);
      const double qs = std::norm(psi.amplitudes()(0));
      const double qt = std::norm(psi.amplitudes()(1));
      auto err = [&](double dt) {
        const auto out = no_jump_propagate(psi, heff, dt);
        return std::abs(out.delta_p - dt * (rates.k_s * qs + rates.k_t * qt));
      };
      const double e1 = err(2e-3);
      const double e2 = err(1e-3);
      const double order = std::log2(e1 / e2);
      CHECK(order >= 1.9);
      CHECK(order <= 2.6);
    }
  }

  SECTION("step bound enforced") {
    const Mat h = build_hamiltonian({10.0, 0.0}, kBasis2);
    CHECK_THROWS_AS(no_jump_propagate(PureState::coherent_st(kBasis2), h, 1e-2),
                    std::invalid_argument);
  }
}

TEST_CASE("single steps select the listed branches") {
  const double dt = 1e-3;

  SECTION("traditional: stationary dark state") {
    const ModelSpec model{kBasis2, {0.0, 0.0}, {1.0, 0.0}};
    const PureState psi = PureState::basis_state(kBasis2, kIndexT);
    for (double u : {0.0, 0.3, 0.999999}) {
      const auto [next, event] = step_traditional(psi, model, dt, u);
      CHECK(event.kind == EventKind::NoJump);
      CHECK(max_abs_diff(next.amplitudes(), psi.amplitudes()) == 0.0);
    }
  }

  SECTION("traditional: branch thresholds") {
    const ModelSpec model{kBasis2, {0.0, 0.0}, {1.0, 0.5}};
    const PureState psi = PureState::coherent_st(kBasis2);
    const double p_s = 1.0 * 0.5 * dt;
    const double p_t = 0.5 * 0.5 * dt;
    CHECK(step_traditional(psi, model, dt, 0.5).second.kind == EventKind::NoJump);
    CHECK(step_traditional(psi, model, dt, 1.0 - p_s - p_t + 1e-9).second.kind ==
          EventKind::SingletProduct);
    CHECK(step_traditional(psi, model, dt, 1.0 - p_t + 1e-9).second.kind ==
          EventKind::TripletProduct);
    // the three branch weights add to one
    CHECK_THAT((1.0 - p_s - p_t) + p_s + p_t, WithinAbs(1.0, 1e-15));
  }

  SECTION("jones-hore: branch thresholds and exact collapse") {
    const ModelSpec model{kBasis2, {0.0, 0.0}, {1.0, 0.0}};
    const PureState psi = PureState::coherent_st(kBasis2);
    // order: no-jump [0, 1-dt), singlet product [1-dt, 1-dt/2), collapse
    // to |T> [1-dt/2, 1)
    CHECK(step_jones_hore(psi, model, dt, 0.12).second.kind == EventKind::NoJump);
    CHECK(step_jones_hore(psi, model, dt, 1.0 - dt + 1e-9).second.kind ==
          EventKind::SingletProduct);
    const auto [next, event] = step_jones_hore(psi, model, dt, 1.0 - dt / 2 + 1e-9);
    CHECK(event.kind == EventKind::ProjectT);
    CHECK(next.amplitudes()(kIndexS) == Complex(0.0));
    CHECK(next.amplitudes()(kIndexT) == Complex(1.0));
  }

  SECTION("jones-hore: five weights add to one for any state") {
    const RatePair rates{1.0, 0.5};
    const PureState psi = PureState::coherent_st(kBasis2);
    const double qs = std::norm(psi.amplitudes()(0));
    const double qt = std::norm(psi.amplitudes()(1));
    const double total = (1.0 - rates.k_s * dt - rates.k_t * dt) +
                         rates.k_s * qs * dt + rates.k_s * qt * dt +
                         rates.k_t * qt * dt + rates.k_t * qs * dt;
    CHECK_THAT(total, WithinAbs(1.0, 1e-15));
  }

  SECTION("kominis: removal, collapse, or nothing") {
    const ModelSpec model{kBasis2, {0.0, 0.0}, {1.0, 0.0}};
    const PureState psi = PureState::coherent_st(kBasis2);
    const double p_r = 0.5 * dt;
    CHECK(step_kominis(psi, model, dt, p_r - 1e-9).second.kind ==
          EventKind::KominisRemove);
    const auto [s_state, s_event] = step_kominis(psi, model, dt, p_r + 1e-9);
    CHECK(s_event.kind == EventKind::ProjectS);
    CHECK(s_state.amplitudes()(kIndexS) == Complex(1.0));
    const double c2 = p_r + (1.0 - p_r) * dt / 4.0;
    CHECK(step_kominis(psi, model, dt, c2 + 1e-9).second.kind == EventKind::ProjectT);
    const auto [n_state, n_event] = step_kominis(psi, model, dt, 0.9);
    CHECK(n_event.kind == EventKind::NoJump);
    // no decay and H = 0: the no-event branch leaves the state untouched
    CHECK(max_abs_diff(n_state.amplitudes(), psi.amplitudes()) <= 1e-15);
  }

  SECTION("kominis scheme rejects a reactive triplet channel") {
    const ModelSpec model{kBasis2, {0.0, 0.0}, {1.0, 0.5}};
    CHECK_THROWS_AS(step_kominis(PureState::coherent_st(kBasis2), model, dt, 0.5),
                    std::invalid_argument);
  }
}

TEST_CASE("spin selectivity over simulated events") {
  // walk trajectories manually and record every event together with the
  // pre-step populations
  const ModelSpec model{kBasis2, {0.0, 0.0}, {1.0, 0.7}};
  const detail::StepContext ctx = detail::make_step_context(SchemeKind::JonesHore, model, 1e-3);
  long events_seen = 0;
  for (long t = 0; t < 64; ++t) {
    TrajectoryRng rng(97, static_cast<std::uint64_t>(t));
    Vec psi = PureState::coherent_st(kBasis2).amplitudes();
    for (int k = 0; k < 4000; ++k) {
      const double qs = std::norm(psi(kIndexS));
      const double qt = std::norm(psi(kIndexT));
      const EventKind kind = detail::core_step(ctx, psi, rng.uniform01());
      if (kind == EventKind::SingletProduct) CHECK(qs > 0.0);
      if (kind == EventKind::TripletProduct) CHECK(qt > 0.0);
      if (kind != EventKind::NoJump) ++events_seen;
      if (is_terminal(kind)) break;
    }
  }
  CHECK(events_seen > 0);
}

TEST_CASE("ensembles") {
  SECTION("pure singlet decay matches the analytic yield") {
    const ModelSpec model{kBasis2, {0.0, 0.0}, {1.0, 0.0}};
    const long n = 20000;
    const auto ens = run_ensemble(SchemeKind::Traditional, model,
                                  PureState::basis_state(kBasis2, kIndexS), n, 10.0,
                                  1e-3, 1234, 100);
    const double expected = 1.0 - std::exp(-10.0);
    const double sigma = std::sqrt(expected * (1.0 - expected) / n) + 1e-7;
    CHECK(std::abs(ens.singlet_yield - expected) <= 3.0 * sigma + 6e-4);
    CHECK(ens.triplet_count == 0);
    CHECK(ens.singlet_count + ens.triplet_count + ens.survivor_count == n);
    // survival curve at t = 1
    const std::size_t idx = 10;  // records every 0.1
    CHECK_THAT(ens.times[idx], WithinAbs(1.0, 1e-12));
    const double surv = ens.mean_rho[idx].trace().real();
    const double sigma1 = std::sqrt(std::exp(-1.0) * (1 - std::exp(-1.0)) / n);
    CHECK(std::abs(surv - std::exp(-1.0)) <= 3.0 * sigma1 + 1e-3);
  }

  SECTION("identical seed and parameters reproduce bit-identical results") {
    const ModelSpec model{kBasis2, {0.0, 0.3}, {1.0, 0.5}};
    const PureState psi0 = PureState::basis_state(kBasis2, kIndexS);
    const auto a = run_ensemble(SchemeKind::JonesHore, model, psi0, 3000, 2.0, 1e-3,
                                777, 20, 1);
    const auto b = run_ensemble(SchemeKind::JonesHore, model, psi0, 3000, 2.0, 1e-3,
                                777, 20, 2);
    const auto c = run_ensemble(SchemeKind::JonesHore, model, psi0, 3000, 2.0, 1e-3,
                                777, 20, 1);
    REQUIRE(a.mean_rho.size() == b.mean_rho.size());
    CHECK(a.singlet_count == b.singlet_count);
    CHECK(a.triplet_count == b.triplet_count);
    CHECK(a.survivor_count == b.survivor_count);
    CHECK(a.singlet_count == c.singlet_count);
    for (std::size_t k = 0; k < a.mean_rho.size(); ++k) {
      CHECK(max_abs_diff(a.mean_rho[k], b.mean_rho[k]) == 0.0);
      CHECK(max_abs_diff(a.mean_rho[k], c.mean_rho[k]) == 0.0);
      CHECK(a.mean_ps[k] == b.mean_ps[k]);
      CHECK(a.se_ps[k] == b.se_ps[k]);
    }
  }

  SECTION("mean state starts with unit trace") {
    const ModelSpec model{kBasis2, {0.2, 0.1}, {0.8, 0.3}};
    const auto ens = run_ensemble(SchemeKind::Traditional, model,
                                  PureState::coherent_st(kBasis2), 500, 1.0, 1e-3, 5, 50);
    CHECK_THAT(ens.mean_rho.front().trace().real(), WithinAbs(1.0, 1e-12));
    CHECK(ens.singlet_count + ens.triplet_count + ens.survivor_count == 500);
  }

  SECTION("eigenstate start makes both schemes plain exponential decay") {
    const ModelSpec model{kBasis2, {0.0, 0.0}, {1.0, 0.0}};
    const PureState psi0 = PureState::basis_state(kBasis2, kIndexS);
    const long n = 10000;
    const double expected = 1.0 - std::exp(-6.0);
    const double sigma = std::sqrt(expected * (1.0 - expected) / n);
    const auto trad = run_ensemble(SchemeKind::Traditional, model, psi0, n, 6.0, 1e-3,
                                   31, 100);
    const auto jh = run_ensemble(SchemeKind::JonesHore, model, psi0, n, 6.0, 1e-3,
                                 32, 100);
    CHECK(std::abs(trad.singlet_yield - expected) <= 3.0 * sigma + 4e-3);
    CHECK(std::abs(jh.singlet_yield - expected) <= 3.0 * sigma + 4e-3);
  }

  SECTION("ensemble mean follows the matching master equation") {
    const ModelSpec model{kBasis2, {0.0, 0.3}, {1.0, 0.5}};
    const PureState psi0 = PureState::basis_state(kBasis2, kIndexS);
    const long n = 4000;
    const auto ode_h = integrate(TheorySelector::Haberkorn, model, psi0.projector(),
                                 2.0, 1e-3);
    const auto ode_j = integrate(TheorySelector::JonesHore, model, psi0.projector(),
                                 2.0, 1e-3);
    const auto mc_h = run_ensemble(SchemeKind::Traditional, model, psi0, n, 2.0, 1e-3,
                                   808, 1);
    const auto mc_j = run_ensemble(SchemeKind::JonesHore, model, psi0, n, 2.0, 1e-3,
                                   809, 1);
    long ok_h = 0, ok_j = 0, total = 0;
    for (std::size_t k = 0; k < mc_h.times.size(); k += 50) {
      ++total;
      const auto pops_h = populations(ode_h.states[k].matrix(), kQs, kQt);
      const auto pops_j = populations(ode_j.states[k].matrix(), kQs, kQt);
      if (std::abs(mc_h.mean_ps[k] - pops_h.p_s) <= 4.0 * mc_h.se_ps[k] + 1e-3 &&
          std::abs(mc_h.mean_pt[k] - pops_h.p_t) <= 4.0 * mc_h.se_pt[k] + 1e-3)
        ++ok_h;
      if (std::abs(mc_j.mean_ps[k] - pops_j.p_s) <= 4.0 * mc_j.se_ps[k] + 1e-3 &&
          std::abs(mc_j.mean_pt[k] - pops_j.p_t) <= 4.0 * mc_j.se_pt[k] + 1e-3)
        ++ok_j;
    }
    CHECK(ok_h >= total * 9 / 10);
    CHECK(ok_j >= total * 9 / 10);
  }

  SECTION("kominis: dark triplet start never reacts") {
    const ModelSpec model{kBasis2, {0.0, 0.0}, {1.0, 0.0}};
    const auto ens = run_ensemble(SchemeKind::Kominis, model,
                                  PureState::basis_state(kBasis2, kIndexT), 2000, 5.0,
                                  1e-3, 99, 100);
    CHECK(ens.survivor_count == 2000);
    CHECK(ens.singlet_yield == 0.0);
    CHECK_THAT(ens.mean_rho.back()(1, 1).real(), WithinAbs(1.0, 1e-12));
  }

  SECTION("kominis: coherent start approaches the 3/4 singlet yield") {
    const ModelSpec model{kBasis2, {0.0, 0.0}, {1.0, 0.0}};
    const auto ens = run_ensemble(SchemeKind::Kominis, model,
                                  PureState::coherent_st(kBasis2), 20000, 20.0, 1e-3,
                                  2024, 1000);
    CHECK(std::abs(ens.singlet_yield - 0.75) < 0.02);
    CHECK(std::abs(ens.survival_fraction - 0.25) < 0.02);
    // survivors are pure triplet
    const Mat tail = ens.mean_rho.back();
    CHECK_THAT(tail(0, 0).real(), WithinAbs(0.0, 1e-12));
    CHECK_THAT(tail(1, 1).real(), WithinAbs(ens.survival_fraction, 1e-12));
  }
}

TEST_CASE("kominis yield series") {
  SECTION("converges to three quarters") {
    CHECK_THAT(kominis_yield_series(1.0, 1e-4, 1000000), WithinAbs(0.75, 1e-3));
  }
  SECTION("finer steps land closer") {
    const double coarse = std::abs(kominis_yield_series(1.0, 1e-4, 1000000) - 0.75);
    const double fine = std::abs(kominis_yield_series(1.0, 1e-5, 10000000) - 0.75);
    CHECK(fine < coarse);
  }
  SECTION("single term is three quarters of one step's reaction weight") {
    CHECK_THAT(kominis_yield_series(1.0, 1e-4, 1), WithinRel(0.75 * 1e-4, 1e-3));
  }
  SECTION("preconditions") {
    CHECK_THROWS_AS(kominis_yield_series(1.0, 0.5, 100), std::invalid_argument);
    CHECK_THROWS_AS(kominis_yield_series(1.0, 1e-4, 0), std::invalid_argument);
  }
}

TEST_CASE("four-level reaction model") {
  const RatePair rates{1.0, 0.5};
  const Mat h4 = build_hamiltonian({0.6, 0.3}, BasisSpec::four_level());

  SECTION("trace preserving on random states") {
    TrajectoryRng rng(41, 0);
    for (int i = 0; i < 100; ++i) {
      Mat g(4, 4);
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
          g(r, c) = Complex(2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0);
      Mat rho = g * g.adjoint();
      rho /= rho.trace().real();
      CHECK(std::abs(four_level_rhs(rho, h4, rates).trace()) <= 1e-12);
    }
  }

  SECTION("radical-pair block reduces to the dephasing theory") {
    TrajectoryRng rng(41, 1);
    const Mat q_s2 = singlet_projector(kBasis2);
    const Mat q_t2 = triplet_projector(kBasis2);
    const Mat h2 = build_hamiltonian({0.6, 0.3}, kBasis2);
    for (int i = 0; i < 50; ++i) {
      Mat g(2, 2);
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
          g(r, c) = Complex(2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0);
      Mat st = g * g.adjoint();
      st /= 2.0 * st.trace().real();  // keep room for shelf population
      Mat rho4 = Mat::Zero(4, 4);
      rho4.topLeftCorner(2, 2) = st;
      rho4(2, 2) = 0.25;
      rho4(3, 3) = 0.25;
      const Mat full = four_level_rhs(rho4, h4, rates);
      const Mat block = full.topLeftCorner(2, 2);
      CHECK(max_abs_diff(block, rhs_jones_hore(st, h2, rates, q_s2, q_t2)) <= 1e-12);
    }
  }

  SECTION("pure singlet feeds its shelf state at the singlet rate") {
    Mat rho4 = Mat::Zero(4, 4);
    rho4(kIndexS, kIndexS) = 1.0;
    const Mat rhs = four_level_rhs(rho4, Mat::Zero(4, 4), {1.0, 0.0});
    CHECK_THAT(rhs(kIndexS0, kIndexS0).real(), WithinAbs(1.0, 1e-15));
    CHECK_THAT(rhs(kIndexS, kIndexS).real(), WithinAbs(-1.0, 1e-15));
    CHECK_THAT(rhs(kIndexT0, kIndexT0).real(), WithinAbs(0.0, 1e-15));
  }
}
