import math

import numpy as np
import pytest
from chistats import chisquare_two_sample
from scipy import stats
from scipy.integrate import quad

import statmc.ecmc as ecmc_mod
from statmc import RateBoundError
from statmc.disk_samplers import DiskChainState, smooth_particle_metropolis_step
from statmc.dynamics import IntegratorSpec, langevin_overdamped_step, particle_target
from statmc.ecmc import SmoothEventChain, ecmc_smooth_run, factorized_filter_accept, new_smooth_event_chain
from statmc.particles import LennardJones, ParticleSpec, SoftDisk, pair_energy_derivative
from statmc.torus import Torus, min_sep_distance


def lj_spec(side=12.0, cutoff=None, beta=1.0):
    return ParticleSpec(torus=Torus((side, side)), n=2,
                        potential=LennardJones(1.0, 1.0, cutoff=cutoff), beta=beta)


def test_factorized_filter_certain_cases():
    rng = np.random.default_rng(0)
    assert factorized_filter_accept([0.0, 0.0, 0.0], beta=2.0, rng=rng)
    assert factorized_filter_accept([-5.0, -1.0], beta=2.0, rng=rng)
    with pytest.raises(ValueError):
        factorized_filter_accept([math.inf], beta=1.0, rng=rng)


def test_factorized_filter_product_probability():
    rng = np.random.default_rng(1)
    beta = 1.0
    delta = math.log(2.0)
    hits = sum(factorized_filter_accept([delta, delta], beta, rng) for _ in range(40_000))
    se = math.sqrt(0.25 * 0.75 / 40_000)
    assert hits / 40_000 == pytest.approx(0.25, abs=4 * se)


def test_factorized_filter_single_factor_is_metropolis():
    rng = np.random.default_rng(2)
    beta, delta = 0.7, 0.9
    target = math.exp(-beta * delta)
    hits = sum(factorized_filter_accept([delta], beta, rng) for _ in range(40_000))
    se = math.sqrt(target * (1 - target) / 40_000)
    assert hits / 40_000 == pytest.approx(target, abs=4 * se)


def test_receding_soft_disk_never_fires():
    # Moving directly away from a purely repulsive partner is downhill all the
    # way: zero events, full ballistic travel.
    spec = ParticleSpec(torus=Torus((40.0, 40.0)), n=2,
                        potential=SoftDisk(1.0, 12, 1.0), beta=1.0)
    rng = np.random.default_rng(3)
    state = DiskChainState(np.array([[22.0, 20.0], [20.0, 20.0]]), rng)
    chain = SmoothEventChain(active=0, velocity=np.array([1.0, 0.0]),
                             to_refresh=math.inf, refresh_rate=1e-12)
    events = ecmc_smooth_run(state, chain, spec, duration=5.0)
    assert events == 0
    np.testing.assert_allclose(state.positions[0], [27.0, 20.0], atol=1e-12)


def test_straight_chain_keeps_velocity():
    spec = lj_spec(beta=2.0)
    rng = np.random.default_rng(4)
    state = DiskChainState(np.array([[3.0, 6.0], [6.0, 6.0]]), rng)
    chain = SmoothEventChain(active=0, velocity=np.array([1.0, 0.0]),
                             to_refresh=math.inf, refresh_rate=1e-12)
    events = ecmc_smooth_run(state, chain, spec, duration=2.4)
    assert events >= 1
    assert chain.active in (0, 1)
    np.testing.assert_allclose(chain.velocity, [1.0, 0.0])


def test_first_event_time_matches_integrated_rate():
    # Head-on approach from r = 2.2: the rate is beta * max(0, -u'(r)) along
    # r(t) = 2.2 - t.  The integrated hazard at the drawn first-event time
    # must be Exp(1).
    beta = 0.8
    spec = lj_spec(beta=beta)

    def hazard(t):
        return beta * max(0.0, -pair_energy_derivative(2.2 - t, spec))

    draws = []
    for seed in range(2500):
        rng = np.random.default_rng(10_000 + seed)
        state = DiskChainState(np.array([[4.0, 6.0], [6.2, 6.0]]), rng)
        chain = SmoothEventChain(active=0, velocity=np.array([1.0, 0.0]),
                                 to_refresh=math.inf, refresh_rate=1e-12)
        log = []
        ecmc_smooth_run(state, chain, spec, duration=1.35, event_log=log)
        if not log:
            continue
        t_first = log[0][0]
        lam, _ = quad(hazard, 0.0, t_first, limit=300)
        draws.append(lam)
    # Events past duration 1.35 (r < 0.85) are astronomically unlikely.
    assert len(draws) > 2400
    assert stats.kstest(draws, "expon").pvalue > 1e-3


def test_stationary_pair_distance_matches_overdamped_langevin():
    spec = lj_spec(side=6.0, beta=1.0)
    target = particle_target(spec)
    rng = np.random.default_rng(5)

    x = np.array([[1.0, 1.0], [2.2, 1.0]])
    integ = IntegratorSpec(step=0.05)
    lang = np.empty(6000)
    for _ in range(300):
        x = langevin_overdamped_step(x, target, integ, rng)
    for k in range(6000):
        for _ in range(6):
            x = langevin_overdamped_step(x, target, integ, rng)
        lang[k] = min_sep_distance(x[0], x[1], spec.torus)

    rng2 = np.random.default_rng(6)
    state = DiskChainState(np.array([[1.0, 1.0], [2.2, 1.0]]), rng2)
    chain = new_smooth_event_chain(spec, rng2, refresh_rate=0.5)
    ec = np.empty(6000)
    for k in range(6000):
        ecmc_smooth_run(state, chain, spec, duration=3.0)
        ec[k] = min_sep_distance(state.positions[0], state.positions[1], spec.torus)

    edges = np.linspace(0.85, spec.torus.max_separation, 18)
    p = chisquare_two_sample(np.histogram(lang, edges)[0], np.histogram(ec, edges)[0])
    assert p > 1e-3


def test_truncated_potential_shell_events_match_metropolis():
    # With a finite cutoff the tail jump concentrates at the shell; the
    # stationary distribution keeps a density step there that the shell
    # events must reproduce.
    spec = lj_spec(side=6.0, cutoff=2.0, beta=1.5)
    rng = np.random.default_rng(7)
    st = DiskChainState(np.array([[1.0, 1.0], [2.2, 1.0]]), rng)
    met = np.empty(8000)
    for _ in range(500):
        smooth_particle_metropolis_step(st, spec, 0.7)
    for k in range(8000):
        for _ in range(8):
            smooth_particle_metropolis_step(st, spec, 0.7)
        met[k] = min_sep_distance(st.positions[0], st.positions[1], spec.torus)

    rng2 = np.random.default_rng(8)
    state = DiskChainState(np.array([[1.0, 1.0], [2.2, 1.0]]), rng2)
    chain = new_smooth_event_chain(spec, rng2, refresh_rate=0.5)
    ec = np.empty(8000)
    for k in range(8000):
        ecmc_smooth_run(state, chain, spec, duration=3.0)
        ec[k] = min_sep_distance(state.positions[0], state.positions[1], spec.torus)

    edges = np.linspace(0.85, spec.torus.max_separation, 18)
    p = chisquare_two_sample(np.histogram(met, edges)[0], np.histogram(ec, edges)[0])
    assert p > 1e-3


def test_rate_bound_violation_is_loud(monkeypatch):
    spec = lj_spec(beta=1.0)
    monkeypatch.setattr(ecmc_mod, "_abs_derivative_bound",
                        lambda r_lo, r_hi, s: 0.05 * abs(pair_energy_derivative(r_lo, s)))
    rng = np.random.default_rng(9)
    state = DiskChainState(np.array([[4.0, 6.0], [6.0, 6.0]]), rng)
    chain = SmoothEventChain(active=0, velocity=np.array([1.0, 0.0]),
                             to_refresh=math.inf, refresh_rate=1e-12)
    with pytest.raises(RateBoundError):
        ecmc_smooth_run(state, chain, spec, duration=1.5)
