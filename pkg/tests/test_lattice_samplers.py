import math

import numpy as np
import pytest
from chistats import chisquare_vs_probs, thin_by_iat
from scipy import stats
from scipy.integrate import quad

from statmc import UnsupportedModelError
from statmc.exact import enumerate_exact, state_index
from statmc.lattice import ISING, POTTS, XY, LatticeSpec, lattice_energy, magnetic_density, ordered_config, random_config
from statmc.lattice_samplers import (
    LatticeChainState, XYEventChainState, _xy_event_time, bond_probability, ecmc_xy_run,
    glauber_acceptance, glauber_sweeps, metropolis_acceptance, metropolis_sweeps,
    new_xy_event_chain, sample_bond_field, swendsen_wang_step, wolff_step, xy_factor_rate,
)


def chain(spec, seed, start="random"):
    rng = np.random.default_rng(seed)
    spins = random_config(spec, rng) if start == "random" else ordered_config(spec)
    return LatticeChainState(spins=spins, rng=rng)


def test_acceptance_rule_values():
    assert metropolis_acceptance(0.0) == 1.0
    assert metropolis_acceptance(math.log(2.0)) == pytest.approx(0.5)
    assert glauber_acceptance(0.0) == pytest.approx(0.5)
    assert glauber_acceptance(math.log(3.0)) == pytest.approx(0.25)


def test_glauber_below_metropolis_everywhere():
    for bd in np.linspace(-6, 6, 101):
        if bd == 0.0:
            assert glauber_acceptance(bd) == pytest.approx(0.5 * metropolis_acceptance(bd))
        else:
            assert glauber_acceptance(bd) < metropolis_acceptance(bd)


def test_glauber_matches_conditional_distribution():
    # Accepting a flip with the Barker rule equals drawing the site's spin
    # from its conditional Boltzmann law given the neighbor sum.
    beta, j_c, h = 0.8, 1.0, 0.3
    for nsum in range(-4, 5):
        for s in (-1, 1):
            delta = 2.0 * j_c * s * nsum + 2.0 * h * s
            p_flip = glauber_acceptance(beta * delta)
            w_new = math.exp(beta * (-s) * (j_c * nsum + h))
            w_old = math.exp(beta * s * (j_c * nsum + h))
            assert p_flip == pytest.approx(w_new / (w_new + w_old), rel=1e-12)


def run_chain_counts(spec, stepper, n_records, seed, start="random", burn=200):
    """Record state indices and the magnetic density trace."""
    st = chain(spec, seed, start)
    stepper(st, burn)
    ids = np.empty(n_records, dtype=np.int64)
    m_trace = np.empty(n_records)
    for k in range(n_records):
        stepper(st, 1)
        ids[k] = state_index(st.spins, spec)
        m_trace[k] = magnetic_density(st.spins, spec)
    return ids, m_trace


def state_chisquare(spec, ids, m_trace):
    ens = enumerate_exact(spec)
    thin = thin_by_iat(m_trace, ids)
    counts = np.bincount(thin, minlength=ens.n_states)
    return chisquare_vs_probs(counts, ens.probabilities)


@pytest.mark.parametrize("kind", ["metropolis", "glauber"])
def test_single_flip_stationarity_2x2(kind):
    spec = LatticeSpec(dims=(2, 2), model=ISING, beta=0.4)
    stepper = (lambda st, n: metropolis_sweeps(st, spec, n)) if kind == "metropolis" \
        else (lambda st, n: glauber_sweeps(st, spec, n))
    ids, m = run_chain_counts(spec, stepper, 40_000, seed=101)
    assert state_chisquare(spec, ids, m) > 1e-3


def test_metropolis_systematic_scan_stationarity():
    # At zero field the 2x2 torus makes parts of a deterministic sweep
    # certain (every Delta U = 0 proposal is accepted), so the systematic-scan
    # chain is not ergodic there.  A field removes the degeneracy.
    spec = LatticeSpec(dims=(2, 2), model=ISING, beta=0.4, field=0.3)
    ids, m = run_chain_counts(
        spec, lambda st, n: metropolis_sweeps(st, spec, n, systematic=True), 40_000, seed=7)
    assert state_chisquare(spec, ids, m) > 1e-3


def test_potts_metropolis_stationarity():
    spec = LatticeSpec(dims=(3,), model=POTTS, beta=0.6, q=3)
    ids, m = run_chain_counts(
        spec, lambda st, n: metropolis_sweeps(st, spec, n), 30_000, seed=3)
    ens = enumerate_exact(spec)
    thin = thin_by_iat(m + np.random.default_rng(0).normal(0, 1e-9, len(m)), ids)
    counts = np.bincount(thin, minlength=ens.n_states)
    assert chisquare_vs_probs(counts, ens.probabilities) > 1e-3


def test_glauber_rejects_non_ising():
    spec = LatticeSpec(dims=(4,), model=POTTS, beta=0.5, q=3)
    with pytest.raises(UnsupportedModelError):
        glauber_sweeps(chain(spec, 0), spec)


def test_bond_field_respects_alignment():
    spec = LatticeSpec(dims=(4, 4), model=ISING, beta=0.6)
    st = chain(spec, 5)
    for _ in range(20):
        edges, bonds = sample_bond_field(st.spins, spec, st.rng)
        aligned = st.spins[edges[:, 0]] == st.spins[edges[:, 1]]
        assert np.all(bonds <= aligned)
        metropolis_sweeps(st, spec, 1)


def test_bond_probability_value():
    spec = LatticeSpec(dims=(2, 2), model=ISING, beta=0.5)
    assert bond_probability(spec, False) == 0.0
    assert bond_probability(spec, True) == pytest.approx(1 - math.exp(-1.0), rel=1e-12)
    # Empirical activation frequency for an aligned pair.
    rng = np.random.default_rng(2)
    spins = np.ones(4, dtype=np.int64)
    hits = sum(sample_bond_field(spins, spec, rng)[1].sum() for _ in range(2000))
    total = 2000 * 8
    p_hat = hits / total
    assert p_hat == pytest.approx(1 - math.exp(-1.0), abs=4 * math.sqrt(0.63 * 0.37 / total))


def test_swendsen_wang_stationarity_2x2():
    spec = LatticeSpec(dims=(2, 2), model=ISING, beta=0.5)
    ids, m = run_chain_counts(spec, lambda st, n: [swendsen_wang_step(st, spec) for _ in range(n)],
                              40_000, seed=11)
    assert state_chisquare(spec, ids, m) > 1e-3


def test_swendsen_wang_rejects_field():
    spec = LatticeSpec(dims=(2, 2), model=ISING, beta=0.5, field=0.2)
    with pytest.raises(UnsupportedModelError):
        swendsen_wang_step(chain(spec, 0), spec)


@pytest.mark.parametrize("path", ["scalar", "vector"])
def test_wolff_stationarity_2x2(path):
    spec = LatticeSpec(dims=(2, 2), model=ISING, beta=0.4407)
    ids, m = run_chain_counts(
        spec, lambda st, n: [wolff_step(st, spec, force_path=path) for _ in range(n)],
        40_000, seed=13)
    assert state_chisquare(spec, ids, m) > 1e-3


def test_wolff_high_temperature_single_site():
    spec = LatticeSpec(dims=(8, 8), model=ISING, beta=1e-9)
    st = chain(spec, 1)
    sizes = [wolff_step(st, spec) for _ in range(200)]
    assert max(sizes) <= 2


def test_wolff_low_temperature_flips_everything():
    spec = LatticeSpec(dims=(8, 8), model=ISING, beta=50.0)
    st = chain(spec, 1, start="ordered")
    assert magnetic_density(st.spins, spec) == 1.0
    size = wolff_step(st, spec)
    assert size == 64
    assert magnetic_density(st.spins, spec) == -1.0


def test_wolff_and_sw_agree_on_16x16():
    spec = LatticeSpec(dims=(16, 16), model=ISING, beta=0.44)
    means = []
    for stepper in (lambda st: wolff_step(st, spec), lambda st: swendsen_wang_step(st, spec)):
        st = chain(spec, 21)
        for _ in range(300):
            stepper(st)
        vals = []
        for _ in range(3000):
            stepper(st)
            vals.append(abs(magnetic_density(st.spins, spec)))
        vals = np.asarray(vals)
        tau = max(1.0, 2.0)
        se = vals.std(ddof=1) / math.sqrt(len(vals) / 4.0)
        means.append((vals.mean(), se))
    (m1, s1), (m2, s2) = means
    assert abs(m1 - m2) < 3.0 * math.hypot(s1, s2)


def test_specific_heat_estimator_matches_enumeration_for_every_kernel():
    from statmc.exact import enumerate_exact
    from statmc.lattice import lattice_energy
    from statmc.observables import batch_mean_error

    spec = LatticeSpec(dims=(2, 2), model=ISING, beta=0.4)
    exact_heat = enumerate_exact(spec).specific_heat
    steppers = {
        "metropolis": lambda st: metropolis_sweeps(st, spec, 1),
        "glauber": lambda st: glauber_sweeps(st, spec, 1),
        "swendsen_wang": lambda st: swendsen_wang_step(st, spec),
        "wolff": lambda st: wolff_step(st, spec),
    }
    for name, stepper in steppers.items():
        st = chain(spec, 31)
        for _ in range(500):
            stepper(st)
        energies = np.empty(30_000)
        for k in range(30_000):
            stepper(st)
            energies[k] = lattice_energy(st.spins, spec)
        heats = [spec.beta**2 * np.var(b, ddof=1) for b in np.array_split(energies, 30)]
        mean, se = batch_mean_error(heats, n_batches=30)
        assert abs(mean - exact_heat) < 3.5 * se, f"{name}: {mean} +- {se} vs {exact_heat}"


def test_xy_metropolis_acceptance_near_paper_regime():
    # Default 1-radian step at the low-temperature study point.
    spec = LatticeSpec(dims=(16, 16), model=XY, beta=2.0)
    st = chain(spec, 8, start="ordered")
    metropolis_sweeps(st, spec, 50)
    acc = metropolis_sweeps(st, spec, 100)
    assert 0.4 < acc < 0.7


def test_sweep_advances_time_units():
    spec = LatticeSpec(dims=(4, 4), model=ISING, beta=0.3)
    st = chain(spec, 0)
    metropolis_sweeps(st, spec, 5)
    assert st.time == 5
    wolff_step(st, spec)
    assert st.time == 6


# ---------------------------------------------------------------------------
# Event-chain XY
# ---------------------------------------------------------------------------

def test_xy_factor_rate_example():
    spec = LatticeSpec(dims=(2,), model=XY, beta=0.9, coupling=1.3)
    assert xy_factor_rate(math.pi / 2, 1, spec) == pytest.approx(0.9 * 1.3)
    assert xy_factor_rate(-math.pi / 2, 1, spec) == 0.0


def test_xy_event_time_never_fires_downhill():
    # Starting past the crest, the factor cannot fire before reaching the trough.
    for th in np.linspace(math.pi, 2 * math.pi - 1e-6, 25):
        t = _xy_event_time(th, 1.0, budget=1e-9)
        assert t >= (2 * math.pi - th) - 1e-12


def test_xy_event_time_matches_integrated_rate():
    # Survival check: Lambda(T) at the drawn event time must be Exp(1),
    # with Lambda computed by numerical quadrature of the positive rate part.
    rng = np.random.default_rng(4)
    beta, j_c = 0.7, 1.0
    theta0 = 2.1
    draws = []
    for _ in range(4000):
        budget = rng.standard_exponential() / beta
        t = _xy_event_time(theta0, j_c, budget)
        lam, _ = quad(lambda s: beta * max(0.0, j_c * math.sin(theta0 + s)), 0.0, t, limit=500)
        draws.append(lam)
    p = stats.kstest(draws, "expon").pvalue
    assert p > 1e-3


def test_ecmc_xy_rejects_field_and_models():
    spec = LatticeSpec(dims=(4,), model=XY, beta=1.0, field_xy=(0.1, 0.0))
    st = chain(spec, 0)
    with pytest.raises(UnsupportedModelError):
        ecmc_xy_run(st, new_xy_event_chain(spec, st.rng), spec, 1.0)
    ising = LatticeSpec(dims=(4,), model=ISING, beta=1.0)
    with pytest.raises(UnsupportedModelError):
        ecmc_xy_run(chain(ising, 0), XYEventChainState(0, 1, 1.0, 1.0), ising, 1.0)


def test_ecmc_xy_two_spin_distribution():
    # 2-spin ring: two cosine factors -> pair density ~ exp(2 beta J cos(d)).
    spec = LatticeSpec(dims=(2,), model=XY, beta=1.2)
    st = chain(spec, 42)
    ec = new_xy_event_chain(spec, st.rng)
    samples = []
    for _ in range(6000):
        ecmc_xy_run(st, ec, spec, duration=2.5)
        samples.append((st.spins[0] - st.spins[1]) % (2 * math.pi))
    samples = np.asarray(samples[500:])

    grid = np.linspace(0, 2 * math.pi, 4001)
    dens = np.exp(2 * spec.beta * spec.coupling * np.cos(grid))
    cdf_grid = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2 * np.diff(grid))])
    cdf_grid /= cdf_grid[-1]
    p = stats.kstest(samples, lambda x: np.interp(x, grid, cdf_grid)).pvalue
    assert p > 1e-3


def test_ecmc_conserves_unit_speed():
    spec = LatticeSpec(dims=(4, 4), model=XY, beta=1.0)
    st = chain(spec, 3)
    ec = new_xy_event_chain(spec, st.rng)
    before = st.time
    ecmc_xy_run(st, ec, spec, duration=7.5)
    assert st.time - before == pytest.approx(7.5, abs=1e-9)
