import numpy as np
import pytest
from chistats import chisquare_two_sample

from statmc import DegeneracyError
from statmc.disk_samplers import (
    DiskChainState, DiskEventChain, ecmc_hard_disk_run, hard_disk_metropolis_step,
    jaster_step, new_disk_event_chain,
)
from statmc.particles import (
    HardDisk, ParticleSpec, hard_disk_valid, hexagonal_config,
    random_valid_hard_disk_config, torus_for_density,
)
from statmc.torus import Torus, min_sep_distance


class FakeRng:
    """Deterministic stand-in feeding scripted draws to a sampler step."""

    def __init__(self, integers=(), uniforms=()):
        self._integers = list(integers)
        self._uniforms = list(uniforms)

    def integers(self, *args, **kwargs):
        return self._integers.pop(0)

    def uniform(self, low, high, size=None):
        return np.asarray(self._uniforms.pop(0))


def spec_for(n, eta, sigma=1.0):
    return ParticleSpec(torus=torus_for_density(n, sigma, eta), n=n, potential=HardDisk(sigma))


def pair_distance_samples(state_factory, stepper, spec, n_samples, thin):
    st = state_factory()
    out = np.empty(n_samples)
    for k in range(n_samples):
        for _ in range(thin):
            stepper(st)
        out[k] = min_sep_distance(st.positions[0], st.positions[1], spec.torus)
    return out


def test_metropolis_accepts_and_rejects_exactly_on_overlap():
    spec = ParticleSpec(torus=Torus((10.0, 10.0)), n=2, potential=HardDisk(1.0))
    pos = np.array([[2.0, 5.0], [6.0, 5.0]])
    # Scripted move right by 1.5: lands at distance 2.5 > 2 -> accept.
    st = DiskChainState(pos.copy(), FakeRng(integers=[0], uniforms=[[1.5, 0.0]]))
    assert hard_disk_metropolis_step(st, spec, 2.0)
    np.testing.assert_allclose(st.positions[0], [3.5, 5.0])
    # Scripted move right by 2.5: lands at distance 1.5 -> reject, unchanged.
    st = DiskChainState(pos.copy(), FakeRng(integers=[0], uniforms=[[2.5, 0.0]]))
    assert not hard_disk_metropolis_step(st, spec, 3.0)
    np.testing.assert_allclose(st.positions, pos)
    assert st.rejections == 1


def test_metropolis_preserves_validity():
    rng = np.random.default_rng(0)
    spec = spec_for(9, 0.5)
    st = DiskChainState(hexagonal_config(9, spec.torus), rng)
    for _ in range(500):
        hard_disk_metropolis_step(st, spec, 0.4)
    assert hard_disk_valid(st.positions, spec)


def test_metropolis_two_disk_distribution_matches_rejection_oracle():
    spec = spec_for(2, 0.2)
    side = spec.torus.side_lengths[0]
    rng = np.random.default_rng(7)

    def factory():
        return DiskChainState(random_valid_hard_disk_config(spec, rng), rng)

    samples = pair_distance_samples(
        factory, lambda st: hard_disk_metropolis_step(st, spec, 0.8 * side / 2), spec, 4000, 12)
    oracle_rng = np.random.default_rng(8)
    oracle = np.array([
        min_sep_distance(*random_valid_hard_disk_config(spec, oracle_rng), spec.torus)
        for _ in range(4000)])
    edges = np.linspace(2.0, spec.torus.max_separation, 16)
    p = chisquare_two_sample(np.histogram(samples, edges)[0], np.histogram(oracle, edges)[0])
    assert p > 1e-3


def test_jaster_single_stage_is_metropolis_accept():
    spec = ParticleSpec(torus=Torus((10.0, 10.0)), n=2, potential=HardDisk(1.0))
    pos = np.array([[2.0, 5.0], [6.0, 5.0]])
    st = DiskChainState(pos.copy(), FakeRng(integers=[0], uniforms=[[1.5, 0.0]]))
    assert jaster_step(st, spec, 2.0)
    np.testing.assert_allclose(st.positions[0], [3.5, 5.0])


def test_jaster_chains_single_overlap():
    spec = ParticleSpec(torus=Torus((20.0, 20.0)), n=3, potential=HardDisk(1.0))
    pos = np.array([[2.0, 10.0], [5.0, 10.0], [14.0, 10.0]])
    # Move disk 0 right by 2: overlaps only disk 1 (distance 1), which then
    # moves by the same displacement to 7 and is free.
    st = DiskChainState(pos.copy(), FakeRng(integers=[0], uniforms=[[2.0, 0.0]]))
    assert jaster_step(st, spec, 3.0)
    np.testing.assert_allclose(st.positions[0], [4.0, 10.0])
    np.testing.assert_allclose(st.positions[1], [7.0, 10.0])
    np.testing.assert_allclose(st.positions[2], [14.0, 10.0])


def test_jaster_two_overlaps_rejects_and_restores():
    spec = ParticleSpec(torus=Torus((20.0, 20.0)), n=3, potential=HardDisk(1.0))
    # Disks 1 and 2 flank the landing spot of disk 0: two overlaps at once.
    pos = np.array([[2.0, 10.0], [5.0, 11.0], [5.0, 9.0]])
    st = DiskChainState(pos.copy(), FakeRng(integers=[0], uniforms=[[3.0, 0.0]]))
    assert not jaster_step(st, spec, 4.0)
    np.testing.assert_allclose(st.positions, pos)
    assert st.rejections == 1


def test_jaster_attempt_budget_rejects_and_restores():
    spec = ParticleSpec(torus=Torus((20.0, 20.0)), n=3, potential=HardDisk(1.0))
    pos = np.array([[2.0, 10.0], [5.0, 10.0], [8.0, 10.0]])
    # Each stage overlaps exactly the next disk; budget of 1 cannot finish.
    st = DiskChainState(pos.copy(), FakeRng(integers=[0], uniforms=[[3.0, 0.0]]))
    assert not jaster_step(st, spec, 4.0, max_attempts=1)
    np.testing.assert_allclose(st.positions, pos)


def test_jaster_rejection_never_exceeds_metropolis():
    eta, n = 0.7, 16
    spec = spec_for(n, eta)
    for seed in range(3):
        counts = {}
        for name, stepper in [("metropolis", hard_disk_metropolis_step), ("jaster", jaster_step)]:
            rng = np.random.default_rng(100 + seed)
            st = DiskChainState(hexagonal_config(n, spec.torus), rng)
            for _ in range(4000):
                stepper(st, spec, 0.15)
            counts[name] = st.rejection_fraction
        assert counts["jaster"] <= counts["metropolis"]


def test_ecmc_lifting_event_example():
    spec = ParticleSpec(torus=Torus((20.0, 20.0)), n=2, potential=HardDisk(1.0))
    st = DiskChainState(np.array([[0.0, 0.0], [5.0, 0.0]]), np.random.default_rng(0))
    chain = DiskEventChain(active=0, velocity=np.array([1.0, 0.0]), mode="xy_fixed",
                           parameter=100.0, to_refresh=100.0)
    events = ecmc_hard_disk_run(st, chain, spec, duration=3.1)
    assert events == 1
    assert chain.active == 1
    np.testing.assert_allclose(st.positions[0], [3.0, 0.0], atol=1e-12)
    # Straight event chain: velocity unchanged by the lift.
    np.testing.assert_allclose(chain.velocity, [1.0, 0.0])
    assert st.time == pytest.approx(3.1)


def test_ecmc_xy_refresh_swaps_components():
    spec = ParticleSpec(torus=Torus((20.0, 20.0)), n=2, potential=HardDisk(1.0))
    st = DiskChainState(np.array([[0.0, 0.0], [10.0, 10.0]]), np.random.default_rng(0))
    chain = DiskEventChain(active=0, velocity=np.array([1.0, 0.0]), mode="xy_fixed",
                           parameter=2.0, to_refresh=2.0)
    ecmc_hard_disk_run(st, chain, spec, duration=2.5)
    np.testing.assert_allclose(chain.velocity, [0.0, 1.0])


def test_ecmc_degenerate_double_contact():
    spec = ParticleSpec(torus=Torus((20.0, 20.0)), n=3, potential=HardDisk(1.0))
    st = DiskChainState(np.array([[0.0, 0.0], [5.0, 1.2], [5.0, -1.2]]),
                        np.random.default_rng(0))
    chain = DiskEventChain(active=0, velocity=np.array([1.0, 0.0]), mode="xy_fixed",
                           parameter=100.0, to_refresh=100.0)
    with pytest.raises(DegeneracyError):
        ecmc_hard_disk_run(st, chain, spec, duration=5.0)


def test_ecmc_xy_poisson_refresh_stays_axis_aligned():
    spec = spec_for(3, 0.3)
    rng = np.random.default_rng(7)
    st = DiskChainState(hexagonal_config(3, spec.torus), rng)
    chain = new_disk_event_chain(spec, rng, mode="xy_poisson", parameter=2.0)
    start_velocity = chain.velocity.copy()
    ecmc_hard_disk_run(st, chain, spec, duration=30.0)
    # Velocity stays one of the two axis vectors through Poisson swaps.
    assert sorted(np.abs(chain.velocity)) == [0.0, 1.0]
    assert hard_disk_valid(st.positions, spec)
    assert chain.to_refresh > 0.0
    assert start_velocity.shape == (2,)


def test_ecmc_unit_speed_time_accounting():
    spec = spec_for(3, 0.3)
    rng = np.random.default_rng(3)
    st = DiskChainState(hexagonal_config(3, spec.torus), rng)
    chain = new_disk_event_chain(spec, rng, mode="uniform", parameter=0.5)
    ecmc_hard_disk_run(st, chain, spec, duration=25.0)
    assert st.time == pytest.approx(25.0, abs=1e-9)
    assert hard_disk_valid(st.positions, spec)


def test_ecmc_matches_metropolis_pair_distance():
    spec = spec_for(2, 0.3)
    rng = np.random.default_rng(11)
    side = spec.torus.side_lengths[0]

    st_m = DiskChainState(random_valid_hard_disk_config(spec, rng), rng)
    met = pair_distance_samples(lambda: st_m,
                                lambda st: hard_disk_metropolis_step(st, spec, side / 3),
                                spec, 5000, 10)

    rng2 = np.random.default_rng(12)
    st_e = DiskChainState(random_valid_hard_disk_config(spec, rng2), rng2)
    chain = new_disk_event_chain(spec, rng2, mode="uniform", parameter=1.0)
    ecmc = np.empty(5000)
    for k in range(5000):
        ecmc_hard_disk_run(st_e, chain, spec, duration=side / 2)
        ecmc[k] = min_sep_distance(st_e.positions[0], st_e.positions[1], spec.torus)

    edges = np.linspace(2.0, spec.torus.max_separation, 16)
    p = chisquare_two_sample(np.histogram(met, edges)[0], np.histogram(ecmc, edges)[0])
    assert p > 1e-3
