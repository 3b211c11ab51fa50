import numpy as np
import pytest
from chistats import chisquare_vs_probs

from statmc import DegeneracyError
from statmc.dynamics import PhaseState
from statmc.md import md_collide, md_collision_time, md_run, random_velocities
from statmc.particles import HardDisk, ParticleSpec, hard_disk_valid, torus_for_density
from statmc.torus import Torus


def spec_for(n, side, sigma=1.0):
    return ParticleSpec(torus=Torus((side, side)), n=n, potential=HardDisk(sigma))


def test_head_on_collision_time():
    torus = Torus((20.0, 20.0))
    t = md_collision_time([0.0, 0.0], [4.0, 0.0], [1.0, 0.0], [0.0, 0.0], 1.0, torus)
    assert t == pytest.approx(2.0, rel=1e-12)


def test_receding_disks_never_collide():
    torus = Torus((20.0, 20.0))
    assert md_collision_time([0.0, 0.0], [4.0, 0.0], [-1.0, 0.0], [0.0, 0.0], 1.0, torus) is None


def test_grazing_miss_returns_none():
    torus = Torus((20.0, 20.0))
    # Impact parameter 3 > 2 sigma: discriminant negative.
    assert md_collision_time([0.0, 0.0], [8.0, 3.0], [1.0, 0.0], [0.0, 0.0], 1.0, torus) is None


def test_overlapping_input_rejected():
    torus = Torus((20.0, 20.0))
    with pytest.raises(ValueError):
        md_collision_time([0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0], 1.0, torus)


def test_collide_head_on_full_transfer():
    v1, v2 = md_collide([1.0, 0.0], [0.0, 0.0], [-2.0, 0.0], 1.0)
    np.testing.assert_allclose(v1, [0.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(v2, [1.0, 0.0], atol=1e-14)


def test_collide_perpendicular_unchanged():
    v1, v2 = md_collide([0.0, 1.0], [0.0, -1.0], [2.0, 0.0], 1.0)
    np.testing.assert_allclose(v1, [0.0, 1.0])
    np.testing.assert_allclose(v2, [0.0, -1.0])


def test_collide_oblique_equal_mass_example():
    # Two equal-mass disks meeting with contact vector along x: the parallel
    # velocity components swap, the perpendicular ones persist.
    sigma = 0.7
    v1 = np.array([1.0, 1.0 / 3.0])
    v2 = np.array([-0.5, 0.5])
    contact_12 = np.array([-2.0 * sigma, 0.0])  # x_i - x_j at contact
    v1_new, v2_new = md_collide(v1, v2, contact_12, sigma)
    np.testing.assert_allclose(v1_new, [-0.5, 1.0 / 3.0], rtol=1e-12)
    np.testing.assert_allclose(v2_new, [1.0, 0.5], rtol=1e-12)
    # Conservation of momentum and kinetic energy.
    np.testing.assert_allclose(v1_new + v2_new, v1 + v2, rtol=1e-12)
    assert np.sum(v1_new**2 + v2_new**2) == pytest.approx(np.sum(v1**2 + v2**2), rel=1e-12)


def test_collide_requires_contact_norm():
    with pytest.raises(ValueError):
        md_collide([1.0, 0.0], [0.0, 0.0], [-1.5, 0.0], 1.0)


def test_run_finds_wraparound_collision():
    # Receding in the direct image, colliding through the boundary: the
    # single-image formula says no collision, the run loop must find t = 3.
    spec = spec_for(2, 10.0, sigma=1.0)
    assert md_collision_time([2.0, 5.0], [7.0, 5.0], [-1.0, 0.0], [0.0, 0.0], 1.0, spec.torus) is None
    state = PhaseState(np.array([[2.0, 5.0], [7.0, 5.0]]),
                       np.array([[-1.0, 0.0], [0.0, 0.0]]))
    log = md_run(state, spec, target_collisions=1)
    assert log.collisions == 1
    assert state.time == pytest.approx(3.0, rel=1e-12)


def test_single_particle_wraps_forever():
    spec = ParticleSpec(torus=Torus((5.0, 5.0)), n=1, potential=HardDisk(1.0))
    state = PhaseState(np.array([[1.0, 1.0]]), np.array([[1.0, 0.5]]))
    log = md_run(state, spec, target_collisions=10, max_time=12.0)
    assert log.collisions == 0
    assert state.time == pytest.approx(12.0)
    np.testing.assert_allclose(state.positions[0], [(1 + 12) % 5, (1 + 6) % 5], atol=1e-9)


def test_simultaneous_collisions_abort():
    spec = spec_for(3, 20.0, sigma=0.5)
    state = PhaseState(
        np.array([[10.0, 10.0], [6.0, 10.0], [14.0, 10.0]]),
        np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]]))
    with pytest.raises(DegeneracyError):
        md_run(state, spec, target_collisions=2)


def test_conservation_and_validity():
    rng = np.random.default_rng(0)
    spec = ParticleSpec(torus=torus_for_density(8, 1.0, 0.4), n=8, potential=HardDisk(1.0))
    from statmc.particles import hexagonal_config
    state = PhaseState(hexagonal_config(8, spec.torus), random_velocities(8, 2, rng))
    ke0 = np.sum(state.momenta**2)
    p0 = state.momenta.sum(axis=0)
    seen = []
    log = md_run(state, spec, target_collisions=500, sample_interval=0.5,
                 on_sample=lambda t, pos, vel: seen.append(pos))
    assert log.collisions == 500
    assert np.sum(state.momenta**2) == pytest.approx(ke0, rel=1e-9)
    np.testing.assert_allclose(state.momenta.sum(axis=0), p0, atol=1e-9)
    assert hard_disk_valid(state.positions, spec)
    assert len(seen) > 10
    for pos in seen[::7]:
        assert hard_disk_valid(pos, spec)


def test_two_disk_position_marginal_uniform():
    rng = np.random.default_rng(5)
    spec = ParticleSpec(torus=torus_for_density(2, 1.0, 0.25), n=2, potential=HardDisk(1.0))
    side = spec.torus.side_lengths[0]
    state = PhaseState(np.array([[0.25 * side, 0.5 * side], [0.75 * side, 0.5 * side]]),
                       random_velocities(2, 2, rng))
    cells = np.zeros(16)
    k = 4

    def record(t, pos, vel):
        ix = int(pos[0, 0] / side * k) % k
        iy = int(pos[0, 1] / side * k) % k
        cells[ix * k + iy] += 1

    md_run(state, spec, target_collisions=10**6, max_time=4000.0,
           sample_interval=2.0, on_sample=record)
    assert cells.sum() > 1500
    assert chisquare_vs_probs(cells, np.full(16, 1 / 16)) > 1e-3
