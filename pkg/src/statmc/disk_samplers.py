"""Monte Carlo samplers for particle models.

Hard-disk Metropolis (accept iff no overlap), Jaster's chained displacement
move, the straight event-chain sampler in which one active disk travels at
unit speed and transfers its label on contact, plus the single-particle
Metropolis kernel for smooth pair potentials.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import DegeneracyError
from .particles import ParticleSpec, pair_energy
from .torus import wrap

#: Two lifting partners closer than this in time abort the event chain.
TIME_TOLERANCE = 1e-12


@dataclass
class DiskChainState:
    """Positions, generator and elapsed time of one hard-disk chain."""

    positions: np.ndarray
    rng: np.random.Generator
    time: float = 0.0
    proposals: int = 0
    rejections: int = 0

    @property
    def rejection_fraction(self) -> float:
        return self.rejections / max(1, self.proposals)


def _overlap_indices(positions: np.ndarray, candidate: np.ndarray, skip: int,
                     spec: ParticleSpec) -> np.ndarray:
    """Indices of particles whose disks would overlap a candidate position."""
    sides = spec.torus.sides
    d = np.mod(candidate - positions, sides)
    d = np.where(d >= 0.5 * sides, d - sides, d)
    dist_sq = np.sum(d * d, axis=-1)
    dist_sq[skip] = np.inf
    return np.flatnonzero(dist_sq <= (2.0 * spec.potential.sigma) ** 2)


def hard_disk_metropolis_step(state: DiskChainState, spec: ParticleSpec,
                              step_size: float) -> bool:
    """Move one uniform particle by a uniform box displacement; accept iff no overlap."""
    rng = state.rng
    i = int(rng.integers(spec.n))
    u = rng.uniform(-step_size, step_size, size=spec.torus.dim)
    candidate = wrap(state.positions[i] + u, spec.torus)
    state.proposals += 1
    if _overlap_indices(state.positions, candidate, i, spec).size:
        state.rejections += 1
        return False
    state.positions[i] = candidate
    return True


def jaster_step(state: DiskChainState, spec: ParticleSpec, step_size: float,
                max_attempts: int = 16) -> bool:
    """Jaster's chained move: one displacement, handed from disk to disk.

    A move overlapping exactly one other disk passes the same displacement to
    that disk; the whole move is accepted once a stage is overlap-free and
    rejected (original configuration restored) if a stage hits two or more
    disks or the attempt budget runs out.
    """
    rng = state.rng
    u = rng.uniform(-step_size, step_size, size=spec.torus.dim)
    current = int(rng.integers(spec.n))
    state.proposals += 1
    working = state.positions.copy()
    for _ in range(max_attempts):
        candidate = wrap(working[current] + u, spec.torus)
        hits = _overlap_indices(working, candidate, current, spec)
        working[current] = candidate
        if hits.size == 0:
            state.positions = working
            return True
        if hits.size > 1:
            break
        current = int(hits[0])
    state.rejections += 1
    return False


def smooth_particle_metropolis_step(state: DiskChainState, spec: ParticleSpec,
                                    step_size: float) -> bool:
    """Single-particle Metropolis for smooth pair potentials.

    Moves one uniform particle by a uniform box displacement and accepts with
    min(1, exp(-beta * delta U)), where the energy change involves the moved
    particle's pair terms only.
    """
    rng = state.rng
    i = int(rng.integers(spec.n))
    u = rng.uniform(-step_size, step_size, size=spec.torus.dim)
    candidate = wrap(state.positions[i] + u, spec.torus)
    state.proposals += 1
    sides = spec.torus.sides

    def local_energy(point):
        d = np.mod(point - state.positions, sides)
        d = np.where(d >= 0.5 * sides, d - sides, d)
        dist = np.linalg.norm(d, axis=-1)
        return sum(pair_energy(float(r), spec) for k, r in enumerate(dist) if k != i)

    delta = local_energy(candidate) - local_energy(state.positions[i])
    if delta <= 0.0 or rng.random() < math.exp(-spec.beta * delta):
        state.positions[i] = candidate
        return True
    state.rejections += 1
    return False


# ---------------------------------------------------------------------------
# Straight event-chain Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class DiskEventChain:
    """Lifted variables: active disk, its unit velocity, refresh bookkeeping."""

    active: int
    velocity: np.ndarray
    mode: str
    parameter: float
    to_refresh: float


def new_disk_event_chain(spec: ParticleSpec, rng: np.random.Generator,
                         mode: str = "uniform", parameter: float = 1.0) -> DiskEventChain:
    """Initial lifted state for one of the refresh modes.

    ``xy_fixed`` swaps the axis-aligned velocity every ``parameter`` of travel;
    ``xy_poisson`` swaps at Poisson times of that rate; ``uniform`` resamples
    the direction on the unit circle at Poisson times.
    """
    if mode not in ("xy_fixed", "xy_poisson", "uniform"):
        raise ValueError(f"unknown refresh mode {mode!r}")
    if mode.startswith("xy"):
        if spec.torus.dim != 2:
            raise ValueError("xy refreshment is two-dimensional")
        velocity = np.array([1.0, 0.0]) if rng.random() < 0.5 else np.array([0.0, 1.0])
    else:
        velocity = _unit_vector(spec.torus.dim, rng)
    active = int(rng.integers(spec.n))
    horizon = parameter if mode == "xy_fixed" else rng.exponential(1.0 / parameter)
    return DiskEventChain(active, velocity, mode, parameter, horizon)


def _unit_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _refresh(chain: DiskEventChain, rng: np.random.Generator):
    if chain.mode == "uniform":
        chain.velocity = _unit_vector(len(chain.velocity), rng)
    else:
        chain.velocity = chain.velocity[::-1].copy()
    chain.to_refresh = (chain.parameter if chain.mode == "xy_fixed"
                        else rng.exponential(1.0 / chain.parameter))


def _first_contact(positions, active, velocity, spec):
    """Earliest contact time and partner for the active disk, scanning images.

    Returns the per-partner first-contact minimum, its runner-up (for the
    degeneracy guard) and the travel window, capped at half the shortest box
    side so the one-ring image scan stays exhaustive.
    """
    sides = spec.torus.sides
    sigma = spec.potential.sigma
    window = 0.5 * float(sides.min())
    rel = np.mod(positions[active] - positions, sides)
    rel = np.where(rel >= 0.5 * sides, rel - sides, rel)
    per_partner = np.full(len(positions), math.inf)
    for off in itertools.product((-1.0, 0.0, 1.0), repeat=spec.torus.dim):
        s = rel + np.asarray(off) * sides
        b = s @ velocity  # unit velocity: quadratic coefficient is 1
        c = np.sum(s * s, axis=-1) - 4.0 * sigma * sigma
        disc = b * b - c
        valid = (b < 0.0) & (disc > 0.0)
        with np.errstate(invalid="ignore"):
            t = np.where(valid, -b - np.sqrt(np.abs(disc)), math.inf)
        per_partner = np.minimum(per_partner, t)
    per_partner[active] = math.inf
    if len(per_partner) < 2:
        return math.inf, -1, math.inf, window
    order = np.argsort(per_partner)
    best_j = int(order[0])
    second = float(per_partner[order[1]]) if len(order) > 1 else math.inf
    return float(per_partner[best_j]), best_j, second, window


def ecmc_hard_disk_run(state: DiskChainState, chain: DiskEventChain, spec: ParticleSpec,
                       duration: float) -> int:
    """Advance the straight event chain by the given travel distance.

    The active disk moves ballistically until contact, where the label
    transfers with the velocity unchanged; refreshment follows the chain's
    mode.  Returns the number of lifting events.
    """
    rng = state.rng
    remaining = float(duration)
    events = 0
    while remaining > 1e-15:
        t_hit, partner, runner_up, window = _first_contact(
            state.positions, chain.active, chain.velocity, spec)
        horizon = min(remaining, chain.to_refresh, window)
        if t_hit <= horizon:
            if runner_up - t_hit < TIME_TOLERANCE:
                raise DegeneracyError(
                    f"equidistant double contact within {TIME_TOLERANCE} at travel {state.time}")
            state.positions[chain.active] = wrap(
                state.positions[chain.active] + t_hit * chain.velocity, spec.torus)
            state.time += t_hit
            remaining -= t_hit
            chain.to_refresh -= t_hit
            chain.active = partner
            events += 1
            continue
        state.positions[chain.active] = wrap(
            state.positions[chain.active] + horizon * chain.velocity, spec.torus)
        state.time += horizon
        remaining -= horizon
        chain.to_refresh -= horizon
        if chain.to_refresh <= 1e-15:
            _refresh(chain, rng)
    return events
