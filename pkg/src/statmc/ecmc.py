"""Generalized event-chain sampler for smooth pair potentials.

One active particle moves ballistically; each pair factor fires with rate
beta * max(0, <grad U_factor, v>), simulated by thinning against per-segment
bounds on |dU/dr|.  An event swaps the velocity block to the partner (straight
chain); a Poisson clock refreshes the active direction.  Truncated potentials
carry a potential jump at the cutoff radius, handled as a point event when
the pair crosses the shell outward through rising energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import RateBoundError
from .particles import LennardJones, ParticleSpec, SoftDisk, pair_energy, pair_energy_derivative
from .torus import wrap

#: Look-ahead displacement over which each factor's rate bound is computed.
DEFAULT_LOOK_AHEAD_FACTOR = 0.1

_BOUND_SLACK = 1e-9


def factorized_filter_accept(deltas, beta: float, rng: np.random.Generator) -> bool:
    """Factorized Metropolis filter: independent per-factor acceptance coins.

    Accepts with probability prod_f min(1, exp(-beta * delta_f)).
    """
    for delta in deltas:
        if not math.isfinite(delta):
            raise ValueError("factor energy changes must be finite")
        if delta > 0.0 and rng.random() >= math.exp(-beta * delta):
            return False
    return True


@dataclass
class SmoothEventChain:
    """Lifted variables: active particle, unit velocity, refresh clock."""

    active: int
    velocity: np.ndarray
    to_refresh: float
    refresh_rate: float
    lifts: int = 0


def new_smooth_event_chain(spec: ParticleSpec, rng: np.random.Generator,
                           refresh_rate: float = 1.0) -> SmoothEventChain:
    v = rng.normal(size=spec.torus.dim)
    v /= np.linalg.norm(v)
    return SmoothEventChain(int(rng.integers(spec.n)), v,
                            rng.exponential(1.0 / refresh_rate), refresh_rate)


def _cutoff(spec: ParticleSpec):
    return getattr(spec.potential, "cutoff", None)


def _abs_derivative_bound(r_lo: float, r_hi: float, spec: ParticleSpec) -> float:
    """max |dU/dr| over [r_lo, r_hi] from the radial shape of the potential."""
    pot = spec.potential
    cut = _cutoff(spec)
    if cut is not None:
        if r_lo >= cut:
            return 0.0
        r_hi = min(r_hi, cut)
    candidates = [r_lo, r_hi]
    if isinstance(pot, LennardJones):
        # |u'| peaks at the inflection of the attractive branch.
        inflection = (26.0 / 7.0) ** (1.0 / 6.0) * pot.sigma
        if r_lo <= inflection <= r_hi:
            candidates.append(inflection)
    elif not isinstance(pot, SoftDisk):
        raise ValueError(f"no derivative bound for potential {pot!r}")
    return max(abs(pair_energy_derivative(r, spec)) for r in candidates)


def _segment_geometry(sep: np.ndarray, velocity: np.ndarray, length: float):
    """Radial range reachable within a straight segment.

    ``sep`` points from the partner to the active particle, so the active
    particle's motion changes it by +t*velocity.
    """
    r0 = float(np.linalg.norm(sep))
    b = float(sep @ velocity)
    r_end = math.sqrt(max(0.0, r0 * r0 + 2.0 * b * length + length * length))
    t_closest = -b
    if 0.0 < t_closest < length:
        r_lo = math.sqrt(max(0.0, r0 * r0 - b * b))
    else:
        r_lo = min(r0, r_end)
    return r0, b, r_lo, max(r0, r_end)


def _shell_crossings(r0: float, b: float, cut: float, length: float):
    """(time, outward?) crossings of the cutoff shell within the segment."""
    disc = b * b - (r0 * r0 - cut * cut)
    if disc <= 0.0:
        return []
    root = math.sqrt(disc)
    out = []
    for t, outward in ((-b - root, False), (-b + root, True)):
        if 0.0 < t <= length:
            out.append((t, outward))
    return out


def _factor_rate(sep, velocity, t: float, spec: ParticleSpec) -> float:
    s = sep + t * velocity
    r = float(np.linalg.norm(s))
    if r == 0.0:
        return math.inf
    cut = _cutoff(spec)
    if cut is not None and r > cut:
        return 0.0
    radial_speed = float(s @ velocity) / r
    return spec.beta * max(0.0, pair_energy_derivative(r, spec) * radial_speed)


def ecmc_smooth_run(state, chain: SmoothEventChain, spec: ParticleSpec,
                    duration: float, look_ahead: float | None = None,
                    event_log: list | None = None) -> int:
    """Advance the generalized event chain by the given travel distance.

    ``state`` is a DiskChainState-compatible object (positions, rng, time).
    Returns the number of lifting events; ``event_log`` (if given) collects
    (time, kind, active, partner) rows.  A thinning acceptance ratio above
    one raises RateBoundError: the bound logic, not the draw, is at fault.
    """
    rng = state.rng
    sigma = spec.potential.sigma
    seg_max = look_ahead if look_ahead is not None else DEFAULT_LOOK_AHEAD_FACTOR * sigma
    cut = _cutoff(spec)
    # Plain truncation leaves a potential step of u(cut) at the shell: leaving
    # costs -u(cut) (uphill for attractive tails), entering costs +u(cut).
    u_cut = 0.0 if cut is None else pair_energy(cut, spec)
    remaining = float(duration)
    events = 0
    while remaining > 1e-15:
        i = chain.active
        v = chain.velocity
        length = min(seg_max, remaining, chain.to_refresh)
        # Per-partner candidate times within the segment.
        sides = spec.torus.sides
        seps = np.mod(state.positions[i] - state.positions, sides)
        seps = np.where(seps >= 0.5 * sides, seps - sides, seps)

        best_t, best_j, best_kind = math.inf, -1, "none"
        for k in range(spec.n):
            if k == i:
                continue
            sep = seps[k]
            r0, b, r_lo, r_hi = _segment_geometry(sep, v, length)
            bound = spec.beta * _abs_derivative_bound(max(r_lo, 1e-12), r_hi, spec)
            if bound > 0.0:
                t_cand = rng.exponential(1.0 / bound)
                guard = 0
                while t_cand <= min(length, best_t):
                    rate = _factor_rate(sep, v, t_cand, spec)
                    if rate > bound * (1.0 + _BOUND_SLACK):
                        raise RateBoundError(
                            f"factor rate {rate} exceeds its segment bound {bound}")
                    if rng.random() < rate / bound:
                        best_t, best_j, best_kind = t_cand, k, "gradient"
                        break
                    t_cand += rng.exponential(1.0 / bound)
                    guard += 1
                    if guard > 10**6:
                        raise RuntimeError("thinning stalled: the repulsive core made the "
                                           "segment bound enormous; reduce look_ahead")
            if cut is not None and u_cut != 0.0:
                for t_cross, outward in _shell_crossings(r0, b, cut, min(length, best_t)):
                    d_jump = -u_cut if outward else u_cut
                    if d_jump > 0.0 and rng.random() < 1.0 - math.exp(-spec.beta * d_jump):
                        best_t, best_j, best_kind = t_cross, k, "shell"
                        break

        step = min(best_t, length)
        state.positions[i] = wrap(state.positions[i] + step * v, spec.torus)
        state.time += step
        remaining -= step
        chain.to_refresh -= step
        if best_t <= length:
            if event_log is not None:
                event_log.append((state.time, f"lift_{best_kind}", i, best_j))
            chain.active = best_j
            chain.lifts += 1
            events += 1
        elif chain.to_refresh <= 1e-15:
            chain.velocity = _fresh_direction(spec.torus.dim, rng)
            chain.to_refresh = rng.exponential(1.0 / chain.refresh_rate)
            if event_log is not None:
                event_log.append((state.time, "refresh", chain.active, -1))
    return events


def _fresh_direction(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)
