"""Event-driven molecular dynamics for hard disks on the torus.

Particles fly ballistically between pairwise collisions; collision times are
the positive roots of the separation quadratic.  The event loop advances in
windows short enough that relative displacements stay under half the box per
axis, scanning the 3^d neighboring images of each pair inside a window, so
wrap-around contacts are found exactly without per-boundary bookkeeping.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import DegeneracyError
from .dynamics import PhaseState
from .particles import ParticleSpec, hard_disk_valid
from .torus import Torus, min_sep_vector, wrap

#: Two collision events closer than this are treated as simultaneous.
TIME_TOLERANCE = 1e-12

_CONTACT_TOLERANCE = 1e-9


def _first_root(b: float, a: float, c: float):
    """Smallest positive root of a t^2 + 2 b t + c = 0 under approach conditions."""
    if b >= 0.0 or a == 0.0:
        return None
    disc = b * b - a * c
    if disc <= 0.0:
        return None
    return (-b - math.sqrt(disc)) / a


def md_collision_time(xi, xj, vi, vj, sigma: float, torus: Torus):
    """Time until disks i and j reach contact under straight-line flow.

    Uses the current minimal image; returns None when the disks recede or the
    discriminant is negative (a miss).  Valid until either particle's image
    assignment changes; the run loop re-evaluates within safe windows.
    """
    sep = min_sep_vector(xi, xj, torus)
    w = np.asarray(vi, dtype=float) - np.asarray(vj, dtype=float)
    c = float(sep @ sep) - 4.0 * sigma * sigma
    if c < 0.0:
        raise ValueError("overlapping disks have no forward collision time")
    return _first_root(float(sep @ w), float(w @ w), c)


def md_collide(vi, vj, contact_vector, sigma: float):
    """Post-collision velocities for equal-mass disks.

    The velocity change is the projection of the relative velocity onto the
    contact line; kinetic energy and momentum are conserved exactly.
    """
    contact = np.asarray(contact_vector, dtype=float)
    norm = float(np.linalg.norm(contact))
    if abs(norm - 2.0 * sigma) > _CONTACT_TOLERANCE:
        raise ValueError(f"contact vector norm {norm} is not the disk diameter")
    factor = float((np.asarray(vi) - np.asarray(vj)) @ contact) / (4.0 * sigma * sigma)
    return np.asarray(vi) - factor * contact, np.asarray(vj) + factor * contact


@dataclass
class MDLog:
    """Collision log and conservation diagnostics of one run."""

    events: list = field(default_factory=list)
    collisions: int = 0
    initial_kinetic: float = 0.0

    def record(self, time: float, kind: str, i: int, j: int, diagnostic: float = 0.0):
        self.events.append((time, kind, i, j, diagnostic))


def _image_offsets(torus: Torus) -> np.ndarray:
    return np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=torus.dim)))


def _pair_arrays(n: int):
    iu = np.triu_indices(n, k=1)
    return iu[0], iu[1]


def md_run(state: PhaseState, spec: ParticleSpec, target_collisions: int,
           max_time: float | None = None, sample_interval: float | None = None,
           on_sample=None) -> MDLog:
    """Run the event loop until the collision target (or max_time) is reached.

    Between events all positions advance linearly and wrap; each window is
    capped so no pair's relative displacement exceeds half a box axis, which
    keeps the 3^d-image contact scan exhaustive.  Two distinct pairs colliding
    within the time tolerance abort with a degeneracy error.
    """
    torus = spec.torus
    sigma = spec.potential.sigma
    pos = wrap(np.asarray(state.positions, dtype=float), torus)
    vel = np.asarray(state.momenta, dtype=float).copy()
    if not hard_disk_valid(pos, spec):
        raise ValueError("initial configuration has overlapping disks")

    log = MDLog(initial_kinetic=float(np.sum(vel**2)))
    n = spec.n
    ii, jj = _pair_arrays(n)
    offsets = _image_offsets(torus) * torus.sides
    sides = torus.sides
    next_sample = state.time + sample_interval if sample_interval else math.inf
    deadline = math.inf if max_time is None else state.time + max_time

    while log.collisions < target_collisions and state.time < deadline:
        if len(ii) == 0:  # a single particle just streams ballistically
            if math.isinf(deadline):
                raise RuntimeError("one particle and no max_time: the run cannot finish")
            dt = deadline - state.time
            while next_sample <= deadline:
                if on_sample is not None:
                    on_sample(next_sample, wrap(pos + (next_sample - state.time) * vel, torus), vel)
                next_sample += sample_interval
            pos = wrap(pos + dt * vel, torus)
            state.time = deadline
            break
        rel_v = vel[ii] - vel[jj]
        sep = np.mod(pos[ii] - pos[jj], sides)
        sep = np.where(sep >= 0.5 * sides, sep - sides, sep)

        speed = np.abs(rel_v)
        with np.errstate(divide="ignore"):
            caps = np.where(speed > 0.0, 0.5 * sides / speed, math.inf)
        window = float(min(caps.min(initial=math.inf), deadline - state.time))
        if not math.isfinite(window):
            if math.isinf(deadline):
                raise RuntimeError("no relative motion and no max_time: the run cannot finish")
            window = deadline - state.time

        # First contact per pair across candidate images within the window.
        best_t = np.full(len(ii), math.inf)
        best_img = np.zeros((len(ii), torus.dim))
        a = np.sum(rel_v**2, axis=1)
        for off in offsets:
            s = sep + off
            b = np.sum(s * rel_v, axis=1)
            c = np.sum(s * s, axis=1) - 4.0 * sigma * sigma
            disc = b * b - a * c
            valid = (b < 0.0) & (disc > 0.0) & (a > 0.0)
            with np.errstate(invalid="ignore", divide="ignore"):
                t = np.where(valid, (-b - np.sqrt(np.abs(disc))) / np.where(a > 0, a, 1.0), math.inf)
            better = t < best_t
            best_t = np.where(better, t, best_t)
            best_img[better] = off

        k = int(np.argmin(best_t))
        t_hit = float(best_t[k])

        advance = min(t_hit, window)
        # Emit skeleton samples strictly inside the advance interval.
        while next_sample <= state.time + advance:
            dt = next_sample - state.time
            if on_sample is not None:
                on_sample(next_sample, wrap(pos + dt * vel, torus), vel)
            next_sample += sample_interval

        if t_hit <= window:
            others = np.delete(best_t, k)
            if others.size and float(others.min()) - t_hit < TIME_TOLERANCE:
                raise DegeneracyError(
                    f"two pairs collide within {TIME_TOLERANCE} at t = {state.time + t_hit}")
            pos = wrap(pos + t_hit * vel, torus)
            state.time += t_hit
            i, j = int(ii[k]), int(jj[k])
            contact = sep[k] + best_img[k] + t_hit * rel_v[k]
            vel[i], vel[j] = md_collide(vel[i], vel[j], contact, sigma)
            log.collisions += 1
            log.record(state.time, "collision", i, j, float(np.sum(vel**2)))
        else:
            pos = wrap(pos + window * vel, torus)
            state.time += window
            if window < t_hit and state.time < deadline:
                log.record(state.time, "boundary", -1, -1, 0.0)

    state.positions = pos
    state.momenta = vel
    return log


def random_velocities(n: int, dim: int, rng: np.random.Generator, speed: float = 1.0) -> np.ndarray:
    """Uniform directions at a common speed, with the mean velocity removed."""
    v = rng.normal(size=(n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    v *= speed
    if n > 1:
        v -= v.mean(axis=0)
    return v
