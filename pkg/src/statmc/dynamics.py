"""Dynamics-based samplers for smooth potentials.

Velocity-Verlet trajectories, hybrid Monte Carlo with optional extra
trajectory extensions against a single persistent uniform draw, the exact
Ornstein-Uhlenbeck momentum update, underdamped and overdamped Langevin
steps, and the adaptively restrained kinetic energy that freezes
low-momentum particles.

Targets are position distributions ~ exp(-beta U); the samplers work on any
(n, d) position array, with optional wrapping for toroidal systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import DivergenceError
from .particles import ParticleSpec, total_energy, total_gradient
from .torus import wrap


@dataclass
class PhaseState:
    """Positions with per-particle momenta and the elapsed simulation time."""

    positions: np.ndarray
    momenta: np.ndarray
    time: float = 0.0

    def copy(self) -> "PhaseState":
        return PhaseState(self.positions.copy(), self.momenta.copy(), self.time)


@dataclass(frozen=True)
class SmoothTarget:
    """Potential, gradient and inverse temperature of a smooth sampling target."""

    potential: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    beta: float
    wrap: Callable[[np.ndarray], np.ndarray] | None = None

    def force(self, x: np.ndarray) -> np.ndarray:
        f = -self.gradient(x)
        if not np.all(np.isfinite(f)):
            raise DivergenceError("non-finite force")
        return f

    def place(self, x: np.ndarray) -> np.ndarray:
        return x if self.wrap is None else self.wrap(x)


def particle_target(spec: ParticleSpec) -> SmoothTarget:
    """Smooth target backed by a particle spec's total energy and gradient."""
    return SmoothTarget(
        potential=lambda x: float(total_energy(x, spec)),
        gradient=lambda x: total_gradient(x, spec),
        beta=spec.beta,
        wrap=lambda x: wrap(x, spec.torus),
    )


# ---------------------------------------------------------------------------
# Kinetic energies
# ---------------------------------------------------------------------------

class QuadraticKinetic:
    """Standard kinetic energy p^T p / (2 m) per particle."""

    def __init__(self, masses):
        self.masses = np.atleast_1d(np.asarray(masses, dtype=float))

    def _m(self, p):
        return self.masses.reshape((-1,) + (1,) * (p.ndim - 1))

    def value(self, p: np.ndarray) -> float:
        # Diverged trajectories reach astronomical momenta; an inf energy is
        # the meaningful answer there, not an arithmetic warning.
        with np.errstate(over="ignore"):
            return float(np.sum(p**2 / (2.0 * self._m(p))))

    def grad(self, p: np.ndarray) -> np.ndarray:
        return p / self._m(p)

    def sample(self, shape, beta, rng) -> np.ndarray:
        scale = np.sqrt(np.broadcast_to(self._m(np.empty(shape)), shape) / beta)
        return rng.normal(0.0, scale)


class RestrainedKinetic:
    """Adaptively restrained kinetic energy.

    Zero below ``p_min`` (the particle does not move during drifts), the
    quadratic form above ``p_max``, and in between the unique quintic in the
    momentum norm matching value, first and second derivatives at both ends,
    keeping Verlet-type integration second order.
    """

    def __init__(self, p_min: float, p_max: float, masses):
        if not 0.0 < p_min < p_max:
            raise ValueError("need 0 < p_min < p_max")
        self.p_min, self.p_max = float(p_min), float(p_max)
        self.masses = np.atleast_1d(np.asarray(masses, dtype=float))
        self._coeffs = self._quintic(self.p_min, self.p_max)

    @staticmethod
    def _quintic(a: float, b: float) -> np.ndarray:
        # Boundary data for unit mass; other masses scale the polynomial by 1/m.
        rows = []
        rhs = []
        for order, (xa, xb) in enumerate([(0.0, b * b / 2.0), (0.0, b), (0.0, 1.0)]):
            for x, val in ((a, xa), (b, xb)):
                row = np.zeros(6)
                for k in range(order, 6):
                    row[k] = math.factorial(k) / math.factorial(k - order) * x ** (k - order)
                rows.append(row)
                rhs.append(val)
        return np.linalg.solve(np.array(rows), np.array(rhs))

    def _poly(self, s, deriv=0):
        out = np.zeros_like(s)
        for k in range(deriv, 6):
            out += self._coeffs[k] * math.factorial(k) / math.factorial(k - deriv) * s ** (k - deriv)
        return out

    def value(self, p: np.ndarray) -> float:
        s = np.linalg.norm(p, axis=-1)
        m = self.masses
        per = np.where(s <= self.p_min, 0.0,
                       np.where(s >= self.p_max, s**2 / 2.0, self._poly(s)))
        return float(np.sum(per / m))

    def grad(self, p: np.ndarray) -> np.ndarray:
        s = np.linalg.norm(p, axis=-1, keepdims=True)
        m = self.masses.reshape((-1,) + (1,) * (p.ndim - 1))
        safe = np.maximum(s, 1e-300)
        slope = np.where(s <= self.p_min, 0.0,
                         np.where(s >= self.p_max, s, self._poly(s)))
        return slope / safe * p / m


def default_kinetic(state: PhaseState, spec=None) -> QuadraticKinetic:
    n = state.momenta.shape[0]
    masses = spec.mass_array if spec is not None else np.ones(n)
    return QuadraticKinetic(masses)


@dataclass(frozen=True)
class IntegratorSpec:
    """Numerical-integration and sampler tuning knobs."""

    step: float
    n_steps: int = 1
    friction: float = 0.0
    refresh_rate: float = 0.0
    kinetic: object = None
    extra_chances: int = 0

    def __post_init__(self):
        if self.step <= 0 or self.n_steps < 1 or self.friction < 0 or self.extra_chances < 0:
            raise ValueError("bad integrator parameters")

    def kinetic_for(self, state: PhaseState) -> object:
        return self.kinetic if self.kinetic is not None else default_kinetic(state)


# ---------------------------------------------------------------------------
# Leapfrog / velocity Verlet
# ---------------------------------------------------------------------------

def leapfrog_trajectory(state: PhaseState, target: SmoothTarget,
                        integrator: IntegratorSpec) -> PhaseState:
    """Velocity-Verlet trajectory of n_steps drift/kick alternations.

    Initial and final momentum updates are half kicks; positions are wrapped
    after every drift when the target lives on a torus.
    """
    eps = integrator.step
    kin = integrator.kinetic_for(state)
    x = state.positions.astype(float).copy()
    p = state.momenta.astype(float).copy()
    p += 0.5 * eps * target.force(x)
    for n in range(integrator.n_steps):
        x = target.place(x + eps * kin.grad(p))
        kick = eps if n < integrator.n_steps - 1 else 0.5 * eps
        p += kick * target.force(x)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
        raise DivergenceError("trajectory left the finite domain")
    return PhaseState(x, p, state.time + eps * integrator.n_steps)


def hamiltonian(state: PhaseState, target: SmoothTarget, kinetic) -> float:
    return target.potential(state.positions) + kinetic.value(state.momenta)


# ---------------------------------------------------------------------------
# Hybrid Monte Carlo with extra trajectory extensions
# ---------------------------------------------------------------------------

@dataclass
class HMCInfo:
    accepted: bool
    stage: int
    diverged: bool = False


def hmc_step(state: PhaseState, target: SmoothTarget, integrator: IntegratorSpec,
             rng: np.random.Generator) -> tuple[PhaseState, HMCInfo]:
    """One hybrid Monte Carlo step with up to extra_chances trajectory extensions.

    Momenta are refreshed from their Gaussian marginal; a single uniform draw
    is tested against every successive proposal's Hamiltonian ratio, so a
    rejection extends the same trajectory instead of discarding it.  If every
    proposal fails, the position is kept and the momentum sign flipped.
    """
    kin = integrator.kinetic_for(state)
    p0 = kin.sample(state.momenta.shape, target.beta, rng)
    current = PhaseState(state.positions.copy(), p0, state.time)
    h0 = hamiltonian(current, target, kin)
    u = rng.random()
    walker = current
    for stage in range(integrator.extra_chances + 1):
        try:
            walker = leapfrog_trajectory(walker, target, integrator)
            h1 = hamiltonian(walker, target, kin)
        except DivergenceError:
            return (PhaseState(current.positions, -current.momenta, state.time + 1),
                    HMCInfo(False, stage, diverged=True))
        if not math.isfinite(h1):
            return (PhaseState(current.positions, -current.momenta, state.time + 1),
                    HMCInfo(False, stage, diverged=True))
        log_ratio = -target.beta * (h1 - h0)
        if log_ratio >= 0.0 or u <= math.exp(log_ratio):
            return PhaseState(walker.positions, walker.momenta, state.time + 1), HMCInfo(True, stage)
    return (PhaseState(current.positions, -current.momenta, state.time + 1),
            HMCInfo(False, integrator.extra_chances))


# ---------------------------------------------------------------------------
# Langevin dynamics
# ---------------------------------------------------------------------------

def ou_exact_update(p: np.ndarray, masses, friction: float, beta: float, t: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Exact Ornstein-Uhlenbeck transition for quadratic kinetic energy.

    Mean p exp(-gamma t / m), variance (m / beta)(1 - exp(-2 gamma t / m)),
    independently per momentum component.
    """
    p = np.asarray(p, dtype=float)
    m = np.atleast_1d(np.asarray(masses, dtype=float)).reshape((-1,) + (1,) * (p.ndim - 1))
    decay = np.exp(-friction * t / m)
    sd = np.sqrt(np.broadcast_to(m / beta * (1.0 - decay**2), p.shape))
    return p * decay + rng.normal(0.0, 1.0, size=p.shape) * sd


def langevin_underdamped_step(state: PhaseState, target: SmoothTarget,
                              integrator: IntegratorSpec, rng: np.random.Generator) -> PhaseState:
    """One underdamped Langevin step: a Verlet step then a friction/noise step.

    With the quadratic kinetic energy the friction part is the exact
    Ornstein-Uhlenbeck transition; a modified kinetic energy replaces the
    drift velocity with its gradient, and the friction part falls back to
    Euler-Maruyama since no closed-form transition exists.
    """
    eps = integrator.step
    kin = integrator.kinetic_for(state)
    moved = leapfrog_trajectory(PhaseState(state.positions, state.momenta, state.time),
                                target, IntegratorSpec(step=eps, n_steps=1, kinetic=kin))
    p = moved.momenta
    if integrator.friction > 0.0:
        if isinstance(kin, QuadraticKinetic):
            p = ou_exact_update(p, kin.masses, integrator.friction, target.beta, eps, rng)
        else:
            noise = math.sqrt(2.0 * integrator.friction * eps / target.beta)
            p = p - eps * integrator.friction * kin.grad(p) + noise * rng.normal(size=p.shape)
    return PhaseState(moved.positions, p, state.time + eps)


def langevin_overdamped_step(positions: np.ndarray, target: SmoothTarget,
                             integrator: IntegratorSpec, rng: np.random.Generator) -> np.ndarray:
    """Euler-Maruyama overdamped step x + (eps^2/2) F + eps N(0, 1/beta), wrapped."""
    eps = integrator.step
    x = np.asarray(positions, dtype=float)
    noise = rng.normal(0.0, math.sqrt(1.0 / target.beta), size=x.shape)
    return target.place(x + 0.5 * eps * eps * target.force(x) + eps * noise)
