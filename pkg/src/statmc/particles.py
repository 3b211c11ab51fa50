"""Soft-matter potentials on the torus.

Hard disks, soft disks, Lennard-Jones and harmonic bonded terms, with
energies and analytic gradients for the dynamics-based samplers.  Overlapping
hard-disk configurations get the dedicated ``FORBIDDEN`` sentinel rather than
a floating-point infinity, so acceptance ratios never see NaNs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import SingularityError
from .torus import Torus, min_sep_distance, min_sep_vector, pairwise_min_sep, wrap


class _Forbidden:
    def __repr__(self):
        return "FORBIDDEN"


#: Sentinel energy of an overlapping hard-disk configuration.
FORBIDDEN = _Forbidden()

_COS_GUARD = 1.0 - 1e-12  # arccos derivative diverges at collinearity


@dataclass(frozen=True)
class HardDisk:
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("disk radius must be positive")


@dataclass(frozen=True)
class SoftDisk:
    sigma: float
    exponent: float
    well_depth: float

    def __post_init__(self):
        if self.sigma <= 0 or self.well_depth <= 0:
            raise ValueError("sigma and well depth must be positive")
        if self.exponent < 1:
            raise ValueError("soft-disk exponent must be >= 1")


@dataclass(frozen=True)
class LennardJones:
    """Truncated Lennard-Jones pair interaction.

    Plain truncation with no shift; the default cutoff is twice sigma.
    Pass ``cutoff=None`` for the untruncated potential.
    """

    sigma: float
    well_depth: float
    cutoff: float | None = field(default=-1.0)

    def __post_init__(self):
        if self.sigma <= 0 or self.well_depth <= 0:
            raise ValueError("sigma and well depth must be positive")
        if self.cutoff == -1.0:
            object.__setattr__(self, "cutoff", 2.0 * self.sigma)
        if self.cutoff is not None and self.cutoff <= self.sigma:
            raise ValueError("cutoff must exceed sigma (or be None)")


@dataclass(frozen=True)
class Stretch:
    i: int
    j: int
    rest_length: float
    stiffness: float

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("stretch term needs distinct particles")
        if self.rest_length <= 0 or self.stiffness <= 0:
            raise ValueError("rest length and stiffness must be positive")


@dataclass(frozen=True)
class Angle:
    i: int
    j: int
    k: int
    rest_angle: float
    stiffness: float

    def __post_init__(self):
        if len({self.i, self.j, self.k}) != 3:
            raise ValueError("angle term needs three distinct particles")
        if self.rest_angle <= 0 or self.stiffness <= 0:
            raise ValueError("rest angle and stiffness must be positive")


@dataclass(frozen=True)
class Bonded:
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True)
class ParticleSpec:
    torus: Torus
    n: int
    potential: object
    beta: float = 1.0
    masses: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one particle")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.masses is not None:
            masses = tuple(float(m) for m in self.masses)
            if len(masses) != self.n or any(m <= 0 for m in masses):
                raise ValueError("masses must be n positive reals")
            object.__setattr__(self, "masses", masses)
        for term in getattr(self.potential, "terms", ()):
            for idx in (term.i, term.j, getattr(term, "k", 0)):
                if not 0 <= idx < self.n:
                    raise ValueError(f"bond index {idx} out of range")

    @property
    def mass_array(self) -> np.ndarray:
        if self.masses is None:
            return np.ones(self.n)
        return np.asarray(self.masses)

    @property
    def density(self) -> float:
        """Packing fraction: total d-ball volume at radius sigma over box volume."""
        sigma = getattr(self.potential, "sigma", None)
        if sigma is None:
            raise ValueError("density is defined for disk-like potentials only")
        d = self.torus.dim
        ball = {1: 2.0 * sigma, 2: math.pi * sigma**2, 3: 4.0 / 3.0 * math.pi * sigma**3}[d]
        return self.n * ball / self.torus.volume

    def spec_hash(self) -> str:
        key = repr((self.torus.side_lengths, self.n, self.potential, self.beta, self.masses))
        return hashlib.sha256(key.encode()).hexdigest()[:12]


def torus_for_density(n: int, sigma: float, density: float, dim: int = 2) -> Torus:
    """Square torus whose volume realizes the requested packing fraction."""
    ball = {1: 2.0 * sigma, 2: math.pi * sigma**2, 3: 4.0 / 3.0 * math.pi * sigma**3}[dim]
    side = (n * ball / density) ** (1.0 / dim)
    return Torus((side,) * dim)


# ---------------------------------------------------------------------------
# Pair terms
# ---------------------------------------------------------------------------

def pair_energy(r: float, spec: ParticleSpec):
    """Two-particle radial potential at separation r."""
    if r <= 0:
        raise SingularityError(f"pair potential evaluated at r = {r}")
    pot = spec.potential
    if isinstance(pot, HardDisk):
        return 0.0 if r > 2.0 * pot.sigma else FORBIDDEN
    if isinstance(pot, SoftDisk):
        return pot.well_depth * (2.0 * pot.sigma / r) ** pot.exponent
    if isinstance(pot, LennardJones):
        if pot.cutoff is not None and r > pot.cutoff:
            return 0.0
        s6 = (pot.sigma / r) ** 6
        return 4.0 * pot.well_depth * (s6 * s6 - s6)
    raise ValueError(f"no pair term for potential {pot!r}")


def pair_energy_derivative(r: float, spec: ParticleSpec) -> float:
    """Radial derivative du/dr of the pair potential."""
    if r <= 0:
        raise SingularityError(f"pair gradient evaluated at r = {r}")
    pot = spec.potential
    if isinstance(pot, HardDisk):
        return 0.0
    if isinstance(pot, SoftDisk):
        return -pot.exponent * pot.well_depth * (2.0 * pot.sigma / r) ** pot.exponent / r
    if isinstance(pot, LennardJones):
        if pot.cutoff is not None and r > pot.cutoff:
            return 0.0
        s6 = (pot.sigma / r) ** 6
        return 24.0 * pot.well_depth * (s6 - 2.0 * s6 * s6) / r
    raise ValueError(f"no pair term for potential {pot!r}")


def pair_gradient(xi, xj, spec: ParticleSpec) -> np.ndarray:
    """Gradient with respect to xi of the pair term between xi and xj."""
    sep = min_sep_vector(xi, xj, spec.torus)
    r = float(np.linalg.norm(sep))
    if r == 0.0:
        raise SingularityError("coincident particles have no pair gradient")
    return pair_energy_derivative(r, spec) * sep / r


def hard_disk_valid(positions: np.ndarray, spec: ParticleSpec) -> bool:
    """True iff every minimal-image pair distance exceeds the disk diameter."""
    sigma = spec.potential.sigma
    sep = pairwise_min_sep(positions, spec.torus)
    dist = np.linalg.norm(sep, axis=-1)
    iu = np.triu_indices(len(positions), k=1)
    return bool(np.all(dist[iu] > 2.0 * sigma))


# ---------------------------------------------------------------------------
# Bonded terms
# ---------------------------------------------------------------------------

def _bond_angle(positions, term: Angle, torus: Torus):
    """Angle and its ingredients for one term, using the written convention
    arccos(x_ij . x_jk / (d_ij d_jk)) with x_ab the minimal image of a - b."""
    a = min_sep_vector(positions[term.i], positions[term.j], torus)
    b = min_sep_vector(positions[term.j], positions[term.k], torus)
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise SingularityError("coincident particles in an angle term")
    c = float(np.dot(a, b) / (na * nb))
    return a, b, na, nb, c


def bonded_energy(positions: np.ndarray, terms, torus: Torus) -> float:
    """Sum of harmonic stretch and angle terms over the given bond list."""
    total = 0.0
    for term in terms:
        if isinstance(term, Stretch):
            r = min_sep_distance(positions[term.i], positions[term.j], torus)
            total += 0.5 * term.stiffness * (r - term.rest_length) ** 2
        elif isinstance(term, Angle):
            *_, c = _bond_angle(positions, term, torus)
            phi = math.acos(min(1.0, max(-1.0, c)))
            total += 0.5 * term.stiffness * (phi - term.rest_angle) ** 2
        else:
            raise ValueError(f"unknown bond term {term!r}")
    return total


def bonded_gradient(positions: np.ndarray, terms, torus: Torus) -> np.ndarray:
    grad = np.zeros_like(np.asarray(positions, dtype=float))
    for term in terms:
        if isinstance(term, Stretch):
            sep = min_sep_vector(positions[term.i], positions[term.j], torus)
            r = float(np.linalg.norm(sep))
            if r == 0.0:
                raise SingularityError("coincident particles in a stretch term")
            g = term.stiffness * (r - term.rest_length) * sep / r
            grad[term.i] += g
            grad[term.j] -= g
        else:
            a, b, na, nb, c = _bond_angle(positions, term, torus)
            c = min(_COS_GUARD, max(-_COS_GUARD, c))
            phi = math.acos(c)
            pref = -term.stiffness * (phi - term.rest_angle) / math.sqrt(1.0 - c * c)
            ah, bh = a / na, b / nb
            dc_da = (bh - c * ah) / na
            dc_db = (ah - c * bh) / nb
            grad[term.i] += pref * dc_da
            grad[term.j] += pref * (dc_db - dc_da)
            grad[term.k] += pref * (-dc_db)
    return grad


# ---------------------------------------------------------------------------
# Totals
# ---------------------------------------------------------------------------

def _pair_distances(positions: np.ndarray, torus: Torus):
    sep = pairwise_min_sep(positions, torus)
    dist = np.linalg.norm(sep, axis=-1)
    iu = np.triu_indices(len(positions), k=1)
    return sep, dist, iu


def total_energy(positions: np.ndarray, spec: ParticleSpec):
    """Sum over unordered pairs (or bond terms); FORBIDDEN for overlapping hard disks."""
    pot = spec.potential
    if isinstance(pot, Bonded):
        return bonded_energy(positions, pot.terms, spec.torus)
    if isinstance(pot, HardDisk):
        return 0.0 if hard_disk_valid(positions, spec) else FORBIDDEN
    _, dist, iu = _pair_distances(positions, spec.torus)
    return float(sum(pair_energy(r, spec) for r in dist[iu]))


def total_gradient(positions: np.ndarray, spec: ParticleSpec) -> np.ndarray:
    """(N, d) gradient of the total potential."""
    pot = spec.potential
    positions = np.asarray(positions, dtype=float)
    if isinstance(pot, Bonded):
        return bonded_gradient(positions, pot.terms, spec.torus)
    if isinstance(pot, HardDisk):
        if not hard_disk_valid(positions, spec):
            raise SingularityError("overlapping hard disks have no gradient")
        return np.zeros_like(positions)
    sep, dist, iu = _pair_distances(positions, spec.torus)
    grad = np.zeros_like(positions)
    for i, j in zip(*iu):
        r = dist[i, j]
        if r == 0.0:
            raise SingularityError("coincident particles")
        g = pair_energy_derivative(float(r), spec) * sep[i, j] / r
        grad[i] += g
        grad[j] -= g
    return grad


# ---------------------------------------------------------------------------
# Configurations and snapshots
# ---------------------------------------------------------------------------

def hexagonal_config(n: int, torus: Torus) -> np.ndarray:
    """Hexagonal (offset-row) starting arrangement of n disks on a 2D torus.

    Rows alternate a half-spacing horizontal offset; an even row count keeps
    the offset pattern consistent across the periodic seam.  Among the even
    row counts the one maximizing the smallest pair distance wins.
    """
    if torus.dim != 2:
        raise ValueError("hexagonal start is two-dimensional")
    lx, ly = torus.side_lengths

    def build(rows: int) -> np.ndarray:
        cols = math.ceil(n / rows)
        pts = []
        for iy in range(rows):
            for ix in range(cols):
                if len(pts) == n:
                    break
                x = (ix + 0.25 + 0.5 * (iy % 2)) * lx / cols
                y = (iy + 0.5) * ly / rows
                pts.append((x, y))
        return wrap(np.array(pts), torus)

    def clearance(pts: np.ndarray) -> float:
        if len(pts) < 2:
            return math.inf
        d = np.linalg.norm(pairwise_min_sep(pts, torus), axis=-1)
        return float(d[np.triu_indices(len(pts), k=1)].min())

    candidates = [build(rows) for rows in range(2, 2 * math.ceil(math.sqrt(n)) + 3, 2)]
    return max(candidates, key=clearance)


def random_valid_hard_disk_config(spec: ParticleSpec, rng: np.random.Generator,
                                  max_tries: int = 10000) -> np.ndarray:
    """Uniform rejection sampling of a non-overlapping configuration."""
    for _ in range(max_tries):
        pos = rng.uniform(0.0, 1.0, size=(spec.n, spec.torus.dim)) * spec.torus.sides
        if hard_disk_valid(pos, spec):
            return pos
    raise RuntimeError(f"no valid configuration found in {max_tries} tries")


def write_particle_snapshot(positions: np.ndarray, spec: ParticleSpec, path) -> None:
    """Plain-text snapshot: header with torus sizes and spec hash, then one
    position per line written with repr for a bit-exact round trip."""
    sides_txt = "x".join(repr(float(s)) for s in spec.torus.side_lengths)
    lines = [f"{sides_txt} {spec.spec_hash()}"]
    lines.extend(" ".join(repr(float(c)) for c in row) for row in np.asarray(positions))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_particle_snapshot(path):
    """Inverse of :func:`write_particle_snapshot`: (side_lengths, spec_hash, positions)."""
    with open(path) as fh:
        sides_txt, spec_hash = fh.readline().split()
        sides = tuple(float(v) for v in sides_txt.split("x"))
        rows = [[float(v) for v in line.split()] for line in fh if line.strip()]
    return sides, spec_hash, np.array(rows)
