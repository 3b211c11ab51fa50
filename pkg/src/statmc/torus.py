"""Periodic-boundary arithmetic on the d-dimensional torus.

Positions are plain float arrays kept inside the fundamental domain
``[0, L_axis)`` per axis.  Separation vectors use the minimal image, with
components in ``[-L_axis/2, L_axis/2)``; ties at exactly half the box width
deterministically take the negative image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Torus:
    """Rectangular periodic box with per-axis linear sizes."""

    side_lengths: tuple[float, ...]
    dim: int = field(init=False)

    def __post_init__(self):
        sides = tuple(float(s) for s in self.side_lengths)
        object.__setattr__(self, "side_lengths", sides)
        object.__setattr__(self, "dim", len(sides))
        if self.dim not in (1, 2, 3):
            raise ValueError(f"torus dimension must be 1, 2 or 3, got {self.dim}")
        if any(not np.isfinite(s) or s <= 0.0 for s in sides):
            raise ValueError(f"side lengths must be positive and finite, got {sides}")

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.side_lengths, dtype=float)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def max_separation(self) -> float:
        """Largest possible minimal-image distance, half the box diagonal."""
        return 0.5 * float(np.sqrt(np.sum(self.sides**2)))


def wrap(raw, torus: Torus) -> np.ndarray:
    """Reduce coordinates into the fundamental domain ``[0, L_axis)``.

    Idempotent; raises ValueError on non-finite or wrongly shaped input.
    """
    x = np.asarray(raw, dtype=float)
    if x.shape[-1] != torus.dim:
        raise ValueError(f"expected {torus.dim} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("coordinates must be finite")
    w = np.mod(x, torus.sides)
    # np.mod can return L itself for tiny negative inputs; fold those back.
    return np.where(w >= torus.sides, w - torus.sides, w)


def min_sep_vector(xi, xj, torus: Torus) -> np.ndarray:
    """Shortest vector from ``xj`` to ``xi`` on the torus.

    Components lie in ``[-L_axis/2, L_axis/2)``: a separation of exactly half
    the box picks the negative image so that repeated runs are reproducible.
    """
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    if xi.shape != xj.shape or xi.shape[-1] != torus.dim:
        raise ValueError(f"point shapes {xi.shape} and {xj.shape} do not match torus dim {torus.dim}")
    sides = torus.sides
    d = np.mod(xi - xj, sides)
    return np.where(d >= 0.5 * sides, d - sides, d)


def min_sep_distance(xi, xj, torus: Torus) -> float:
    """Minimal separation distance (Euclidean norm of the minimal image)."""
    return float(np.linalg.norm(min_sep_vector(xi, xj, torus)))


def pairwise_min_sep(positions: np.ndarray, torus: Torus) -> np.ndarray:
    """All minimal-image separation vectors ``positions[i] - positions[j]``.

    Returns an (N, N, d) array; the diagonal is zero.
    """
    pos = np.asarray(positions, dtype=float)
    diff = np.mod(pos[:, None, :] - pos[None, :, :], torus.sides)
    return np.where(diff >= 0.5 * torus.sides, diff - torus.sides, diff)
