"""Estimators over sample traces and particle ensembles.

Covers the energy-variance specific heat, integrated autocorrelation times
with the initial-monotone-sequence cutoff, the midpoint neighbor criterion,
six-fold local orientation, positional/orientational correlation curves on
log-spaced grids, and the hard-disk contact-value pressure estimator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .particles import ParticleSpec
from .torus import min_sep_vector, pairwise_min_sep, wrap

TIME_UNITS = ("metropolis_sweep", "wolff_step", "ecmc_event_time", "md_time")


@dataclass
class ObservableSeries:
    """Ordered observable trace with its time unit and burn-in count.

    ``values`` keeps the burn-in samples; estimators operate on ``post``.
    """

    values: np.ndarray
    time_unit: str
    burn_in: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.time_unit not in TIME_UNITS:
            raise ValueError(f"unknown time unit {self.time_unit!r}")
        if not 0 <= self.burn_in < len(self.values):
            raise ValueError("burn-in must be smaller than the series length")

    @property
    def post(self) -> np.ndarray:
        return self.values[self.burn_in:]


def specific_heat_estimate(series: ObservableSeries, beta: float) -> float:
    """beta^2 times the unbiased sample variance of the energy trace."""
    energies = series.post
    if len(energies) < 2:
        raise ValueError("need at least two post-burn-in energies")
    return float(beta**2 * np.var(energies, ddof=1))


def autocorrelation(values: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Normalized autocorrelation function via FFT."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    x = x - x.mean()
    if not np.any(x):
        raise ValueError("constant series has no autocorrelation function")
    padded = np.fft.rfft(x, 2 * n)
    acov = np.fft.irfft(padded * np.conj(padded))[:n] / n
    rho = acov / acov[0]
    return rho if max_lag is None else rho[:max_lag + 1]


def integrated_autocorrelation_time(series) -> float:
    """IAT tau = 1 + 2 sum rho(k), truncated by the initial monotone sequence.

    Pair sums Gamma_m = rho(2m) + rho(2m+1) are kept while positive and capped
    to be non-increasing; tau = 2 sum Gamma - 1.  Accepts an ObservableSeries
    or a plain array; the result is in the series' own time units.
    """
    values = series.post if isinstance(series, ObservableSeries) else np.asarray(series)
    if len(values) < 100:
        raise ValueError("need at least 100 post-burn-in samples for an IAT estimate")
    rho = autocorrelation(values)
    n_pairs = len(rho) // 2
    total = 0.0
    prev = np.inf
    for m in range(n_pairs):
        gamma = rho[2 * m] + rho[2 * m + 1]
        if gamma <= 0.0:
            break
        gamma = min(gamma, prev)
        total += gamma
        prev = gamma
    return float(2.0 * total - 1.0)


def batch_mean_error(values, n_batches: int = 16) -> tuple[float, float]:
    """Mean and standard error from sequential batch means.

    A single value has no spread estimate: its standard error is NaN.
    """
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        return float(x.mean()), float("nan")
    if len(x) < 2 * n_batches:
        n_batches = max(2, len(x) // 2)
    batches = np.array_split(x, n_batches)
    means = np.array([b.mean() for b in batches])
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(len(means)))


# ---------------------------------------------------------------------------
# Structure of particle configurations
# ---------------------------------------------------------------------------

def _distances_to_all(point, positions, torus) -> np.ndarray:
    d = np.mod(point - positions, torus.sides)
    d = np.where(d >= 0.5 * torus.sides, d - torus.sides, d)
    return np.linalg.norm(d, axis=-1)


def neighbor_sets(positions: np.ndarray, spec: ParticleSpec) -> list[list[int]]:
    """Neighbors by the midpoint criterion.

    Particles i and j are neighbors iff the center of their minimal
    separation vector is strictly closer to both than to any other particle.
    """
    if spec.torus.dim != 2:
        raise ValueError("neighbor sets are defined for two-dimensional configs")
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    sep = pairwise_min_sep(pos, spec.torus)
    dist = np.linalg.norm(sep, axis=-1)
    neighbors: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            mid = wrap(pos[j] + 0.5 * sep[i, j], spec.torus)
            d_mid = _distances_to_all(mid, pos, spec.torus)
            others = np.delete(d_mid, [i, j])
            if others.size == 0 or np.all(others > 0.5 * dist[i, j]):
                neighbors[i].append(j)
                neighbors[j].append(i)
    return neighbors


def local_orientation(positions: np.ndarray, spec: ParticleSpec) -> np.ndarray:
    """Per-particle six-fold orientation: mean of exp(6 i phi) over neighbors.

    Isolated particles are excluded (NaN) with a warning.
    """
    pos = np.asarray(positions, dtype=float)
    sets = neighbor_sets(pos, spec)
    psi = np.full(len(pos), np.nan + 0j, dtype=complex)
    isolated = []
    for i, nb in enumerate(sets):
        if not nb:
            isolated.append(i)
            continue
        total = 0j
        for j in nb:
            v = min_sep_vector(pos[i], pos[j], spec.torus)
            total += np.exp(6j * math.atan2(v[1], v[0]))
        psi[i] = total / len(nb)
    if isolated:
        warnings.warn(f"{len(isolated)} isolated particle(s) excluded from orientation")
    return psi


@dataclass
class CorrelationCurve:
    r: np.ndarray
    values: np.ndarray
    bin_half_width: float
    normalization: str
    n_configs: int


def _check_grid(r_grid, eps_bin, sigma):
    r = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(r) < 2 * eps_bin - 1e-12):
        raise ValueError("bins overlap: grid spacing must be at least twice the half-width")
    if sigma is not None and np.any(r <= 2 * sigma):
        raise ValueError("correlation grid must start beyond the disk diameter")
    return r


def log_r_grid(r_min: float, r_max: float, n_points: int) -> np.ndarray:
    """Logarithmically spaced separation grid."""
    return np.geomspace(r_min, r_max, n_points)


def positional_correlation(configs, spec: ParticleSpec, r_grid, eps_bin: float) -> CorrelationCurve:
    """Ensemble-averaged count of pairs with |r - d_ij| < eps, per grid point."""
    sigma = getattr(spec.potential, "sigma", None)
    r = _check_grid(r_grid, eps_bin, sigma)
    totals = np.zeros(len(r))
    for pos in configs:
        dist = _upper_distances(pos, spec)
        for k, rk in enumerate(r):
            totals[k] += np.count_nonzero(np.abs(rk - dist) < eps_bin)
    return CorrelationCurve(r, totals / len(configs), eps_bin, "raw_pair_count", len(configs))


def orientational_correlation(configs, spec: ParticleSpec, r_grid, eps_bin: float) -> CorrelationCurve:
    """Orientation-weighted pair correlations, normalized by the |psi|^2 estimate.

    Reports the per-pair mean of Re(psi_i* psi_j) in each bin divided by the
    ensemble estimate of E|psi|^2, so identical orientations give exactly 1 at
    every separation.  Bins that never receive a pair are reported as NaN
    (missing), not zero.
    """
    sigma = getattr(spec.potential, "sigma", None)
    r = _check_grid(r_grid, eps_bin, sigma)
    weighted = np.zeros(len(r))
    counts = np.zeros(len(r), dtype=int)
    norm_acc = 0.0
    for pos in configs:
        pos = np.asarray(pos, dtype=float)
        psi = local_orientation(pos, spec)
        norm_acc += float(np.nanmean(np.abs(psi) ** 2))
        sep = pairwise_min_sep(pos, spec.torus)
        dist = np.linalg.norm(sep, axis=-1)
        iu = np.triu_indices(len(pos), k=1)
        prod = np.real(np.conj(psi)[iu[0]] * psi[iu[1]])
        d = dist[iu]
        for k, rk in enumerate(r):
            mask = np.abs(rk - d) < eps_bin
            counts[k] += int(mask.sum())
            weighted[k] += float(np.nansum(prod[mask]))
    norm = norm_acc / len(configs)
    with np.errstate(invalid="ignore"):
        values = np.where(counts > 0, weighted / np.maximum(counts, 1) / norm, np.nan)
    return CorrelationCurve(r, values, eps_bin, "per_pair/mean_abs_psi_sq", len(configs))


def _upper_distances(positions, spec):
    pos = np.asarray(positions, dtype=float)
    dist = np.linalg.norm(pairwise_min_sep(pos, spec.torus), axis=-1)
    return dist[np.triu_indices(len(pos), k=1)]


def radial_distribution(configs, spec: ParticleSpec, edges: np.ndarray) -> np.ndarray:
    """Annulus-normalized radial distribution on the given bin edges.

    Normalized so a uniform ideal gas gives 1 in every bin (2D torus measure,
    valid for edges below half the box width).
    """
    n = spec.n
    area = spec.torus.volume
    counts = np.zeros(len(edges) - 1)
    for pos in configs:
        d = _upper_distances(pos, spec)
        counts += np.histogram(d, bins=edges)[0]
    counts /= len(configs)
    n_pairs = n * (n - 1) / 2
    shell = math.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    return counts * area / (n_pairs * shell)


def pressure_estimate(configs, spec: ParticleSpec, n_fit_bins: int = 8,
                      fit_range: float = 0.05) -> float:
    """Hard-disk pressure from the contact value of the radial distribution.

    The radial distribution is fit linearly on bins inside
    (2 sigma, (2 + 2*fit_range) sigma] and extrapolated to contact; the
    equation of state then gives beta*p = (eta / (pi sigma^2)) (1 + 2 eta g).
    """
    sigma = spec.potential.sigma
    edges = np.linspace(2 * sigma, 2 * sigma * (1 + fit_range), n_fit_bins + 1)
    g = radial_distribution(configs, spec, edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    raw = np.zeros(len(edges) - 1)
    for pos in configs:
        raw += np.histogram(_upper_distances(pos, spec), bins=edges)[0]
    if raw.sum() < 10 * n_fit_bins:
        need = math.ceil(10 * n_fit_bins / max(raw.sum() / len(configs), 1e-12))
        raise ValueError(f"insufficient contact statistics: {int(raw.sum())} pair counts "
                         f"in the fit window; roughly {need} configurations required")
    slope, intercept = np.polyfit(centers, g, 1)
    g_contact = slope * 2 * sigma + intercept
    eta = spec.density
    return float(eta / (math.pi * sigma**2) * (1.0 + 2.0 * eta * g_contact))
