"""Exact reference results used as test oracles.

Contains the one-dimensional Ising transfer matrix, the thermodynamic
two-dimensional specific heat and spontaneous magnetization, exhaustive
enumeration of small discrete lattice models, and exact asymptotic variances
of single-flip kernels from their full transition matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import StateSpaceTooLargeError, UnsupportedModelError
from .lattice import ISING, POTTS, LatticeSpec, edge_list, local_energy_delta

#: Critical coupling of the square-lattice Ising model, beta_c * J.
CRITICAL_COUPLING = float(0.5 * np.log(1.0 + np.sqrt(2.0)))

ENUMERATION_LIMIT = 2**20
KERNEL_LIMIT = 2**12


class NearCriticalWarning(UserWarning):
    """Specific-heat evaluation requested too close to the divergence."""


@dataclass(frozen=True)
class TransferMatrixResult:
    lam_plus: float
    lam_minus: float
    log_partition: float
    free_energy: float
    per_particle_free_energy: float


def ising1d_free_energy(beta: float, coupling: float, field: float, n_sites: int) -> TransferMatrixResult:
    """Free energy of the 1D Ising ring from its transfer-matrix eigenvalues.

    Uses ln Z = N ln(lam_plus) + ln(1 + (lam_minus/lam_plus)^N) so large N
    never overflows.
    """
    if beta <= 0 or coupling <= 0:
        raise ValueError("beta and coupling must be positive")
    if n_sites < 2:
        raise ValueError("need at least two sites")
    bj, bh = beta * coupling, beta * field
    root = np.sqrt(np.sinh(bh) ** 2 + np.exp(-4.0 * bj))
    lam_plus = np.exp(bj) * (np.cosh(bh) + root)
    lam_minus = np.exp(bj) * (np.cosh(bh) - root)
    log_z = n_sites * np.log(lam_plus) + np.log1p((lam_minus / lam_plus) ** n_sites)
    free = -log_z / beta
    return TransferMatrixResult(float(lam_plus), float(lam_minus), float(log_z),
                                float(free), float(free / n_sites))


def _gamma_integrand(w: float, kappa_sq: float) -> float:
    return np.log(0.5 * (1.0 + np.sqrt(max(0.0, 1.0 - kappa_sq * np.sin(w) ** 2))))


def onsager_gamma(bj: float) -> float:
    """ln-partition density gamma of the square-lattice Ising model at coupling bj."""
    kappa = 2.0 * np.sinh(2.0 * bj) / np.cosh(2.0 * bj) ** 2
    integral, _ = quad(_gamma_integrand, 0.0, 0.5 * np.pi, args=(kappa * kappa,),
                       epsabs=1e-10, limit=200)
    return float(np.log(2.0 * np.cosh(2.0 * bj)) + integral / np.pi)


def onsager_specific_heat(bj: float) -> float:
    """Thermodynamic zero-field specific heat per particle at coupling bj.

    Evaluates (bj)^2 * gamma''(bj) by Richardson-extrapolated central
    differences of the quadrature for gamma.  Diverges logarithmically at the
    critical coupling; evaluation within 1e-4 of it triggers a warning.
    """
    if bj <= 0:
        raise ValueError("coupling must be positive")
    if abs(bj - CRITICAL_COUPLING) < 1e-4:
        warnings.warn(f"specific heat evaluated within 1e-4 of the critical coupling "
                      f"({bj:.6f} vs {CRITICAL_COUPLING:.6f}); value is near-singular",
                      NearCriticalWarning)

    def second_diff(h: float) -> float:
        return (onsager_gamma(bj + h) - 2.0 * onsager_gamma(bj) + onsager_gamma(bj - h)) / h**2

    h = 1e-4 * bj
    d_h, d_half = second_diff(h), second_diff(0.5 * h)
    return float(bj * bj * (4.0 * d_half - d_h) / 3.0)


def spontaneous_magnetization(bj: float) -> float:
    """Spontaneous magnetic density of the square-lattice Ising model.

    Zero at and below the critical coupling, (1 - sinh(2 bj)^-4)^(1/8) above.
    """
    if bj <= 0:
        raise ValueError("coupling must be positive")
    if bj <= CRITICAL_COUPLING:
        return 0.0
    return float((1.0 - np.sinh(2.0 * bj) ** -4.0) ** 0.125)


# ---------------------------------------------------------------------------
# Exhaustive enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactEnsemble:
    """All states of a small discrete lattice model with exact Boltzmann weights."""

    spec: LatticeSpec
    energies: np.ndarray
    probabilities: np.ndarray
    log_partition: float
    mean_energy: float
    var_energy: float
    specific_heat: float
    mean_abs_m: float
    entropy: float

    @property
    def n_states(self) -> int:
        return len(self.probabilities)


def _spin_levels(spec: LatticeSpec) -> np.ndarray:
    if spec.model == ISING:
        return np.array([-1, 1], dtype=np.int64)
    return np.arange(1, spec.q + 1, dtype=np.int64)


def state_index(spins: np.ndarray, spec: LatticeSpec) -> int:
    """Index of a configuration in the enumeration order (site k = digit q^k)."""
    q = 2 if spec.model == ISING else spec.q
    digits = (np.asarray(spins) + 1) // 2 if spec.model == ISING else np.asarray(spins) - 1
    return int(np.sum(digits * q ** np.arange(spec.n_sites, dtype=np.int64)))


def enumerate_exact(spec: LatticeSpec) -> ExactEnsemble:
    """Exact ensemble of every configuration (discrete models, q^N <= 2^20).

    States are decoded in vectorized base-q digits; energies use the edge-list
    form of the pair sum.
    """
    if spec.model not in (ISING, POTTS):
        raise UnsupportedModelError("enumeration covers discrete (Ising/Potts) models only")
    q = 2 if spec.model == ISING else spec.q
    n = spec.n_sites
    n_states = q**n
    if n_states > ENUMERATION_LIMIT:
        raise StateSpaceTooLargeError(f"{q}^{n} = {n_states} states exceeds {ENUMERATION_LIMIT}")

    ids = np.arange(n_states, dtype=np.int64)
    digits = np.empty((n, n_states), dtype=np.int8)
    rest = ids.copy()
    for k in range(n):
        digits[k] = rest % q
        rest //= q

    j = spec.coupling
    energies = np.zeros(n_states)
    if spec.model == ISING:
        spins = (2 * digits - 1).astype(np.int8)
        for a, b in edge_list(spec.dims):
            energies -= j * spins[a] * spins[b]
        energies -= spec.field * spins.sum(axis=0)
        abs_m = np.abs(spins.sum(axis=0, dtype=np.int64)) / n
    else:
        for a, b in edge_list(spec.dims):
            energies -= j * (digits[a] == digits[b])
        abs_m = np.mean(digits == 0, axis=0)

    shifted = -spec.beta * (energies - energies.min())
    weights = np.exp(shifted)
    z_shift = weights.sum()
    probs = weights / z_shift
    log_z = float(np.log(z_shift) - spec.beta * energies.min())
    mean_e = float(np.dot(probs, energies))
    var_e = float(np.dot(probs, energies**2) - mean_e**2)
    entropy = float(-np.dot(probs, np.log(probs)))
    return ExactEnsemble(spec, energies, probs, log_z, mean_e, var_e,
                         float(spec.beta**2 * var_e), float(np.dot(probs, abs_m)), entropy)


def _decode_state(state_id: int, spec: LatticeSpec) -> np.ndarray:
    q = 2 if spec.model == ISING else spec.q
    digits = np.empty(spec.n_sites, dtype=np.int64)
    rest = state_id
    for k in range(spec.n_sites):
        digits[k] = rest % q
        rest //= q
    return 2 * digits - 1 if spec.model == ISING else digits + 1


def kernel_matrix(kind: str, spec: LatticeSpec) -> np.ndarray:
    """Full transition matrix of a random-scan single-flip kernel (Ising only)."""
    if spec.model != ISING:
        raise UnsupportedModelError("kernel matrices are built for Ising models only")
    if kind not in ("metropolis", "glauber"):
        raise ValueError(f"unknown kernel {kind!r}")
    n = spec.n_sites
    n_states = 2**n
    if n_states > KERNEL_LIMIT:
        raise StateSpaceTooLargeError(f"2^{n} = {n_states} states exceeds {KERNEL_LIMIT}")
    p = np.zeros((n_states, n_states))
    for s in range(n_states):
        spins = _decode_state(s, spec)
        stay = 1.0
        for site in range(n):
            delta = local_energy_delta(spins, site, -spins[site], spec)
            bd = spec.beta * delta
            if kind == "metropolis":
                accept = min(1.0, np.exp(-bd))
            else:
                accept = 1.0 / (1.0 + np.exp(bd))
            target = s ^ (1 << site)
            p[s, target] += accept / n
            stay -= accept / n
        p[s, s] += stay
    return p


def exact_kernel_variance(kind: str, spec: LatticeSpec, observable) -> float:
    """Asymptotic variance of the ergodic average of ``observable`` under the kernel.

    Solves the Poisson equation with the fundamental-matrix form
    nu = 2 <f0, (I-P)^-1 f0>_pi - Var_pi(f), f0 = f - pi(f), valid for the
    reversible random-scan kernels built here.

    ``observable`` maps a spin array to a float.
    """
    p = kernel_matrix(kind, spec)
    ensemble = enumerate_exact(spec)
    pi = ensemble.probabilities
    f = np.array([observable(_decode_state(s, spec)) for s in range(len(pi))])
    f0 = f - np.dot(pi, f)
    var = float(np.dot(pi, f0**2))
    # Rank-one shift makes (I - P) invertible; pi f0 = 0 keeps the solution exact.
    g = np.linalg.solve(np.eye(len(pi)) - p + np.outer(np.ones(len(pi)), pi), f0)
    return float(2.0 * np.dot(pi, f0 * g) - var)
