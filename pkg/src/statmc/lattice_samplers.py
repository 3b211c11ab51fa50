"""Markov kernels for lattice models.

Single-flip Metropolis and Glauber dynamics (random scan by default,
systematic scan by flag), the Swendsen-Wang and Wolff cluster updates at zero
field, and the event-chain sampler for the zero-field XY model.

The single-flip loops run over plain Python lists with precomputed acceptance
tables; cluster growth switches to layered numpy breadth-first search on
large lattices.  All randomness comes from the chain-local generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import UnsupportedModelError
from .lattice import ISING, POTTS, XY, LatticeSpec, neighbor_table, edge_list, validate_spins

TWO_PI = 2.0 * math.pi

#: Below this site count the scalar cluster-growth path beats numpy overhead.
_VECTOR_THRESHOLD = 256


@dataclass
class LatticeChainState:
    """One chain's spins, generator and elapsed time (sweeps or cluster steps)."""

    spins: np.ndarray
    rng: np.random.Generator
    time: float = 0.0


def metropolis_acceptance(beta_delta: float) -> float:
    return min(1.0, math.exp(-beta_delta))


def glauber_acceptance(beta_delta: float) -> float:
    return 1.0 / (1.0 + math.exp(beta_delta))


@lru_cache(maxsize=None)
def _neighbor_tuples(dims):
    return [tuple(int(j) for j in row) for row in neighbor_table(dims)]


@lru_cache(maxsize=None)
def _edge_tuples(dims):
    return [tuple(int(v) for v in row) for row in edge_list(dims)]


@lru_cache(maxsize=None)
def _flip_table(spec: LatticeSpec, rule_name: str) -> tuple[tuple[float, ...], ...]:
    """Acceptance lookup for an Ising sign flip, indexed [(s+1)/2][nsum + 2d]."""
    rule = metropolis_acceptance if rule_name == "metropolis" else glauber_acceptance
    two_d = 2 * spec.n_dim
    table = []
    for s in (-1, 1):
        row = []
        for nsum in range(-two_d, two_d + 1):
            delta = 2.0 * spec.coupling * s * nsum + 2.0 * spec.field * s
            row.append(rule(spec.beta * delta))
        table.append(tuple(row))
    return tuple(table)


def _ising_sweeps(state: LatticeChainState, spec: LatticeSpec, n_sweeps: int,
                  rule_name: str, systematic: bool) -> int:
    n = spec.n_sites
    two_d = 2 * spec.n_dim
    nb = _neighbor_tuples(spec.dims)
    acc = _flip_table(spec, rule_name)
    spins = state.spins.tolist()
    rng = state.rng
    accepted = 0
    for _ in range(n_sweeps):
        sites = range(n) if systematic else rng.integers(0, n, size=n).tolist()
        marks = rng.random(n).tolist()
        for k, i in enumerate(sites):
            s = spins[i]
            nsum = 0
            for j in nb[i]:
                nsum += spins[j]
            if marks[k] < acc[(s + 1) >> 1][nsum + two_d]:
                spins[i] = -s
                accepted += 1
    state.spins = np.array(spins, dtype=np.int64)
    state.time += n_sweeps
    return accepted


def _potts_sweeps(state, spec, n_sweeps, systematic):
    n, q, bj = spec.n_sites, spec.q, spec.beta * spec.coupling
    nb = _neighbor_tuples(spec.dims)
    spins = state.spins.tolist()
    rng = state.rng
    accepted = 0
    for _ in range(n_sweeps):
        sites = range(n) if systematic else rng.integers(0, n, size=n).tolist()
        shifts = rng.integers(1, q, size=n).tolist()
        marks = rng.random(n).tolist()
        for k, i in enumerate(sites):
            s = spins[i]
            new = 1 + (s - 1 + shifts[k]) % q
            same_old = same_new = 0
            for j in nb[i]:
                sj = spins[j]
                if sj == s:
                    same_old += 1
                elif sj == new:
                    same_new += 1
            # delta = -J (same_new - same_old)
            if same_new >= same_old or marks[k] < math.exp(bj * (same_new - same_old)):
                spins[i] = new
                accepted += 1
    state.spins = np.array(spins, dtype=np.int64)
    state.time += n_sweeps
    return accepted


def _xy_sweeps(state, spec, n_sweeps, step_angle, systematic):
    n, j_c, beta = spec.n_sites, spec.coupling, spec.beta
    hx, hy = spec.field_xy
    has_field = hx != 0.0 or hy != 0.0
    nb = _neighbor_tuples(spec.dims)
    cos, exp = math.cos, math.exp
    spins = state.spins.tolist()
    rng = state.rng
    accepted = 0
    for _ in range(n_sweeps):
        sites = range(n) if systematic else rng.integers(0, n, size=n).tolist()
        moves = rng.uniform(-step_angle, step_angle, size=n).tolist()
        marks = rng.random(n).tolist()
        for k, i in enumerate(sites):
            old = spins[i]
            new = (old + moves[k]) % TWO_PI
            delta = 0.0
            for jj in nb[i]:
                t = spins[jj]
                delta -= j_c * (cos(new - t) - cos(old - t))
            if has_field:
                delta -= hx * (cos(new) - cos(old)) + hy * (math.sin(new) - math.sin(old))
            if delta <= 0.0 or marks[k] < exp(-beta * delta):
                spins[i] = new
                accepted += 1
    state.spins = np.array(spins, dtype=float)
    state.time += n_sweeps
    return accepted


def metropolis_sweeps(state: LatticeChainState, spec: LatticeSpec, n_sweeps: int = 1,
                      step_angle: float = 1.0, systematic: bool = False) -> float:
    """Run N-proposal Metropolis sweeps; returns the acceptance fraction.

    Proposals: Ising sign flip, Potts uniform different state, XY angle
    perturbation uniform on [-step_angle, step_angle].
    """
    validate_spins(state.spins, spec)
    if spec.model == ISING:
        accepted = _ising_sweeps(state, spec, n_sweeps, "metropolis", systematic)
    elif spec.model == POTTS:
        accepted = _potts_sweeps(state, spec, n_sweeps, systematic)
    else:
        accepted = _xy_sweeps(state, spec, n_sweeps, step_angle, systematic)
    return accepted / (n_sweeps * spec.n_sites)


def glauber_sweeps(state: LatticeChainState, spec: LatticeSpec, n_sweeps: int = 1,
                   systematic: bool = False) -> float:
    """Glauber (heat-bath) sweeps for the Ising model; returns acceptance fraction.

    The Barker rule exp(-bD)/(1+exp(-bD)) makes each update a draw from the
    site's conditional distribution given its neighbors.
    """
    if spec.model != ISING:
        raise UnsupportedModelError("Glauber dynamics are implemented for the Ising model")
    validate_spins(state.spins, spec)
    accepted = _ising_sweeps(state, spec, n_sweeps, "glauber", systematic)
    return accepted / (n_sweeps * spec.n_sites)


# ---------------------------------------------------------------------------
# Cluster updates
# ---------------------------------------------------------------------------

def _require_cluster_model(spec: LatticeSpec):
    if spec.model != ISING:
        raise UnsupportedModelError("cluster updates are implemented for the Ising model")
    if spec.field != 0.0:
        raise UnsupportedModelError("cluster updates require zero external field")


def bond_probability(spec: LatticeSpec, aligned: bool) -> float:
    """Bond activation probability: 1 - exp(-2 beta J) for aligned spins, else 0."""
    if not aligned:
        return 0.0
    return 1.0 - math.exp(-2.0 * spec.beta * spec.coupling)


def sample_bond_field(spins: np.ndarray, spec: LatticeSpec, rng: np.random.Generator):
    """Bond variables for every lattice edge given the spins.

    Returns (edges, bonds) with bonds[e] = 1 only between aligned spins.
    """
    edges = edge_list(spec.dims)
    aligned = spins[edges[:, 0]] == spins[edges[:, 1]]
    p = bond_probability(spec, True)
    return edges, aligned & (rng.random(len(edges)) < p)


def _find(parent: list[int], i: int) -> int:
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def swendsen_wang_step(state: LatticeChainState, spec: LatticeSpec) -> int:
    """One Swendsen-Wang update; returns the number of clusters.

    Bonds are sampled independently given the spins, clusters come from
    union-find over active bonds, and each cluster flips with probability 1/2.
    Small lattices take a scalar path to dodge numpy call overhead.
    """
    _require_cluster_model(spec)
    n = spec.n_sites
    rng = state.rng
    p_add = bond_probability(spec, True)
    parent = list(range(n))
    if n < _VECTOR_THRESHOLD:
        spins = state.spins.tolist()
        rand = rng.random
        for a, b in _edge_tuples(spec.dims):
            if spins[a] == spins[b] and rand() < p_add:
                ra, rb = _find(parent, a), _find(parent, b)
                if ra != rb:
                    parent[rb] = ra
        coins = [rand() < 0.5 for _ in range(n)]
        flipped = [-s if coins[_find(parent, i)] else s
                   for i, s in enumerate(spins)]
        state.spins = np.array(flipped, dtype=np.int64)
        state.time += 1
        return len({_find(parent, i) for i in range(n)})
    edges, bonds = sample_bond_field(state.spins, spec, rng)
    for (a, b), active in zip(edges.tolist(), bonds.tolist()):
        if active:
            ra, rb = _find(parent, a), _find(parent, b)
            if ra != rb:
                parent[rb] = ra
    coins = rng.random(n) < 0.5
    roots = np.array([_find(parent, i) for i in range(n)])
    flip = coins[roots]
    state.spins = np.where(flip, -state.spins, state.spins)
    state.time += 1
    return int(len(np.unique(roots)))


def _wolff_scalar(state, spec, p_add):
    rng = state.rng
    nb = _neighbor_tuples(spec.dims)
    spins = state.spins.tolist()
    seed = int(rng.integers(spec.n_sites))
    target = spins[seed]
    in_cluster = bytearray(spec.n_sites)
    in_cluster[seed] = 1
    stack = [seed]
    cluster = [seed]
    rand = rng.random
    while stack:
        i = stack.pop()
        for j in nb[i]:
            if not in_cluster[j] and spins[j] == target and rand() < p_add:
                in_cluster[j] = 1
                stack.append(j)
                cluster.append(j)
    flipped = -target
    for i in cluster:
        spins[i] = flipped
    state.spins = np.array(spins, dtype=np.int64)
    return len(cluster)


def _wolff_vector(state, spec, p_add):
    spins = state.spins
    rng = state.rng
    table = neighbor_table(spec.dims)
    seed = int(rng.integers(spec.n_sites))
    target = spins[seed]
    aligned = spins == target
    in_cluster = np.zeros(spec.n_sites, dtype=bool)
    in_cluster[seed] = True
    frontier = np.array([seed])
    size = 1
    while frontier.size:
        cand = table[frontier].ravel()
        cand = cand[aligned[cand] & ~in_cluster[cand]]
        if cand.size == 0:
            break
        added = np.unique(cand[rng.random(cand.size) < p_add])
        added = added[~in_cluster[added]]
        in_cluster[added] = True
        frontier = added
        size += added.size
    state.spins = np.where(in_cluster, -spins, spins)
    return size


def wolff_step(state: LatticeChainState, spec: LatticeSpec, force_path: str | None = None) -> int:
    """One Wolff single-cluster update; returns the cluster size.

    Grows the seed's cluster bond by bond with probability 1 - exp(-2 beta J)
    per aligned edge and flips it deterministically.
    """
    _require_cluster_model(spec)
    p_add = bond_probability(spec, True)
    path = force_path or ("scalar" if spec.n_sites < _VECTOR_THRESHOLD else "vector")
    size = _wolff_scalar(state, spec, p_add) if path == "scalar" else _wolff_vector(state, spec, p_add)
    state.time += 1
    return size


# ---------------------------------------------------------------------------
# Event-chain sampler for the XY model
# ---------------------------------------------------------------------------

@dataclass
class XYEventChainState:
    """Lifted variables of the XY event chain: active spin and its direction."""

    active: int
    direction: int
    to_refresh: float
    chain_length: float


def new_xy_event_chain(spec: LatticeSpec, rng: np.random.Generator,
                       chain_length: float | None = None) -> XYEventChainState:
    """Fresh lifted state; the ballistic chain length defaults to 2 pi N."""
    if chain_length is None:
        chain_length = TWO_PI * spec.n_sites
    active = int(rng.integers(spec.n_sites))
    direction = 1 if rng.random() < 0.5 else -1
    return XYEventChainState(active, direction, chain_length, chain_length)


def xy_factor_rate(delta: float, direction: int, spec: LatticeSpec) -> float:
    """Instantaneous event rate of one neighbor factor at angle difference delta."""
    return spec.beta * max(0.0, spec.coupling * math.sin(delta) * direction)


def _xy_event_time(delta0: float, coupling: float, budget: float) -> float:
    """Time until the accumulated uphill energy of one cosine factor reaches budget.

    The factor potential is -J cos(delta) with delta advancing at unit rate;
    the event-time law inverts analytically through climbs and descents.
    """
    j = coupling
    t = 0.0
    th = delta0 % TWO_PI
    if 0.0 < th < math.pi:
        gain = j * (1.0 + math.cos(th))
        if budget <= gain:
            return math.acos(max(-1.0, min(1.0, math.cos(th) - budget / j))) - th
        budget -= gain
        t += (math.pi - th) + math.pi
    elif th >= math.pi:
        t += TWO_PI - th
    n_full = math.floor(budget / (2.0 * j))
    budget -= n_full * 2.0 * j
    return t + n_full * TWO_PI + math.acos(max(-1.0, min(1.0, 1.0 - budget / j)))


def ecmc_xy_run(state: LatticeChainState, chain: XYEventChainState, spec: LatticeSpec,
                duration: float) -> int:
    """Advance the XY event chain by the given angular duration; returns event count.

    The active spin advances at unit rate; each of its 2d cosine factors fires
    with rate beta * max(0, J sin(x_i - x_j) * v), drawn by analytic inversion
    of the integrated rate.  An event transfers the active label; the
    direction is resampled after every fixed ballistic chain length.
    """
    if spec.model != XY:
        raise UnsupportedModelError("the event chain here targets the XY model")
    if tuple(spec.field_xy) != (0.0, 0.0):
        raise UnsupportedModelError("event-chain XY supports zero field only "
                                    "(no rate inversion for the field factor)")
    if spec.coupling <= 0:
        raise UnsupportedModelError("event-chain XY requires ferromagnetic coupling")
    nb = _neighbor_tuples(spec.dims)
    theta = state.spins.astype(float)
    rng = state.rng
    beta, j_c = spec.beta, spec.coupling
    events = 0
    remaining = float(duration)
    while remaining > 1e-15:
        i, v = chain.active, chain.direction
        horizon = min(remaining, chain.to_refresh)
        best_t, best_j = math.inf, -1
        for jj in nb[i]:
            delta0 = (theta[i] - theta[jj]) * v
            t = _xy_event_time(delta0, j_c, rng.standard_exponential() / beta)
            if t < best_t:
                best_t, best_j = t, jj
        step = min(best_t, horizon)
        theta[i] = (theta[i] + v * step) % TWO_PI
        remaining -= step
        chain.to_refresh -= step
        state.time += step
        if best_t < horizon:
            chain.active = best_j
            events += 1
        elif chain.to_refresh <= 1e-15:
            chain.direction = 1 if rng.random() < 0.5 else -1
            chain.to_refresh = chain.chain_length
    state.spins = theta
    return events
