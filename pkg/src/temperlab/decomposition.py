"""Finite-state laboratory for variance-decomposition bounds.

Everything here is a reversible continuous-time chain on at most a few
hundred states, where Poincare constants are exact eigenvalue computations.
The point is to check, at desk scale, that the projected-chain machinery
gives real bounds: build a mixture (or tempering) chain whose Dirichlet form
decomposes exactly, compute the true Poincare constant by brute force, and
compare it against the bound assembled from component constants plus a tiny
projected chain.

Discrete sums replace integrals throughout; the quadrature twins of the
divergences live in divergences.py and are deliberately not reused here, so
the two routes stay independent.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MAX_STATES",
    "RATE_CAP",
    "INFINITY",
    "ReducibleChainError",
    "FiniteMarkovProcess",
    "discretize_density",
    "mixture_chain",
    "dirichlet_form",
    "variance",
    "poincare_constant",
    "chi2_discrete",
    "chi2_max_discrete",
    "overlap_discrete",
    "TemperingChain",
    "build_tempering_chain",
    "ProjectedChain",
    "build_projected_chain",
    "CanonicalPathSet",
    "geodesic_paths",
    "congestion_bound",
    "DecompositionReport",
    "SimpleInstance",
    "TemperingInstance",
    "verify_simple_decomposition",
    "verify_tempering_decomposition",
    "random_simple_instance",
    "random_tempering_instance",
    "instance_hash",
]

MAX_STATES = 512
# stands in for an infinite move rate when two components coincide exactly
RATE_CAP = 1e12
INFINITY = float("inf")


class ReducibleChainError(RuntimeError):
    """The chain does not connect all states; no spectral gap exists."""


@dataclass(frozen=True)
class FiniteMarkovProcess:
    """Reversible continuous-time generator with its stationary distribution.

    rates[x, y] for x != y is the jump rate; diagonals make rows sum to zero.
    Reversibility (stationary flow symmetry) is validated on construction,
    not assumed.
    """

    rates: np.ndarray
    stationary: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        Q = np.asarray(self.rates, dtype=float)
        pi = np.asarray(self.stationary, dtype=float)
        n = pi.size
        if Q.shape != (n, n):
            raise ValueError("rates must be square and match the stationary vector")
        if n < 1:
            raise ValueError("need at least one state")
        if n > MAX_STATES:
            raise ValueError(f"at most {MAX_STATES} states (got {n})")
        if np.any(pi <= 0):
            raise ValueError("stationary probabilities must all be positive")
        if abs(float(pi.sum()) - 1.0) > 1e-12:
            raise ValueError("stationary distribution must sum to 1")
        off = Q.copy()
        np.fill_diagonal(off, 0.0)
        if float(off.min()) < -1e-12:
            raise ValueError("off-diagonal rates must be nonnegative")
        off = np.maximum(off, 0.0)
        scale = max(float(np.abs(Q).max()), 1.0)
        rowsum = np.abs(Q.sum(axis=1))
        if float(rowsum.max()) > 1e-10 * scale:
            raise ValueError("generator rows must sum to zero")
        flow = pi[:, None] * off
        asym = float(np.abs(flow - flow.T).max())
        if asym > 1e-10 * max(float(flow.max()), 1e-300):
            raise ValueError(
                f"stationary flows are asymmetric by {asym:.3g}; "
                "the chain is not reversible"
            )
        object.__setattr__(self, "rates", Q)
        object.__setattr__(self, "stationary", pi)

    @property
    def num_states(self) -> int:
        return self.stationary.size

    @staticmethod
    def from_offdiag(off: np.ndarray, stationary: np.ndarray, labels: tuple = ()):
        """Fill the diagonal so rows sum to zero, then validate."""
        off = np.asarray(off, dtype=float).copy()
        np.fill_diagonal(off, 0.0)
        Q = off
        np.fill_diagonal(Q, -off.sum(axis=1))
        return FiniteMarkovProcess(rates=Q, stationary=stationary, labels=labels)


def _uniform_spacing(grid: np.ndarray) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be 1-d with at least two points")
    d = np.diff(grid)
    h = float(d[0])
    if h <= 0 or np.any(np.abs(d - h) > 1e-9 * abs(h)):
        raise ValueError("grid points must be uniformly spaced and increasing")
    return h


def discretize_density(
    grid: np.ndarray,
    density,
    base_rate: float | None = None,
) -> FiniteMarkovProcess:
    """Birth-death Metropolis chain on a uniform 1-d grid targeting `density`.

    density: callable on the grid or an array of (unnormalized) masses.
    Neighbour rates are base_rate * min(1, pi_nb / pi_x); the default
    base_rate 1/h^2 makes the chain a discrete Langevin diffusion in the
    small-h limit.
    """
    grid = np.asarray(grid, dtype=float)
    h = _uniform_spacing(grid)
    if grid.size > MAX_STATES:
        raise ValueError(f"at most {MAX_STATES} grid points")
    rate = 1.0 / h**2 if base_rate is None else float(base_rate)
    if rate <= 0:
        raise ValueError("base_rate must be > 0")
    vals = np.asarray(density(grid) if callable(density) else density, dtype=float)
    if vals.shape != grid.shape:
        raise ValueError("need one density value per grid point")
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise ValueError(
            "density must be positive and finite on the whole grid; shrink "
            "the grid or fatten the tails"
        )
    pi = vals / vals.sum()
    n = grid.size
    off = np.zeros((n, n))
    idx = np.arange(n - 1)
    up = rate * np.minimum(1.0, pi[idx + 1] / pi[idx])
    down = rate * np.minimum(1.0, pi[idx] / pi[idx + 1])
    off[idx, idx + 1] = up
    off[idx + 1, idx] = down
    return FiniteMarkovProcess.from_offdiag(off, pi)


def mixture_chain(
    components: list,
    weights,
) -> FiniteMarkovProcess:
    """Chain whose Dirichlet form is exactly the weighted sum of components'.

    All components must share a state space.  The stationary law is
    pi = sum_j w_j pi_j and the flows add: pi(x) Q(x,y) =
    sum_j w_j pi_j(x) Q_j(x,y).  Both sides of the decomposition identity
    then agree to rounding, which is the whole point of this construction.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size != len(components) or w.size == 0:
        raise ValueError("need one weight per component")
    if np.any(w <= 0) or abs(float(w.sum()) - 1.0) > 1e-12:
        raise ValueError("weights must be positive and sum to 1")
    n = components[0].num_states
    if any(c.num_states != n for c in components):
        raise ValueError("components must share one state space")
    pi = sum(wj * c.stationary for wj, c in zip(w, components))
    flow = np.zeros((n, n))
    for wj, c in zip(w, components):
        off = c.rates.copy()
        np.fill_diagonal(off, 0.0)
        flow += wj * (c.stationary[:, None] * off)
    flow = 0.5 * (flow + flow.T)  # symmetric up to rounding already
    off = flow / pi[:, None]
    return FiniteMarkovProcess.from_offdiag(off, pi)


def variance(proc: FiniteMarkovProcess, g: np.ndarray) -> float:
    g = np.asarray(g, dtype=float)
    pi = proc.stationary
    mean = float(pi @ g)
    return float(pi @ (g - mean) ** 2)


def dirichlet_form(proc: FiniteMarkovProcess, g, f=None) -> float:
    """E(f, g) = -<f, Q g>_pi; with f omitted, the quadratic form E(g, g)."""
    g = np.asarray(g, dtype=float)
    f = g if f is None else np.asarray(f, dtype=float)
    return -float((proc.stationary * f) @ (proc.rates @ g))


def _components_by_bfs(adj: np.ndarray) -> np.ndarray:
    n = adj.shape[0]
    comp = np.full(n, -1, dtype=int)
    c = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        stack = [s]
        comp[s] = c
        while stack:
            x = stack.pop()
            for y in np.nonzero(adj[x])[0]:
                if comp[y] < 0:
                    comp[y] = c
                    stack.append(int(y))
        c += 1
    return comp


def poincare_constant(proc: FiniteMarkovProcess) -> float:
    """Smallest C with Var(g) <= C E(g, g): one over the spectral gap.

    A single state has no variance to bound, so its constant is 0.  A chain
    that fails to connect raises ReducibleChainError; callers that want a
    vacuous bound should catch it and use inf.
    """
    n = proc.num_states
    if n == 1:
        return 0.0
    off = proc.rates.copy()
    np.fill_diagonal(off, 0.0)
    comp = _components_by_bfs(off > 0.0)
    if comp.max() > 0:
        raise ReducibleChainError(
            f"chain splits into {comp.max() + 1} closed classes"
        )
    sqrt_pi = np.sqrt(proc.stationary)
    S = (sqrt_pi[:, None] * proc.rates) / sqrt_pi[None, :]
    S = 0.5 * (S + S.T)
    evals = np.linalg.eigvalsh(-S)
    scale = max(float(evals[-1]), 1.0)
    if abs(float(evals[0])) > 1e-9 * scale:
        raise ValueError(f"ground eigenvalue {evals[0]:.3g} is not numerically zero")
    gap = float(evals[1])
    if gap <= 1e-12 * scale:
        raise ReducibleChainError("spectral gap is numerically zero")
    return 1.0 / gap


# ---------------------------------------------------------------------------
# discrete divergences (finite-lab twins of the quadrature versions)


def chi2_discrete(q: np.ndarray, p: np.ndarray) -> float:
    """chi^2(q || p) = sum q^2/p - 1 for finite distributions."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape:
        raise ValueError("distributions must have the same length")
    if np.any(q < 0) or np.any(p < 0):
        raise ValueError("probabilities must be nonnegative")
    for name, v in (("q", q), ("p", p)):
        if abs(float(v.sum()) - 1.0) > 1e-10:
            raise ValueError(f"{name} must sum to 1")
    off = p <= 0.0
    if np.any(q[off] > 0.0):
        return INFINITY
    on = ~off
    return max(float(np.sum(q[on] ** 2 / p[on])) - 1.0, 0.0)


def chi2_max_discrete(a: np.ndarray, b: np.ndarray) -> float:
    return max(chi2_discrete(a, b), chi2_discrete(b, a))


def overlap_discrete(p: np.ndarray, q: np.ndarray, scale: float = 1.0) -> float:
    """sum_x min(scale * p, q); the vertical-move overlap mass."""
    if scale <= 0:
        raise ValueError("scale must be > 0")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must have the same length")
    return float(np.minimum(scale * p, q).sum())


# ---------------------------------------------------------------------------
# tempering chain on level x position states


@dataclass(frozen=True)
class TemperingChain:
    """Joint chain on (level, position) with adjacent-level exchange moves."""

    process: FiniteMarkovProcess
    level_processes: tuple
    rel_probs: np.ndarray
    swap_rate: float
    num_positions: int

    @property
    def num_levels(self) -> int:
        return self.rel_probs.size

    def flat_index(self, level: int, position: int) -> int:
        if not 1 <= level <= self.num_levels:
            raise ValueError("level out of range")
        if not 0 <= position < self.num_positions:
            raise ValueError("position out of range")
        return (level - 1) * self.num_positions + position

    def split(self, g: np.ndarray) -> np.ndarray:
        """Reshape a joint observable to (levels, positions)."""
        g = np.asarray(g, dtype=float)
        return g.reshape(self.num_levels, self.num_positions)


def build_tempering_chain(
    level_processes: list,
    rel_probs,
    swap_rate: float,
) -> TemperingChain:
    """Assemble the joint simulated-tempering chain from per-level chains.

    Within level i the generator is the level chain's.  Between (i, x) and
    (i+-1, x) the rate is (swap_rate / 2) * min(r' pi'(x) / (r pi(x)), 1):
    propose each neighbour level with probability 1/2, accept by stationary
    ratio.  Joint stationary law: r_i pi_i(x).
    """
    r = np.asarray(rel_probs, dtype=float)
    L = r.size
    if L != len(level_processes) or L == 0:
        raise ValueError("need one relative probability per level")
    if np.any(r <= 0) or abs(float(r.sum()) - 1.0) > 1e-12:
        raise ValueError("rel_probs must be positive and sum to 1")
    if swap_rate <= 0:
        raise ValueError("swap_rate must be > 0")
    n = level_processes[0].num_states
    if any(p.num_states != n for p in level_processes):
        raise ValueError("levels must share one position grid")
    if L * n > MAX_STATES:
        raise ValueError(f"joint chain would have {L * n} > {MAX_STATES} states")

    N = L * n
    off = np.zeros((N, N))
    pi = np.zeros(N)
    for i in range(L):
        sl = slice(i * n, (i + 1) * n)
        block = level_processes[i].rates.copy()
        np.fill_diagonal(block, 0.0)
        off[sl, sl] = block
        pi[sl] = r[i] * level_processes[i].stationary
    for i in range(L - 1):
        lo = slice(i * n, (i + 1) * n)
        hi = slice((i + 1) * n, (i + 2) * n)
        pi_lo = pi[lo]
        pi_hi = pi[hi]
        up = 0.5 * swap_rate * np.minimum(pi_hi / pi_lo, 1.0)
        down = 0.5 * swap_rate * np.minimum(pi_lo / pi_hi, 1.0)
        ix = np.arange(n)
        off[i * n + ix, (i + 1) * n + ix] = up
        off[(i + 1) * n + ix, i * n + ix] = down
    labels = tuple((i + 1, x) for i in range(L) for x in range(n))
    proc = FiniteMarkovProcess.from_offdiag(off, pi, labels=labels)
    return TemperingChain(
        process=proc,
        level_processes=tuple(level_processes),
        rel_probs=r,
        swap_rate=float(swap_rate),
        num_positions=n,
    )


# ---------------------------------------------------------------------------
# projected chains


@dataclass(frozen=True)
class ProjectedChain:
    """Small chain over component labels carrying the decomposition rates."""

    rates: np.ndarray
    weights: np.ndarray
    labels: tuple

    def as_process(self) -> FiniteMarkovProcess:
        """Validated process; flows symmetrized to absorb rounding."""
        off = self.rates.copy()
        np.fill_diagonal(off, 0.0)
        flow = self.weights[:, None] * off
        asym = float(np.abs(flow - flow.T).max())
        if asym > 1e-8 * max(float(flow.max()), 1e-300):
            raise ValueError(
                f"projected rates break detailed balance by {asym:.3g}"
            )
        flow = 0.5 * (flow + flow.T)
        off = flow / self.weights[:, None]
        return FiniteMarkovProcess.from_offdiag(off, self.weights, labels=self.labels)


def _capped_inverse(chi2: float) -> float:
    """1/chi2 with chi2 floored at 1/RATE_CAP; inf divergence gives rate 0."""
    if chi2 == INFINITY:
        return 0.0
    if chi2 < 1.0 / RATE_CAP:
        warnings.warn(
            "chi-squared divergence is numerically zero; capping the "
            f"projected rate at {RATE_CAP:.0e}",
            RuntimeWarning,
            stacklevel=3,
        )
        return RATE_CAP
    return 1.0 / chi2


def build_projected_chain(
    betas_count: int,
    comp_weights: np.ndarray,
    rel_probs: np.ndarray,
    densities: np.ndarray,
    swap_strength: float,
) -> ProjectedChain:
    """Projected chain on (level, component) labels for a tempering mixture.

    comp_weights[i, j] and densities[i, j, :] describe level i's mixture.
    Rates: within the hottest level (i = 1), j -> j' moves at
    w[1, j'] / chi2_max(p_(1,j), p_(1,j')); between adjacent levels at the
    same j, swap_strength times the scaled overlap
    sum_x min(c p', p), c = (r' w') / (r w).  Everything else is zero.
    Stationary law: r_i w[i, j].
    """
    L = int(betas_count)
    w = np.asarray(comp_weights, dtype=float)
    r = np.asarray(rel_probs, dtype=float)
    dens = np.asarray(densities, dtype=float)
    if w.ndim != 2 or w.shape[0] != L:
        raise ValueError("comp_weights must be (levels, components)")
    m = w.shape[1]
    if dens.shape[:2] != (L, m):
        raise ValueError("densities must be (levels, components, states)")
    if r.shape != (L,):
        raise ValueError("rel_probs must have one entry per level")
    if np.any(w <= 0) or np.any(np.abs(w.sum(axis=1) - 1.0) > 1e-10):
        raise ValueError("each level's component weights must sum to 1")
    if swap_strength <= 0:
        raise ValueError("swap_strength must be > 0")

    N = L * m

    def idx(i, j):
        return i * m + j

    off = np.zeros((N, N))
    bar = (r[:, None] * w).ravel()  # stationary law on (level, component)

    for j in range(m):
        for k in range(m):
            if j == k:
                continue
            inv = _capped_inverse(chi2_max_discrete(dens[0, j], dens[0, k]))
            off[idx(0, j), idx(0, k)] = w[0, k] * inv
    for i in range(L - 1):
        for j in range(m):
            a, b = idx(i, j), idx(i + 1, j)
            c_up = (r[i + 1] * w[i + 1, j]) / (r[i] * w[i, j])
            off[a, b] = swap_strength * overlap_discrete(
                dens[i + 1, j], dens[i, j], scale=c_up
            )
            off[b, a] = swap_strength * overlap_discrete(
                dens[i, j], dens[i + 1, j], scale=1.0 / c_up
            )
    labels = tuple((i + 1, j) for i in range(L) for j in range(m))
    return ProjectedChain(rates=off, weights=bar, labels=labels)


def build_simple_projected_chain(
    weights: np.ndarray,
    densities: np.ndarray,
    kind: str = "chi2",
) -> ProjectedChain:
    """Projected chain over plain mixture components (single level).

    kind "chi2":    rate j -> k is w_k / chi2_max(p_j, p_k).
    kind "overlap": rate j -> k is w_k * sum_x min(p_j, p_k).
    """
    w = np.asarray(weights, dtype=float)
    dens = np.asarray(densities, dtype=float)
    m = w.size
    if dens.shape[0] != m:
        raise ValueError("need one density per weight")
    off = np.zeros((m, m))
    for j in range(m):
        for k in range(m):
            if j == k:
                continue
            if kind == "chi2":
                off[j, k] = w[k] * _capped_inverse(
                    chi2_max_discrete(dens[j], dens[k])
                )
            elif kind == "overlap":
                off[j, k] = w[k] * overlap_discrete(dens[j], dens[k])
            else:
                raise ValueError(f"unknown projected-chain kind {kind!r}")
    labels = tuple(range(m))
    return ProjectedChain(rates=off, weights=w, labels=labels)


# ---------------------------------------------------------------------------
# canonical paths


@dataclass(frozen=True)
class CanonicalPathSet:
    """One path of adjacent states for every ordered pair of distinct states."""

    paths: dict

    def __post_init__(self):
        for (x, y), p in self.paths.items():
            if len(p) < 2 or p[0] != x or p[-1] != y:
                raise ValueError(f"path for ({x}, {y}) must run from x to y")
            if len(set(p)) != len(p):
                raise ValueError(f"path for ({x}, {y}) revisits a state")

    def __getitem__(self, pair):
        return self.paths[pair]


def geodesic_paths(adjacency: np.ndarray) -> CanonicalPathSet:
    """Shortest paths for all ordered pairs by BFS, lowest-index tie-break."""
    A = np.asarray(adjacency) > 0
    n = A.shape[0]
    paths = {}
    for s in range(n):
        parent = np.full(n, -1, dtype=int)
        dist = np.full(n, -1, dtype=int)
        dist[s] = 0
        queue = [s]
        head = 0
        while head < len(queue):
            x = queue[head]
            head += 1
            for y in np.nonzero(A[x])[0]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    parent[y] = x
                    queue.append(int(y))
        for t in range(n):
            if t == s:
                continue
            if dist[t] < 0:
                raise ReducibleChainError(
                    f"no path from state {s} to state {t}"
                )
            rev = [t]
            while rev[-1] != s:
                rev.append(int(parent[rev[-1]]))
            paths[(s, t)] = tuple(reversed(rev))
    return CanonicalPathSet(paths=paths)


def congestion_bound(
    transition: np.ndarray,
    stationary: np.ndarray,
    paths: CanonicalPathSet,
) -> tuple:
    """Worst edge congestion rho for a discrete-time reversible walk.

    transition is row-stochastic; the walk's Dirichlet form is the one of
    T - I.  Returns (rho, (z, w)) where (z, w) attains the maximum, so
    Var_p(g) <= rho * E(g, g) for every g.
    """
    T = np.asarray(transition, dtype=float)
    p = np.asarray(stationary, dtype=float)
    n = p.size
    if T.shape != (n, n):
        raise ValueError("transition matrix shape disagrees with stationary")
    off = T.copy()
    np.fill_diagonal(off, 0.0)
    if float(off.min()) < 0:
        raise ValueError("transition probabilities must be nonnegative")
    if float(np.abs(T.sum(axis=1) - 1.0).max()) > 1e-10:
        raise ValueError("transition rows must sum to 1")
    load = {}
    for (x, y), path in paths.paths.items():
        length = len(path) - 1
        contrib = length * p[x] * p[y]
        for z, w in zip(path[:-1], path[1:]):
            if T[z, w] <= 0.0:
                raise ValueError(
                    f"path for ({x}, {y}) uses edge ({z}, {w}) with zero "
                    "transition probability"
                )
            load[(z, w)] = load.get((z, w), 0.0) + contrib
    rho, arg = 0.0, None
    for (z, w), tot in load.items():
        val = tot / (p[z] * T[z, w])
        if val > rho:
            rho, arg = val, (z, w)
    return rho, arg


# ---------------------------------------------------------------------------
# instances and verification


@dataclass(frozen=True)
class SimpleInstance:
    """Mixture of discretized 1-d densities sharing a uniform grid."""

    grid: np.ndarray
    weights: np.ndarray
    densities: np.ndarray  # (m, n) rows sum to 1
    base_rate: float

    def hash(self) -> str:
        return instance_hash(self.grid, self.weights, self.densities,
                             np.array([self.base_rate]))


@dataclass(frozen=True)
class TemperingInstance:
    """Tempering ladder of mixtures on a shared grid, plus exchange rates."""

    grid: np.ndarray
    betas: np.ndarray
    rel_probs: np.ndarray
    comp_weights: np.ndarray  # (L, m)
    densities: np.ndarray  # (L, m, n) rows sum to 1
    swap_rate: float
    swap_strength: float

    def hash(self) -> str:
        return instance_hash(
            self.grid, self.betas, self.rel_probs, self.comp_weights,
            self.densities, np.array([self.swap_rate, self.swap_strength]),
        )


def instance_hash(*arrays) -> str:
    """Short stable identifier: sha256 over shapes and raw bytes."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(np.asarray(a, dtype=float))
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


@dataclass
class DecompositionReport:
    """Bound check for one instance: the pieces and the verdict."""

    theorem: str
    instance_hash: str
    C: float
    C_bar: float
    C_star: float
    bound: float
    slack: float
    passed: bool
    identity_residual: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "theorem": self.theorem,
            "instance_hash": self.instance_hash,
            "C": float(self.C),
            "C_bar": float(self.C_bar),
            "C_star": float(self.C_star),
            "bound": float(self.bound),
            "slack": float(self.slack),
            "passed": bool(self.passed),
            "identity_residual": float(self.identity_residual),
        }
        if self.details:
            out["details"] = {
                k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                for k, v in self.details.items()
            }
        return out


def _safe_poincare(proc_or_chain) -> float:
    try:
        return poincare_constant(proc_or_chain)
    except ReducibleChainError:
        return INFINITY


def _identity_residual_simple(mix, comps, weights, probes) -> float:
    worst = 0.0
    for f, g in probes:
        lhs = dirichlet_form(mix, g, f)
        rhs = sum(
            wj * dirichlet_form(c, g, f) for wj, c in zip(weights, comps)
        )
        scale = max(abs(lhs), abs(rhs), 1e-12)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def verify_simple_decomposition(
    instance: SimpleInstance,
    tol: float = 1e-6,
    num_probes: int = 20,
    probe_seed: int = 0,
) -> list:
    """Check both mixture-decomposition bounds on one finite instance.

    Builds the mixture chain, confirms the Dirichlet decomposition identity
    on random probes, computes the exact Poincare constant, and compares it
    with the two projected-chain bounds:

        chi2 rates:    C_star <= C (1 + C_bar / 2)
        overlap rates: C_star <= C (1 + 2 C_bar)

    An unreachable projected chain gives C_bar = inf and a vacuous pass.
    """
    w = instance.weights
    comps = [
        discretize_density(instance.grid, d, base_rate=instance.base_rate)
        for d in instance.densities
    ]
    mix = mixture_chain(comps, w)
    rng = np.random.Generator(np.random.PCG64(probe_seed))
    n = mix.num_states
    probes = [(rng.standard_normal(n), rng.standard_normal(n)) for _ in range(num_probes)]
    residual = _identity_residual_simple(mix, comps, w, probes)
    C = max(poincare_constant(c) for c in comps)
    C_star = poincare_constant(mix)
    tag = instance.hash()

    reports = []
    for kind, theorem, bound_fn in (
        ("chi2", "mixture-decomposition-chi2", lambda cb: C * (1.0 + cb / 2.0)),
        ("overlap", "mixture-decomposition-overlap", lambda cb: C * (1.0 + 2.0 * cb)),
    ):
        proj = build_simple_projected_chain(w, instance.densities, kind=kind)
        C_bar = _safe_poincare(proj.as_process())
        bound = bound_fn(C_bar) if math.isfinite(C_bar) else INFINITY
        slack = bound * (1.0 + tol) - C_star if math.isfinite(bound) else INFINITY
        reports.append(
            DecompositionReport(
                theorem=theorem,
                instance_hash=tag,
                C=C,
                C_bar=C_bar,
                C_star=C_star,
                bound=bound,
                slack=slack,
                passed=bool(slack >= 0.0),
                identity_residual=residual,
                details={"num_components": int(w.size), "num_states": int(n)},
            )
        )
    return reports


def verify_tempering_decomposition(
    instance: TemperingInstance,
    tol: float = 1e-6,
    num_probes: int = 20,
    probe_seed: int = 0,
) -> DecompositionReport:
    """Check the tempering decomposition bound on one finite instance.

    The joint chain couples per-level mixture chains with adjacent-level
    exchange moves.  With C the worst component Poincare constant, C_bar the
    projected chain's, K the vertical strength, and lam the exchange rate:

        C_star <= max( C (1 + (1/2 + 6 K) C_bar), 6 K C_bar / lam ).
    """
    L, m, n = instance.densities.shape
    K = instance.swap_strength
    lam = instance.swap_rate
    comp_chains = [
        [
            discretize_density(instance.grid, instance.densities[i, j])
            for j in range(m)
        ]
        for i in range(L)
    ]
    level_chains = [
        mixture_chain(comp_chains[i], instance.comp_weights[i]) for i in range(L)
    ]
    joint = build_tempering_chain(level_chains, instance.rel_probs, lam)

    # Dirichlet identity: joint form = sum_i r_i E_i + exchange half-sum
    rng = np.random.Generator(np.random.PCG64(probe_seed))
    worst = 0.0
    for _ in range(num_probes):
        g = rng.standard_normal(L * n)
        lhs = dirichlet_form(joint.process, g)
        G = joint.split(g)
        rhs = sum(
            instance.rel_probs[i] * dirichlet_form(level_chains[i], G[i])
            for i in range(L)
        )
        for i in range(L - 1):
            cross = np.minimum(
                instance.rel_probs[i] * level_chains[i].stationary,
                instance.rel_probs[i + 1] * level_chains[i + 1].stationary,
            )
            # ordered pairs (i,i+1) and (i+1,i) contribute equally
            rhs += 0.5 * lam * float(cross @ (G[i] - G[i + 1]) ** 2)
        scale = max(abs(lhs), abs(rhs), 1e-12)
        worst = max(worst, abs(lhs - rhs) / scale)

    C = max(
        poincare_constant(comp_chains[i][j]) for i in range(L) for j in range(m)
    )
    proj = build_projected_chain(
        L, instance.comp_weights, instance.rel_probs, instance.densities, K
    )
    C_bar = _safe_poincare(proj.as_process())
    C_star = poincare_constant(joint.process)
    if math.isfinite(C_bar):
        bound = max(C * (1.0 + (0.5 + 6.0 * K) * C_bar), 6.0 * K * C_bar / lam)
    else:
        bound = INFINITY
    slack = bound * (1.0 + tol) - C_star if math.isfinite(bound) else INFINITY
    return DecompositionReport(
        theorem="tempering-decomposition",
        instance_hash=instance.hash(),
        C=C,
        C_bar=C_bar,
        C_star=C_star,
        bound=bound,
        slack=slack,
        passed=bool(slack >= 0.0),
        identity_residual=worst,
        details={
            "levels": int(L),
            "components": int(m),
            "positions": int(n),
            "swap_rate": float(lam),
            "swap_strength": float(K),
        },
    )


def random_simple_instance(rng: np.random.Generator) -> SimpleInstance:
    """Random mixture of 1 to 3 discretized Gaussians on a shared grid."""
    n = int(rng.integers(24, 65))
    m = int(rng.integers(1, 4))
    grid = np.linspace(-6.0, 6.0, n)
    h = float(grid[1] - grid[0])
    centers = rng.uniform(-2.0, 2.0, m)
    sigmas = rng.uniform(0.6, 1.5, m)
    w = rng.uniform(0.1, 1.0, m)
    w = w / w.sum()
    dens = np.empty((m, n))
    for j in range(m):
        logmass = -0.5 * ((grid - centers[j]) / sigmas[j]) ** 2
        mass = np.exp(logmass - logmass.max())
        dens[j] = mass / mass.sum()
    return SimpleInstance(grid=grid, weights=w, densities=dens, base_rate=1.0 / h**2)


def random_tempering_instance(
    rng: np.random.Generator,
    strength_choices: Sequence[float] = (1.0,),
) -> TemperingInstance:
    """Random 3-level tempering ladder over a shared pair of bumps.

    The vertical-rate constant is drawn uniformly from strength_choices.
    """
    n = int(rng.integers(48, 65))
    L = 3
    m = 2
    grid = np.linspace(-6.0, 6.0, n)
    beta1 = float(rng.uniform(0.05, 0.3))
    betas = np.array([beta1, math.sqrt(beta1), 1.0])
    centers = rng.uniform(-2.5, 2.5, m)
    sigmas = rng.uniform(0.6, 1.2, m)
    dens = np.empty((L, m, n))
    for i in range(L):
        for j in range(m):
            logmass = -betas[i] * 0.5 * ((grid - centers[j]) / sigmas[j]) ** 2
            mass = np.exp(logmass - logmass.max())
            dens[i, j] = mass / mass.sum()
    cw = rng.uniform(0.1, 1.0, (L, m))
    cw = cw / cw.sum(axis=1, keepdims=True)
    rel = np.full(L, 1.0 / L)
    lam = float(rng.uniform(0.5, 2.0))
    return TemperingInstance(
        grid=grid,
        betas=betas,
        rel_probs=rel,
        comp_weights=cw,
        densities=dens,
        swap_rate=lam,
        swap_strength=float(rng.choice(np.asarray(strength_choices, dtype=float))),
    )
