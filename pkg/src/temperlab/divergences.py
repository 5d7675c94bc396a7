"""Divergences and inequality checks on low-dimensional grids.

Two independent routes to every quantity: closed forms where they exist
(Gaussian chi-squared) and deterministic quadrature otherwise.  The numeric
route is the referee for the analytic one, so the two are never merged.

Infinite divergences are reported as float("inf"), which makes the bounds
they feed vacuous rather than wrong.  Quadrature is restricted to dimension
one and two; the sampler, not the grid, is the tool above that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .oracles import (
    MixtureTarget,
    _logsumexp,
    mixture_log_density_many,
)

__all__ = [
    "INFINITY",
    "NormalizationError",
    "CoverageError",
    "QuadratureGrid",
    "CheckReport",
    "chi2_gaussian",
    "chi2_max_gaussian",
    "chi2_numeric",
    "chi2_max_numeric",
    "kl_numeric",
    "overlap_delta",
    "check_temp_scaling_bounds",
    "check_partition_ratio_bound",
    "kl_mixture_upper_bound_check",
]

INFINITY = float("inf")

# beyond this, expm1 overflows float64 anyway; the divergence is effectively
# infinite for every purpose downstream
_LOG_CAP = 700.0


class NormalizationError(ValueError):
    """A density failed to integrate to 1 within tolerance on its grid."""


class CoverageError(ValueError):
    """The grid does not cover the region where the integrand lives."""


def _axis_nodes(lo: float, hi: float, n: int, rule: str):
    if rule == "trapezoid":
        x = np.linspace(lo, hi, n)
        w = np.full(n, (hi - lo) / (n - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        return x, w
    if rule == "gauss-legendre":
        order = 16
        panels = max(1, math.ceil(n / order))
        t, wt = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(lo, hi, panels + 1)
        xs, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            half = 0.5 * (b - a)
            xs.append(half * t + 0.5 * (a + b))
            ws.append(half * wt)
        return np.concatenate(xs), np.concatenate(ws)
    raise ValueError(f"unknown quadrature rule {rule!r}")


@dataclass(frozen=True)
class QuadratureGrid:
    """Deterministic integration grid on an axis-aligned box, dim 1 or 2.

    Density callables receive points shaped (N,) in one dimension and (N, 2)
    in two, and must return (N,) values.
    """

    dim: int
    bounds: tuple
    nodes_per_axis: int
    rule: str
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @staticmethod
    def build(bounds, nodes_per_axis: int = 256, rule: str = "trapezoid") -> "QuadratureGrid":
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        dim = len(bounds)
        if dim not in (1, 2):
            raise ValueError("quadrature grids support dimension 1 and 2 only")
        if nodes_per_axis < 64:
            raise ValueError("need at least 64 nodes per axis")
        for lo, hi in bounds:
            if not hi > lo:
                raise ValueError("each bound must satisfy lo < hi")
        axes = [_axis_nodes(lo, hi, nodes_per_axis, rule) for lo, hi in bounds]
        if dim == 1:
            pts, w = axes[0]
        else:
            (x1, w1), (x2, w2) = axes
            X1, X2 = np.meshgrid(x1, x2, indexing="ij")
            pts = np.column_stack([X1.ravel(), X2.ravel()])
            w = np.outer(w1, w2).ravel()
        return QuadratureGrid(
            dim=dim, bounds=bounds, nodes_per_axis=nodes_per_axis,
            rule=rule, points=pts, weights=w,
        )

    @staticmethod
    def for_gaussians(
        means, sigmas, nodes_per_axis: int = 256, rule: str = "trapezoid", span: float = 8.0
    ) -> "QuadratureGrid":
        """Box covering every mean plus/minus span standard deviations."""
        M = np.atleast_2d(np.asarray(means, dtype=float))
        if M.ndim != 2:
            raise ValueError("means must be (k, dim)")
        s = np.asarray(sigmas, dtype=float).reshape(-1)
        if s.size == 1:
            s = np.repeat(s, M.shape[0])
        if s.size != M.shape[0] or np.any(s <= 0):
            raise ValueError("need one positive sigma per mean")
        los = np.min(M - span * s[:, None], axis=0)
        his = np.max(M + span * s[:, None], axis=0)
        return QuadratureGrid.build(
            tuple(zip(los, his)), nodes_per_axis=nodes_per_axis, rule=rule
        )

    def evaluate(self, density) -> np.ndarray:
        vals = np.asarray(density(self.points), dtype=float)
        if vals.shape != (self.points.shape[0],):
            raise ValueError("density callable must return one value per node")
        return vals

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))

    def check_coverage(self, means, sigmas, span: float = 8.0):
        M = np.atleast_2d(np.asarray(means, dtype=float))
        s = np.asarray(sigmas, dtype=float).reshape(-1)
        if s.size == 1:
            s = np.repeat(s, M.shape[0])
        for (lo, hi), j in zip(self.bounds, range(self.dim)):
            need_lo = float(np.min(M[:, j] - span * s))
            need_hi = float(np.max(M[:, j] + span * s))
            if lo > need_lo + 1e-12 or hi < need_hi - 1e-12:
                raise CoverageError(
                    f"axis {j}: grid [{lo}, {hi}] misses required "
                    f"[{need_lo}, {need_hi}] ({span} sigma around the means)"
                )


def _normalized(grid: QuadratureGrid, density, tol: float = 1e-4, name: str = "density"):
    vals = grid.evaluate(density) if callable(density) else np.asarray(density, float)
    if np.any(vals < 0):
        floor = float(vals.min())
        if floor < -1e-12:
            raise ValueError(f"{name} takes negative values (min {floor:.3g})")
        vals = np.maximum(vals, 0.0)
    mass = grid.integrate(vals)
    if not math.isfinite(mass) or abs(mass - 1.0) > tol:
        raise NormalizationError(
            f"{name} integrates to {mass!r} on the grid, outside 1 +- {tol}; "
            "the grid likely misses mass or the density is wrong"
        )
    return vals / mass


# ---------------------------------------------------------------------------
# chi-squared


def _as_cov(S, dim_hint=None):
    S = np.asarray(S, dtype=float)
    if S.ndim == 0:
        S = S.reshape(1, 1)
    elif S.ndim == 1:
        S = np.diag(S)
    if S.shape[0] != S.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(S, S.T, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    if np.linalg.eigvalsh(S)[0] <= 0:
        raise ValueError("covariance must be positive definite")
    return S


def chi2_gaussian(mean_q, cov_q, mean_p, cov_p) -> float:
    """chi^2(Q || P) for Gaussians Q = N(mean_q, cov_q), P = N(mean_p, cov_p).

    Closed form: with A = 2 cov_q^-1 - cov_p^-1 and b = 2 cov_q^-1 mean_q -
    cov_p^-1 mean_p,

      1 + chi^2 = |cov_p|^(1/2) |cov_q|^(-1) |A|^(-1/2)
                  * exp( b.A^-1 b / 2 + mean_p.cov_p^-1 mean_p / 2
                         - mean_q.cov_q^-1 mean_q ).

    A that is not positive definite means the integral diverges: inf.
    Computed via expm1 of the log so tiny divergences keep full precision.
    """
    Sq = _as_cov(cov_q)
    Sp = _as_cov(cov_p)
    d = Sq.shape[0]
    if Sp.shape[0] != d:
        raise ValueError("covariance dimensions disagree")
    mq = np.asarray(mean_q, dtype=float).reshape(-1)
    mp = np.asarray(mean_p, dtype=float).reshape(-1)
    if mq.size == 1 and d == 1:
        mq = mq.reshape(1)
    if mp.size == 1 and d == 1:
        mp = mp.reshape(1)
    if mq.shape != (d,) or mp.shape != (d,):
        raise ValueError("mean dimensions disagree with covariances")

    Sq_inv = np.linalg.inv(Sq)
    Sp_inv = np.linalg.inv(Sp)
    A = 2.0 * Sq_inv - Sp_inv
    evals = np.linalg.eigvalsh(A)
    if evals[0] <= 0:
        return INFINITY
    b = 2.0 * (Sq_inv @ mq) - Sp_inv @ mp
    _, logdet_p = np.linalg.slogdet(Sp)
    _, logdet_q = np.linalg.slogdet(Sq)
    _, logdet_A = np.linalg.slogdet(A)
    quad = 0.5 * float(b @ np.linalg.solve(A, b))
    logval = (
        0.5 * logdet_p
        - logdet_q
        - 0.5 * logdet_A
        + quad
        + 0.5 * float(mp @ Sp_inv @ mp)
        - float(mq @ Sq_inv @ mq)
    )
    if logval > _LOG_CAP:
        return INFINITY
    return float(np.expm1(logval))


def chi2_max_gaussian(mean_a, cov_a, mean_b, cov_b) -> float:
    """max of the two directed Gaussian chi-squared divergences."""
    return max(
        chi2_gaussian(mean_a, cov_a, mean_b, cov_b),
        chi2_gaussian(mean_b, cov_b, mean_a, cov_a),
    )


def chi2_numeric(q_density, p_density, grid: QuadratureGrid) -> float:
    """chi^2(Q || P) = int q^2/p - 1 by quadrature; inf off P's support."""
    q = _normalized(grid, q_density, name="q")
    p = _normalized(grid, p_density, name="p")
    off = p <= 0.0
    if np.any(q[off] > 1e-300):
        return INFINITY
    ratio = np.zeros_like(q)
    on = ~off
    ratio[on] = q[on] ** 2 / p[on]
    val = grid.integrate(ratio) - 1.0
    # roundoff can push an exact zero a hair negative
    return max(val, 0.0)


def chi2_max_numeric(a_density, b_density, grid: QuadratureGrid) -> float:
    return max(
        chi2_numeric(a_density, b_density, grid),
        chi2_numeric(b_density, a_density, grid),
    )


def kl_numeric(p_density, q_density, grid: QuadratureGrid) -> float:
    """KL(P || Q) by quadrature with 0 log 0 = 0; inf off Q's support."""
    p = _normalized(grid, p_density, name="p")
    q = _normalized(grid, q_density, name="q")
    bad = (p > 1e-300) & (q <= 0.0)
    if np.any(bad):
        return INFINITY
    on = p > 0.0
    terms = np.zeros_like(p)
    terms[on] = p[on] * (np.log(p[on]) - np.log(q[on]))
    return grid.integrate(terms)


def overlap_delta(p_density, q_density, grid: QuadratureGrid, scale: float = 1.0) -> float:
    """int min(scale * p, q): the overlap mass feeding vertical moves.

    `scale` is the stationary-weight ratio of the two states; with scale = 1
    this is the usual total-variation overlap of the two densities.
    """
    if scale <= 0:
        raise ValueError("scale must be > 0")
    p = _normalized(grid, p_density, name="p")
    q = _normalized(grid, q_density, name="q")
    return grid.integrate(np.minimum(scale * p, q))


# ---------------------------------------------------------------------------
# inequality checks


@dataclass
class CheckReport:
    """Outcome of a batch inequality check, JSON-friendly."""

    check: str
    num_cases: int
    violations: int
    worst_margin: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "check": self.check,
            "num_cases": int(self.num_cases),
            "violations": int(self.violations),
            "worst_margin": float(self.worst_margin),
            "passed": bool(self.passed),
        }
        if self.details:
            out["details"] = _plain(self.details)
        return out


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def check_temp_scaling_bounds(
    target: MixtureTarget,
    betas,
    points: np.ndarray,
    slack: float = 1e-12,
) -> CheckReport:
    """Sandwich of the tempered mixture between mixtures of tempered parts.

    For beta in (0, 1], with g = (sum_j w_j e^(-f0(x-mu_j)))^beta and
    gtilde = sum_j w_j e^(-beta f0(x-mu_j)), check pointwise in log space:

        gtilde <= g <= gtilde / w_min.

    Reports the worst signed margin over all (beta, point) pairs; a margin
    below -slack counts as a violation.
    """
    betas = np.asarray(betas, dtype=float).reshape(-1)
    if np.any(betas <= 0) or np.any(betas > 1.0 + 1e-15):
        raise ValueError("the sandwich holds for beta in (0, 1] only")
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[1] != target.dim:
        raise ValueError("probe points have the wrong dimension")
    log_w = np.log(target.weights)
    log_wmin = math.log(target.w_min)

    worst = math.inf
    violations = 0
    cases = 0
    base_vals = np.stack(
        [target.base.value_many(X - target.centers[j]) for j in range(target.m)],
        axis=1,
    )  # (n, m)
    f_mix = mixture_log_density_many(target, X)  # (n,)
    for beta in betas:
        log_g = -beta * f_mix
        a = log_w[None, :] - beta * base_vals
        mx = a.max(axis=1)
        log_gt = mx + np.log(np.sum(np.exp(a - mx[:, None]), axis=1))
        lower = log_g - log_gt
        upper = (log_gt - log_wmin) - log_g
        m = float(min(lower.min(), upper.min()))
        worst = min(worst, m)
        violations += int(np.sum(lower < -slack) + np.sum(upper < -slack))
        cases += 2 * X.shape[0]
    return CheckReport(
        check="temp-scaling-sandwich",
        num_cases=cases,
        violations=violations,
        worst_margin=worst,
        passed=violations == 0,
        details={"betas": betas, "num_points": X.shape[0]},
    )


def _log_partition_quadrature(target: MixtureTarget, beta: float, grid: QuadratureGrid) -> float:
    if grid.dim != target.dim:
        raise ValueError("grid dimension disagrees with the target")
    f = mixture_log_density_many(target, np.atleast_2d(grid.points.reshape(-1, target.dim)))
    logw = np.log(grid.weights)
    return _logsumexp(logw - beta * f)


def check_partition_ratio_bound(
    target: MixtureTarget,
    alpha: float,
    beta: float,
    grid: QuadratureGrid,
    rtol: float = 1e-9,
) -> CheckReport:
    """Z_beta / Z_alpha against its analytic envelope, alpha <= beta.

    Upper: the ratio never exceeds 1 (f >= 0, so Z is decreasing in beta).
    Lower, isotropic-gaussian base with scale sigma and spread D:
        (1/2) exp(-2 (beta-alpha) (D/sigma + (sqrt(d) + 2 sqrt(ln(2/w_min)))
                                    / sqrt(alpha))^2)
    Lower, quadratic-form base with envelope [kappa, K]:
        (1/2) exp(-(beta-alpha) K C^2 / 2),
        C = D + (sqrt(d) + sqrt(d ln(K/kappa) + 2 ln(2/w_min))) / sqrt(alpha kappa).
    The ratio itself comes from quadrature, in log space.
    """
    if not 0 < alpha <= beta <= 1.0:
        raise ValueError("need 0 < alpha <= beta <= 1")
    d = target.dim
    D = target.scale_bound()
    wm = target.w_min
    if target.base.kind == "isotropic-gaussian":
        s = target.base.sigma
        reach = D / s + (math.sqrt(d) + 2.0 * math.sqrt(math.log(2.0 / wm))) / math.sqrt(alpha)
        log_lower = math.log(0.5) - 2.0 * (beta - alpha) * reach**2
    else:
        kap, K = target.base.kappa, target.base.K
        reach = D + (
            math.sqrt(d) + math.sqrt(d * math.log(K / kap) + 2.0 * math.log(2.0 / wm))
        ) / math.sqrt(alpha * kap)
        log_lower = math.log(0.5) - 0.5 * (beta - alpha) * K * reach**2
    log_ratio = _log_partition_quadrature(target, beta, grid) - _log_partition_quadrature(
        target, alpha, grid
    )
    upper_margin = -log_ratio + rtol  # log 1 - log ratio
    lower_margin = log_ratio - log_lower + rtol
    worst = float(min(upper_margin, lower_margin))
    violations = int(upper_margin < 0) + int(lower_margin < 0)
    return CheckReport(
        check="partition-ratio-envelope",
        num_cases=2,
        violations=violations,
        worst_margin=worst,
        passed=violations == 0,
        details={
            "alpha": alpha,
            "beta": beta,
            "log_ratio": log_ratio,
            "log_lower": log_lower,
        },
    )


def kl_mixture_upper_bound_check(
    weights_p,
    comps_p,
    weights_q,
    comps_q,
    grid: QuadratureGrid,
    tol: float = 1e-6,
) -> CheckReport:
    """KL between mixtures against the weight-plus-components upper bound.

    KL(sum w_i P_i || sum w'_i Q_i) <= KL(w || w') + sum_i w_i KL(P_i || Q_i).
    Components are paired by index.  An infinite right-hand side makes the
    check vacuously true.
    """
    wp = np.asarray(weights_p, dtype=float)
    wq = np.asarray(weights_q, dtype=float)
    if wp.shape != wq.shape or wp.ndim != 1:
        raise ValueError("weight vectors must be 1-d and the same length")
    if len(comps_p) != wp.size or len(comps_q) != wq.size:
        raise ValueError("need one component per weight")
    if np.any(wp <= 0) or np.any(wq <= 0):
        raise ValueError("weights must be positive")
    if abs(wp.sum() - 1.0) > 1e-12 or abs(wq.sum() - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1")

    P = [_normalized(grid, c, name=f"P[{i}]") for i, c in enumerate(comps_p)]
    Q = [_normalized(grid, c, name=f"Q[{i}]") for i, c in enumerate(comps_q)]
    p_mix = sum(w * v for w, v in zip(wp, P))
    q_mix = sum(w * v for w, v in zip(wq, Q))

    def _kl_vals(a, b):
        bad = (a > 1e-300) & (b <= 0.0)
        if np.any(bad):
            return INFINITY
        on = a > 0.0
        t = np.zeros_like(a)
        t[on] = a[on] * (np.log(a[on]) - np.log(b[on]))
        return grid.integrate(t)

    lhs = _kl_vals(p_mix, q_mix)
    kl_w = float(np.sum(wp * (np.log(wp) - np.log(wq))))
    comp_kls = [_kl_vals(a, b) for a, b in zip(P, Q)]
    rhs = kl_w + float(np.sum(wp * np.asarray(comp_kls)))
    margin = rhs + tol - lhs if math.isfinite(rhs) else INFINITY
    passed = (not math.isfinite(rhs)) or lhs <= rhs + tol
    return CheckReport(
        check="kl-mixture-upper-bound",
        num_cases=1,
        violations=0 if passed else 1,
        worst_margin=float(margin),
        passed=passed,
        details={"lhs": lhs, "rhs": rhs, "kl_weights": kl_w, "component_kls": comp_kls},
    )
