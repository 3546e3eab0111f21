"""Stationarity metrics, analytic oracles, and trace records.

The central quantity is the squared KKT residual of the equality-
constrained reformulation

    min F(x, y)  s.t.  grad_y f(x, y) = 0

with Lagrangian L = F - <v, grad_y f>.  The residual is always taken
with respect to the original lower-level objective f, regardless of any
aggregated surrogate a solver iterates on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import MissingOracleError
from .linalg import Array, LinearOperator, cg_solve, gaussian_vector
from .problem import BilevelProblem, aggregate


def kkt_residual(problem: BilevelProblem, x: Array, y: Array, v: Array) -> float:
    """Squared norm of the Lagrangian gradient at (x, y, v)."""
    rx = problem.grad_x_ul(x, y) - problem.jvp_xy_ll(x, y, v)
    ry = problem.grad_y_ul(x, y) - problem.hvp_yy_ll(x, y, v)
    rf = problem.grad_y_ll(x, y)
    return float(rx @ rx + ry @ ry + rf @ rf)


def kkt_residual_aggregated(problem: BilevelProblem, x: Array, y: Array,
                            v: Array, mu: float, lam: float) -> float:
    """Same residual for the aggregated lower level; diagnostic only."""
    return kkt_residual(aggregate(problem, mu, lam), x, y, v)


def hypergrad_error(d: Array, oracle: "AnalyticOracle | None", x: Array) -> float:
    """Distance of a hypergradient estimate from the oracle grad phi(x)."""
    if oracle is None:
        raise MissingOracleError("hypergrad_error needs an analytic oracle")
    return float(np.linalg.norm(d - oracle.grad_phi(x)))


@dataclass(frozen=True)
class AnalyticOracle:
    """Closed-form ground truth for a testbed.

    ``y_star_mu``, ``v_star_mu`` and ``grad_phi_mu`` take (x, mu, lam)
    and describe the aggregated lower level; they are present only when
    the testbed has closed forms for them.
    """

    x_star: Array | None
    y_star: Callable[[Array], Array]
    phi: Callable[[Array], float]
    grad_phi: Callable[[Array], Array]
    y_star_mu: Callable[[Array, float, float], Array] | None = None
    v_star_mu: Callable[[Array, float, float], Array] | None = None
    grad_phi_mu: Callable[[Array, float, float], Array] | None = None


def lyapunov_value(problem: BilevelProblem, oracle: AnalyticOracle,
                   x: Array, y: Array, v: Array, mu: float, lam: float) -> float:
    """F(x, y*_mu(x)) + 0.5|y - y*_mu(x)|^2 + 0.5|v - v*_mu(x)|^2."""
    if oracle is None or oracle.y_star_mu is None or oracle.v_star_mu is None:
        raise MissingOracleError("lyapunov_value needs y_star_mu and v_star_mu")
    ys = oracle.y_star_mu(x, mu, lam)
    vs = oracle.v_star_mu(x, mu, lam)
    dy = y - ys
    dv = v - vs
    return float(problem.ul_value(x, ys) + 0.5 * (dy @ dy) + 0.5 * (dv @ dv))


def quadratic_oracle(a_op: LinearOperator, z0: Array) -> AnalyticOracle:
    """Oracle for F = 0.5|x-z0|^2 + 0.5<y, A y>, f = 0.5<y, A y> - <x, y>.

    All inverse applications go through CG at tolerance 1e-12, so the
    oracle is usable with matrix-free A.  A must be symmetric positive
    definite; a handful of seeded Rayleigh quotients are checked.
    """
    z0 = np.asarray(z0, dtype=float)
    n = a_op.dim
    for s in range(5):
        u = gaussian_vector(n, 1000 + s)
        if float(u @ a_op.apply(u)) <= 0.0:
            raise ValueError("operator failed a positive-definiteness spot check")

    def a_inv(w: Array) -> Array:
        return cg_solve(a_op, w, tol=1e-12).x

    def y_star(x: Array) -> Array:
        return a_inv(x)

    def phi(x: Array) -> float:
        dx = x - z0
        return float(0.5 * (dx @ dx) + 0.5 * (x @ a_inv(x)))

    def grad_phi(x: Array) -> Array:
        return (x - z0) + a_inv(x)

    # (I + A^-1) x* = z0  <=>  (A + I) x* = A z0
    a_plus_i = LinearOperator(n, lambda u: a_op.apply(u) + u)
    x_star = cg_solve(a_plus_i, a_op.apply(z0), tol=1e-12).x

    def y_star_mu(x: Array, mu: float, lam: float) -> Array:
        s = mu * lam + 1.0 - mu
        return (1.0 - mu) / s * a_inv(x)

    def v_star_mu(x: Array, mu: float, lam: float) -> Array:
        s = mu * lam + 1.0 - mu
        return y_star_mu(x, mu, lam) / s

    def grad_phi_mu(x: Array, mu: float, lam: float) -> Array:
        c = (1.0 - mu) / (mu * lam + 1.0 - mu)
        return (x - z0) + c * c * a_inv(x)

    return AnalyticOracle(x_star, y_star, phi, grad_phi,
                          y_star_mu, v_star_mu, grad_phi_mu)


# Column order of the per-run trace CSV; oracle-only fields may be empty.
TRACE_COLUMNS = (
    "k", "wall_seconds", "ul_value", "ll_value", "d_norm", "kkt_residual",
    "grad_phi_norm", "dist_x_rel", "dist_y", "lyapunov",
    "mu", "alpha", "beta", "eta", "hvp_count", "jvp_count",
)
TRACE_HEADER = ",".join(TRACE_COLUMNS)


@dataclass(frozen=True)
class TraceRecord:
    """One row of a solver trace; counters are cumulative for the run."""

    k: int
    wall_seconds: float
    ul_value: float
    ll_value: float
    d_norm: float
    kkt_residual: float
    grad_phi_norm: float | None
    dist_x_rel: float | None
    dist_y: float | None
    lyapunov: float | None
    mu: float
    alpha: float
    beta: float
    eta: float
    hvp_count: int
    jvp_count: int

    def csv_row(self) -> str:
        cells = []
        for name in TRACE_COLUMNS:
            val = getattr(self, name)
            if val is None:
                cells.append("")
            elif isinstance(val, int):
                cells.append(str(val))
            else:
                cells.append(repr(float(val)))
        return ",".join(cells)


@dataclass(frozen=True)
class EnvelopeRow:
    K: int
    min_value: float
    k_times_min: float
    normalized: float | None


def rate_envelope(trace: Sequence[TraceRecord], metric: str,
                  k_grid: Sequence[int], p: float | None = None) -> list[EnvelopeRow]:
    """Prefix minima of a trace metric and their O(1/K)-style products.

    For each K in ``k_grid`` returns min over recorded iterations k <= K,
    the product K * min, and (when ``p`` is given and K >= 2) the
    merely-convex normalization K^(1-11p) * min / ln K.  The trace must
    cover max(k_grid); an empty grid returns an empty list.
    """
    if not k_grid:
        return []
    pairs = []
    for rec in trace:
        val = getattr(rec, metric)
        if val is None:
            raise MissingOracleError(f"metric {metric!r} was not recorded in this trace")
        pairs.append((rec.k, float(val)))
    if not pairs or max(k for k, _ in pairs) < max(k_grid):
        raise ValueError(f"trace covers k <= {max((k for k, _ in pairs), default=-1)}, "
                         f"grid needs {max(k_grid)}")
    rows = []
    for K in k_grid:
        m = min(v for k, v in pairs if k <= K)
        norm = None
        if p is not None and K >= 2:
            norm = float(K ** (1.0 - 11.0 * p) * m / np.log(K))
        rows.append(EnvelopeRow(int(K), m, float(K * m), norm))
    return rows
