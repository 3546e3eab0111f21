"""First- and second-order oracle surface for bilevel problems.

A bilevel problem couples an upper-level objective F(x, y) with a
lower-level objective f(x, y) minimized over y.  Solvers only ever see
the oracle calls collected in :class:`BilevelProblem`: values, gradients,
and the two second-order products

    hvp_yy_ll(x, y, u) = [d2f/dy2] u          (R^m -> R^m)
    jvp_xy_ll(x, y, u) = [d2f/dxdy] u         (R^m -> R^n)

Smoothness and convexity of the supplied callables are caller
obligations; they are not checked numerically.  ``fd_check_gradients``
is the finite-difference safety net for hand-derived formulas.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import CapabilityError

Array = np.ndarray
_Grad = Callable[[Array, Array], Array]
_Prod = Callable[[Array, Array, Array], Array]


@dataclass(frozen=True)
class BilevelProblem:
    """Oracle bundle for min_x F(x, y*(x)) s.t. y*(x) in argmin_y f(x, y)."""

    n: int
    m: int
    ul_value: Callable[[Array, Array], float]
    ll_value: Callable[[Array, Array], float]
    grad_x_ul: _Grad
    grad_y_ul: _Grad
    grad_y_ll: _Grad
    hvp_yy_ll: _Prod
    jvp_xy_ll: _Prod
    # Optional upper-level curvature products; required only by mu > 0
    # aggregation and by BDA.
    hvp_yy_ul: _Prod | None = None
    jvp_xy_ul: _Prod | None = None

    @property
    def has_ul_curvature(self) -> bool:
        return self.hvp_yy_ul is not None and self.jvp_xy_ul is not None


@dataclass(frozen=True)
class AggregatedProblem(BilevelProblem):
    """A bilevel problem whose lower level is psi = mu*lam*F + (1-mu)*f."""

    base: BilevelProblem = field(kw_only=True)
    mu: float = field(kw_only=True)
    lam: float = field(kw_only=True)


def aggregate(base: BilevelProblem, mu: float, lam: float) -> BilevelProblem:
    """Blend the upper objective into the lower level.

    Returns a problem whose ll_* surface evaluates
    psi(x, y) = mu*lam*F(x, y) + (1 - mu)*f(x, y) and whose ul_* surface
    is unchanged.  ``mu = 0`` returns ``base`` itself (exact
    pass-through, no wrapping cost); ``mu > 0`` requires the base
    problem's upper-level curvature products.
    """
    if not 0.0 <= mu <= 0.5:
        raise ValueError(f"mu must lie in [0, 1/2], got {mu}")
    if lam <= 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    if mu == 0.0:
        return base
    if not base.has_ul_curvature:
        raise CapabilityError(
            "aggregation with mu > 0 needs hvp_yy_ul and jvp_xy_ul, "
            "which this problem does not provide")
    w_ul = mu * lam
    w_ll = 1.0 - mu
    return AggregatedProblem(
        n=base.n,
        m=base.m,
        ul_value=base.ul_value,
        ll_value=lambda x, y: w_ul * base.ul_value(x, y) + w_ll * base.ll_value(x, y),
        grad_x_ul=base.grad_x_ul,
        grad_y_ul=base.grad_y_ul,
        grad_y_ll=lambda x, y: w_ul * base.grad_y_ul(x, y) + w_ll * base.grad_y_ll(x, y),
        hvp_yy_ll=lambda x, y, u: w_ul * base.hvp_yy_ul(x, y, u) + w_ll * base.hvp_yy_ll(x, y, u),
        jvp_xy_ll=lambda x, y, u: w_ul * base.jvp_xy_ul(x, y, u) + w_ll * base.jvp_xy_ll(x, y, u),
        hvp_yy_ul=base.hvp_yy_ul,
        jvp_xy_ul=base.jvp_xy_ul,
        base=base,
        mu=mu,
        lam=lam,
    )


@dataclass
class Counts:
    """Tally of oracle products, at the surface the caller queries."""

    grads: int = 0
    hvps: int = 0
    jvps: int = 0

    def add(self, other: "Counts") -> None:
        self.grads += other.grads
        self.hvps += other.hvps
        self.jvps += other.jvps


def counting_problem(problem: BilevelProblem, counts: Counts) -> BilevelProblem:
    """Wrap a problem so every gradient/product call ticks ``counts``."""

    def grad(fn):
        def wrapped(x, y):
            counts.grads += 1
            return fn(x, y)
        return wrapped

    def hvp(fn):
        if fn is None:
            return None
        def wrapped(x, y, u):
            counts.hvps += 1
            return fn(x, y, u)
        return wrapped

    def jvp(fn):
        if fn is None:
            return None
        def wrapped(x, y, u):
            counts.jvps += 1
            return fn(x, y, u)
        return wrapped

    return replace(
        problem,
        grad_x_ul=grad(problem.grad_x_ul),
        grad_y_ul=grad(problem.grad_y_ul),
        grad_y_ll=grad(problem.grad_y_ll),
        hvp_yy_ll=hvp(problem.hvp_yy_ll),
        jvp_xy_ll=jvp(problem.jvp_xy_ll),
        hvp_yy_ul=hvp(problem.hvp_yy_ul),
        jvp_xy_ul=jvp(problem.jvp_xy_ul),
    )


@dataclass(frozen=True)
class FdCheckReport:
    """Max relative error per oracle entry, against central differences."""

    max_rel_error: dict[str, float]
    tol: float

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.max_rel_error.items() if not v <= self.tol]

    @property
    def passed(self) -> bool:
        return not self.failures

    def __str__(self) -> str:
        lines = []
        for name, err in self.max_rel_error.items():
            flag = "ok" if err <= self.tol else "FAIL"
            lines.append(f"  {name:<12s} rel err {err:.3e}  [{flag}]")
        verdict = "passed" if self.passed else "FAILED"
        return f"derivative check {verdict} (tol {self.tol:g})\n" + "\n".join(lines)


def _rel(a: Array, ref: Array) -> float:
    return float(np.linalg.norm(a - ref) / max(np.linalg.norm(ref), 1e-12))


def _fd_grad(fun: Callable[[Array], float], z: Array, h: float) -> Array:
    g = np.zeros_like(z)
    for i in range(z.size):
        zp = z.copy(); zp[i] += h
        zm = z.copy(); zm[i] -= h
        g[i] = (fun(zp) - fun(zm)) / (2.0 * h)
    return g


def fd_check_gradients(problem: BilevelProblem, x: Array, y: Array,
                       h: float = 1e-5, tol: float = 1e-4,
                       probes: int = 3, seed: int = 0) -> FdCheckReport:
    """Compare every analytic oracle against central differences at (x, y).

    Gradients are checked coordinate-wise; second-order products along
    ``probes`` seeded random directions, the cross product through the
    identity <jvp_xy(u), e_i> = d/dx_i <grad_y(x, y), u>.  Cost is
    O(n + m) oracle evaluations, intended for desk-scale instances.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    errs: dict[str, float] = {}

    errs["grad_x_ul"] = _rel(problem.grad_x_ul(x, y),
                             _fd_grad(lambda xs: problem.ul_value(xs, y), x, h))
    errs["grad_y_ul"] = _rel(problem.grad_y_ul(x, y),
                             _fd_grad(lambda ys: problem.ul_value(x, ys), y, h))
    errs["grad_y_ll"] = _rel(problem.grad_y_ll(x, y),
                             _fd_grad(lambda ys: problem.ll_value(x, ys), y, h))

    def hvp_err(prod, grad):
        worst = 0.0
        for _ in range(probes):
            u = rng.standard_normal(problem.m)
            ref = (grad(x, y + h * u) - grad(x, y - h * u)) / (2.0 * h)
            worst = max(worst, _rel(prod(x, y, u), ref))
        return worst

    def jvp_err(prod, grad):
        worst = 0.0
        for _ in range(probes):
            u = rng.standard_normal(problem.m)
            ref = np.zeros(problem.n)
            for i in range(problem.n):
                xp = x.copy(); xp[i] += h
                xm = x.copy(); xm[i] -= h
                ref[i] = float((grad(xp, y) - grad(xm, y)) @ u) / (2.0 * h)
            worst = max(worst, _rel(prod(x, y, u), ref))
        return worst

    errs["hvp_yy_ll"] = hvp_err(problem.hvp_yy_ll, problem.grad_y_ll)
    errs["jvp_xy_ll"] = jvp_err(problem.jvp_xy_ll, problem.grad_y_ll)
    if problem.has_ul_curvature:
        errs["hvp_yy_ul"] = hvp_err(problem.hvp_yy_ul, problem.grad_y_ul)
        errs["jvp_xy_ul"] = jvp_err(problem.jvp_xy_ul, problem.grad_y_ul)

    return FdCheckReport(errs, tol)
