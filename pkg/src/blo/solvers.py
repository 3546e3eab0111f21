"""Solver steps, hypergradient baselines, and the run driver.

BAGDC (bilevel alternating gradient with dual correction) sweeps the
lower iterate y, a multiplier estimate v, and the upper iterate x once
per outer iteration, touching exactly one Hessian-vector and one
cross-derivative product.  In merely-convex mode it iterates on the
aggregated lower level psi_mu = mu*lam*F + (1-mu)*f with a vanishing
mu_k schedule; with a strongly convex lower level mu = 0 and all steps
are constant.

The baselines share the oracle surface: NOSA (one-step alternating
scheme, no multiplier state), reverse-mode unrolling (RHG), implicit
differentiation with CG or truncated Neumann inverses, and BDA (RHG over
the aggregated lower level).  Hypergradient methods are driven by plain
upper gradient steps with warm-started y.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DivergenceError, NonPositiveCurvatureError, SingularHessianError
from .linalg import Array, LinearOperator, cg_solve, neumann_apply, power_iteration_lmax
from .metrics import AnalyticOracle, TraceRecord, kkt_residual, kkt_residual_aggregated, lyapunov_value
from .problem import BilevelProblem, Counts, aggregate, counting_problem

METHOD_NAMES = ("bagdc", "nosa", "rhg", "implicit-cg", "implicit-ns", "bda")

# Degeneracy guard for the adaptive eta Rayleigh quotient.
_ETA_CURV_FLOOR = 1e-12


@dataclass
class SolverState:
    x: Array
    y: Array
    v: Array
    k: int = 0
    elapsed: float = 0.0


@dataclass(frozen=True)
class ScheduleConfig:
    """Step-size schedule.

    ``strongly-convex``: mu_k = 0 and constant (alpha, beta, eta).
    ``merely-convex``:   mu_k = mu_bar/(k+1)^p with 0 < p < 1/11, and
                         alpha_k = alpha*mu_k^11, beta_k = beta,
                         eta_k = eta*mu_k^4.

    Base steps left as None are resolved against the dominant lower
    Hessian eigenvalue L at the initial point: beta = eta = 1/L,
    alpha = 0.1/L.
    """

    mode: str = "strongly-convex"
    alpha: float | None = None
    beta: float | None = None
    eta: float | None = None
    mu_bar: float = 0.5
    p: float = 1.0 / 12.0
    lam: float = 1.0
    eta_rule: str = "fixed"

    def __post_init__(self):
        if self.mode not in ("strongly-convex", "merely-convex"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.eta_rule not in ("fixed", "adaptive"):
            raise ValueError(f"unknown eta_rule {self.eta_rule!r}")
        if self.mode == "merely-convex":
            if not 0.0 < self.p < 1.0 / 11.0:
                raise ValueError(f"merely-convex mode needs 0 < p < 1/11, got {self.p}")
            if not 0.0 < self.mu_bar <= 0.5:
                raise ValueError(f"mu_bar must lie in (0, 1/2], got {self.mu_bar}")
        if self.lam <= 0.0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        for name in ("alpha", "beta", "eta"):
            val = getattr(self, name)
            if val is not None and val <= 0.0:
                raise ValueError(f"{name} must be positive, got {val}")


def schedule_at(cfg: ScheduleConfig, k: int) -> tuple[float, float, float, float]:
    """(mu_k, alpha_k, beta_k, eta_k) for outer iteration k."""
    if cfg.alpha is None or cfg.beta is None or cfg.eta is None:
        raise ValueError("schedule has unresolved base steps; call resolve_schedule")
    if cfg.mode == "strongly-convex":
        return 0.0, cfg.alpha, cfg.beta, cfg.eta
    mu = cfg.mu_bar * (k + 1.0) ** (-cfg.p)
    return mu, cfg.alpha * mu ** 11, cfg.beta, cfg.eta * mu ** 4


def resolve_schedule(cfg: ScheduleConfig, problem: BilevelProblem,
                     x0: Array, y0: Array, seed: int = 0
                     ) -> tuple[ScheduleConfig, float | None]:
    """Fill in unset base steps from L = lmax of the lower Hessian at (x0, y0)."""
    if cfg.alpha is not None and cfg.beta is not None and cfg.eta is not None:
        return cfg, None
    op = LinearOperator(problem.m, lambda u: problem.hvp_yy_ll(x0, y0, u))
    l_hat = power_iteration_lmax(op, iters=100, seed=seed)
    if l_hat <= 0.0:
        l_hat = 1.0
    return replace(
        cfg,
        alpha=cfg.alpha if cfg.alpha is not None else 0.1 / l_hat,
        beta=cfg.beta if cfg.beta is not None else 1.0 / l_hat,
        eta=cfg.eta if cfg.eta is not None else 1.0 / l_hat,
    ), l_hat


def _ensure_finite(vec: Array, name: str) -> None:
    if not np.all(np.isfinite(vec)):
        raise DivergenceError(f"iterate {name} became non-finite")


@dataclass(frozen=True)
class StepInfo:
    """Direction, oracle cost, and (for BAGDC) the eta actually used."""

    d: Array
    counts: Counts
    eta: float | None = None


def bagdc_step(state: SolverState, problem: BilevelProblem, mu: float,
               alpha: float, beta: float, eta: float, lam: float = 1.0,
               adaptive: bool = False) -> tuple[SolverState, StepInfo]:
    """One alternating sweep on the (possibly aggregated) problem.

        y+ = y - beta * grad_y psi(x, y)
        v+ = v + eta * (grad_y F(x, y+) - [H_yy psi(x, y+)] v)
        x+ = x - alpha * (grad_x F(x, y+) - [J_xy psi(x, y)] v+)

    Note the cross product is taken at the *pre-update* y.  Exactly one
    HVP and one JVP per call (one extra HVP under the adaptive eta rule,
    which replaces eta by <r,r>/<r,Hr> for the residual r, falling back
    to the supplied eta when the quotient degenerates).
    """
    counts = Counts()
    psi = counting_problem(aggregate(problem, mu, lam), counts)
    x, y, v = state.x, state.y, state.v
    y1 = y - beta * psi.grad_y_ll(x, y)
    _ensure_finite(y1, "y")
    r = psi.grad_y_ul(x, y1) - psi.hvp_yy_ll(x, y1, v)
    eta_k = eta
    if adaptive:
        rr = float(r @ r)
        if rr > 0.0:
            rhr = float(r @ psi.hvp_yy_ll(x, y1, r))
            if rhr > _ETA_CURV_FLOOR * rr:
                eta_k = rr / rhr
    v1 = v + eta_k * r
    _ensure_finite(v1, "v")
    d = psi.grad_x_ul(x, y1) - psi.jvp_xy_ll(x, y, v1)
    x1 = x - alpha * d
    _ensure_finite(x1, "x")
    new = SolverState(x1, y1, v1, state.k + 1, state.elapsed)
    return new, StepInfo(d, counts, eta_k)


def adaptive_eta(problem_psi: BilevelProblem, x: Array, y_next: Array, v: Array,
                 fallback: float) -> float:
    """Rayleigh-quotient step for the multiplier update.

    eta = <r,r>/<r,Hr> with r = grad_y F(x, y_next) - H v and
    H = the lower Hessian of ``problem_psi`` at (x, y_next); returns
    ``fallback`` when r = 0 or the curvature quotient degenerates.
    """
    r = problem_psi.grad_y_ul(x, y_next) - problem_psi.hvp_yy_ll(x, y_next, v)
    rr = float(r @ r)
    if rr == 0.0:
        return fallback
    rhr = float(r @ problem_psi.hvp_yy_ll(x, y_next, r))
    if rhr <= _ETA_CURV_FLOOR * rr:
        return fallback
    return rr / rhr


def nosa_step(state: SolverState, problem: BilevelProblem, alpha: float,
              beta: float) -> tuple[SolverState, StepInfo]:
    """One-step alternating scheme; no multiplier state is maintained.

        y+ = y - beta * grad_y f(x, y)
        x+ = x - alpha * (grad_x F(x, y+) - beta * [J_xy f(x, y)] grad_y F(x, y+))
    """
    counts = Counts()
    p = counting_problem(problem, counts)
    x, y = state.x, state.y
    y1 = y - beta * p.grad_y_ll(x, y)
    _ensure_finite(y1, "y")
    g_up = p.grad_y_ul(x, y1)
    d = p.grad_x_ul(x, y1) - beta * p.jvp_xy_ll(x, y, g_up)
    x1 = x - alpha * d
    _ensure_finite(x1, "x")
    return SolverState(x1, y1, state.v, state.k + 1, state.elapsed), StepInfo(d, counts)


@dataclass(frozen=True)
class HypergradientResult:
    d: Array
    y_out: Array
    inner_cost: Counts
    multiplier: Array | None = None


def rhg_hypergradient(problem: BilevelProblem, x: Array, y0: Array, T: int,
                      beta: float) -> HypergradientResult:
    """Reverse-mode differentiation through T lower gradient steps.

    Forward stores the trajectory; the reverse pass accumulates

        a <- grad_y F(x, y_T),  d <- grad_x F(x, y_T)
        for t = T-1 .. 0:
            d <- d - beta * [J_xy f(x, y_t)] a
            a <- a - beta * [H_yy f(x, y_t)] a

    Cost: T gradients forward, T HVPs + T JVPs in reverse.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    counts = Counts()
    p = counting_problem(problem, counts)
    ys = [np.asarray(y0, dtype=float)]
    for _ in range(T):
        y_next = ys[-1] - beta * p.grad_y_ll(x, ys[-1])
        _ensure_finite(y_next, "y")
        ys.append(y_next)
    a = p.grad_y_ul(x, ys[T])
    d = p.grad_x_ul(x, ys[T])
    for t in range(T - 1, -1, -1):
        d = d - beta * p.jvp_xy_ll(x, ys[t], a)
        a = a - beta * p.hvp_yy_ll(x, ys[t], a)
    _ensure_finite(d, "d")
    return HypergradientResult(d, ys[T], counts)


def implicit_cg_hypergradient(problem: BilevelProblem, x: Array, y0: Array,
                              T: int, beta: float, eps: float) -> HypergradientResult:
    """Implicit differentiation with a CG solve of the adjoint system.

    Runs T lower gradient steps to y_hat, solves
    [H_yy f(x, y_hat)] v = grad_y F(x, y_hat) by CG to relative
    tolerance ``eps``, and returns d = grad_x F - [J_xy f] v.  A
    non-positive-definite Hessian surfaces as SingularHessianError.
    """
    counts = Counts()
    p = counting_problem(problem, counts)
    y_hat = np.asarray(y0, dtype=float)
    for _ in range(T):
        y_hat = y_hat - beta * p.grad_y_ll(x, y_hat)
        _ensure_finite(y_hat, "y")
    h_op = LinearOperator(problem.m, lambda u: p.hvp_yy_ll(x, y_hat, u))
    b = p.grad_y_ul(x, y_hat)
    try:
        v = cg_solve(h_op, b, tol=eps, max_iter=5 * problem.m + 50).x
    except SingularHessianError:
        raise
    except NonPositiveCurvatureError as exc:
        raise SingularHessianError(
            f"lower Hessian is singular or indefinite at the inner solution: {exc}") from exc
    d = p.grad_x_ul(x, y_hat) - p.jvp_xy_ll(x, y_hat, v)
    _ensure_finite(d, "d")
    return HypergradientResult(d, y_hat, counts, multiplier=v)


def implicit_ns_hypergradient(problem: BilevelProblem, x: Array, y0: Array,
                              T: int, beta: float, M: int) -> HypergradientResult:
    """Implicit differentiation with a truncated Neumann inverse.

    v = beta * sum_{j<=M} (I - beta*H)^j grad_y F(x, y_hat); with M = 0
    this collapses to v = beta * grad_y F, the multiplier the one-step
    alternating scheme applies implicitly.
    """
    counts = Counts()
    p = counting_problem(problem, counts)
    y_hat = np.asarray(y0, dtype=float)
    for _ in range(T):
        y_hat = y_hat - beta * p.grad_y_ll(x, y_hat)
        _ensure_finite(y_hat, "y")
    h_op = LinearOperator(problem.m, lambda u: p.hvp_yy_ll(x, y_hat, u))
    b = p.grad_y_ul(x, y_hat)
    v = neumann_apply(h_op, b, beta, M)
    d = p.grad_x_ul(x, y_hat) - p.jvp_xy_ll(x, y_hat, v)
    _ensure_finite(d, "d")
    return HypergradientResult(d, y_hat, counts, multiplier=v)


def bda_hypergradient(problem: BilevelProblem, x: Array, y0: Array, T: int,
                      mu: float, lam: float, beta: float) -> HypergradientResult:
    """Reverse-mode unrolling over the aggregated lower level psi_mu.

    Identical in structure to ``rhg_hypergradient`` with f replaced by
    psi_mu; mu = 0 degenerates to plain RHG.  Oracle costs are counted
    at the aggregated surface.
    """
    return rhg_hypergradient(aggregate(problem, mu, lam), x, y0, T, beta)


# ---------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class MethodSpec:
    """Which solver to drive, with per-method parameters.

    T is the inner step count (rhg/implicit-*/bda), eps the CG tolerance,
    M the Neumann truncation, (mu, lam) the BDA aggregation weights.
    """

    name: str
    T: int = 100
    eps: float = 1e-8
    M: int = 100
    mu: float = 0.5
    lam: float = 1.0

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.name!r} (expected one of {METHOD_NAMES})")


@dataclass(frozen=True)
class StopRule:
    """Run until any criterion fires; at least one must be set.

    ``kkt_tol`` is evaluated at trace rows only (it costs oracle calls).
    """

    max_iters: int | None = None
    max_seconds: float | None = None
    d_norm_tol: float | None = None
    kkt_tol: float | None = None

    def __post_init__(self):
        if (self.max_iters is None and self.max_seconds is None
                and self.d_norm_tol is None and self.kkt_tol is None):
            raise ValueError("at least one stop criterion must be set")


_OK_STATUSES = ("converged", "max-iters", "time-limit")


@dataclass
class RunSummary:
    status: str
    iterations: int
    wall_seconds: float
    counts: Counts
    schedule: dict
    final: dict
    error: str | None = None
    error_at: int | None = None

    @property
    def ok(self) -> bool:
        return self.status in _OK_STATUSES


def _try_metric(fn):
    # oracle metrics can overflow (CG on a diverging iterate); record a
    # blank cell rather than killing the run
    try:
        return fn()
    except (NonPositiveCurvatureError, DivergenceError, FloatingPointError):
        return None


def _make_record(problem, oracle, state, d_norm, mu_k, a_k, b_k, e_k,
                 seconds, totals, lam) -> TraceRecord:
    x, y, v = state.x, state.y, state.v
    grad_phi_norm = dist_x_rel = dist_y = lyap = None
    if oracle is not None:
        grad_phi_norm = _try_metric(
            lambda: float(np.linalg.norm(oracle.grad_phi(x))))
        if oracle.x_star is not None:
            denom = max(float(np.linalg.norm(oracle.x_star)), 1e-12)
            dist_x_rel = float(np.linalg.norm(x - oracle.x_star)) / denom
        if oracle.y_star_mu is not None:
            dist_y = _try_metric(
                lambda: float(np.linalg.norm(y - oracle.y_star_mu(x, mu_k, lam))))
        else:
            dist_y = _try_metric(
                lambda: float(np.linalg.norm(y - oracle.y_star(x))))
        if oracle.y_star_mu is not None and oracle.v_star_mu is not None:
            lyap = _try_metric(
                lambda: lyapunov_value(problem, oracle, x, y, v, mu_k, lam))
    return TraceRecord(
        k=state.k - 1,
        wall_seconds=seconds,
        ul_value=float(problem.ul_value(x, y)),
        ll_value=float(problem.ll_value(x, y)),
        d_norm=d_norm,
        kkt_residual=kkt_residual(problem, x, y, v),
        grad_phi_norm=grad_phi_norm,
        dist_x_rel=dist_x_rel,
        dist_y=dist_y,
        lyapunov=lyap,
        mu=mu_k,
        alpha=a_k,
        beta=b_k,
        eta=e_k,
        hvp_count=totals.hvps,
        jvp_count=totals.jvps,
    )


def _dispatch_step(state: SolverState, problem: BilevelProblem, method: MethodSpec,
                   cfg: ScheduleConfig, mu_k: float, a_k: float, b_k: float,
                   e_k: float, adaptive: bool) -> tuple[SolverState, StepInfo]:
    if method.name == "bagdc":
        return bagdc_step(state, problem, mu_k, a_k, b_k, e_k, cfg.lam,
                          adaptive=adaptive)
    if method.name == "nosa":
        return nosa_step(state, problem, a_k, b_k)
    if method.name == "rhg":
        res = rhg_hypergradient(problem, state.x, state.y, method.T, b_k)
    elif method.name == "implicit-cg":
        res = implicit_cg_hypergradient(problem, state.x, state.y, method.T,
                                        b_k, method.eps)
    elif method.name == "implicit-ns":
        res = implicit_ns_hypergradient(problem, state.x, state.y, method.T,
                                        b_k, method.M)
    else:
        res = bda_hypergradient(problem, state.x, state.y, method.T, method.mu,
                                method.lam, b_k)
    x1 = state.x - a_k * res.d
    _ensure_finite(x1, "x")
    v1 = res.multiplier if res.multiplier is not None else state.v
    new = SolverState(x1, res.y_out, v1, state.k + 1, state.elapsed)
    return new, StepInfo(res.d, res.inner_cost)


def run_solver(problem: BilevelProblem, method: MethodSpec, schedule: ScheduleConfig,
               stop: StopRule, oracle: AnalyticOracle | None = None,
               sink: Callable[[TraceRecord], None] | None = None,
               seed: int = 0, state0: SolverState | None = None,
               trace_every: int = 1,
               probe: Callable[[int, SolverState, SolverState, Array], None] | None = None,
               ) -> tuple[SolverState, RunSummary]:
    """Drive a method until a stop criterion fires.

    Emits a TraceRecord every ``trace_every`` iterations (plus the final
    one).  Only the step itself is timed; metric evaluation, the sink,
    and the probe run off the clock and off the oracle counters.  Step
    errors are recorded in the summary (status ``diverged`` /
    ``singular-hessian`` / ``error``) rather than raised.

    ``probe(k, state_before, state_after, d)`` is a hook for
    study-specific measurements.
    """
    if trace_every < 1:
        raise ValueError(f"trace_every must be >= 1, got {trace_every}")
    state = state0 if state0 is not None else SolverState(
        np.zeros(problem.n), np.zeros(problem.m), np.zeros(problem.m))
    cfg, l_hat = resolve_schedule(schedule, problem, state.x, state.y, seed)
    sched_info = {"mode": cfg.mode, "alpha": cfg.alpha, "beta": cfg.beta,
                  "eta": cfg.eta, "mu_bar": cfg.mu_bar, "p": cfg.p,
                  "lam": cfg.lam, "eta_rule": cfg.eta_rule, "l_hat": l_hat}
    adaptive = cfg.eta_rule == "adaptive"
    totals = Counts()
    seconds = 0.0
    status = None
    error = None
    error_at = None
    last_rec: TraceRecord | None = None
    k = 0
    while True:
        if stop.max_iters is not None and k >= stop.max_iters:
            status = "max-iters"
            break
        mu_k, a_k, b_k, e_k = schedule_at(cfg, k)
        before = state
        t0 = time.perf_counter()
        try:
            # overflow is how divergence manifests; detect it, don't warn
            with np.errstate(over="ignore", invalid="ignore"):
                state, info = _dispatch_step(state, problem, method, cfg, mu_k,
                                             a_k, b_k, e_k, adaptive)
        except SingularHessianError as exc:
            status, error, error_at = "singular-hessian", str(exc), k
            break
        except DivergenceError as exc:
            status, error, error_at = "diverged", str(exc), k
            break
        except NonPositiveCurvatureError as exc:
            status, error, error_at = "error", str(exc), k
            break
        seconds += time.perf_counter() - t0
        state.elapsed = seconds
        totals.add(info.counts)
        with np.errstate(over="ignore", invalid="ignore"):
            d_norm = float(np.linalg.norm(info.d))
            converged = stop.d_norm_tol is not None and d_norm <= stop.d_norm_tol
            timed_out = stop.max_seconds is not None and seconds >= stop.max_seconds
            is_last = stop.max_iters is not None and k + 1 >= stop.max_iters
            if k % trace_every == 0 or converged or timed_out or is_last:
                e_used = info.eta if info.eta is not None else e_k
                last_rec = _make_record(problem, oracle, state, d_norm, mu_k, a_k,
                                        b_k, e_used, seconds, totals, cfg.lam)
                if sink is not None:
                    sink(last_rec)
                if stop.kkt_tol is not None and last_rec.kkt_residual <= stop.kkt_tol:
                    converged = True
        if probe is not None:
            probe(k, before, state, info.d)
        k += 1
        if converged:
            status = "converged"
            break
        if timed_out:
            status = "time-limit"
            break

    final = {} if last_rec is None else {
        name: getattr(last_rec, name)
        for name in ("ul_value", "ll_value", "d_norm", "kkt_residual",
                     "grad_phi_norm", "dist_x_rel", "dist_y", "lyapunov")
    }
    if (status in _OK_STATUSES and method.name == "bagdc"
            and cfg.mode == "merely-convex" and problem.has_ul_curvature and k > 0):
        mu_last = schedule_at(cfg, k - 1)[0]
        final["kkt_residual_aggregated"] = kkt_residual_aggregated(
            problem, state.x, state.y, state.v, mu_last, cfg.lam)
    summary = RunSummary(status=status, iterations=k, wall_seconds=seconds,
                         counts=totals, schedule=sched_info, final=final,
                         error=error, error_at=error_at)
    return state, summary
