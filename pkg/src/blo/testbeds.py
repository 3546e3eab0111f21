"""Problem families with known structure, plus small data utilities.

Three testbeds:

* ``make_quadratic``  - strongly convex lower level with a full closed-form
  oracle; the classic setting where one-step alternating schemes converge
  to a provably non-stationary point.
* ``make_multimin``   - a 1x2 instance whose lower level has a continuum of
  minimizers (singular Hessian) but still a closed-form oracle under the
  optimistic selection.
* ``hypercleaning_problem`` - softmax-regression data hyper-cleaning: one
  trainable weight per training sample, validation loss on top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import Array, LinearOperator, diagonal_operator, identity_operator
from .metrics import AnalyticOracle, quadratic_oracle
from .problem import BilevelProblem


# ---------------------------------------------------------------------------
# quadratic family


@dataclass(frozen=True)
class QuadraticBilevel:
    a_op: LinearOperator
    z0: Array
    problem: BilevelProblem
    oracle: AnalyticOracle


def make_quadratic(n: int, spectrum="identity", z0="ones",
                   seed: int = 0) -> QuadraticBilevel:
    """Build F = 0.5|x-z0|^2 + 0.5<y,Ay>, f = 0.5<y,Ay> - <x,y>.

    ``spectrum`` is ``"identity"`` or a pair (lmin, lmax) from which n
    eigenvalues are drawn log-uniformly (seeded); A is diagonal in that
    basis.  ``z0`` is ``"ones"`` or ``"random"`` (seeded standard normal).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if spectrum == "identity":
        a_op = identity_operator(n)
    else:
        lmin, lmax = float(spectrum[0]), float(spectrum[1])
        if not 0.0 < lmin <= lmax:
            raise ValueError(f"spectrum bounds must satisfy 0 < lmin <= lmax, got {spectrum}")
        rng = np.random.default_rng(seed)
        eigs = np.exp(rng.uniform(np.log(lmin), np.log(lmax), size=n))
        a_op = diagonal_operator(eigs)
    if isinstance(z0, str):
        if z0 == "ones":
            z_vec = np.ones(n)
        elif z0 == "random":
            z_vec = np.random.default_rng([seed, 1]).standard_normal(n)
        else:
            raise ValueError(f"z0 must be 'ones', 'random', or an array, got {z0!r}")
    else:
        z_vec = np.asarray(z0, dtype=float)
        if z_vec.shape != (n,):
            raise ValueError(f"z0 has shape {z_vec.shape}, expected ({n},)")

    a = a_op.apply
    problem = BilevelProblem(
        n=n,
        m=n,
        ul_value=lambda x, y: float(0.5 * ((x - z_vec) @ (x - z_vec)) + 0.5 * (y @ a(y))),
        ll_value=lambda x, y: float(0.5 * (y @ a(y)) - x @ y),
        grad_x_ul=lambda x, y: x - z_vec,
        grad_y_ul=lambda x, y: a(y),
        grad_y_ll=lambda x, y: a(y) - x,
        hvp_yy_ll=lambda x, y, u: a(u),
        jvp_xy_ll=lambda x, y, u: -np.asarray(u, dtype=float),
        hvp_yy_ul=lambda x, y, u: a(u),
        jvp_xy_ul=lambda x, y, u: np.zeros(n),
    )
    return QuadraticBilevel(a_op, z_vec, problem, quadratic_oracle(a_op, z_vec))


# ---------------------------------------------------------------------------
# multi-minimizer family


@dataclass(frozen=True)
class MultiMinimizerBilevel:
    problem: BilevelProblem
    oracle: AnalyticOracle


def make_multimin() -> MultiMinimizerBilevel:
    """A fixed instance whose lower level is flat along y2.

    x in R, y in R^2 with f = 0.5*y1^2 - x*y1 (minimizer set
    {(x, t) : t in R}, Hessian diag(1, 0)) and strongly convex
    F = 0.5*(y1-1)^2 + 0.5*(y2-x)^2.  Under the optimistic selection
    phi(x) = 0.5*(x-1)^2, so x* = 1 and y* = (1, 1).  Implicit methods
    that invert the lower Hessian break here by construction; the
    aggregated oracle (y*_mu, v*_mu) is closed-form for mu in (0, 1/2].
    """
    problem = BilevelProblem(
        n=1,
        m=2,
        ul_value=lambda x, y: float(0.5 * (y[0] - 1.0) ** 2 + 0.5 * (y[1] - x[0]) ** 2),
        ll_value=lambda x, y: float(0.5 * y[0] ** 2 - x[0] * y[0]),
        grad_x_ul=lambda x, y: np.array([x[0] - y[1]]),
        grad_y_ul=lambda x, y: np.array([y[0] - 1.0, y[1] - x[0]]),
        grad_y_ll=lambda x, y: np.array([y[0] - x[0], 0.0]),
        hvp_yy_ll=lambda x, y, u: np.array([u[0], 0.0]),
        jvp_xy_ll=lambda x, y, u: np.array([-u[0]]),
        hvp_yy_ul=lambda x, y, u: np.array(u, dtype=float),
        jvp_xy_ul=lambda x, y, u: np.array([-u[1]]),
    )

    def y_star_mu(x: Array, mu: float, lam: float) -> Array:
        s = mu * lam + 1.0 - mu
        return np.array([(mu * lam + (1.0 - mu) * x[0]) / s, x[0]])

    def v_star_mu(x: Array, mu: float, lam: float) -> Array:
        s = mu * lam + 1.0 - mu
        return np.array([(1.0 - mu) * (x[0] - 1.0) / (s * s), 0.0])

    def grad_phi_mu(x: Array, mu: float, lam: float) -> Array:
        s = mu * lam + 1.0 - mu
        return np.array([(1.0 - mu) ** 2 * (x[0] - 1.0) / (s * s)])

    oracle = AnalyticOracle(
        x_star=np.array([1.0]),
        y_star=lambda x: np.array([x[0], x[0]]),
        phi=lambda x: float(0.5 * (x[0] - 1.0) ** 2),
        grad_phi=lambda x: np.array([x[0] - 1.0]),
        y_star_mu=y_star_mu,
        v_star_mu=v_star_mu,
        grad_phi_mu=grad_phi_mu,
    )
    return MultiMinimizerBilevel(problem, oracle)


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class Dataset:
    """Features (N, d) float64, integer labels (N,), and a clean mask."""

    features: Array
    labels: Array
    n_classes: int
    clean_mask: Array

    def __post_init__(self):
        n = self.features.shape[0]
        if n < 1 or self.features.ndim != 2:
            raise ValueError(f"features must be (N, d) with N >= 1, got {self.features.shape}")
        if self.labels.shape != (n,) or self.clean_mask.shape != (n,):
            raise ValueError("labels/clean_mask length does not match features")
        if self.n_classes < 2:
            raise ValueError(f"need at least two classes, got {self.n_classes}")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError("labels out of range for n_classes")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def synth_blobs(classes: int, dim: int, per_class: int, separation: float,
                seed: int) -> Dataset:
    """Gaussian blobs: one unit-noise cluster per class, means at
    ``separation`` times seeded random unit directions."""
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((classes, dim))
    means *= separation / np.linalg.norm(means, axis=1, keepdims=True)
    feats = np.vstack([means[c] + rng.standard_normal((per_class, dim))
                       for c in range(classes)])
    labels = np.repeat(np.arange(classes), per_class)
    return Dataset(feats, labels.astype(np.int64), classes,
                   np.ones(classes * per_class, dtype=bool))


def split_dataset(ds: Dataset, n_first: int, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle (seeded) and split into the first ``n_first`` and the rest."""
    if not 0 < n_first < ds.n:
        raise ValueError(f"n_first must be in (0, {ds.n}), got {n_first}")
    perm = np.random.default_rng(seed).permutation(ds.n)
    def take(idx):
        return Dataset(ds.features[idx], ds.labels[idx], ds.n_classes, ds.clean_mask[idx])
    return take(perm[:n_first]), take(perm[n_first:])


def corrupt_labels(ds: Dataset, rho: float, seed: int) -> Dataset:
    """Flip floor(rho*N) uniformly chosen labels to a uniformly chosen
    *different* class; clean_mask is false exactly there.  Features are
    shared bit-exactly with the input."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    rng = np.random.default_rng(seed)
    n_flip = int(np.floor(rho * ds.n))
    labels = ds.labels.copy()
    mask = ds.clean_mask.copy()
    idx = rng.choice(ds.n, size=n_flip, replace=False)
    if n_flip:
        # shift by 1..C-1 mod C: uniform over the other classes
        shift = rng.integers(1, ds.n_classes, size=n_flip)
        labels[idx] = (labels[idx] + shift) % ds.n_classes
        mask[idx] = False
    return Dataset(ds.features, labels, ds.n_classes, mask)


def f1_clean(x: Array, clean_mask: Array, threshold: float = 0.5) -> float:
    """F1 of 'predicted clean' (sigmoid(x_i) > threshold) against the mask.

    Returns 0.0 when positives exist but none are predicted (or none hit).
    """
    pred = _sigmoid(np.asarray(x, dtype=float)) > threshold
    clean = np.asarray(clean_mask, dtype=bool)
    tp = int(np.sum(pred & clean))
    if tp == 0:
        return 0.0
    precision = tp / int(np.sum(pred))
    recall = tp / int(np.sum(clean))
    return float(2.0 * precision * recall / (precision + recall))


# ---------------------------------------------------------------------------
# hyper-cleaning


def _sigmoid(z: Array) -> Array:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _dsigmoid(z: Array) -> Array:
    s = _sigmoid(z)
    return s * (1.0 - s)


def _augment(features: Array) -> Array:
    return np.hstack([features, np.ones((features.shape[0], 1))])


def _softmax(z: Array) -> Array:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _ce_losses(w_mat: Array, a: Array, labels: Array) -> Array:
    """Per-sample softmax cross-entropy for logits a @ w_mat.T."""
    z = a @ w_mat.T
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    return lse - z[np.arange(a.shape[0]), labels]


def classifier_accuracy(ds: Dataset, w: Array) -> float:
    """Top-1 accuracy of flattened weights w (C x (d+1)) on a dataset."""
    w_mat = np.asarray(w, dtype=float).reshape(ds.n_classes, ds.dim + 1)
    preds = np.argmax(_augment(ds.features) @ w_mat.T, axis=1)
    return float(np.mean(preds == ds.labels))


@dataclass(frozen=True)
class HyperCleaningProblem:
    train: Dataset
    val: Dataset
    reg_c: float
    problem: BilevelProblem

    def grad_x_ll(self, x: Array, w: Array) -> Array:
        """d f / d x, component i = sigmoid'(x_i) * loss_i(w) / N.

        Not used by the solvers (they only need d F / d x = 0) but handy
        for derivative checking the weighting mechanism.
        """
        a = _augment(self.train.features)
        w_mat = np.asarray(w, dtype=float).reshape(self.train.n_classes, -1)
        ce = _ce_losses(w_mat, a, self.train.labels)
        return _dsigmoid(np.asarray(x, dtype=float)) * ce / self.train.n


def hypercleaning_problem(train: Dataset, val: Dataset,
                          c: float = 1e-3) -> HyperCleaningProblem:
    """Per-sample reweighting of a ridge-regularized softmax classifier.

    Lower level over flattened weights w (C x (d+1), bias column last):

        f(x, w) = mean_i sigmoid(x_i) * ce_i(w) + c/2 |w|^2

    Upper level F(x, w) = mean validation cross-entropy, independent of x.
    The ridge makes f strongly convex in w, so the single-level residual
    is well posed; upper-level curvature products are not provided.
    """
    if val.n_classes != train.n_classes or val.dim != train.dim:
        raise ValueError("train/val disagree on feature dim or class count")
    if c <= 0.0:
        raise ValueError(f"ridge weight c must be positive, got {c}")

    a_tr = _augment(train.features)
    a_val = _augment(val.features)
    y_tr = train.labels
    y_val = val.labels
    n_tr = train.n
    n_val = val.n
    n_cls = train.n_classes
    p = train.dim + 1
    rows_tr = np.arange(n_tr)
    rows_val = np.arange(n_val)

    def unpack(w):
        return np.asarray(w, dtype=float).reshape(n_cls, p)

    def ll_value(x, w):
        ce = _ce_losses(unpack(w), a_tr, y_tr)
        return float(_sigmoid(x) @ ce / n_tr + 0.5 * c * (w @ w))

    def ul_value(x, w):
        return float(np.mean(_ce_losses(unpack(w), a_val, y_val)))

    def grad_y_ll(x, w):
        r = _softmax(a_tr @ unpack(w).T)
        r[rows_tr, y_tr] -= 1.0
        g = (r * _sigmoid(x)[:, None]).T @ a_tr / n_tr
        return g.ravel() + c * w

    def grad_y_ul(x, w):
        r = _softmax(a_val @ unpack(w).T)
        r[rows_val, y_val] -= 1.0
        return (r.T @ a_val / n_val).ravel()

    def hvp_yy_ll(x, w, u):
        pm = _softmax(a_tr @ unpack(w).T)
        zu = a_tr @ unpack(u).T
        t = pm * zu
        t -= pm * t.sum(axis=1, keepdims=True)
        t *= _sigmoid(x)[:, None]
        return (t.T @ a_tr / n_tr).ravel() + c * np.asarray(u, dtype=float)

    def jvp_xy_ll(x, w, u):
        r = _softmax(a_tr @ unpack(w).T)
        r[rows_tr, y_tr] -= 1.0
        zu = a_tr @ unpack(u).T
        return _dsigmoid(np.asarray(x, dtype=float)) * np.sum(r * zu, axis=1) / n_tr

    problem = BilevelProblem(
        n=n_tr,
        m=n_cls * p,
        ul_value=ul_value,
        ll_value=ll_value,
        grad_x_ul=lambda x, w: np.zeros(n_tr),
        grad_y_ul=grad_y_ul,
        grad_y_ll=grad_y_ll,
        hvp_yy_ll=hvp_yy_ll,
        jvp_xy_ll=jvp_xy_ll,
    )
    return HyperCleaningProblem(train, val, c, problem)
