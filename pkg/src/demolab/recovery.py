"""Sparse test signals and recovery solvers.

``l1_recover`` solves basis pursuit, ``min ||z||_1 s.t. Phi z = y``. Three
methods are available:

``"admm"``
    Douglas-Rachford splitting between the affine constraint (exact
    projection through a cached Cholesky factor of ``Phi Phi^T``) and the
    l1 prox. Default.
``"pdhg"``
    Chambolle-Pock primal-dual iteration with step sizes ``0.99 / ||Phi||``
    from a power-method estimate.
``"lp"``
    The equivalent linear program solved by HiGHS. Exact up to the LP
    tolerances; used as a fallback when a first-order method hits its
    iteration cap.

``omp_recover`` is an independent greedy cross-check.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import linprog

from .errors import DegenerateSelectionError, DimensionMismatchError, PreconditionError
from .matrices import IndexSet, as_array
from .riplab import _jsonable

METHODS = ("admm", "pdhg", "lp")


@dataclass(frozen=True)
class SparseSignal:
    n: int
    support: IndexSet
    values: np.ndarray
    norm: float = 1.0

    def to_dense(self):
        x = np.zeros(self.n)
        x[self.support.zero_based] = self.values
        return x

    @property
    def k(self):
        return len(self.support)


@dataclass(frozen=True)
class SolverOptions:
    method: str = "admm"
    feas_tol: float = 1e-6
    obj_tol: float = 1e-8
    max_iter: int = 20000
    # ADMM penalty as a multiple of 1/||Phi^T y||_inf
    rho_scale: float = 30.0
    power_iters: int = 200
    fallback: str = None
    # refit a converged first-order solution on its support by least squares
    polish: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.fallback not in (None, *METHODS):
            raise ValueError(f"unknown fallback {self.fallback!r}")


@dataclass
class RecoveryResult:
    estimate: np.ndarray
    residual: float
    rel_error: float
    iterations: int
    converged: bool
    solver: str
    method: str = ""

    def to_dict(self):
        d = asdict(self)
        d["estimate"] = self.estimate.tolist()
        return _jsonable(d)


def random_sparse_signal(n, k, seed=0):
    """Unit-norm ``k``-sparse vector with uniform support and Gaussian values."""
    if not 1 <= k <= n:
        raise PreconditionError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(n, size=k, replace=False))
    values = rng.standard_normal(k)
    values /= np.linalg.norm(values)
    return SparseSignal(n, IndexSet.from_zero_based(support, n), values, 1.0)


def compressible_signal(n, exponent=1.5, seed=0):
    """Unit-norm vector whose sorted magnitudes decay like ``i**-exponent``.

    Signs are random and the positions are a random permutation.
    """
    rng = np.random.default_rng(seed)
    mags = np.arange(1, n + 1, dtype=np.float64) ** (-exponent)
    x = np.zeros(n)
    x[rng.permutation(n)] = mags * rng.choice([-1.0, 1.0], size=n)
    return x / np.linalg.norm(x)


def best_k_term(x, k):
    """Keep the ``k`` largest-magnitude entries of ``x``; ties go to the lower index."""
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= k <= x.size:
        raise PreconditionError(f"k must be in [0, {x.size}]")
    out = np.zeros_like(x)
    if k:
        keep = np.argsort(-np.abs(x), kind="stable")[:k]
        out[keep] = x[keep]
    return out


def _soft(v, t):
    return v - np.clip(v, -t, t)


def _rel_error(z, truth):
    if truth is None:
        return math.nan
    t = truth.to_dense() if isinstance(truth, SparseSignal) else np.asarray(truth, dtype=np.float64)
    nt = np.linalg.norm(t)
    return float(np.linalg.norm(z - t) / nt) if nt > 0 else float(np.linalg.norm(z))


def power_norm(a, iters=200, tol=1e-10):
    """Spectral norm estimate by power iteration on ``a^T a`` from a fixed start."""
    v = np.ones(a.shape[1]) / math.sqrt(a.shape[1])
    s = 0.0
    for _ in range(iters):
        w = a.T @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        s_new = math.sqrt(nw)
        if abs(s_new - s) <= tol * s_new:
            return s_new
        s = s_new
    return s


def _admm(a, y, opts):
    n = a.shape[1]
    # projection onto {z : a z = y} is v - b^T (a v) + x0 with b = (a a^T)^-1 a
    b = cho_solve(cho_factor(a @ a.T), a)
    x0 = b.T @ y
    t = max(np.abs(a.T @ y).max(), 1e-300) / opts.rho_scale
    z = np.zeros(n)
    u = np.zeros(n)
    ny = np.linalg.norm(y)
    prev = math.inf
    for it in range(1, opts.max_iter + 1):
        v = z - u
        w = v - b.T @ (a @ v) + x0 + u
        z = w - np.clip(w, -t, t)
        u = w - z
        obj = np.abs(z).sum()
        if abs(obj - prev) <= opts.obj_tol and np.linalg.norm(a @ z - y) <= opts.feas_tol * ny:
            return z, it, True
        prev = obj
    return z, opts.max_iter, False


def _pdhg(a, y, opts):
    n = a.shape[1]
    step = 0.99 / (1.01 * power_norm(a, opts.power_iters))
    x = np.zeros(n)
    lam = np.zeros(a.shape[0])
    ax = np.zeros(a.shape[0])
    ny = np.linalg.norm(y)
    prev = math.inf
    for it in range(1, opts.max_iter + 1):
        x_new = _soft(x - step * (a.T @ lam), step)
        ax_new = a @ x_new
        lam = lam + step * (2.0 * ax_new - ax - y)
        x, ax = x_new, ax_new
        obj = np.abs(x).sum()
        if abs(obj - prev) <= opts.obj_tol and np.linalg.norm(ax - y) <= opts.feas_tol * ny:
            return x, it, True
        prev = obj
    return x, opts.max_iter, False


def _lp(a, y, opts):
    m, n = a.shape
    res = linprog(np.ones(2 * n), A_eq=np.hstack([a, -a]), b_eq=y,
                  bounds=(0, None), method="highs")
    if res.x is None:
        return np.zeros(n), int(res.nit or 0), False
    z = res.x[:n] - res.x[n:]
    ok = res.status == 0 and np.linalg.norm(a @ z - y) <= opts.feas_tol * np.linalg.norm(y)
    return z, int(res.nit), bool(ok)


_SOLVERS = {"admm": _admm, "pdhg": _pdhg, "lp": _lp}


def _polish(a, y, z, opts):
    """Least-squares refit on ``supp(z)``, kept only if feasible and sign-consistent with ``z``."""
    support = np.flatnonzero(z)
    if not 0 < support.size <= a.shape[0]:
        return z
    sub = a[:, support]
    coef, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
    if rank < support.size:
        return z
    zp = np.zeros_like(z)
    zp[support] = coef
    feasible = np.linalg.norm(a @ zp - y) <= opts.feas_tol * np.linalg.norm(y)
    if feasible and np.array_equal(np.sign(coef), np.sign(z[support])):
        return zp
    return z


def l1_recover(phi, y, opts=None, truth=None):
    """Basis pursuit recovery of ``x`` from ``y = Phi x``.

    Parameters
    ----------
    phi : MeasurementMatrix or array
    y : array of length ``M``
    opts : SolverOptions, optional
    truth : SparseSignal or array, optional
        When given, ``rel_error`` is filled in.

    A run that hits ``opts.max_iter`` returns ``converged=False`` unless
    ``opts.fallback`` names another method, which is then run from scratch.
    A converged ADMM or PDHG solution is refit by least squares on its
    support when the refit is feasible and keeps every sign
    (``opts.polish``).
    """
    opts = opts or SolverOptions()
    a = as_array(phi)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (a.shape[0],):
        raise DimensionMismatchError(f"y must have length {a.shape[0]}, got shape {y.shape}")
    if not np.any(a):
        raise PreconditionError("measurement matrix is identically zero")
    if not np.any(y):
        z = np.zeros(a.shape[1])
        return RecoveryResult(z, 0.0, _rel_error(z, truth), 0, True, "l1", opts.method)

    z, its, ok = _SOLVERS[opts.method](a, y, opts)
    method = opts.method
    if not ok and opts.fallback and opts.fallback != opts.method:
        z, extra, ok = _SOLVERS[opts.fallback](a, y, opts)
        its += extra
        method = f"{opts.method}+{opts.fallback}"
    if ok and opts.polish and method in ("admm", "pdhg"):
        z = _polish(a, y, z, opts)
    return RecoveryResult(
        estimate=z,
        residual=float(np.linalg.norm(a @ z - y)),
        rel_error=_rel_error(z, truth),
        iterations=its,
        converged=bool(ok),
        solver="l1",
        method=method,
    )


def omp_recover(phi, y, k, truth=None, rank_tol=1e-10):
    """Orthogonal matching pursuit with ``k`` greedy steps.

    Each step adds the column most correlated with the residual and refits
    by least squares on the selected columns. Stops early once the residual
    vanishes.
    """
    a = as_array(phi)
    y = np.asarray(y, dtype=np.float64)
    m, n = a.shape
    if y.shape != (m,):
        raise DimensionMismatchError(f"y must have length {m}, got shape {y.shape}")
    if not 0 <= k <= m:
        raise PreconditionError(f"k must be in [0, {m}]")
    norms = np.linalg.norm(a, axis=0)
    norms[norms == 0] = np.inf
    selected = []
    coef = np.zeros(0)
    r = y.copy()
    ny = np.linalg.norm(y)
    it = 0
    for it in range(1, k + 1):
        if np.linalg.norm(r) <= 1e-12 * max(ny, 1e-300):
            it -= 1
            break
        corr = np.abs(a.T @ r) / norms
        corr[selected] = -1.0
        selected.append(int(np.argmax(corr)))
        sub = a[:, selected]
        s = np.linalg.svd(sub, compute_uv=False)
        if s[-1] < rank_tol * s[0]:
            raise DegenerateSelectionError(
                f"selected columns {sorted(i + 1 for i in selected)} are rank deficient", float(s[-1]))
        coef = np.linalg.lstsq(sub, y, rcond=None)[0]
        r = y - sub @ coef
    z = np.zeros(n)
    z[selected] = coef
    return RecoveryResult(
        estimate=z,
        residual=float(np.linalg.norm(r)),
        rel_error=_rel_error(z, truth),
        iterations=it,
        converged=True,
        solver="omp",
        method="omp",
    )


def exact_recovery(truth, result, tol=1e-4):
    """True when the relative l2 error of ``result`` is at most ``tol``."""
    return _rel_error(result.estimate, truth) <= tol
