"""Exhaustive verification of restricted isometry and democracy at desk scale.

Restricted isometry constants are computed exactly by enumerating column
supports of size exactly ``order``: by eigenvalue interlacing, the
restricted eigenvalues of any smaller support lie inside those of every
size-``order`` superset, so smaller supports never set the extremes.
Subsets are streamed in chunks and their Gram sub-blocks are diagonalised
with one batched symmetric eigensolver call per chunk.
"""

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._seeding import derive_rng
from .errors import EnumerationTooLargeError, NumericError, PreconditionError
from .matrices import IndexSet, as_array, complement_projector, range_projector

DEFAULT_BUDGET = 2_000_000
CHUNK = 50_000
SLACK = 1e-9
MAX_LISTED = 100


@dataclass
class RipReport:
    order: int
    delta: float
    worst_low_subset: IndexSet
    worst_high_subset: IndexSet
    low_bound: float
    high_bound: float
    estimate: bool = False

    def to_dict(self):
        return _jsonable(asdict(self) | {
            "worst_low_subset": self.worst_low_subset.to_list(),
            "worst_high_subset": self.worst_high_subset.to_list(),
        })


@dataclass
class DemocracyReport:
    m_tilde: int
    order: int
    delta_bound: float
    worst_gamma: IndexSet
    worst_delta: float
    holds: bool
    gammas_checked: int = 0

    def to_dict(self):
        return _jsonable(asdict(self) | {"worst_gamma": self.worst_gamma.to_list()})


@dataclass
class ViolationReport:
    """Outcome of checking an inequality over many supports or samples.

    ``worst_margin`` is the smallest value of (bound - observed) seen over all
    checks before any slack is applied; a negative value within ``-slack`` is
    floating-point noise and is not counted as a violation.
    """

    checked: int
    total: int
    violations: list = field(default_factory=list)
    slack: float = SLACK
    worst_margin: float = math.inf
    hypothesis_holds: bool = True
    details: list = field(default_factory=list)

    @property
    def ok(self):
        return self.total == 0

    def add(self, item):
        self.total += 1
        if len(self.violations) < MAX_LISTED:
            self.violations.append(item)

    def to_dict(self):
        return _jsonable(asdict(self))


@dataclass
class TheoremConstants:
    c1: float
    c2: float
    delta: float
    k: int
    d: int
    n: int
    m_required: float
    epsilon: float
    eta: float
    iterations: int = 0

    def to_dict(self):
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _combination_chunks(n, k, chunk=CHUNK):
    it = itertools.combinations(range(n), k)
    dt = np.dtype((np.intp, (k,)))
    while True:
        block = np.fromiter(itertools.islice(it, chunk), dtype=dt)
        if len(block) == 0:
            return
        yield block.reshape(-1, k)


def _restricted_extremes(gram, subsets):
    """Min and max eigenvalue of ``gram[S, S]`` for each row ``S`` of ``subsets``."""
    if subsets.shape[1] == 1:
        d = gram[subsets[:, 0], subsets[:, 0]]
        return d, d
    blocks = gram[subsets[:, :, None], subsets[:, None, :]]
    ev = np.linalg.eigvalsh(blocks)
    return ev[:, 0], ev[:, -1]


class _Extremes:
    def __init__(self):
        self.low = math.inf
        self.high = -math.inf
        self.low_set = None
        self.high_set = None

    def update(self, lows, highs, subsets):
        i = int(np.argmin(lows))
        if lows[i] < self.low:
            self.low, self.low_set = float(lows[i]), subsets[i].copy()
        j = int(np.argmax(highs))
        if highs[j] > self.high:
            self.high, self.high_set = float(highs[j]), subsets[j].copy()

    def report(self, order, n, estimate=False):
        delta = max(1.0 - self.low, self.high - 1.0, 0.0)
        return RipReport(
            order=order,
            delta=delta,
            worst_low_subset=IndexSet.from_zero_based(self.low_set, n),
            worst_high_subset=IndexSet.from_zero_based(self.high_set, n),
            low_bound=self.low,
            high_bound=self.high,
            estimate=estimate,
        )


def _check_order(order, n):
    if order < 1 or order > n:
        raise PreconditionError(f"order must be in [1, {n}], got {order}")


def exact_rip(m, order, budget=DEFAULT_BUDGET):
    """Exact restricted isometry constant of order ``order``.

    Enumerates every column support of size ``order``. Raises
    :class:`EnumerationTooLargeError` when there are more than ``budget``
    supports; use :func:`monte_carlo_rip` for a lower bound instead.
    """
    a = as_array(m)
    n = a.shape[1]
    _check_order(order, n)
    count = math.comb(n, order)
    if count > budget:
        raise EnumerationTooLargeError(
            f"C({n}, {order}) = {count} supports exceeds budget {budget}; "
            "use monte_carlo_rip for a sampled lower bound")
    gram = a.T @ a
    ext = _Extremes()
    for block in _combination_chunks(n, order):
        ext.update(*_restricted_extremes(gram, block), block)
    return ext.report(order, n)


def monte_carlo_rip(m, order, samples, seed=0):
    """Lower bound on the isometry constant from randomly sampled supports.

    When ``samples`` is at least the number of distinct supports the scan is
    exhaustive and equals :func:`exact_rip`.
    """
    if samples < 1:
        raise PreconditionError("samples must be >= 1")
    a = as_array(m)
    n = a.shape[1]
    _check_order(order, n)
    if samples >= math.comb(n, order):
        rep = exact_rip(a, order, budget=samples)
        rep.estimate = True
        return rep
    rng = derive_rng(seed, "subsets")
    gram = a.T @ a
    ext = _Extremes()
    left = samples
    while left > 0:
        b = min(left, CHUNK)
        # argsort of uniforms gives independent uniform k-subsets per row
        subsets = np.sort(np.argsort(rng.random((b, n)), axis=1)[:, :order], axis=1)
        ext.update(*_restricted_extremes(gram, subsets), subsets)
        left -= b
    return ext.report(order, n, estimate=True)


def democracy_certificate(m, m_tilde, order, delta_bound, budget=DEFAULT_BUDGET):
    """Check that every row submatrix with at least ``m_tilde`` rows has RIP.

    Every ``Gamma`` with ``|Gamma| >= m_tilde`` is enumerated. Dropping rows
    does not always increase the isometry constant (the upper side can
    shrink), so the sizes above ``m_tilde`` cannot be skipped in general.
    """
    a = as_array(m)
    rows, n = a.shape
    if not 1 <= m_tilde <= rows:
        raise PreconditionError(f"m_tilde must be in [1, {rows}], got {m_tilde}")
    _check_order(order, n)
    n_gamma = sum(math.comb(rows, j) for j in range(m_tilde, rows + 1))
    cost = n_gamma * math.comb(n, order)
    if cost > budget:
        raise EnumerationTooLargeError(
            f"{n_gamma} row subsets x C({n}, {order}) supports = {cost} exceeds budget {budget}")
    worst_delta, worst_gamma, checked = -math.inf, None, 0
    for size in range(m_tilde, rows + 1):
        for gamma in itertools.combinations(range(rows), size):
            rep = exact_rip(a[list(gamma)], order, budget=budget)
            checked += 1
            if rep.delta > worst_delta:
                worst_delta, worst_gamma = rep.delta, gamma
    return DemocracyReport(
        m_tilde=m_tilde,
        order=order,
        delta_bound=delta_bound,
        worst_gamma=IndexSet.from_zero_based(worst_gamma, rows),
        worst_delta=worst_delta,
        holds=bool(worst_delta <= delta_bound),
        gammas_checked=checked,
    )


def projected_rip_bounds(delta):
    """Lower and upper constants of the projected isometry inequality."""
    lower = -math.inf if delta == 1.0 else 1.0 - delta / (1.0 - delta)
    return lower, 1.0 + delta


def projected_rip_check(a, lam, order, delta, budget=DEFAULT_BUDGET, slack=SLACK):
    """Verify ``(1 - d/(1-d))|u|^2 <= |P_perp A u|^2 <= (1+d)|u|^2`` exhaustively.

    ``P_perp`` is the complement of the projector onto the columns ``lam``
    of ``a``. All supports ``T`` of size ``order - |lam|`` disjoint from
    ``lam`` are checked via the extreme eigenvalues of the restricted Gram
    matrix of ``P_perp a``.

    The inequality is only a theorem when ``a`` has restricted isometry
    constant ``delta < 1``; ``hypothesis_holds`` records whether that is the
    case. The bounds are evaluated literally either way.
    """
    arr = as_array(a)
    if len(lam) >= order:
        raise PreconditionError(f"|Lambda| = {len(lam)} must be smaller than order {order}")
    p_perp = complement_projector(range_projector(arr, lam))
    b = p_perp @ arr
    free = lam.complement().zero_based
    size = order - len(lam)
    count = math.comb(len(free), size)
    if count > budget:
        raise EnumerationTooLargeError(f"{count} supports exceeds budget {budget}")
    lower, upper = projected_rip_bounds(delta)
    gram = b.T @ b
    rep = ViolationReport(checked=0, total=0, slack=slack,
                          hypothesis_holds=bool(0.0 <= delta < 1.0))
    for block in _combination_chunks(len(free), size):
        subsets = free[block]
        lows, highs = _restricted_extremes(gram, subsets)
        margin = np.minimum(lows - lower, upper - highs)
        rep.checked += len(subsets)
        rep.worst_margin = min(rep.worst_margin, float(margin.min()))
        for i in np.flatnonzero(margin < -slack):
            rep.add({"support": [int(j) + 1 for j in subsets[i]],
                     "low": float(lows[i]), "high": float(highs[i]),
                     "lower_bound": lower, "upper_bound": upper})
    return rep


def inner_product_check(a, order, delta, samples, seed=0, slack=SLACK):
    """Sample sparse pairs and check ``|<Au, Av> - <u, v>| <= delta |u| |v|``.

    Each pair lives on a random support of size ``order``; ``u`` and ``v``
    take random non-empty sub-supports of it, so ``|supp u ∪ supp v| <= order``.
    Every fourth pair is made exactly orthogonal.
    """
    arr = as_array(a)
    n = arr.shape[1]
    _check_order(order, n)
    rng = derive_rng(seed, "pairs")
    rep = ViolationReport(checked=0, total=0, slack=slack)
    for s in range(samples):
        support = rng.choice(n, size=order, replace=False)
        u = np.zeros(n)
        v = np.zeros(n)
        su = support[rng.random(order) < 0.7]
        sv = support[rng.random(order) < 0.7]
        if len(su) == 0:
            su = support[:1]
        if len(sv) == 0:
            sv = support[-1:]
        u[su] = rng.standard_normal(len(su))
        v[sv] = rng.standard_normal(len(sv))
        if s % 4 == 3 and np.dot(u, u) > 0:
            v -= np.dot(u, v) / np.dot(u, u) * u
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        lhs = abs(np.dot(arr @ u, arr @ v) - np.dot(u, v))
        rhs = delta * nu * nv
        margin = rhs - lhs
        rep.checked += 1
        rep.worst_margin = min(rep.worst_margin, float(margin))
        if margin < -slack * max(1.0, nu * nv):
            rep.add({"u_support": [int(i) + 1 for i in np.flatnonzero(u)],
                     "v_support": [int(i) + 1 for i in np.flatnonzero(v)],
                     "lhs": float(lhs), "rhs": float(rhs)})
    return rep


def c2_constant(c1, delta):
    return (delta / 8.0) ** 2 - math.log(42.0 * math.e / delta) / c1


def measurement_equation_residual(m, k, d, n, c1):
    s = k + d
    return m - c1 * s * math.log((n + m) / s)


def theorem1_constants(k, d, n, c1, delta, max_iter=1000, rtol=1e-13):
    """Constants of the democracy theorem and the implied measurement count.

    ``m_required`` solves ``M = c1 (k+d) log((n+M)/(k+d))`` by fixed-point
    iteration started from ``c1 (k+d) log(n/(k+d))``. ``c2`` is returned as
    computed, even when negative (the probability bound is then vacuous).
    """
    if c1 <= 0:
        raise PreconditionError("c1 must be positive")
    if not 0.0 < delta < 1.0:
        raise PreconditionError("delta must lie in (0, 1)")
    s = k + d
    if s < 1:
        raise PreconditionError("k + d must be >= 1")
    m = c1 * s * math.log(n / s)
    for it in range(1, max_iter + 1):
        if n + m <= 0:
            raise NumericError(f"fixed point iteration left the domain (M = {m})")
        nxt = c1 * s * math.log((n + m) / s)
        if abs(nxt - m) <= rtol * max(1.0, abs(nxt)):
            m = nxt
            break
        m = nxt
    else:
        raise NumericError(f"fixed point did not converge in {max_iter} iterations (last M = {m})")
    return TheoremConstants(
        c1=c1, c2=c2_constant(c1, delta), delta=delta, k=k, d=d, n=n,
        m_required=m, epsilon=delta / 14.0, eta=delta / (2.0 * math.sqrt(2.0)),
        iterations=it)
