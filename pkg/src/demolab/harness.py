"""Measurement-dropping experiments.

For each number of measurements ``m`` and each trial a fresh Gaussian
``Phi`` (``m x n``, variance ``1/m``) and a fresh unit-norm ``k``-sparse
signal are drawn. For a drop policy, the largest ``D`` for which basis
pursuit still recovers the signal from ``m - D`` kept rows is found:

``random_single``
    one uniformly random set of kept rows per level ``D``;
``random_multi``
    ``R`` random sets per level, all of which must succeed;
``adversarial_largest``
    the ``D`` measurements with the largest ``|y_i|`` are removed (ties
    removed lowest index first).

The first random draw at each level is shared between ``random_single`` and
``random_multi``, so per trial the multi-draw ``d_max`` never exceeds the
single-draw one, and ``R = 1`` reproduces ``random_single`` exactly.

A reported ``d_max`` always has a verified success at ``d_max`` and a
verified failure at ``d_max + 1`` (or sits at the ``m - k`` boundary);
``-1`` means recovery failed with no rows dropped. Two scan strategies find
it. ``"linear"`` walks up from ``D = 0`` to the first failure. ``"bisect"``
tests ``D = 0, 1, 2, 4, 8, ...`` until a failure and then bisects between
the last success and the first failure. For ``random_multi`` the failure
of the shared draw at ``d_single + 1`` brackets the bisection from above.
Both strategies test ``D = 0`` and ``D = 1`` first, so they agree on
whether ``d_max > 0``.

Across trials the curve value at ``m`` is the minimum of the per-trial
values: recovery must hold on every trial.
"""

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._seeding import derive_rng, derive_seed
from .errors import PreconditionError
from .matrices import draw_entries
from .recovery import (
    SolverOptions,
    best_k_term,
    compressible_signal,
    exact_recovery,
    l1_recover,
    random_sparse_signal,
)

log = logging.getLogger(__name__)

POLICIES = ("random_single", "random_multi", "adversarial_largest")
SCANS = ("linear", "bisect")

# the harness gives ADMM a short budget and settles the rest exactly with HiGHS
HARNESS_SOLVER = SolverOptions(method="admm", max_iter=1000, fallback="lp")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    k: int
    m_grid: tuple
    trials: int
    r_submatrices: int = 1
    policies: tuple = POLICIES
    master_seed: int = 0
    recovery_tol: float = 1e-4
    scan: str = "bisect"
    solver: SolverOptions = HARNESS_SOLVER

    def __post_init__(self):
        grid = tuple(int(m) for m in self.m_grid)
        object.__setattr__(self, "m_grid", grid)
        object.__setattr__(self, "policies", tuple(self.policies))
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise PreconditionError("m_grid must be non-empty and strictly increasing")
        if self.k < 1 or self.k >= grid[0]:
            raise PreconditionError(f"need 1 <= k < min(m_grid), got k={self.k}")
        if grid[-1] > self.n:
            raise PreconditionError("m cannot exceed n")
        if self.trials < 1:
            raise PreconditionError("trials must be >= 1")
        if self.r_submatrices < 1:
            raise PreconditionError("r_submatrices must be >= 1")
        if self.scan not in SCANS:
            raise PreconditionError(f"scan must be one of {SCANS}")
        bad = set(self.policies) - set(POLICIES)
        if bad:
            raise PreconditionError(f"unknown policies {sorted(bad)}")


PRESETS = {
    "figure1-small": ExperimentConfig(
        n=512, k=6, m_grid=tuple(range(40, 241, 20)), trials=20, r_submatrices=50,
        master_seed=20090501),
    "figure1-paper": ExperimentConfig(
        n=2048, k=13, m_grid=tuple(range(20, 381, 10)), trials=100, r_submatrices=300,
        master_seed=20090501),
    "figure1-paper-reduced": ExperimentConfig(
        n=2048, k=13, m_grid=tuple(range(20, 381, 10)), trials=20, r_submatrices=100,
        master_seed=20090501),
}


def preset(name, **overrides):
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(cfg, **overrides) if overrides else cfg


@dataclass
class TrialRecord:
    m: int
    trial: int
    d: int
    policy: str
    success: bool
    rel_error: float
    seed: int


@dataclass(frozen=True)
class CurvePoint:
    m: int
    d_max: int


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    points_used: int


def trial_seed(cfg, m, trial):
    return derive_seed(cfg.master_seed, "trial", m, trial)


class TrialContext:
    """One trial's ``Phi`` and signal, with cached outcomes per kept-row set."""

    def __init__(self, m, cfg, seed, records=None, trial=0):
        self.m = m
        self.trial = trial
        self.cfg = cfg
        self.seed = seed
        self.phi = draw_entries(np.random.default_rng(derive_seed(seed, "phi")), m, cfg.n, "gaussian")
        self.signal = random_sparse_signal(cfg.n, cfg.k, derive_seed(seed, "signal"))
        self.x = self.signal.to_dense()
        self.y = self.phi @ self.x
        self._cache = {}
        self.records = records
        self.solves = 0
        self._adv_order = np.argsort(-np.abs(self.y), kind="stable")

    def kept_random(self, d, r):
        rng = derive_rng(self.seed, "gamma", d, r)
        return np.sort(rng.choice(self.m, size=self.m - d, replace=False))

    def kept_adversarial(self, d):
        return np.sort(self._adv_order[d:])

    def recovers(self, kept, d, policy):
        key = kept.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            res = l1_recover(self.phi[kept], self.y[kept], self.cfg.solver, truth=self.x)
            ok = res.converged and exact_recovery(self.x, res, self.cfg.recovery_tol)
            hit = (ok, res.rel_error)
            self._cache[key] = hit
            self.solves += 1
        if self.records is not None:
            self.records.append(TrialRecord(self.m, self.trial, d, policy, hit[0], hit[1], self.seed))
        return hit[0]

    def level_ok(self, policy, d):
        if policy == "adversarial_largest":
            return self.recovers(self.kept_adversarial(d), d, policy)
        draws = self.cfg.r_submatrices if policy == "random_multi" else 1
        if d == 0:
            draws = 1  # only one way to keep every row
        return all(self.recovers(self.kept_random(d, r), d, policy) for r in range(draws))


def scan_d_max(ok, limit, strategy="bisect", upper=None):
    """Largest ``D`` in ``[0, limit]`` with ``ok(D)`` true next to a failure.

    Returns ``-1`` when ``ok(0)`` fails. With ``strategy="bisect"`` an
    ``upper`` level that is expected to fail brackets the search directly;
    it is still evaluated, and galloping takes over if it turns out fine.
    """
    if not ok(0):
        return -1
    if strategy == "linear":
        for d in range(1, limit + 1):
            if not ok(d):
                return d - 1
        return limit
    lo, hi, step = 0, None, 1
    if upper is not None and 1 < upper <= limit:
        # level 1 is always probed first, as galloping does
        if not ok(1):
            return 0
        lo, step = 1, 2
        if ok(upper):
            log.warning("level %d expected to fail but succeeded; galloping from there", upper)
            lo = upper
            step = 2 * upper
        else:
            hi = upper
    while hi is None:
        d = min(step, limit)
        if d <= lo:
            return lo
        if ok(d):
            lo = d
            if d == limit:
                return limit
        else:
            hi = d
        step *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _d_max(policy, m_val, cfg, seed, ctx=None):
    if m_val not in cfg.m_grid:
        raise PreconditionError(f"m={m_val} is not in the configured grid")
    ctx = ctx or TrialContext(m_val, cfg, seed)
    upper = None
    if policy == "random_multi":
        # the shared first draw fails at d_single + 1, which brackets the multi scan;
        # with one draw the two predicates coincide
        single = _d_max("random_single", m_val, cfg, seed, ctx)
        if cfg.r_submatrices == 1:
            return single
        upper = single + 1
    return scan_d_max(lambda d: ctx.level_ok(policy, d), m_val - cfg.k, cfg.scan, upper)


def d_max_single(m_val, cfg, trial_seed):
    return _d_max("random_single", m_val, cfg, trial_seed)


def d_max_democracy(m_val, cfg, trial_seed):
    return _d_max("random_multi", m_val, cfg, trial_seed)


def d_max_adversarial(m_val, cfg, trial_seed):
    return _d_max("adversarial_largest", m_val, cfg, trial_seed)


def run_cell(cfg, m, trial):
    """All policies for one ``(m, trial)`` cell; policies share the trial's draws."""
    seed = trial_seed(cfg, m, trial)
    ctx = TrialContext(m, cfg, seed, trial=trial)
    out = {p: _d_max(p, m, cfg, seed, ctx) for p in cfg.policies}
    return m, trial, out, ctx.solves


def _run_cell_args(args):
    return run_cell(*args)


@dataclass
class ExperimentResult:
    cfg: ExperimentConfig
    per_trial: dict  # (policy, m) -> list of per-trial d_max, in trial order
    curves: dict = field(default_factory=dict)  # policy -> list[CurvePoint]
    fits: dict = field(default_factory=dict)  # policy -> LinearFit or None
    solves: int = 0

    def onset(self, policy):
        """Smallest ``m`` whose aggregated ``d_max`` is positive, or ``None``."""
        for p in self.curves[policy]:
            if p.d_max > 0:
                return p.m
        return None


def fit_line(points):
    """Least-squares line through the points with ``d_max > 0``; ``None`` if fewer than two."""
    use = [(p.m, p.d_max) for p in points if p.d_max > 0]
    if len(use) < 2:
        return None
    ms, ds = np.array(use, dtype=np.float64).T
    slope, intercept = np.polyfit(ms, ds, 1)
    return LinearFit(float(slope), float(intercept), len(use))


def aggregate(cfg, per_trial):
    curves, fits = {}, {}
    for p in cfg.policies:
        curves[p] = [CurvePoint(m, int(min(per_trial[(p, m)]))) for m in cfg.m_grid]
        fits[p] = fit_line(curves[p])
        if fits[p] is None:
            log.warning("policy %s: fewer than two points with d_max > 0, fit omitted", p)
    return curves, fits


def default_jobs():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def run_experiment(cfg, jobs=1, progress=None):
    """Run every ``(m, trial)`` cell and aggregate curves and line fits.

    ``jobs > 1`` spreads cells over worker processes; the result does not
    depend on ``jobs``.
    """
    cells = [(cfg, m, t) for m in cfg.m_grid for t in range(cfg.trials)]
    per_trial = {(p, m): [None] * cfg.trials for p in cfg.policies for m in cfg.m_grid}
    solves = 0
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_run_cell_args, cells, chunksize=1)
            solves = _collect(results, per_trial, progress, len(cells))
    else:
        solves = _collect(map(_run_cell_args, cells), per_trial, progress, len(cells))
    curves, fits = aggregate(cfg, per_trial)
    return ExperimentResult(cfg, per_trial, curves, fits, solves)


def _collect(results, per_trial, progress, total):
    solves = 0
    for i, (m, t, out, s) in enumerate(results, 1):
        for p, d in out.items():
            per_trial[(p, m)][t] = d
        solves += s
        if progress:
            progress(i, total)
    return solves


def onset_scan(cfg, policy, m_values=None):
    """Smallest ``m`` at which every trial has ``d_max > 0``, without full scans.

    ``d_max > 0`` holds exactly when levels ``D = 0`` and ``D = 1`` both
    succeed, for either scan strategy, so only those two levels are solved.
    ``m`` is scanned upward and trials stop at the first failure.
    Returns ``(onset or None, {m: number of trials that passed})``.
    """
    passed = {}
    for m in m_values or cfg.m_grid:
        n_ok = 0
        for t in range(cfg.trials):
            ctx = TrialContext(m, cfg, trial_seed(cfg, m, t), trial=t)
            if not (ctx.level_ok(policy, 0) and ctx.level_ok(policy, 1)):
                break
            n_ok += 1
        passed[m] = n_ok
        if n_ok == cfg.trials:
            return m, passed
    return None, passed


# stability under over-dropping -------------------------------------------------

@dataclass
class StabilityRow:
    d_extra: int
    k_tilde: int
    mean_error: float
    max_error: float
    c3_hat: float
    errors: list
    ratios: list
    bound_forces_exact: bool


def stability_experiment(cfg, d_base, d_extra_grid, m=None, signal="compressible",
                         exponent=1.5, signal_sparsity=None):
    """Recovery error when ``d_base + d_extra`` measurements are dropped.

    The kept rows are nested: per trial one random row order is drawn and the
    first ``d_base + d_extra`` rows in it are dropped, so a larger ``d_extra``
    always keeps a subset of the rows kept by a smaller one. For every
    ``d_extra`` the error is compared with ``||x - x_K||_1 / sqrt(K)`` at
    ``K = floor((k - d_extra) / 2)``; ``c3_hat`` is the largest ratio over
    trials. When that tail is zero (an exactly sparse signal with at most
    ``K`` nonzeros) the ratio is undefined and ``bound_forces_exact`` is set.
    """
    m = m or cfg.m_grid[-1]
    k = cfg.k
    for de in d_extra_grid:
        if de >= k or k - de < 2:
            raise PreconditionError(f"d_extra={de} needs d_extra < k and k - d_extra >= 2 (k={k})")
        if d_base + de >= m:
            raise PreconditionError("cannot drop every measurement")
    errs = {de: [] for de in d_extra_grid}
    ratios = {de: [] for de in d_extra_grid}
    forced = {de: False for de in d_extra_grid}
    for t in range(cfg.trials):
        seed = derive_seed(cfg.master_seed, "stability", m, t)
        phi = draw_entries(np.random.default_rng(derive_seed(seed, "phi")), m, cfg.n, "gaussian")
        if signal == "compressible":
            x = compressible_signal(cfg.n, exponent, derive_seed(seed, "signal"))
        elif signal == "sparse":
            x = random_sparse_signal(cfg.n, signal_sparsity or k, derive_seed(seed, "signal")).to_dense()
        else:
            raise ValueError(f"unknown signal kind {signal!r}")
        y = phi @ x
        order = derive_rng(seed, "gamma").permutation(m)
        for de in d_extra_grid:
            kept = np.sort(order[d_base + de:])
            res = l1_recover(phi[kept], y[kept], cfg.solver, truth=x)
            err = float(np.linalg.norm(res.estimate - x))
            errs[de].append(err)
            kt = (k - de) // 2
            tail = float(np.abs(x - best_k_term(x, kt)).sum()) / math.sqrt(kt)
            if tail > 0:
                ratios[de].append(err / tail)
            else:
                forced[de] = True
    rows = []
    for de in d_extra_grid:
        rows.append(StabilityRow(
            d_extra=de,
            k_tilde=(k - de) // 2,
            mean_error=float(np.mean(errs[de])),
            max_error=float(np.max(errs[de])),
            c3_hat=float(np.max(ratios[de])) if ratios[de] else math.nan,
            errors=errs[de],
            ratios=ratios[de],
            bound_forces_exact=forced[de],
        ))
    return rows


# files -------------------------------------------------------------------------

def write_results_csv(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "m", "trial", "d_max_trial"])
        for p in result.cfg.policies:
            for m in result.cfg.m_grid:
                for t, d in enumerate(result.per_trial[(p, m)]):
                    w.writerow([p, m, t, d])


def read_results_csv(path):
    per_trial = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["policy"], int(row["m"]))
            per_trial.setdefault(key, {})[int(row["trial"])] = int(row["d_max_trial"])
    return {k: [v[t] for t in sorted(v)] for k, v in per_trial.items()}


def write_summary_csv(curves, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "m", "d_max"])
        for p, pts in curves.items():
            for pt in pts:
                w.writerow([p, pt.m, pt.d_max])


def read_summary_csv(path):
    curves = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            curves.setdefault(row["policy"], []).append(CurvePoint(int(row["m"]), int(row["d_max"])))
    return curves


def write_fits(fits, path):
    """Fit summary as JSON; omitted fits are written as ``null``."""
    data = {p: (asdict(f) if f else None) for p, f in fits.items()}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)


def write_fits_csv(fits, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "slope", "intercept", "points_used"])
        for p, f in fits.items():
            if f is not None:
                w.writerow([p, repr(f.slope), repr(f.intercept), f.points_used])


_GNUPLOT = """\
# Maximum number of droppable measurements vs. number of measurements.
# Usage: gnuplot {script}
set datafile separator ","
set terminal pngcairo size 800,600
set output "{png}"
set xlabel "M (measurements)"
set ylabel "D_max"
set key top left
set yrange [0:*]
{fit_defs}
plot \\
{plots}
"""


def write_plot_script(fits, summary_csv, path, png="figure1.png"):
    """Emit a gnuplot script that draws each policy's curve and its fitted line."""
    styles = {"random_single": ("pt 6", "dt 2"), "random_multi": ("pt 7", "dt 1"),
              "adversarial_largest": ("pt 4", "dt 3")}
    fit_defs, plots = [], []
    for i, (p, f) in enumerate(fits.items()):
        pt, dt = styles.get(p, ("pt 1", "dt 1"))
        plots.append(f'  "< grep ^{p}, {os.path.basename(summary_csv)}" using 2:($3>0?$3:NaN) '
                     f'with points {pt} lc {i + 1} title "{p}"')
        if f is not None:
            fit_defs.append(f"f{i}(x) = {f.slope!r}*x + {f.intercept!r}")
            plots.append(f'  f{i}(x) with lines {dt} lc {i + 1} title "{p} fit"')
    text = _GNUPLOT.format(script=os.path.basename(path), png=png,
                           fit_defs="\n".join(fit_defs), plots=", \\\n".join(plots))
    with open(path, "w") as fh:
        fh.write(text)
