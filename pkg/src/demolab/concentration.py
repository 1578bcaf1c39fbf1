"""Monte Carlo checks of the concentration of ``||[I | Phi] u||^2``.

For a fixed ``u = (w, x)`` and a freshly drawn ``Phi`` per trial,

    ||A u||^2 = ||w||^2 + 2 w^T Phi x + ||Phi x||^2,

which has mean ``||u||^2`` and tail

    P(| ||Au||^2 - ||u||^2 | >= 2 eta ||u||^2) <= 3 exp(-M eta^2 / 8)

for Gaussian entries of variance ``1/M``. The two pieces are bounded
separately by ``2 exp(-M eta^2/8)`` (the ``||Phi x||^2`` deviation) and
``exp(-M eta^2/8)`` (the cross term). The closed forms are evaluated, never
estimated; only the probabilities are.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._seeding import derive_rng
from .matrices import DISTRIBUTIONS, as_array, draw_entries
from .errors import DimensionMismatchError, PreconditionError
from .riplab import ViolationReport, _jsonable

# trials are drawn in fixed-size chunks, each with its own derived stream
TRIAL_CHUNK = 500


@dataclass(frozen=True)
class ConcentrationConfig:
    m: int
    n: int
    eta: float
    trials: int
    seed: int = 0
    split: tuple = (1 / math.sqrt(2), 1 / math.sqrt(2))
    dist: str = "gaussian"

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise PreconditionError("eta must lie in (0, 1)")
        if self.trials < 1:
            raise PreconditionError("trials must be >= 1")
        if self.m < 1 or self.n < 1:
            raise PreconditionError("m and n must be >= 1")
        if self.dist not in DISTRIBUTIONS:
            raise PreconditionError(f"unknown distribution {self.dist!r}")
        if min(self.split) < 0:
            raise PreconditionError("split norms must be non-negative")


@dataclass
class TailReport:
    empirical_mean: float
    target_mean: float
    mean_stderr: float
    empirical_tail: float
    bound: float
    cross_term_tail: float
    cross_term_bound: float
    phi_tail: float
    phi_bound: float
    cross_term_variance: float
    cross_term_variance_target: float
    trials: int
    informational: bool = False

    def to_dict(self):
        return _jsonable(asdict(self))


def probe_vector(m, n, w_norm, x_norm):
    """The fixed vector ``u = (w, x)`` used by the experiment.

    ``w`` is constant with norm ``w_norm``; ``x`` alternates in sign with
    norm ``x_norm``.
    """
    w = np.full(m, w_norm / math.sqrt(m))
    x = np.where(np.arange(n) % 2 == 0, 1.0, -1.0) * (x_norm / math.sqrt(n))
    return w, x


def tail_bounds(m, eta):
    """Closed-form bounds ``(total, phi part, cross term)``."""
    e = math.exp(-m * eta * eta / 8.0)
    return 3.0 * e, 2.0 * e, e


def sample_terms(cfg):
    """Per-trial ``(2 w^T Phi x, ||Phi x||^2)`` for a fresh ``Phi`` each trial."""
    w, x = probe_vector(cfg.m, cfg.n, *cfg.split)
    cross = np.empty(cfg.trials)
    phix2 = np.empty(cfg.trials)
    for c, start in enumerate(range(0, cfg.trials, TRIAL_CHUNK)):
        b = min(TRIAL_CHUNK, cfg.trials - start)
        rng = derive_rng(cfg.seed, "conc", c)
        phi = draw_entries(rng, cfg.m, cfg.n, cfg.dist, batch=b)
        px = phi @ x
        cross[start:start + b] = 2.0 * (px @ w)
        phix2[start:start + b] = np.einsum("ij,ij->i", px, px)
    return cross, phix2


def concentration_experiment(cfg, return_samples=False):
    """Estimate the mean and tails of ``||Au||^2`` over ``cfg.trials`` draws.

    Tail events whose threshold is zero (``x = 0`` or ``w = 0``, where the
    corresponding term vanishes identically) are reported as probability 0.
    With a non-Gaussian ``dist`` the constant 8 in the bounds is not proven,
    so the report is flagged ``informational``.
    """
    w, x = probe_vector(cfg.m, cfg.n, *cfg.split)
    w2, x2 = float(w @ w), float(x @ x)
    u2 = w2 + x2
    cross, phix2 = sample_terms(cfg)
    au2 = w2 + cross + phix2
    bound, phi_bound, cross_bound = tail_bounds(cfg.m, cfg.eta)

    dev = np.abs(au2 - u2)
    tail = float(np.mean(dev >= 2 * cfg.eta * u2)) if u2 > 0 else 0.0
    phi_tail = float(np.mean(np.abs(phix2 - x2) >= cfg.eta * x2)) if x2 > 0 else 0.0
    wx = math.sqrt(w2 * x2)
    cross_tail = float(np.mean(np.abs(cross) >= cfg.eta * wx)) if wx > 0 else 0.0

    t = cfg.trials
    report = TailReport(
        empirical_mean=float(au2.mean()),
        target_mean=u2,
        mean_stderr=float(au2.std(ddof=1) / math.sqrt(t)) if t > 1 else 0.0,
        empirical_tail=tail,
        bound=bound,
        cross_term_tail=cross_tail,
        cross_term_bound=cross_bound,
        phi_tail=phi_tail,
        phi_bound=phi_bound,
        cross_term_variance=float(cross.var(ddof=1)) if t > 1 else 0.0,
        cross_term_variance_target=4.0 * w2 * x2 / cfg.m,
        trials=t,
        informational=cfg.dist != "gaussian",
    )
    if return_samples:
        return report, {"sq_norm": au2, "cross_term": cross, "phi_sq_norm": phix2}
    return report


def decomposition_identity(phi, u):
    """``| ||[I|Phi]u||^2 - (||w||^2 + 2 w^T Phi x + ||Phi x||^2) |``."""
    p = as_array(phi)
    u = np.asarray(u, dtype=np.float64)
    m, n = p.shape
    if u.shape != (m + n,):
        raise DimensionMismatchError(f"u must have length {m + n}, got shape {u.shape}")
    w, x = u[:m], u[m:]
    au = np.hstack([np.eye(m), p]) @ u
    px = p @ x
    return abs(float(au @ au) - (float(w @ w) + 2.0 * float(w @ px) + float(px @ px)))


def draw_unit_variance(rng, dist, size):
    if dist == "gaussian":
        return rng.standard_normal(size)
    if dist == "rademacher":
        return 2.0 * rng.integers(0, 2, size=size) - 1.0
    if dist == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=size)
    raise ValueError(f"unknown distribution {dist!r}")


def mgf_closed_form(dist, t, scale=1.0):
    """Exact ``E exp(t X)`` for the unit-variance distributions, times ``scale``."""
    s = t * scale
    if dist == "gaussian":
        return math.exp(s * s / 2.0)
    if dist == "rademacher":
        return math.cosh(s)
    if dist == "uniform":
        a = s * math.sqrt(3.0)
        return 1.0 if a == 0 else math.sinh(a) / a
    raise ValueError(f"unknown distribution {dist!r}")


def mgf_check(dist, c, t_grid, samples, seed=0, scale=1.0):
    """Monte Carlo check of ``E exp(tX) <= exp(c^2 t^2 / 2)`` on a grid of ``t``.

    ``X`` is ``scale`` times the unit-variance version of ``dist``
    (Gaussian, +-1, or uniform on ``[-sqrt 3, sqrt 3]``). A grid point is
    flagged only when the estimate exceeds the bound by more than three
    standard errors.
    """
    if c <= 0:
        raise PreconditionError("c must be positive")
    rng = derive_rng(seed, "mgf")
    xs = scale * draw_unit_variance(rng, dist, samples)
    rep = ViolationReport(checked=0, total=0, slack=0.0)
    for t in t_grid:
        e = np.exp(t * xs)
        est = float(e.mean())
        se = float(e.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
        bound = math.exp(c * c * t * t / 2.0)
        point = {"t": float(t), "estimate": est, "stderr": se, "bound": bound,
                 "exact": mgf_closed_form(dist, t, scale)}
        rep.details.append(point)
        rep.checked += 1
        rep.worst_margin = min(rep.worst_margin, bound - (est - 3 * se))
        if est - 3.0 * se > bound:
            rep.add(point)
    return rep
