"""End-to-end acceptance checks.

Each test records one ``PASS``/``FAIL`` line (echoed in the terminal summary)
and then asserts it. Tests marked ``extended`` only run with
``DEMOLAB_EXTENDED=1`` or ``=full``.
"""

import itertools
import math

import numpy as np
import pytest
from scipy.stats import binomtest

from demolab.concentration import ConcentrationConfig, concentration_experiment
from demolab.harness import (
    ExperimentConfig,
    TrialContext,
    default_jobs,
    onset_scan,
    preset,
    run_experiment,
    scan_d_max,
    stability_experiment,
    trial_seed,
)
from demolab.matrices import (
    IndexSet,
    augment_identity,
    diagonal_mask,
    generate,
    range_projector,
    row_submatrix,
)
from demolab.riplab import exact_rip, inner_product_check, projected_rip_check


def per_subset_oracle(a, order):
    """Independent delta: singular values of every column subset of size <= order."""
    worst = 0.0
    for size in range(1, order + 1):
        for s in itertools.combinations(range(a.shape[1]), size):
            sv = np.linalg.svd(a[:, s], compute_uv=False)
            ev = np.concatenate([sv ** 2, np.zeros(size - len(sv))])
            worst = max(worst, 1.0 - ev.min(), ev.max() - 1.0)
    return worst


# figure reproduction -------------------------------------------------------------

@pytest.fixture(scope="module")
def small_run():
    return run_experiment(preset("figure1-small"), jobs=default_jobs())


def test_criterion_1_figure_small(small_run, verdict):
    fits = small_run.fits
    rand, demo = fits["random_single"], fits["random_multi"]
    on_r, on_d = small_run.onset("random_single"), small_run.onset("random_multi")
    ok = (rand is not None and demo is not None and 0.85 <= rand.slope <= 1.15
          and demo.slope < rand.slope and on_r is not None and on_d is not None and on_d > on_r)
    slope = lambda f: "none" if f is None else f"{f.slope:.4f}"  # noqa: E731
    detail = (f"random slope {slope(rand)}, democracy slope {slope(demo)}, "
              f"onsets random {on_r} democracy {on_d}")
    assert verdict(1, ok, detail)


def test_criterion_1_supplement_fit_intercepts(small_run, verdict):
    # where each fitted line crosses d_max = 0, independent of the grid spacing
    rand, demo = small_run.fits["random_single"], small_run.fits["random_multi"]
    x_r, x_d = -rand.intercept / rand.slope, -demo.intercept / demo.slope
    assert verdict("1 (fit x-intercept supplement)", x_d > x_r,
                   f"random line crosses zero at m={x_r:.1f}, democracy at m={x_d:.1f}")


def paper_onsets(name):
    cfg = preset(name)
    return onset_scan(cfg, "random_single")[0], onset_scan(cfg, "random_multi")[0]


@pytest.mark.extended
def test_criterion_2_reduced_ratio(verdict):
    on_r, on_d = paper_onsets("figure1-paper-reduced")
    ok = on_r is not None and on_d is not None and on_d >= 1.3 * on_r
    assert verdict(2, ok, f"reduced preset onsets random {on_r} democracy {on_d} (need ratio >= 1.3)")


@pytest.mark.extended(level="full")
def test_criterion_2_full_bands(verdict):
    on_r, on_d = paper_onsets("figure1-paper")
    ok = on_r is not None and on_d is not None and 68 <= on_r <= 112 and 113 <= on_d <= 187
    assert verdict(2, ok, f"full preset onsets random {on_r} in [68, 112], democracy {on_d} in [113, 187]")


# concentration -------------------------------------------------------------------

def test_criterion_3_concentration(verdict):
    lines, ok = [], True
    for seed, (m, eta) in enumerate([(64, 0.5), (128, 0.5), (128, 0.3)]):
        rep = concentration_experiment(ConcentrationConfig(m, 32, eta, 100_000, seed=seed))
        z = abs(rep.empirical_mean - rep.target_mean) / rep.mean_stderr
        var_rel = abs(rep.cross_term_variance / rep.cross_term_variance_target - 1)
        ok &= rep.empirical_tail <= rep.bound and z <= 5 and var_rel <= 0.1
        lines.append(f"M={m} eta={eta}: tail {rep.empirical_tail:.2e} <= {rep.bound:.2e}, "
                     f"mean z {z:.2f}, cross var off {100 * var_rel:.1f}%")
    assert verdict(3, ok, "; ".join(lines))


# isometry constants --------------------------------------------------------------

def test_criterion_4_rip_oracle(verdict):
    rng = np.random.default_rng(4)
    worst = 0.0
    for i in range(20):
        m, n = int(rng.integers(2, 13)), int(rng.integers(4, 17))
        order = int(rng.integers(1, min(3, n) + 1))
        a = generate(m, n, seed=100 + i).entries
        worst = max(worst, abs(exact_rip(a, order).delta - per_subset_oracle(a, order)))
    assert verdict(4, worst <= 1e-10, f"max |delta - oracle| = {worst:.2e} over 20 instances")


def small_augmented(seed):
    return augment_identity(generate(8, 12, seed=seed)).full


def test_criterion_5_projected_rip_literal(verdict):
    """At M=8 the augmented matrix has delta well above 1, where the bounds cross."""
    total = checked = 0
    deltas = []
    for seed in range(10):
        a = small_augmented(seed)
        delta = exact_rip(a, 4).delta
        deltas.append(delta)
        for size in (1, 2):
            for lam in itertools.combinations(range(1, 21), size):
                rep = projected_rip_check(a, IndexSet(lam, 20), 4, delta, slack=1e-9)
                total += rep.total
                checked += rep.checked
    detail = (f"{total} violations in {checked} supports; delta range "
              f"[{min(deltas):.3f}, {max(deltas):.3f}] (hypothesis delta < 1 never holds)")
    assert verdict(5, total == 0, detail)


def test_criterion_5_supplement_valid_regime(verdict):
    # 80 x 8 brings delta of [I | Phi] below 1; Lambda is sampled, not enumerated
    rng = np.random.default_rng(5)
    total = checked = 0
    for seed in range(10):
        a = augment_identity(generate(80, 8, seed=seed)).full
        delta = exact_rip(a, 4, budget=10**7).delta
        assert delta < 1
        for size in (1, 2):
            for _ in range(3):
                lam = IndexSet.from_zero_based(rng.choice(88, size, replace=False), 88)
                rep = projected_rip_check(a, lam, 4, delta, slack=1e-9)
                total += rep.total
                checked += rep.checked
    assert verdict("5 (80x8 supplement)", total == 0, f"{total} violations in {checked} supports")


def test_criterion_6_inner_products(verdict):
    total = 0
    for seed in range(10):
        a = small_augmented(seed)
        delta = exact_rip(a, 4).delta
        total += inner_product_check(a, 4, delta, 10_000, seed=seed).total
    assert verdict(6, total == 0, f"{total} violations over 10 x 10^4 pairs")


def theorem_chain(m, n, seeds, gamma_size):
    worst_slack, bad = math.inf, 0
    for seed in seeds:
        phi = generate(m, n, seed=seed)
        d_a = exact_rip(augment_identity(phi).full, 4).delta
        bound = d_a / (1 - d_a)
        for g in itertools.combinations(range(1, m + 1), gamma_size):
            d = exact_rip(row_submatrix(phi, IndexSet(g, m)), 2).delta
            worst_slack = min(worst_slack, bound - d)
            bad += d > bound
    return bad, worst_slack


def test_criterion_7_theorem_chain_literal(verdict):
    bad, slack = theorem_chain(10, 14, range(5), 8)
    assert verdict(7, bad == 0, f"{bad} violating row subsets; worst bound - delta = {slack:.3f} "
                                f"(delta_A > 1 makes the bound negative)")


def test_criterion_7_supplement_valid_regime(verdict):
    bad, slack = theorem_chain(60, 14, range(5), 58)
    assert verdict("7 (60x14 supplement)", bad == 0,
                   f"{bad} violating row subsets; worst bound - delta = {slack:.3f}")


# drop policies -------------------------------------------------------------------

def test_criterion_8_adversary_beats_random(verdict):
    cfg = preset("figure1-small", trials=100, policies=("random_single", "adversarial_largest"))
    m = 140
    single, adv = [], []
    for t in range(cfg.trials):
        ctx = TrialContext(m, cfg, trial_seed(cfg, m, t), trial=t)
        for policy, out in (("random_single", single), ("adversarial_largest", adv)):
            out.append(scan_d_max(lambda d: ctx.level_ok(policy, d), m - cfg.k, cfg.scan))
    wins = sum(s > a for s, a in zip(single, adv))
    losses = sum(s < a for s, a in zip(single, adv))
    p = binomtest(wins, wins + losses, alternative="greater").pvalue if wins + losses else 1.0
    ok = np.mean(adv) < np.mean(single) and p < 0.01
    assert verdict(8, ok, f"mean adversarial {np.mean(adv):.1f} vs random {np.mean(single):.1f}, "
                          f"sign test {wins}:{losses} p={p:.2e}")


# stability -----------------------------------------------------------------------

def test_criterion_9_stability(verdict):
    cfg = ExperimentConfig(n=512, k=13, m_grid=(64,), trials=40, master_seed=20090501)
    rows = stability_experiment(cfg, 6, [1, 3, 5], signal="compressible", exponent=1.5)
    means = [r.mean_error for r in rows]
    c3 = [r.c3_hat for r in rows]
    finite = all(np.all(np.isfinite(r.errors)) for r in rows)
    ok = finite and all(b >= a for a, b in zip(means, means[1:])) and max(c3) / min(c3) < 5
    assert verdict(9, ok, "mean error " + ", ".join(f"{v:.4f}" for v in means)
                   + "; c3_hat " + ", ".join(f"{v:.3f}" for v in c3))


# projector identity --------------------------------------------------------------

def test_criterion_10_projector_identity(verdict):
    worst, count = 0.0, 0
    for seed in range(5):
        m = 8
        a = augment_identity(generate(m, 12, seed=seed)).full
        for size in range(m + 1):
            for lam in itertools.combinations(range(1, m + 1), size):
                lam_a = IndexSet(lam, a.shape[1])
                diff = range_projector(a, lam_a) - diagonal_mask(IndexSet(lam, m))
                worst = max(worst, float(np.abs(diff).max()))
                count += 1
    assert verdict(10, worst <= 1e-12, f"max entry error {worst:.1e} over {count} subsets")
