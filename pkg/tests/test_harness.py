import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demolab.errors import PreconditionError
from demolab.harness import (
    PRESETS,
    CurvePoint,
    ExperimentConfig,
    LinearFit,
    TrialContext,
    aggregate,
    d_max_adversarial,
    d_max_democracy,
    d_max_single,
    fit_line,
    onset_scan,
    preset,
    read_results_csv,
    read_summary_csv,
    run_cell,
    run_experiment,
    scan_d_max,
    stability_experiment,
    trial_seed,
    write_fits,
    write_fits_csv,
    write_plot_script,
    write_results_csv,
    write_summary_csv,
)


def small(**kw):
    base = dict(n=96, k=3, m_grid=(16, 28, 40), trials=3, r_submatrices=4, master_seed=7)
    return ExperimentConfig(**(base | kw))


@pytest.fixture(scope="module")
def result():
    return run_experiment(small())


# config ------------------------------------------------------------------------

@pytest.mark.parametrize("bad", [dict(m_grid=(20, 20)), dict(m_grid=(30, 20)), dict(m_grid=()),
                                 dict(k=16), dict(trials=0), dict(r_submatrices=0),
                                 dict(m_grid=(16, 200)), dict(scan="random"),
                                 dict(policies=("random_single", "oracle"))])
def test_config_validation(bad):
    with pytest.raises(PreconditionError):
        small(**bad)


def test_presets():
    cfg = preset("figure1-small")
    assert (cfg.n, cfg.k, cfg.trials, cfg.r_submatrices) == (512, 6, 20, 50)
    assert cfg.m_grid == tuple(range(40, 241, 20))
    paper = PRESETS["figure1-paper"]
    assert (paper.n, paper.k, paper.trials, paper.r_submatrices) == (2048, 13, 100, 300)
    assert paper.m_grid[-1] == 380 and paper.m_grid[1] - paper.m_grid[0] == 10
    assert preset("figure1-small", trials=2).trials == 2
    with pytest.raises(KeyError):
        preset("nope")


# scan --------------------------------------------------------------------------

@pytest.mark.parametrize("strategy", ["linear", "bisect"])
def test_scan_prefix(strategy):
    for true_max in (-1, 0, 1, 2, 7, 33, 50):
        assert scan_d_max(lambda d: d <= true_max, 50, strategy) == true_max


def test_scan_uses_upper_bracket():
    seen = []

    def ok(d):
        seen.append(d)
        return d <= 20

    assert scan_d_max(ok, 100, "bisect", upper=30) == 20
    assert seen[:3] == [0, 1, 30]
    assert 2 not in seen and 64 not in seen


def test_scan_recovers_from_a_wrong_bracket():
    assert scan_d_max(lambda d: d <= 40, 100, "bisect", upper=30) == 40


@given(st.lists(st.booleans(), min_size=1, max_size=40), st.sampled_from(["linear", "bisect"]),
       st.one_of(st.none(), st.integers(0, 45)))
@settings(max_examples=300)
def test_scan_result_is_verified_at_the_boundary(pattern, strategy, upper):
    # arbitrary, possibly non-monotone success patterns
    limit = len(pattern) - 1
    calls = {}

    def ok(d):
        calls[d] = pattern[d]
        return pattern[d]

    d = scan_d_max(ok, limit, strategy, upper)
    if d == -1:
        assert calls[0] is False
    else:
        assert calls[d] is True
        assert d == limit or calls[d + 1] is False
        # d_max > 0 always means levels 0 and 1 were both verified
        if d > 0:
            assert calls[0] and calls[1]


# per-trial d_max ---------------------------------------------------------------

def test_tiny_m_gives_sentinel():
    cfg = ExperimentConfig(n=200, k=8, m_grid=(9,), trials=1)
    assert d_max_single(9, cfg, trial_seed(cfg, 9, 0)) == -1
    assert d_max_democracy(9, cfg, trial_seed(cfg, 9, 0)) == -1


def test_square_gaussian_recovers_without_drops():
    cfg = ExperimentConfig(n=30, k=2, m_grid=(30,), trials=1)
    ctx = TrialContext(30, cfg, 123)
    assert ctx.level_ok("random_single", 0)
    assert d_max_single(30, cfg, 123) >= 0


def test_m_must_be_on_the_grid():
    with pytest.raises(PreconditionError):
        d_max_single(17, small(), 0)


def test_democracy_never_exceeds_single():
    cfg = small(r_submatrices=6)
    for m in cfg.m_grid:
        for t in range(4):
            _, _, out, _ = run_cell(cfg, m, t)
            assert out["random_multi"] <= out["random_single"]


def test_one_draw_matches_single():
    cfg = small(r_submatrices=1)
    for m in cfg.m_grid:
        for t in range(3):
            _, _, out, _ = run_cell(cfg, m, t)
            assert out["random_multi"] == out["random_single"]


def test_standalone_functions_match_run_cell():
    cfg = small()
    m, t = 28, 1
    seed = trial_seed(cfg, m, t)
    _, _, out, _ = run_cell(cfg, m, t)
    assert d_max_single(m, cfg, seed) == out["random_single"]
    assert d_max_adversarial(m, cfg, seed) == out["adversarial_largest"]
    assert d_max_democracy(m, cfg, seed) == out["random_multi"]


def test_adversary_drops_largest_measurements_first():
    cfg = small()
    ctx = TrialContext(40, cfg, 5)
    assert np.array_equal(ctx.kept_adversarial(0), np.arange(40))
    dropped = np.setdiff1d(np.arange(40), ctx.kept_adversarial(3))
    assert set(dropped) == set(np.argsort(-np.abs(ctx.y))[:3])


def test_adversary_tie_break_lowest_index_first():
    cfg = small()
    ctx = TrialContext(16, cfg, 5)
    ctx.y = np.ones(16)
    ctx._adv_order = np.argsort(-np.abs(ctx.y), kind="stable")
    assert np.array_equal(ctx.kept_adversarial(2), np.arange(2, 16))


def test_random_draws_are_uniform_subsets():
    ctx = TrialContext(40, small(), 9)
    kept = ctx.kept_random(10, 0)
    assert kept.size == 30 and np.all(np.diff(kept) > 0)
    assert not np.array_equal(kept, ctx.kept_random(10, 1))
    assert np.array_equal(kept, ctx.kept_random(10, 0))


def test_records_are_collected():
    cfg = small()
    records = []
    ctx = TrialContext(28, cfg, 11, records=records, trial=2)
    ctx.level_ok("random_multi", 3)
    assert records and all(r.trial == 2 and r.m == 28 and r.d == 3 for r in records)
    assert all(r.m - r.d > 0 for r in records)


# aggregation and fits ----------------------------------------------------------

def test_two_point_fit():
    fit = fit_line([CurvePoint(100, 10), CurvePoint(120, 30)])
    assert fit.slope == pytest.approx(1.0)
    assert fit.intercept == pytest.approx(-90.0)
    assert fit.points_used == 2


def test_fit_skips_non_positive_points():
    pts = [CurvePoint(10, -1), CurvePoint(20, 0), CurvePoint(30, 5), CurvePoint(40, 15)]
    assert fit_line(pts).points_used == 2
    assert fit_line(pts[:3]) is None


def test_aggregation_takes_the_minimum():
    cfg = small(policies=("random_single",), m_grid=(16, 28))
    curves, fits = aggregate(cfg, {("random_single", 16): [3, -1, 4], ("random_single", 28): [9, 8, 12]})
    assert [p.d_max for p in curves["random_single"]] == [-1, 8]
    assert fits["random_single"] is None


def test_single_trial_single_m_passes_through():
    cfg = small(m_grid=(40,), trials=1)
    res = run_experiment(cfg)
    _, _, out, _ = run_cell(cfg, 40, 0)
    for p in cfg.policies:
        assert res.curves[p] == [CurvePoint(40, out[p])]


def test_experiment_is_deterministic(result):
    again = run_experiment(small())
    assert again.per_trial == result.per_trial
    assert again.curves == result.curves


def test_parallel_run_matches_serial(result):
    par = run_experiment(small(), jobs=2)
    assert par.per_trial == result.per_trial


def test_curve_ordering(result):
    for m in result.cfg.m_grid:
        for t in range(result.cfg.trials):
            assert (result.per_trial[("random_multi", m)][t]
                    <= result.per_trial[("random_single", m)][t])
    for p in result.cfg.policies:
        assert all(pt.d_max <= pt.m for pt in result.curves[p])


def test_onset_scan_matches_full_run(result):
    for p in result.cfg.policies:
        onset, passed = onset_scan(result.cfg, p)
        assert onset == result.onset(p)


def test_progress_callback():
    calls = []
    run_experiment(small(m_grid=(16,), trials=2), progress=lambda i, n: calls.append((i, n)))
    assert calls == [(1, 2), (2, 2)]


# files -------------------------------------------------------------------------

def test_csv_round_trip(result, tmp_path):
    write_results_csv(result, tmp_path / "r.csv")
    assert read_results_csv(tmp_path / "r.csv") == result.per_trial
    write_summary_csv(result.curves, tmp_path / "s.csv")
    assert read_summary_csv(tmp_path / "s.csv") == result.curves


def test_fit_files(tmp_path):
    fits = {"random_single": LinearFit(0.1 + 0.2, -1 / 3, 4), "random_multi": None}
    write_fits(fits, tmp_path / "f.json")
    data = json.loads((tmp_path / "f.json").read_text())
    assert data["random_single"]["slope"] == 0.1 + 0.2
    assert data["random_multi"] is None
    write_fits_csv(fits, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert len(lines) == 2 and float(lines[1].split(",")[1]) == 0.1 + 0.2


def test_plot_script(tmp_path):
    fits = {"random_single": LinearFit(1.0, -90.0, 3), "random_multi": None}
    write_plot_script(fits, "summary.csv", tmp_path / "fig.gp")
    text = (tmp_path / "fig.gp").read_text()
    assert "summary.csv" in text and "random_multi" in text
    assert "f0(x) = 1.0*x + -90.0" in text
    assert "f1(x)" not in text


# stability ---------------------------------------------------------------------

def test_stability_preconditions():
    cfg = ExperimentConfig(n=64, k=4, m_grid=(30,), trials=1)
    with pytest.raises(PreconditionError):
        stability_experiment(cfg, 2, [4])
    with pytest.raises(PreconditionError):
        stability_experiment(cfg, 2, [3])
    with pytest.raises(PreconditionError):
        stability_experiment(cfg, 29, [1])


def test_stability_sparse_signal_without_extra_drops_is_exact():
    cfg = ExperimentConfig(n=128, k=6, m_grid=(60,), trials=4)
    rows = stability_experiment(cfg, 2, [0], signal="sparse", signal_sparsity=3)
    assert rows[0].max_error <= 1e-4
    # k_tilde = 3 covers the whole support, so the bound's right side is zero
    assert rows[0].bound_forces_exact and math.isnan(rows[0].c3_hat)


def test_stability_compressible_rows():
    cfg = ExperimentConfig(n=128, k=8, m_grid=(48,), trials=5, master_seed=3)
    rows = stability_experiment(cfg, 4, [1, 3, 5])
    assert [r.k_tilde for r in rows] == [3, 2, 1]
    for r in rows:
        assert len(r.errors) == 5 and np.all(np.isfinite(r.errors))
        assert r.c3_hat == max(r.ratios) and not r.bound_forces_exact
    assert stability_experiment(cfg, 4, [1, 3, 5])[0].errors == rows[0].errors
