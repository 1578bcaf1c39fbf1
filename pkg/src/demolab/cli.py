"""Command-line front end.

Every subcommand writes its data files plus ``manifest.json`` into
``--out`` and prints a one-line summary. Settings come from, in order of
increasing priority: built-in defaults, ``--preset`` (experiment and
stability only), ``--config`` (JSON object or flat ``key=value`` lines)
and explicit flags.

Exit codes: 0 success, 2 usage or invalid input, 3 numerical failure,
4 enumeration budget exceeded.
"""

import argparse
import csv
import datetime
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from . import concentration, harness, matrices, recovery, riplab
from ._seeding import derive_seed
from .errors import EnumerationTooLargeError, NumericError, SingularSelectionError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_BUDGET = 4


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    subcommand: str
    config_path: str
    master_seed: int
    output_dir: str
    version: str
    timestamp: str
    settings: dict = None
    outputs: list = None

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


# argument types ----------------------------------------------------------------

def _int_at_least(lo):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        return v
    return parse


def _int_list(text):
    """``"40:240:20"`` (inclusive range) or ``"1,3,5"``."""
    try:
        if ":" in text:
            a, b, *c = (int(p) for p in text.split(":"))
            return list(range(a, b + 1, c[0] if c else 1))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like 1,2,3 or 10:100:10, got {text!r}") from None


def _float_pair(text):
    try:
        a, b = (float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    return (a, b)


positive = _int_at_least(1)
nonneg = _int_at_least(0)

# option name -> (type, help); flags default to None so unset ones fall through
# to the config file and then to the subcommand default
OPTIONS = {
    "rows": (positive, "number of measurements M"),
    "cols": (positive, "signal length N"),
    "dist": (str, "entry distribution: gaussian, rademacher or uniform"),
    "seed": (nonneg, "master seed"),
    "in": (str, "read the matrix from a .csv or binary file instead of generating it"),
    "order": (positive, "sparsity order of the isometry constant"),
    "augment": (None, "work with [I | Phi] instead of Phi"),
    "samples": (positive, "sample supports instead of enumerating them"),
    "budget": (positive, "maximum number of enumerated supports"),
    "m_tilde": (positive, "smallest number of kept rows"),
    "delta": (float, "isometry bound to certify"),
    "eta": (float, "deviation parameter"),
    "trials": (positive, "number of trials"),
    "split": (_float_pair, "norms of the two halves of u, as W,X"),
    "k": (positive, "sparsity of the test signal"),
    "drop": (nonneg, "number of randomly dropped measurements"),
    "method": (str, "solver: admm, pdhg, lp or omp"),
    "preset": (str, f"named configuration: {', '.join(sorted(harness.PRESETS))}"),
    "n": (positive, "signal length N"),
    "m_grid": (_int_list, "measurement counts, e.g. 40:240:20"),
    "r_submatrices": (positive, "random submatrices per level (R)"),
    "policies": (str, "comma-separated drop policies"),
    "recovery_tol": (float, "relative l2 error counted as exact recovery"),
    "scan": (str, "drop-level search: bisect or linear"),
    "d_base": (nonneg, "measurements dropped in every run"),
    "d_extra": (_int_list, "extra dropped measurements, e.g. 1,3,5"),
    "m": (positive, "number of measurements"),
    "signal": (str, "test signal: compressible or sparse"),
    "exponent": (float, "power-law decay exponent of compressible signals"),
}

SUBCOMMANDS = {
    "gen": dict(help="draw a measurement matrix and save it as CSV and binary",
                opts=["rows", "cols", "dist", "seed"],
                defaults=dict(rows=None, cols=None, dist="gaussian", seed=0),
                required=["rows", "cols"]),
    "rip": dict(help="restricted isometry constant of a matrix",
                opts=["in", "rows", "cols", "dist", "seed", "order", "augment", "samples", "budget"],
                defaults=dict(dist="gaussian", seed=0, augment=False, samples=None,
                              budget=riplab.DEFAULT_BUDGET),
                required=["order"]),
    "democracy-cert": dict(help="check the isometry bound on every large row submatrix",
                           opts=["in", "rows", "cols", "dist", "seed", "m_tilde", "order", "delta",
                                 "augment", "budget"],
                           defaults=dict(dist="gaussian", seed=0, augment=False,
                                         budget=riplab.DEFAULT_BUDGET),
                           required=["m_tilde", "order", "delta"]),
    "conc": dict(help="Monte Carlo tail of ||[I | Phi] u||^2",
                 opts=["rows", "cols", "eta", "trials", "seed", "dist", "split"],
                 defaults=dict(rows=128, cols=32, eta=0.5, trials=100000, seed=0, dist="gaussian",
                               split=(2 ** -0.5, 2 ** -0.5))),
    "recover": dict(help="recover a random sparse signal from (a subset of) its measurements",
                    opts=["in", "rows", "cols", "dist", "seed", "k", "drop", "method"],
                    defaults=dict(dist="gaussian", seed=0, drop=0, method="admm"),
                    required=["k"]),
    "experiment": dict(help="maximum droppable measurements vs. M for each drop policy",
                       opts=["preset", "n", "k", "m_grid", "trials", "r_submatrices", "policies",
                             "recovery_tol", "scan", "seed"],
                       defaults=dict(preset="figure1-small")),
    "stability": dict(help="recovery error of compressible signals when too many measurements are dropped",
                      opts=["preset", "n", "k", "m", "trials", "seed", "d_base", "d_extra", "signal",
                            "exponent", "recovery_tol"],
                      defaults=dict(preset="figure1-small", k=13, m=64, trials=40, d_base=6,
                                    d_extra=[1, 3, 5], signal="compressible", exponent=1.5)),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="demolab", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"demolab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, entry in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=entry["help"], description=entry["help"])
        for opt in entry["opts"]:
            typ, hlp = OPTIONS[opt]
            flag = "--" + opt.replace("_", "-")
            if typ is None:
                p.add_argument(flag, dest=opt, action="store_true", default=None, help=hlp)
            else:
                p.add_argument(flag, dest=opt, type=typ, default=None, help=hlp)
        p.add_argument("--config", help="JSON file or flat key=value file with the same keys as the flags")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--jobs", type=positive, default=None,
                       help="worker processes (default: available CPUs)")
    return parser


# configuration -----------------------------------------------------------------

def read_config(path):
    """Parse a JSON object or ``key = value`` lines (``#`` starts a comment)."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--config: invalid JSON in {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"--config: {path} must hold a JSON object")
        if "subcommand" in data and isinstance(data.get("settings"), dict):
            # a manifest from an earlier run
            data = data["settings"]
        return {str(k).replace("-", "_"): v for k, v in data.items() if v is not None}
    data = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"--config: {path}:{lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        data[k.replace("-", "_")] = v
    return data


def _coerce(key, value):
    typ = OPTIONS[key][0]
    if typ is None:
        if isinstance(value, bool):
            return value
        if str(value).lower() in ("1", "true", "yes", "on"):
            return True
        if str(value).lower() in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"--config: {key} must be true or false, got {value!r}")
    if isinstance(value, list):
        if typ is _int_list:
            return [int(v) for v in value]
        if typ is _float_pair:
            return tuple(float(v) for v in value)
        value = ",".join(str(v) for v in value)
    try:
        return typ(value if typ is float else str(value))
    except (argparse.ArgumentTypeError, ValueError) as exc:
        raise UsageError(f"--config: {key}: {exc}") from None


def resolve(command, args):
    """Merge defaults, config file and flags into one settings dict."""
    entry = SUBCOMMANDS[command]
    settings = dict(entry["defaults"])
    if args.config:
        for k, v in read_config(args.config).items():
            if k not in entry["opts"]:
                raise UsageError(f"--config: unknown key {k!r} for {command}; "
                                 f"allowed: {', '.join(entry['opts'])}")
            settings[k] = _coerce(k, v)
    for k in entry["opts"]:
        v = getattr(args, k)
        if v is not None:
            settings[k] = v
    for k in entry.get("required", []):
        if settings.get(k) is None:
            raise UsageError(f"--{k.replace('_', '-')} is required")
    return settings


# helpers -----------------------------------------------------------------------

def _matrix(s):
    """Load ``--in`` or generate from rows/cols/dist/seed; the two are exclusive."""
    if s.get("in"):
        if s.get("rows") is not None or s.get("cols") is not None:
            raise UsageError("--in conflicts with --rows/--cols")
        try:
            m = matrices.load_matrix(s["in"])
        except OSError as exc:
            raise UsageError(f"--in: cannot read {s['in']}: {exc.strerror}") from None
        except ValueError as exc:
            raise UsageError(f"--in: {exc}") from None
    else:
        if s.get("rows") is None or s.get("cols") is None:
            raise UsageError("--rows and --cols are required without --in")
        m = _generate(s)
    if s.get("augment"):
        return matrices.augment_identity(m).full
    return m


def _generate(s):
    if s["dist"] not in matrices.DISTRIBUTIONS:
        raise UsageError(f"--dist must be one of {', '.join(matrices.DISTRIBUTIONS)}, got {s['dist']!r}")
    return matrices.generate(s["rows"], s["cols"], s["dist"], s["seed"])


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _experiment_config(s):
    try:
        cfg = harness.preset(s["preset"])
    except KeyError as exc:
        raise UsageError(f"--preset: {exc.args[0]}") from None
    over = {}
    for key in ("n", "k", "trials", "r_submatrices", "recovery_tol", "scan"):
        if s.get(key) is not None:
            over[key] = s[key]
    if s.get("m_grid") is not None:
        over["m_grid"] = tuple(s["m_grid"])
    if s.get("policies") is not None:
        pol = s["policies"]
        over["policies"] = tuple(p.strip() for p in pol.split(",")) if isinstance(pol, str) else tuple(pol)
    if s.get("seed") is not None:
        over["master_seed"] = s["seed"]
    if not over:
        return cfg
    fields = {k: v for k, v in asdict(cfg).items() if k != "solver"}
    fields.update(over)
    return harness.ExperimentConfig(**fields, solver=cfg.solver)


# subcommands -------------------------------------------------------------------
# each returns (summary line, list of written file names, master seed)

def cmd_gen(s, out, jobs):
    m = _generate(s)
    matrices.save_csv(m, os.path.join(out, "phi.csv"))
    matrices.save_binary(m, os.path.join(out, "phi.bin"))
    return f"wrote {m.rows}x{m.cols} {m.dist} matrix", ["phi.csv", "phi.bin"], s["seed"]


def cmd_rip(s, out, jobs):
    a = _matrix(s)
    if s.get("samples"):
        rep = riplab.monte_carlo_rip(a, s["order"], s["samples"], s["seed"])
    else:
        rep = riplab.exact_rip(a, s["order"], s["budget"])
    _write_json(os.path.join(out, "rip.json"), rep.to_dict())
    kind = "sampled lower bound" if rep.estimate else "exact"
    return f"delta_{rep.order} = {rep.delta:.6g} ({kind})", ["rip.json"], s["seed"]


def cmd_democracy_cert(s, out, jobs):
    a = _matrix(s)
    rep = riplab.democracy_certificate(a, s["m_tilde"], s["order"], s["delta"], s["budget"])
    _write_json(os.path.join(out, "democracy.json"), rep.to_dict())
    verdict = "holds" if rep.holds else "fails"
    return (f"{verdict}: worst delta {rep.worst_delta:.6g} over {rep.gammas_checked} row subsets",
            ["democracy.json"], s["seed"])


def cmd_conc(s, out, jobs):
    try:
        cfg = concentration.ConcentrationConfig(
            m=s["rows"], n=s["cols"], eta=s["eta"], trials=s["trials"], seed=s["seed"],
            split=tuple(s["split"]), dist=s["dist"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep = concentration.concentration_experiment(cfg)
    _write_json(os.path.join(out, "conc.json"), rep.to_dict())
    return (f"tail {rep.empirical_tail:.4g} vs bound {rep.bound:.4g} over {rep.trials} trials",
            ["conc.json"], s["seed"])


def cmd_recover(s, out, jobs):
    a = matrices.as_array(_matrix(s))
    m, n = a.shape
    if s["drop"] >= m:
        raise UsageError(f"--drop must be smaller than the number of rows ({m})")
    seed = s["seed"]
    sig = recovery.random_sparse_signal(n, s["k"], derive_seed(seed, "signal"))
    x = sig.to_dense()
    y = a @ x
    kept = np.sort(np.random.default_rng(derive_seed(seed, "gamma")).permutation(m)[s["drop"]:])
    if s["method"] == "omp":
        res = recovery.omp_recover(a[kept], y[kept], s["k"], truth=x)
    elif s["method"] in recovery.METHODS:
        res = recovery.l1_recover(a[kept], y[kept], recovery.SolverOptions(method=s["method"]), truth=x)
    else:
        raise UsageError(f"--method must be one of {', '.join(recovery.METHODS + ('omp',))}")
    data = res.to_dict() | {
        "truth": x.tolist(),
        "kept_rows": (kept + 1).tolist(),
        "exact": bool(recovery.exact_recovery(x, res)),
    }
    _write_json(os.path.join(out, "recovery.json"), data)
    return (f"{res.method}: rel_error {res.rel_error:.3g}, exact={data['exact']}",
            ["recovery.json"], seed)


def cmd_experiment(s, out, jobs):
    cfg = _experiment_config(s)
    res = harness.run_experiment(cfg, jobs=jobs)
    harness.write_results_csv(res, os.path.join(out, "results.csv"))
    harness.write_summary_csv(res.curves, os.path.join(out, "summary.csv"))
    harness.write_fits(res.fits, os.path.join(out, "fits.json"))
    harness.write_fits_csv(res.fits, os.path.join(out, "fits.csv"))
    harness.write_plot_script(res.fits, "summary.csv", os.path.join(out, "figure1.gp"))
    parts = []
    for p in cfg.policies:
        f = res.fits.get(p)
        slope = f"slope {f.slope:.3f}" if f else "no fit"
        parts.append(f"{p}: onset {res.onset(p)}, {slope}")
    return "; ".join(parts), ["results.csv", "summary.csv", "fits.json", "fits.csv", "figure1.gp"], \
        cfg.master_seed


def cmd_stability(s, out, jobs):
    cfg = _experiment_config(s | {"m_grid": [s["m"]]})
    rows = harness.stability_experiment(cfg, s["d_base"], s["d_extra"], m=s["m"],
                                        signal=s["signal"], exponent=s["exponent"])
    with open(os.path.join(out, "stability.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d_extra", "k_tilde", "mean_error", "max_error", "c3_hat", "bound_forces_exact"])
        for r in rows:
            w.writerow([r.d_extra, r.k_tilde, repr(r.mean_error), repr(r.max_error), repr(r.c3_hat),
                        int(r.bound_forces_exact)])
    _write_json(os.path.join(out, "stability.json"), riplab._jsonable([asdict(r) for r in rows]))
    summary = ", ".join(f"D~={r.d_extra}: err {r.mean_error:.3g}, c3 {r.c3_hat:.3g}" for r in rows)
    return summary, ["stability.csv", "stability.json"], cfg.master_seed


COMMANDS = {
    "gen": cmd_gen,
    "rip": cmd_rip,
    "democracy-cert": cmd_democracy_cert,
    "conc": cmd_conc,
    "recover": cmd_recover,
    "experiment": cmd_experiment,
    "stability": cmd_stability,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    jobs = args.jobs or harness.default_jobs()
    try:
        settings = resolve(args.command, args)
        os.makedirs(args.out, exist_ok=True)
        summary, files, seed = COMMANDS[args.command](settings, args.out, jobs)
    except UsageError as exc:
        parser.exit(EXIT_USAGE, f"demolab {args.command}: error: {exc}\n")
    except EnumerationTooLargeError as exc:
        parser.exit(EXIT_BUDGET, f"demolab {args.command}: budget exceeded: {exc}\n")
    except (NumericError, SingularSelectionError, np.linalg.LinAlgError, FloatingPointError) as exc:
        parser.exit(EXIT_NUMERIC, f"demolab {args.command}: numerical failure: {exc}\n")
    except ValueError as exc:
        parser.exit(EXIT_USAGE, f"demolab {args.command}: error: {exc}\n")
    manifest = RunManifest(
        subcommand=args.command,
        config_path=os.path.abspath(args.config) if args.config else "",
        master_seed=int(seed),
        output_dir=os.path.abspath(args.out),
        version=__version__,
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        settings=riplab._jsonable({k: v for k, v in settings.items()}),
        outputs=files,
    )
    manifest.write(os.path.join(args.out, "manifest.json"))
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
