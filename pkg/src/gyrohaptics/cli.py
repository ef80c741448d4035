"""
Command-line interface::

    gyrohaptics measure  [--config run.toml] [--condition NAME ...]
    gyrohaptics analyze  ratings.csv [--factors K]
    gyrohaptics synth    --out ratings.csv [--noise 0.3]

Exit codes: 0 success, 1 usage/config/data error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import List, Sequence

from . import __version__
from .config import ConfigError, default_config_text, load_config
from .harness import run_conditions, export_traces, write_summary
from .impedance import normalize_name
from .sdanalysis import (
    ConvergenceError,
    DegenerateColumnError,
    RatingsError,
    RotationError,
    SynthSpec,
    align_factors,
    average_repetitions,
    fit_factor_model,
    implied_loadings,
    load_ratings,
    synthesize,
    write_ratings,
)
from .sdanalysis.factors import METHODS
from .sdanalysis.ratings import DEFAULT_PAIRS
from .sdanalysis.synth import (
    DEFAULT_CONDITIONS,
    model_path_for,
    read_loadings_csv,
    read_model,
    write_model,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_rows(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# measure
# ---------------------------------------------------------------------------

def cmd_measure(args: argparse.Namespace) -> int:
    if args.dump_config:
        sys.stdout.write(default_config_text())
        return EXIT_OK
    try:
        cfg = load_config(args.config, seed=args.seed)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_USAGE

    conditions = cfg.conditions
    if args.condition:
        wanted = [normalize_name(n) for n in args.condition]
        known = {c.name: c for c in conditions}
        missing = [n for n in wanted if n not in known]
        if missing:
            _err(f"unknown condition(s) {missing}; known: {sorted(known)}")
            return EXIT_USAGE
        conditions = [known[n] for n in dict.fromkeys(wanted)]

    harness = cfg.harness()
    if args.noiseless:
        harness = harness.noiseless()
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    workers = args.workers or cfg.workers

    traces = run_conditions(conditions, cfg.swing, harness, workers=workers)
    export_traces(traces, out)
    write_summary(traces, out / "summary.csv")

    print(f"{'condition':<22}{'samples':>8}{'nRMSE':>10}{'peak N m':>11}{'osc Hz':>9}{'tau s':>8}  status")
    for tr in traces:
        m = tr.metrics
        osc = f"{m.dominant_oscillation_hz:.3f}" if m and m.dominant_oscillation_hz else "-"
        tau = f"{m.decay_time_constant_s:.3f}" if m and m.decay_time_constant_s else "-"
        status = "ok" if tr.completed else f"UNSTABLE ({tr.failure})"
        nrmse = f"{m.normalized_rmse:.4f}" if m else "-"
        peak = f"{m.peak_desired:.4g}" if m else "-"
        print(f"{tr.name:<22}{len(tr):>8}{nrmse:>10}{peak:>11}{osc:>9}{tau:>8}  {status}")
    print(f"wrote {len(traces)} trace(s) and summary.csv to {out}")
    return EXIT_OK if all(tr.completed for tr in traces) else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _factor_names(k: int) -> List[str]:
    return [f"F{j + 1}" for j in range(k)]


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        ratings = load_ratings(args.ratings, likert_range=tuple(args.likert_range))
        obs = average_repetitions(ratings, allow_missing=args.allow_missing)
        model = fit_factor_model(
            obs,
            n_factors=args.factors,
            rule=args.rule,
            method=args.method,
            rotate=not args.no_rotate,
            pairwise=args.allow_missing,
            max_iter=args.max_iter,
            tol=args.tol,
        )
    except DegenerateColumnError as exc:
        _err(f"{exc}")
        return EXIT_USAGE
    except (RatingsError, OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (ConvergenceError, RotationError) as exc:
        _err(str(exc))
        return EXIT_NUMERIC

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    k = model.n_factors
    names = _factor_names(k)

    _write_rows(out / "scree.csv", ["component", "eigenvalue"],
                [[i + 1, _fmt(v)] for i, v in enumerate(model.eigenvalues)])
    _write_rows(out / "loadings.csv", ["pair"] + names,
                [[lab] + [_fmt(v) for v in row] for lab, row in zip(model.labels, model.loadings)])
    _write_rows(out / "summary.csv", ["quantity"] + names, [
        ["ss_loadings"] + [_fmt(v) for v in model.ss_loadings],
        ["pct_variance"] + [_fmt(v) for v in model.pct_variance],
        ["cumulative"] + [_fmt(v) for v in model.cumulative],
    ])
    _write_rows(out / "scores.csv", ["participant", "condition"] + names,
                [[p, c] + [_fmt(v) for v in row]
                 for p, c, row in zip(obs.participants, obs.conditions, model.scores)])
    _write_rows(out / "condition_means.csv", ["condition"] + names,
                [[c] + [_fmt(v) for v in row]
                 for c, row in zip(model.condition_names, model.condition_means)])

    method = model.method
    print(f"{len(obs)} observations x {len(model.labels)} pairs; "
          f"{k} factor(s) ({model.rule}), extraction {method}, "
          f"{'varimax' if k >= 2 and not args.no_rotate else 'unrotated'}")
    width = max(len("Sum of Squared Loadings"), 12)
    print(" " * width + "".join(f"{'Factor ' + str(j + 1):>12}" for j in range(k)))
    for title, vals in (("Sum of Squared Loadings", model.ss_loadings),
                        ("% of Variance", model.pct_variance),
                        ("Cumulative %", model.cumulative)):
        print(f"{title:<{width}}" + "".join(f"{v:>12.6f}" for v in vals))

    if args.model:
        try:
            spec = read_model(args.model)
        except (OSError, ValueError, TypeError) as exc:
            _err(f"cannot read generating model: {exc}")
            return EXIT_USAGE
        target = implied_loadings(spec)
        if target.shape != model.loadings.shape:
            _err(f"generating model has shape {target.shape}, fitted loadings {model.loadings.shape}")
            return EXIT_USAGE
        _, phis = align_factors(model.loadings, target)
        _write_rows(out / "recovery.csv", ["factor", "congruence"],
                    [[f"F{j + 1}", _fmt(v)] for j, v in enumerate(phis)])
        print("congruence with generating model: " + ", ".join(f"{v:.4f}" for v in phis))
    print(f"wrote scree, loadings, summary, scores, condition_means to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    try:
        kwargs = {}
        if args.loadings:
            labels, L = read_loadings_csv(args.loadings)
            kwargs.update(labels=labels, loadings=L)
        spec = SynthSpec(
            noise=args.noise,
            participants=args.participants,
            conditions=[c.strip() for c in args.conditions.split(",") if c.strip()],
            repetitions=args.repetitions,
            spread=args.spread,
            likert_range=tuple(args.likert_range),
            seed=args.seed,
            **kwargs,
        )
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ratings(synthesize(spec), out)
    model_path = write_model(spec, model_path_for(out))
    rows = spec.n_observations * spec.repetitions
    print(f"wrote {rows} rating rows ({spec.n_observations} observations) to {out}; "
          f"generating model in {model_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="gyrohaptics",
        description="CMG impedance-rendering simulator and semantic-differential factor analysis.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", formatter_class=fmt,
                       help="run the impedance conditions and export torque traces",
                       description="Swing the simulated device under each impedance condition and "
                                   "record desired vs achieved torque.")
    m.add_argument("--config", help="TOML run configuration (defaults used when omitted)")
    m.add_argument("--out", help="output directory (overrides run.output_dir)")
    m.add_argument("--condition", action="append", metavar="NAME",
                   help="run only this condition; repeatable")
    m.add_argument("--seed", type=int, default=None, help="RNG seed (overrides run.seed)")
    m.add_argument("--noiseless", action="store_true", help="disable gyro noise and quantization")
    m.add_argument("--workers", type=int, default=None, help="parallel processes (overrides run.workers)")
    m.add_argument("--dump-config", action="store_true", help="print the default configuration and exit")
    m.set_defaults(func=cmd_measure)

    a = sub.add_parser("analyze", formatter_class=fmt,
                       help="factor-analyze a ratings CSV",
                       description="Average repetitions, extract and varimax-rotate factors, and write "
                                   "scree, loadings, summary, scores and condition-means CSVs.")
    a.add_argument("ratings", help="ratings CSV (participant,condition,repetition,<pairs...>)")
    a.add_argument("--out", default="analysis-out", help="output directory")
    a.add_argument("--factors", type=int, default=None, help="number of factors (overrides --rule)")
    a.add_argument("--rule", choices=("paper-elbow", "kaiser"), default="paper-elbow",
                   help="factor-count rule when --factors is not given")
    a.add_argument("--method", choices=METHODS, default="pc",
                   help="extraction: principal components (pc) or iterated principal-axis "
                        "factoring (paf; fails with exit 2 if communalities do not converge)")
    a.add_argument("--no-rotate", action="store_true", help="skip varimax")
    a.add_argument("--allow-missing", action="store_true",
                   help="accept missing cells (pairwise-complete correlation)")
    a.add_argument("--likert-range", type=int, nargs=2, default=[1, 7], metavar=("LO", "HI"),
                   help="declared rating scale")
    a.add_argument("--max-iter", type=int, default=100, help="principal-axis iteration cap")
    a.add_argument("--tol", type=float, default=1e-6, help="principal-axis communality tolerance")
    a.add_argument("--model", help="generating-model JSON from synth; reports loading congruence")
    a.add_argument("--seed", type=int, default=None, help="accepted for symmetry; analysis uses no randomness")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synth", formatter_class=fmt,
                       help="generate factor-structured synthetic ratings",
                       description="Draw ratings from a declared loading matrix plus noise; the "
                                   "generating model is saved next to the CSV as <stem>.model.json.")
    s.add_argument("--out", required=True, help="ratings CSV to write")
    s.add_argument("--participants", type=int, default=16, help="participants")
    s.add_argument("--conditions", default=",".join(DEFAULT_CONDITIONS),
                   help="comma-separated condition names")
    s.add_argument("--repetitions", type=int, default=1, help="repetitions per condition")
    s.add_argument("--noise", type=float, default=0.3, help="per-rating noise SD (latent units)")
    s.add_argument("--loadings", help="loadings CSV (pair,F1,...,Fk); default 7 pairs x 4 factors "
                                      f"over {', '.join(DEFAULT_PAIRS)}")
    s.add_argument("--spread", type=float, default=1.0, help="scale points per latent unit")
    s.add_argument("--likert-range", type=int, nargs=2, default=[1, 7], metavar=("LO", "HI"),
                   help="rating scale")
    s.add_argument("--seed", type=int, default=0, help="RNG seed")
    s.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
