"""Command-line front end.

Subcommands:

* ``simulate``  - write a simulated grid-sampled path as CSV,
* ``detect``    - recursive change-point detection on a price/returns file,
* ``test``      - single-segment constant-rate test,
* ``calibrate`` - simulate and store a limit-law quantile table,
* ``mc``        - Monte Carlo verification experiments.

Every output bundle embeds a manifest (parameters, seed, versions, input
checksums) sufficient to rerun it.  Exit codes: 0 success, 2 input error,
3 data not analyzable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .estimators import (
    DegeneratePathError,
    NoSwitchError,
    RateSaturationError,
    indicator_series,
)
from .inference import (
    LAW_ARGMAX,
    LAW_BRIDGE_SUP,
    LAW_WEIGHTED_BRIDGE_SUP,
    LimitQuantiles,
    VARIANT_TO_LAW,
    VARIANT_UNWEIGHTED,
    VARIANT_WEIGHTED,
    h0_test,
    simulate_argmax_law,
    simulate_bridge_sup,
)
from .manifest import build_manifest, write_json
from .mc import (
    consistency_experiment,
    lambda_normality_experiment,
    simulate_switch_sample,
    tau_law_experiment,
    test_size_experiment,
)
from .segmentation import (
    SegmentNotAnalyzable,
    SegmentationConfig,
    binary_segment,
    read_price_csv,
    read_series_csv,
    returns_from_prices,
)
from .telegraph import GridSample, grid_sample_to_csv

CACHE_ENV = "TELEGRAPH_CPD_CACHE"

DEFAULT_CALIB_REPS = 100_000
DEFAULT_BRIDGE_GRID = 1024
DEFAULT_ARGMAX_GRID = 2000
DEFAULT_ARGMAX_SPAN = 50.0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SegmentNotAnalyzable as exc:
        print(f"error: data not analyzable ({exc.reason}): {exc}", file=sys.stderr)
        return 3
    except (NoSwitchError, RateSaturationError, DegeneratePathError) as exc:
        print(f"error: data not analyzable: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telegraph-cpd",
        description="Telegraph-process change-point detection toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a grid-sampled telegraph path")
    p.add_argument("--lambda1", type=float, required=True, help="switching rate (before the change)")
    p.add_argument("--lambda2", type=float, default=None, help="rate after the change")
    p.add_argument("--tau", type=float, default=None, help="change fraction in (0,1)")
    p.add_argument("--v", type=float, default=1.0, help="speed of the motion")
    p.add_argument("--delta", type=float, required=True, help="observation mesh")
    p.add_argument("--n", type=int, required=True, help="number of grid increments")
    p.add_argument("--sign0", choices=["+1", "-1", "random"], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="recursive change-point detection on a file")
    _add_input_flags(p)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--trim", type=float, default=0.05)
    p.add_argument("--variant", choices=[VARIANT_UNWEIGHTED, VARIANT_WEIGHTED],
                   default=VARIANT_UNWEIGHTED)
    p.add_argument("--min-segment", type=int, default=20)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--force-depth", type=int, default=0,
                   help="descend unconditionally to this depth (0 = gate on the test)")
    p.add_argument("--child-velocity", choices=["reestimate", "inherit"],
                   default="reestimate",
                   help="detection speed on sub-segments: re-estimated per child "
                        "or inherited from the parent (classic sequential analyses)")
    p.add_argument("--calibration", type=Path, default=None,
                   help="cached bridge-law quantile table (JSON)")
    p.add_argument("--argmax-calibration", type=Path, default=None,
                   help="cached argmax-law quantile table for tau intervals")
    p.add_argument("--calib-reps", type=int, default=DEFAULT_CALIB_REPS)
    p.add_argument("--seed", type=int, default=0, help="seed for on-the-fly calibration")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.add_argument("--out", type=Path, required=True, help="output bundle directory")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("test", help="constant-rate test on a single segment")
    _add_input_flags(p)
    p.add_argument("--v", type=float, default=None, help="known speed (else estimated)")
    p.add_argument("--estimate-v", action="store_true", help="estimate the speed (default when --v absent)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--trim", type=float, default=0.05)
    p.add_argument("--variant", choices=[VARIANT_UNWEIGHTED, VARIANT_WEIGHTED],
                   default=VARIANT_UNWEIGHTED)
    p.add_argument("--calibration", type=Path, default=None)
    p.add_argument("--calib-reps", type=int, default=DEFAULT_CALIB_REPS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True, help="output JSON path")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("calibrate", help="simulate a limit-law quantile table")
    p.add_argument("--law", choices=[LAW_BRIDGE_SUP, LAW_WEIGHTED_BRIDGE_SUP, LAW_ARGMAX],
                   required=True)
    p.add_argument("--trim", type=float, default=0.05, help="bridge laws only")
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--reps", type=int, default=DEFAULT_CALIB_REPS)
    p.add_argument("--span", type=float, default=DEFAULT_ARGMAX_SPAN, help="argmax law only")
    p.add_argument("--alphas", type=str, default="0.90,0.95,0.99",
                   help="comma-separated levels to report on stdout")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("mc", help="Monte Carlo verification experiments")
    p.add_argument("--experiment", required=True,
                   choices=["consistency", "tau-law", "lambda-normality", "test-size"])
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--lambda2", type=float, default=3.0)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--v", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--n", type=int, default=20_000)
    p.add_argument("--horizons", type=str, default="50,100,200",
                   help="consistency experiment: comma-separated T values")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--trim", type=float, default=0.10)
    p.add_argument("--variant", choices=[VARIANT_UNWEIGHTED, VARIANT_WEIGHTED],
                   default=VARIANT_UNWEIGHTED)
    p.add_argument("--calibration", type=Path, default=None)
    p.add_argument("--argmax-calibration", type=Path, default=None)
    p.add_argument("--calib-reps", type=int, default=DEFAULT_CALIB_REPS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True, help="output bundle directory")
    p.set_defaults(func=cmd_mc)
    return parser


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--input-kind", choices=["prices", "returns", "positions"],
                   default="prices")
    p.add_argument("--delta", type=float, default=1.0,
                   help="mesh assigned to one observation step (e.g. 1/52 for weekly)")


# ----------------------------------------------------------------------
# calibration loading / caching
# ----------------------------------------------------------------------

def _cache_path(kind: str, **key) -> Path | None:
    import os

    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    blob = json.dumps(key, sort_keys=True).encode()
    name = f"{kind}_{hashlib.sha256(blob).hexdigest()[:16]}.json"
    return Path(root) / name


def _bridge_table(variant: str, trim: float, reps: int, seed: int, workers: int,
                  explicit: Path | None) -> LimitQuantiles:
    if explicit is not None:
        table = LimitQuantiles.load(explicit)
        if table.law != VARIANT_TO_LAW[variant]:
            raise ValueError(
                f"{explicit}: calibration law {table.law!r} does not match variant {variant!r}"
            )
        return table
    cache = _cache_path("bridge", law=VARIANT_TO_LAW[variant], trim=trim,
                        grid=DEFAULT_BRIDGE_GRID, reps=reps, seed=seed)
    if cache is not None and cache.exists():
        return LimitQuantiles.load(cache)
    table = simulate_bridge_sup(trim, variant, DEFAULT_BRIDGE_GRID, reps, seed, workers)
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        table.save(cache)
    return table


def _argmax_table(reps: int, seed: int, workers: int, explicit: Path | None) -> LimitQuantiles:
    if explicit is not None:
        table = LimitQuantiles.load(explicit)
        if table.law != LAW_ARGMAX:
            raise ValueError(f"{explicit}: expected an argmax-law table, got {table.law!r}")
        return table
    cache = _cache_path("argmax", span=DEFAULT_ARGMAX_SPAN, grid=DEFAULT_ARGMAX_GRID,
                        reps=reps, seed=seed)
    if cache is not None and cache.exists():
        return LimitQuantiles.load(cache)
    table = simulate_argmax_law(reps, DEFAULT_ARGMAX_SPAN, DEFAULT_ARGMAX_GRID, seed, workers)
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        table.save(cache)
    return table


def _load_sample(args) -> GridSample:
    if args.input_kind == "prices":
        prices = read_price_csv(args.input)
        return returns_from_prices(prices, args.delta)
    x = read_series_csv(args.input)
    if args.input_kind == "returns":
        if x.size < 2:
            raise ValueError(f"{args.input}: need at least 2 returns")
        values = np.concatenate([[0.0], np.cumsum(x)])
        return GridSample(delta=args.delta, values=values, velocity=None)
    values = x - x[0] if x.size and x[0] != 0.0 else x
    return GridSample(delta=args.delta, values=values,
                      velocity=getattr(args, "v", None))


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if (args.lambda2 is None) != (args.tau is None):
        raise ValueError("--lambda2 and --tau must be given together")
    sign0 = "random" if args.sign0 == "random" else int(args.sign0)
    rng = np.random.default_rng(args.seed)
    sample = simulate_switch_sample(
        args.lambda1, args.lambda2, args.tau,
        v=args.v, delta=args.delta, n=args.n, sign0=sign0, rng=rng,
    )
    args.out.parent.mkdir(parents=True, exist_ok=True)
    grid_sample_to_csv(sample, args.out)
    manifest = build_manifest(
        "simulate",
        {
            "lambda1": args.lambda1, "lambda2": args.lambda2, "tau": args.tau,
            "v": args.v, "delta": args.delta, "n": args.n, "sign0": args.sign0,
        },
        args.seed,
    )
    write_json(args.out.with_suffix(args.out.suffix + ".manifest.json"), manifest)
    print(f"wrote {args.out} ({args.n + 1} rows)")
    return 0


def cmd_detect(args) -> int:
    sample = _load_sample(args)
    cfg = SegmentationConfig(
        alpha=args.alpha,
        trim=args.trim,
        min_segment_length=args.min_segment,
        max_depth=args.max_depth,
        force_depth=args.force_depth,
        variant=args.variant,
        delta_t=args.delta,
        child_velocity=args.child_velocity,
    )
    calibration = _bridge_table(args.variant, args.trim, args.calib_reps,
                                args.seed, args.workers, args.calibration)
    argmax_tab = _argmax_table(args.calib_reps, args.seed, args.workers,
                               args.argmax_calibration)
    report = binary_segment(sample, cfg, calibration, argmax_quantiles=argmax_tab)

    outdir = args.out
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = build_manifest(
        "detect",
        {
            "input_kind": args.input_kind, "delta": args.delta, "alpha": args.alpha,
            "trim": args.trim, "variant": args.variant,
            "min_segment": args.min_segment, "max_depth": args.max_depth,
            "force_depth": args.force_depth, "child_velocity": args.child_velocity,
            "calib_reps": args.calib_reps,
        },
        args.seed,
        inputs=[args.input],
    )
    doc = report.to_json_dict(cfg)
    doc["manifest"] = manifest
    write_json(outdir / "report.json", doc)
    for seg in report.iter_segments():
        if seg.profile is not None:
            seg.profile.to_csv(outdir / f"segment_{seg.start:06d}_{seg.end:06d}_profile.csv")
    if not args.no_figures:
        from .figures import save_detection_figures

        save_detection_figures(report, sample, outdir)
    print(f"changes: {report.changes}")
    if not report.root.analyzable:
        print(f"root segment not analyzable: {report.root.reason}", file=sys.stderr)
        return 3
    return 0


def cmd_test(args) -> int:
    sample = _load_sample(args)
    if args.input_kind == "positions" and args.v is not None:
        sample.velocity = args.v
    from .estimators import estimate_velocity

    v = args.v if args.v is not None else estimate_velocity(sample)
    y = indicator_series(sample, v)
    calibration = _bridge_table(args.variant, args.trim, args.calib_reps,
                                args.seed, args.workers, args.calibration)
    result = h0_test(y, calibration, alpha=args.alpha, trim=args.trim, variant=args.variant)
    manifest = build_manifest(
        "test",
        {
            "input_kind": args.input_kind, "delta": args.delta, "alpha": args.alpha,
            "trim": args.trim, "variant": args.variant, "v": args.v,
            "calib_reps": args.calib_reps,
        },
        args.seed,
        inputs=[args.input],
    )
    doc = result.to_json_dict()
    doc["v"] = v
    doc["manifest"] = manifest
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_json(args.out, doc)
    print(f"statistic={result.statistic:.6g} critical={result.critical_value:.6g} "
          f"p={result.p_value:.4g} reject={result.reject}")
    return 0


def cmd_calibrate(args) -> int:
    extra = tuple(float(a) for a in args.alphas.split(",") if a.strip())
    if args.law == LAW_ARGMAX:
        grid = args.grid if args.grid is not None else DEFAULT_ARGMAX_GRID
        table = simulate_argmax_law(args.reps, args.span, grid, args.seed, args.workers)
    else:
        grid = args.grid if args.grid is not None else DEFAULT_BRIDGE_GRID
        variant = VARIANT_UNWEIGHTED if args.law == LAW_BRIDGE_SUP else VARIANT_WEIGHTED
        table = simulate_bridge_sup(args.trim, variant, grid, args.reps, args.seed, args.workers)
    manifest = build_manifest(
        "calibrate",
        {
            "law": args.law, "trim": args.trim if args.law != LAW_ARGMAX else None,
            "grid": grid, "reps": args.reps,
            "span": args.span if args.law == LAW_ARGMAX else None,
        },
        args.seed,
    )
    doc = table.to_json_dict()
    doc["manifest"] = manifest
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_json(args.out, doc)
    for a in extra:
        print(f"q({a}) = {table.quantile(a):.6f}")
    return 0


def cmd_mc(args) -> int:
    outdir = args.out
    outdir.mkdir(parents=True, exist_ok=True)
    if args.experiment == "consistency":
        horizons = [float(t) for t in args.horizons.split(",") if t.strip()]
        result = consistency_experiment(
            horizons, args.lambda1, args.lambda2, args.tau, args.v, args.delta,
            replications=args.reps, seed=args.seed, workers=args.workers,
        )
    elif args.experiment == "tau-law":
        table = _argmax_table(args.calib_reps, args.seed, args.workers,
                              args.argmax_calibration)
        result = tau_law_experiment(
            args.lambda1, args.lambda2, args.tau, args.v, args.delta, args.n,
            replications=args.reps, alpha=args.alpha, argmax_quantiles=table,
            seed=args.seed, workers=args.workers,
        )
    elif args.experiment == "lambda-normality":
        result = lambda_normality_experiment(
            args.lambda1, args.lambda2, args.tau, args.v, args.delta, args.n,
            replications=args.reps, seed=args.seed, workers=args.workers,
        )
    else:
        table = _bridge_table(args.variant, args.trim, args.calib_reps,
                              args.seed, args.workers, args.calibration)
        result = test_size_experiment(
            args.lambda1, args.v, args.delta, args.n, trim=args.trim,
            variant=args.variant, replications=args.reps, alpha=args.alpha,
            calibration=table, seed=args.seed, workers=args.workers,
        )
    manifest = build_manifest(
        "mc",
        {
            "experiment": args.experiment, "lambda1": args.lambda1,
            "lambda2": args.lambda2, "tau": args.tau, "v": args.v,
            "delta": args.delta, "n": args.n, "horizons": args.horizons,
            "reps": args.reps, "alpha": args.alpha, "trim": args.trim,
            "variant": args.variant, "calib_reps": args.calib_reps,
        },
        args.seed,
    )
    _write_rows_csv(outdir / "rows.csv", result.rows)
    write_json(outdir / "summary.json", {"summary": result.summary, "manifest": manifest})
    print(json.dumps(result.summary, sort_keys=True, default=float))
    return 0


def _write_rows_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("", encoding="utf-8")
        return
    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for row in rows:
        cells = []
        for c in cols:
            val = row[c]
            if isinstance(val, bool):
                cells.append(str(int(val)))
            elif isinstance(val, float):
                cells.append(f"{val:.17g}")
            else:
                cells.append(str(val))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    sys.exit(main())
