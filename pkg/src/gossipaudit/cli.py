"""Command line front end.

    gossipaudit run --config cfg.json [--seed N] [--out DIR]
    gossipaudit sweep --config cfg.json --vary attack.sigma --values 0,0.01 --seeds 1,2
    gossipaudit calibrate bounds|gamma --config cfg.json
    gossipaudit baseline --config cfg.json [--seed N] [--out DIR]

Exit codes: 0 for outcomes A/B/C (and successful sweeps/calibrations),
2 for outcome FAIL or failed calibration, 1 for configuration errors.
Set GOSSIPAUDIT_WORKERS to parallelize sweep cells.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    ConfigError,
    coordinate_median_baseline,
    emit_metrics,
    emit_sweep,
    load_config,
    resolve,
    run_experiment,
    run_sweep,
)
from .validation import CalibrationFailed, calibrate_gamma_max
from .harness import honest_calibration_runs


def _parse_values(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _parse_seeds(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip() != ""]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gossipaudit",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--no-figures", action="store_true")

    p_sweep = sub.add_parser("sweep", help="vary one config field over values x seeds")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--vary", required=True)
    p_sweep.add_argument("--values", required=True)
    p_sweep.add_argument("--seeds", required=True)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--no-figures", action="store_true")

    p_cal = sub.add_parser("calibrate", help="fit bounds or the gamma ceiling")
    p_cal.add_argument("what", choices=["bounds", "gamma"])
    p_cal.add_argument("--config", required=True)

    p_base = sub.add_parser("baseline", help="coordinate-wise median aggregator")
    p_base.add_argument("--config", required=True)
    p_base.add_argument("--seed", type=int, default=None)
    p_base.add_argument("--out", default=None)
    p_base.add_argument("--no-figures", action="store_true")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CalibrationFailed as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "run":
        record = run_experiment(args.config, seed=args.seed)
        print(f"outcome={record.outcome} seed={record.seed} "
              f"final_mse={record.final.get('final_mse')} "
              f"wall_clock={record.wall_clock:.2f}s")
        if args.out:
            for path in emit_metrics(record, args.out, figures=not args.no_figures):
                print(f"wrote {path}")
        return 2 if record.outcome == "FAIL" else 0

    if args.command == "sweep":
        values = _parse_values(args.values)
        seeds = _parse_seeds(args.seeds)
        records, summary, aggregates = run_sweep(load_config(args.config),
                                                 args.vary, values, seeds)
        for row in aggregates:
            print(f"{row['vary']}={row['value']}: detection_rate={row['detection_rate']:.2f} "
                  f"runs={row['runs']} mean_final_mse={row['mean_final_mse']}")
        if args.out:
            for path in emit_sweep(records, summary, aggregates, args.out,
                                   figures=not args.no_figures):
                print(f"wrote {path}")
        return 0

    if args.command == "calibrate":
        cfg = load_config(args.config)
        resolved = resolve(cfg)
        if args.what == "bounds":
            print(json.dumps({
                "model": list(resolved.bounds.model_bound),
                "grad": list(resolved.bounds.grad_bound),
            }))
        else:
            runs = honest_calibration_runs(resolved, int(cfg.get("calibration", {}).get("runs", 5)))
            gamma_max = calibrate_gamma_max(runs, resolved.delta, resolved.epsilon)
            print(json.dumps({"gamma_max": gamma_max, "epsilon": resolved.epsilon}))
        return 0

    if args.command == "baseline":
        record = coordinate_median_baseline(load_config(args.config), seed=args.seed)
        print(f"baseline=coordinate_median seed={record.seed} "
              f"final_mse={record.final.get('final_mse')} "
              f"wall_clock={record.wall_clock:.2f}s")
        if args.out:
            for path in emit_metrics(record, args.out, figures=not args.no_figures):
                print(f"wrote {path}")
        return 0

    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
