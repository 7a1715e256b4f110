"""Command-line front end.

    wetbeam simulate --config scenario.toml --scheme STAT_MULTI --trials 10000 --out runs/a
    wetbeam sweep --param rotation --values 0:180:2 --scheme AA,STAT_MULTI --out runs/b
    wetbeam selfcheck --trials 10000

Without ``--config`` the three-cluster operating point is used.  A run
manifest (``manifest.json``) is itself a valid ``--config``; flags left out
are then taken from it, so re-running a manifest reproduces its outputs
byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, cluster_angles, config_to_dict, load_config, operating_point_config
from .precoding import Scheme
from .selfcheck import REFERENCE_TRIALS, run_selfcheck
from .simulation import SWEEP_PARAMETERS, AllInfeasibleError, run_trials, summarize, sweep

log = logging.getLogger(__name__)

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_SELFCHECK = 0, 1, 2, 3, 4, 5


def fmt(v):
    """17 significant digits: enough for a lossless double round trip."""
    return format(float(v), ".17g")


def parse_schemes(text):
    try:
        return [Scheme.parse(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_values(text):
    """``a,b,c`` or an inclusive range ``start:stop:step``."""
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            vals = [start + i * step for i in range(n)]
        else:
            vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"bad value list {text!r}; use 'a,b,c' or 'start:stop:step'") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty value list")
    return [int(v) if float(v).is_integer() else v for v in vals]


def _positive_int(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="wetbeam", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="TOML scenario or run manifest (.json)")
        sp.add_argument("--scheme", type=parse_schemes, help="scheme or comma-separated list")
        sp.add_argument("--trials", type=_positive_int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", type=Path, default=Path("."))
        sp.add_argument("--parallel", type=_positive_int, default=1, help="worker processes")

    sim = sub.add_parser("simulate", help="Monte Carlo run at one configuration")
    common(sim)
    sw = sub.add_parser("sweep", help="Monte Carlo runs over one parameter")
    common(sw)
    sw.add_argument("--param", choices=SWEEP_PARAMETERS)
    sw.add_argument("--values", type=parse_values)

    sc = sub.add_parser("selfcheck", help="validate the simulator against closed-form laws")
    sc.add_argument("--trials", type=_positive_int, default=REFERENCE_TRIALS)
    sc.add_argument("--seed", type=int, default=1)
    sc.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return p


def _resolve(args, parser):
    """Config plus run settings, filling gaps from a manifest when given one."""
    manifest = {}
    if args.config is None:
        cfg = operating_point_config()
    else:
        cfg = load_config(args.config)
        if args.config.suffix == ".json":
            manifest = json.loads(args.config.read_text(encoding="utf-8"))
    if args.scheme is None:
        args.scheme = [Scheme.parse(s) for s in manifest.get("schemes", ["STAT_MULTI"])]
    if args.trials is None:
        args.trials = int(manifest.get("trials", REFERENCE_TRIALS))
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.command == "sweep":
        if args.param is None:
            args.param = manifest.get("param")
        if args.values is None and "values" in manifest:
            args.values = manifest["values"]
        if args.param is None or args.values is None:
            parser.error("sweep needs --param and --values")
    return cfg


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _manifest(cfg, args, outputs, started, **extra):
    return {
        "tool": "wetbeam",
        "version": __version__,
        "command": args.command,
        "config": config_to_dict(cfg),
        "schemes": [s.value for s in args.scheme],
        "trials": args.trials,
        "seed": cfg.seed,
        **extra,
        "outputs": [str(p) for p in outputs],
        "duration_s": round(time.perf_counter() - started, 3),
    }


def cmd_simulate(args, cfg):
    started = time.perf_counter()
    args.out.mkdir(parents=True, exist_ok=True)
    L = cfg.num_clusters
    header = ["trial", "sum_power_w", "harvested_w"] + [f"cluster_{l}_w" for l in range(L)]
    outputs, summaries, status = [], {}, EXIT_OK
    for scheme in args.scheme:
        recs = run_trials(cfg, None, scheme, args.trials, parallel=args.parallel)
        path = args.out / f"samples_{scheme.value}.csv"
        _write_csv(path, header + ["status"], (
            [r.trial, fmt(r.sum_power_rf), fmt(r.sum_power_harvested), *map(fmt, r.per_cluster_rf), r.status]
            for r in recs))
        outputs.append(path)
        try:
            s = summarize(recs)
        except AllInfeasibleError as exc:
            log.error("%s: %s", scheme.value, exc)
            summaries[scheme.value] = {"error": str(exc), "infeasible": len(recs)}
            status = EXIT_INFEASIBLE
            continue
        summaries[scheme.value] = s.to_dict()
        print(f"{scheme.value}: mean {s.mean:.6g} W, variance {s.variance:.6g} W^2, "
              f"{s.count} trials, {s.infeasible} infeasible")
    path = args.out / "summary.json"
    _write_json(path, summaries)
    outputs.append(path)
    _write_json(args.out / "manifest.json", _manifest(cfg, args, outputs, started))
    return status


def cmd_sweep(args, cfg):
    started = time.perf_counter()
    args.out.mkdir(parents=True, exist_ok=True)
    rows, long_rows, failures = [], [], []
    for scheme in args.scheme:
        for value, res in sweep(cfg, None, scheme, args.param, args.values, args.trials,
                                parallel=args.parallel):
            angles = ""
            if args.param == "clusters" and not isinstance(res, Exception):
                angles = ";".join(fmt(a) for a in cluster_angles(int(value)))
            if isinstance(res, Exception):
                failures.append(res)
                rows.append([value, scheme.value, "", "", 0, "", angles, str(res)])
                continue
            rows.append([value, scheme.value, fmt(res.mean), fmt(res.variance), res.count,
                         res.infeasible, angles, ""])
            metrics = [("mean_w", res.mean), ("variance_w2", res.variance),
                       ("harvested_mean_w", res.harvested_mean)]
            metrics += [(f"cluster_{l}_mean_w", m) for l, m in enumerate(res.per_cluster_mean)]
            long_rows += [[args.param, value, scheme.value, name, fmt(v)] for name, v in metrics]
    outputs = [args.out / "sweep.csv", args.out / "sweep_long.csv"]
    _write_csv(outputs[0], ["value", "scheme", "mean_w", "variance_w2", "count", "infeasible",
                            "angles_deg", "error"], rows)
    _write_csv(outputs[1], ["parameter", "value", "scheme", "metric", "metric_value"], long_rows)
    _write_json(args.out / "manifest.json", _manifest(cfg, args, outputs, started, param=args.param,
                                                       values=list(args.values)))
    if len(failures) == len(rows):
        if all(isinstance(e, AllInfeasibleError) for e in failures):
            return EXIT_INFEASIBLE
        return EXIT_CONFIG
    return EXIT_OK


def cmd_selfcheck(args):
    scale = -1.0 if args.inject_fault else None
    results, wide = run_selfcheck(args.trials, args.seed, scale)
    if wide:
        print(f"wide-tolerance mode: {args.trials} < {REFERENCE_TRIALS} trials")
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"selfcheck failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_SELFCHECK
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "selfcheck":
            return cmd_selfcheck(args)
        cfg = _resolve(args, parser)
        if args.command == "simulate":
            return cmd_simulate(args, cfg)
        return cmd_sweep(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
