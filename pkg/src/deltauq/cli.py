"""Command-line front end: ``deltauq run|validate|report``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .exceptions import ConfigError
from .experiments import resolve_params, run_experiment

log = logging.getLogger("deltauq")

OUT_ENV = "DELTAUQ_OUT"
EXIT_OK, EXIT_FAILED_SEEDS, EXIT_BAD_CONFIG = 0, 1, 2

__all__ = ["main", "run_config", "aggregate", "write_tables", "resolve_out_dir"]


def _run_seed(experiment, index, seed, params):
    t0 = time.perf_counter()
    try:
        res = run_experiment(experiment, seed, params)
    except Exception as exc:  # reported per seed, the others still run
        return {
            "index": index,
            "seed": seed,
            "ok": False,
            "error": f"{type(exc).__name__}: {exc}",
            "traceback": traceback.format_exc(),
            "wall_clock": time.perf_counter() - t0,
        }
    return {
        "index": index,
        "seed": seed,
        "ok": True,
        "metrics": res.metrics,
        "errors": res.errors,
        "tables": res.tables,
        "extra": res.extra,
        "wall_clock": time.perf_counter() - t0,
    }


def aggregate(per_seed) -> dict:
    """Mean and sample standard deviation of every metric over successful seeds."""
    values = {}
    for entry in per_seed:
        for k, v in entry.get("metrics", {}).items():
            values.setdefault(k, []).append(v)
    out = {}
    for k, vs in values.items():
        a = np.asarray(vs, dtype=float)
        ok = a[np.isfinite(a)]
        out[k] = {
            "mean": float(ok.mean()) if ok.size else float("nan"),
            "sd": float(ok.std(ddof=1)) if ok.size > 1 else 0.0,
            "n": int(ok.size),
        }
    return out


def _slug(value) -> str:
    return "".join(c if c.isalnum() or c in "-." else "-" for c in str(value)).strip("-")


def write_tables(per_seed, out_dir) -> list:
    """Write plot-data CSVs; rows of every seed are stacked with a ``seed`` column.

    String-valued fields become part of the file name so that every written
    file is purely numeric.
    """
    groups = {}
    for entry in per_seed:
        for name, rows in entry.get("tables", {}).items():
            for row in rows:
                tags = tuple(_slug(v) for v in row.values() if isinstance(v, str))
                nums = {k: v for k, v in row.items() if not isinstance(v, str)}
                groups.setdefault((name, tags), []).append({"seed": entry["seed"], **nums})
    written = []
    for (name, tags), rows in sorted(groups.items()):
        path = Path(out_dir) / ("_".join([name, *tags]) + ".csv")
        header = list(dict.fromkeys(k for r in rows for k in r))
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(r.get(k, float("nan"))) for k in header])
        written.append(path.name)
    return written


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return repr(float(v))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def resolve_out_dir(cli_out, cfg) -> Path:
    """``--out`` beats the environment variable, which beats the config's ``out``."""
    if cli_out:
        return Path(cli_out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if cfg.get("out"):
        return Path(cfg["out"])
    return Path("runs") / cfg["experiment"]


def run_config(cfg: dict, out_dir, parallel: int = 1) -> tuple[dict, int]:
    """Run every seed of a validated config and write the report to ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiment = cfg["experiment"]
    params = cfg.get("params", {})
    seeds = [int(s) for s in cfg["seeds"]]
    t0 = time.perf_counter()
    jobs = [(experiment, i, s, params) for i, s in enumerate(seeds)]
    if parallel > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [pool.submit(_run_seed, *job) for job in jobs]
            results = [f.result() for f in futures]
    else:
        results = []
        for job in jobs:
            log.info("%s: seed %d (%d/%d)", experiment, job[2], job[1] + 1, len(jobs))
            results.append(_run_seed(*job))
    wall = time.perf_counter() - t0

    ok = [r for r in results if r["ok"]]
    failed = [r for r in results if not r["ok"]]
    for r in failed:
        log.error("seed index %d (seed %d) failed: %s", r["index"], r["seed"], r["error"])
    tables = write_tables(ok, out_dir)
    for r in ok:
        if "mbo_result" in r["extra"]:
            path = out_dir / f"mbo_seed{r['seed']}.json"
            path.write_text(json.dumps(_jsonable(r["extra"]["mbo_result"]), indent=2),
                            encoding="utf-8")
    report = {
        "experiment": experiment,
        "version": __version__,
        "config": cfg,
        "resolved_params": resolve_params(experiment, params),
        "rng": {
            "bit_generator": "PCG64",
            "numpy_version": np.__version__,
            "seeds": seeds,
            "note": "every random stream is derived from numpy.random.default_rng(seed + offset)",
        },
        "wall_clock_seconds": wall,
        "per_seed": [
            {k: r[k] for k in ("index", "seed", "wall_clock", "metrics", "errors") if k in r}
            for r in ok
        ],
        "failures": [{k: r[k] for k in ("index", "seed", "error")} for r in failed],
        "aggregate": aggregate(ok),
        "tables": tables,
    }
    (out_dir / "report.json").write_text(json.dumps(_jsonable(report), indent=2),
                                         encoding="utf-8")
    return report, EXIT_FAILED_SEEDS if failed else EXIT_OK


def format_report(report: dict) -> str:
    lines = [
        f"experiment: {report['experiment']}  (deltauq {report['version']})",
        f"seeds: {report['rng']['seeds']}  wall clock: {report['wall_clock_seconds']:.1f} s",
    ]
    agg = report.get("aggregate", {})
    if agg:
        width = max(len(k) for k in agg)
        lines.append("")
        for k, s in agg.items():
            mean = "nan" if s["mean"] is None else f"{s['mean']:.4f}"
            lines.append(f"  {k:<{width}}  {mean} ± {s['sd']:.4f}  (n={s['n']})")
    for entry in report.get("per_seed", []):
        for err in entry.get("errors", []):
            lines.append(f"  seed {entry['seed']}: {err}")
    for f in report.get("failures", []):
        lines.append(f"  FAILED seed index {f['index']} (seed {f['seed']}): {f['error']}")
    if report.get("tables"):
        lines.append("")
        lines.append("plot data: " + ", ".join(report["tables"]))
    return "\n".join(lines)


def _parser():
    p = argparse.ArgumentParser(prog="deltauq", description="Anchored uncertainty experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
    run.add_argument("--parallel", type=int, default=1, help="seeds to run concurrently")
    run.add_argument("--quiet", action="store_true")
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    val.add_argument("--quiet", action="store_true")
    rep = sub.add_parser("report", help="pretty-print report.json from a run directory")
    rep.add_argument("dir")
    rep.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    if args.command == "report":
        path = Path(args.dir) / "report.json"
        if not path.is_file():
            print(f"error: no report.json in {args.dir}", file=sys.stderr)
            return EXIT_BAD_CONFIG
        print(format_report(json.loads(path.read_text(encoding="utf-8"))))
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    if args.command == "validate":
        if not args.quiet:
            print(f"{args.config}: ok ({cfg['experiment']}, {len(cfg['seeds'])} seeds)")
        return EXIT_OK
    if args.parallel < 1:
        print("error: --parallel must be >= 1", file=sys.stderr)
        return EXIT_BAD_CONFIG
    out_dir = resolve_out_dir(args.out, cfg)
    report, code = run_config(cfg, out_dir, args.parallel)
    if not args.quiet:
        print(format_report(report))
        print(f"\nreport written to {out_dir / 'report.json'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
