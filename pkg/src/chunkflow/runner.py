"""Command-line surface: train / transfer / report / inspect-library / parse.

The default output root comes from the CHUNKFLOW_OUT environment variable
(falling back to ./runs). Every run is single-threaded and fully
deterministic for a given (config, seed).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import parse_config
from .metrics import min_parse_tokens
from .trainers import run_training


def _default_out(cfg) -> str:
    root = os.environ.get("CHUNKFLOW_OUT", "runs")
    return str(Path(root) / f"{cfg.env}-{cfg.sampler}-{cfg.chunker}-seed{cfg.seed}")


def cmd_train(args) -> int:
    cfg = parse_config(args.config, args.overrides)
    if not cfg.out_dir:
        cfg.out_dir = _default_out(cfg)
    out = run_training(cfg)
    print(f"run complete: {out['out_dir']}  modes={out['modes']}  "
          f"library_size={out['library_size']}")
    return 0


def cmd_transfer(args) -> int:
    overrides = list(args.overrides)
    overrides.append(f"--init_library={args.snapshot}")
    if not any(o.startswith("--freeze_library") for o in overrides):
        overrides.append("--freeze_library=true")
    cfg = parse_config(args.config, overrides)
    if not cfg.out_dir:
        cfg.out_dir = _default_out(cfg) + "-transfer"
    out = run_training(cfg)
    print(f"transfer run complete: {out['out_dir']}  modes={out['modes']}")
    return 0


def _load_metrics(run_dir: Path) -> list[dict]:
    path = run_dir / "metrics.jsonl"
    if not path.exists():
        raise FileNotFoundError(f"{run_dir} has no metrics.jsonl")
    return [json.loads(line) for line in path.read_text().splitlines()]


def _write_curve(rows_by_run, field, out_path):
    """Aggregate one metric across runs into iteration,mean,sd CSV."""
    lengths = {len(r) for r in rows_by_run}
    if len(lengths) != 1:
        raise ValueError("runs have different lengths; cannot aggregate")
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "visited_states", f"{field}_mean", f"{field}_sd"])
        for i in range(lengths.pop()):
            vals = np.array([float(r[i][field]) for r in rows_by_run])
            w.writerow([
                rows_by_run[0][i]["iteration"],
                rows_by_run[0][i]["visited_states"],
                float(vals.mean()),
                float(vals.std()),
            ])


def cmd_report(args) -> int:
    run_dirs = [Path(d) for d in args.run_dirs]
    rows_by_run = [_load_metrics(d) for d in run_dirs]
    out = Path(args.out or run_dirs[0] / "report")
    out.mkdir(parents=True, exist_ok=True)
    for field, name in (
        ("modes_cumulative", "mode_curve.csv"),
        ("loss", "loss_curve.csv"),
        ("logZ", "logz_curve.csv"),
        ("library_size", "library_size_curve.csv"),
    ):
        _write_curve(rows_by_run, field, out / name)

    histogram: dict[str, int] = {}
    for d in run_dirs:
        usage_path = d / "chunk_usage.json"
        if usage_path.exists():
            for k, v in json.loads(usage_path.read_text()).items():
                histogram[k] = histogram.get(k, 0) + v
    with open(out / "chunk_usage_histogram.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["chunk", "usage_count"])
        for k in sorted(histogram, key=lambda k: -histogram[k]):
            w.writerow([k, histogram[k]])
    print(f"report written to {out}")
    return 0


def cmd_inspect_library(args) -> int:
    snap = json.loads(Path(args.snapshot).read_text())
    atoms = snap["atomic_names"]
    print(f"atomic actions ({len(atoms)}): {' '.join(atoms)}")
    chunks = snap.get("chunks", [])
    print(f"chunks ({len(chunks)}):")
    for c in chunks:
        added = c.get("added_at_iteration")
        suffix = f"  [added at iteration {added}]" if added is not None else ""
        print(f"  {''.join(c['expansion'])}{suffix}")
    return 0


def cmd_parse(args) -> int:
    snap = json.loads(Path(args.snapshot).read_text())
    atoms = snap["atomic_names"]
    tokens = [a for a in atoms if not a.startswith("<")]  # drop terminal markers
    tokens += ["".join(c["expansion"]) for c in snap.get("chunks", [])]
    for line in Path(args.objects_file).read_text().splitlines():
        obj = line.strip()
        if not obj:
            continue
        try:
            n = min_parse_tokens(tokens, obj)
        except AssertionError:
            print(f"{obj}\tUNPARSEABLE")
            continue
        print(f"{obj}\t{n}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="chunkflow",
        description="Train amortized samplers whose action space grows by chunking.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one training configuration")
    t.add_argument("config", nargs="?", default=None,
                   help="key=value config file (omit to use pure defaults)")
    t.add_argument("overrides", nargs="*", default=[],
                   help="--key=value overrides")
    t.set_defaults(func=cmd_train)

    tr = sub.add_parser("transfer", help="train with a frozen pre-learned library")
    tr.add_argument("snapshot", help="library snapshot JSON")
    tr.add_argument("config", nargs="?", default=None)
    tr.add_argument("overrides", nargs="*", default=[])
    tr.set_defaults(func=cmd_transfer)

    r = sub.add_parser("report", help="aggregate metrics across run directories")
    r.add_argument("run_dirs", nargs="+")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_report)

    il = sub.add_parser("inspect-library", help="print a library snapshot")
    il.add_argument("snapshot")
    il.set_defaults(func=cmd_inspect_library)

    pp = sub.add_parser("parse", help="shortest-parse objects under a snapshot")
    pp.add_argument("snapshot")
    pp.add_argument("objects_file")
    pp.set_defaults(func=cmd_parse)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if extra:
        if not hasattr(args, "overrides") or not all(
            e.startswith("--") and "=" in e for e in extra
        ):
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        args.overrides = list(args.overrides) + extra
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
