"""Command-line front end: run experiments, sweeps, and the ablation grid.

Commands:
  run       one configured arm over the given seeds, CSVs + manifest
  sweep     alias of run for multi-seed sweeps
  ablation  the 2x2 grid (batch: fixed|dynamic) x (rate: fixed|adaptive)
  validate  resolve a config and print the precondition report

Output CSVs carry a ``# key = value`` metadata header that round-trips to
the exact configuration, then rows ``t,mean,se,lo95,hi95``.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

from .config import (
    BATCH_DYNAMIC,
    BATCH_FIXED,
    RATE_ADAPTIVE,
    RATE_FIXED,
    ExperimentConfig,
    PRESET_NAMES,
    apply_flat_overrides,
    config_to_flat,
    make_preset,
    parse_config_file,
    parse_seed_spec,
    run_notes,
    validate_config,
)
from .core import ParameterError, UsageError
from .harness import (
    OracleUndefinedError,
    aggregate_series,
    csv_metadata,
    precompute_oracles,
    seed_sweep,
    write_raw_csv,
    write_series_csv,
)
from .schedule import validate_stability_precondition

ENV_OUTDIR = "DBAR_OUTDIR"

ABLATION_ARMS = (
    (BATCH_DYNAMIC, RATE_ADAPTIVE),
    (BATCH_FIXED, RATE_ADAPTIVE),
    (BATCH_DYNAMIC, RATE_FIXED),
    (BATCH_FIXED, RATE_FIXED),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbar", description="Online bandit controller-selection experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep", "ablation", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--preset", choices=PRESET_NAMES, help="named parameter set")
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seeds", help='seed list, e.g. "7", "1,4,9", "1..100"')
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--outdir", help=f"output directory (default ${ENV_OUTDIR} or .)")
        p.add_argument("--mode", choices=("alg1", "alg2", "alg3"))
        p.add_argument("--batch", choices=(BATCH_FIXED, BATCH_DYNAMIC))
        p.add_argument("--rate", choices=(RATE_FIXED, RATE_ADAPTIVE))
        p.add_argument("--switch-cost", type=float, dest="switch_cost")
        p.add_argument("--raw", action="store_true", help="also emit per-seed CSVs")
        p.add_argument(
            "--no-regret",
            action="store_true",
            help="skip the oracle and regret CSVs (stability only)",
        )
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override any config key",
        )
    return parser


def resolve_config(args) -> ExperimentConfig:
    """Preset -> config file -> flag overrides, then validate and annotate."""
    if args.preset:
        cfg = make_preset(args.preset)
    elif args.config:
        cfg = ExperimentConfig()
    else:
        raise UsageError("preset/config: provide --preset or --config")
    if args.config:
        if not os.path.exists(args.config):
            raise UsageError(f"config: file not found: {args.config}")
        apply_flat_overrides(cfg, parse_config_file(args.config))
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set: expected KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key.strip()] = val
    for attr in ("mode", "batch", "rate", "switch_cost"):
        val = getattr(args, attr, None)
        if val is not None:
            setattr(cfg, attr, val)
    if overrides:
        apply_flat_overrides(cfg, overrides)
    if args.seeds:
        cfg.seeds = parse_seed_spec(args.seeds)
    validate_config(cfg)
    cfg.notes = run_notes(cfg)
    return cfg


def print_precondition_report(cfg: ExperimentConfig) -> None:
    report = validate_stability_precondition(cfg._dynamic_schedule(), cfg.build_beta())
    delta, notes = cfg.resolve_delta()
    print(f"preset {cfg.preset}: tau0={report.tau0}, tau1={report.tau1}, delta={delta:.6g}")
    print(f"  {report.summary()}")
    for note in notes:
        print(f"  note: {note}")


def _outdir(args) -> Path:
    out = args.outdir or os.environ.get(ENV_OUTDIR) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _emit_arm(cfg, outcomes, outdir, raw, with_regret) -> list[Path]:
    files = []
    slug = cfg.arm_slug()
    metrics = ["stability"] + (["regret"] if with_regret else [])
    for metric in metrics:
        if metric == "regret" and all(o.regret is None for o in outcomes):
            reason = (
                "oracle undefined (no envelope-eligible controller)"
                if any(o.oracle_undefined for o in outcomes)
                else "no completed episode"
            )
            print(f"  regret CSV skipped for {slug}: {reason}")
            continue
        agg = aggregate_series(outcomes, metric)
        path = outdir / f"{metric}_{slug}.csv"
        write_series_csv(path, csv_metadata(cfg, metric, agg), agg)
        files.append(path)
    if raw:
        for out in outcomes:
            path = outdir / f"raw_{slug}_seed{out.seed}.csv"
            meta = dict(config_to_flat(cfg))
            meta["metric"] = "raw"
            meta["seed"] = str(out.seed)
            write_raw_csv(path, meta, out)
            files.append(path)
    return files


def _print_arm_table(cfg, outcomes) -> None:
    print(f"arm: {cfg.arm_label()}")
    for out in outcomes:
        marker = "" if out.result.completed else f"  [{out.result.outcome}]"
        print(f"  seed {out.seed}: {out.report.summary()}{marker}")


def _run_command(args, ablation: bool) -> int:
    cfg = resolve_config(args)
    print_precondition_report(cfg)
    outdir = _outdir(args)
    with_regret = not args.no_regret
    arms = ABLATION_ARMS if ablation else ((cfg.batch, cfg.rate),)
    # the oracle depends only on the seed's noise path, not the arm
    oracles = precompute_oracles(cfg, cfg.seeds) if with_regret else None
    all_files = []
    for batch, rate in arms:
        arm_cfg = dataclasses.replace(cfg, batch=batch, rate=rate)
        outcomes = seed_sweep(
            arm_cfg, cfg.seeds, with_regret=with_regret, jobs=args.jobs, oracles=oracles
        )
        _print_arm_table(arm_cfg, outcomes)
        all_files.extend(_emit_arm(arm_cfg, outcomes, outdir, args.raw, with_regret))
    manifest = {
        "config": config_to_flat(cfg),
        "outdir": str(outdir),
        "files": [
            {"name": f.name, "sha256": _sha256(f)} for f in sorted(all_files)
        ],
    }
    manifest_path = outdir / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(all_files)} files + manifest to {outdir}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            cfg = resolve_config(args)
            print_precondition_report(cfg)
            return 0
        if args.command in ("run", "sweep"):
            return _run_command(args, ablation=False)
        if args.command == "ablation":
            return _run_command(args, ablation=True)
    except (UsageError, ParameterError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OracleUndefinedError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
