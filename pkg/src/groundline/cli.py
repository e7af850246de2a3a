"""Command line entry point: ``groundline <stage> [options] [--dotted.key value ...]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from groundline._io import SchemaError, atomic_write_text
from groundline.config import ALIASES, PipelineConfig, default_config
from groundline.data_io import DATASET_KINDS, load_dataset
from groundline.gateway import GatewayError
from groundline.pipeline import (
    StageMissing,
    build_gateway,
    run_caption,
    run_debias,
    run_embed,
    run_eval,
    run_export_matrix,
    run_ground,
    work_path,
)

logger = logging.getLogger("groundline")

EXIT_OK, EXIT_FAILURE, EXIT_SCHEMA = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline config JSON")
    common.add_argument("--cache-dir", help="response cache directory")
    common.add_argument("--offline", action="store_true", help="use deterministic offline providers")
    common.add_argument("--seed", type=int, help="seed for offline providers")
    common.add_argument("--jobs", type=int, help="concurrent provider requests")
    common.add_argument("--matrix", type=Path, help="directory of imported {qid}.glsm matrices")
    common.add_argument("--out", type=Path, help="output path")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groundline",
        description="Zero-shot video temporal grounding pipeline.",
        epilog="Any config field can be overridden with --dotted.path VALUE, e.g. --scorer.alpha 0.3.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    sub.add_parser("debias", parents=[common], help="rephrase every query")
    sub.add_parser("caption", parents=[common], help="caption extracted frames")
    sub.add_parser("embed", parents=[common], help="warm the embedding cache")
    sub.add_parser("export-matrix", parents=[common], help="write similarity matrices")
    sub.add_parser("ground", parents=[common], help="predict segments and saliency")
    sweep = sub.add_parser("sweep", parents=[common], help="ground (and evaluate) over a parameter grid")
    sweep.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2,...")
    ev = sub.add_parser("eval", parents=[common], help="score a prediction file")
    ev.add_argument("--pred", type=Path, help="prediction JSONL (default: work_dir/predictions.jsonl)")
    ev.add_argument("--gt", type=Path, help="annotation file (default: dataset.annotation_path)")
    ev.add_argument("--kind", choices=DATASET_KINDS, help="annotation format of --gt")
    ev.add_argument("--grid", default="0.5:0.05:0.95", help="mAP IoU grid start:step:stop")
    ev.add_argument("--r1", default=None, help="comma-separated R1 thresholds")
    ev.add_argument("--strict", action="store_true", help="use IoU > m instead of >= m")
    init = sub.add_parser("init-config", parents=[common], help="print a default config")
    init.add_argument("--kind", choices=DATASET_KINDS, default="qvhighlights")
    return parser


def parse_overrides(extra: Sequence[str]) -> dict[str, str]:
    overrides: dict[str, str] = {}
    it = iter(extra)
    for token in it:
        if not token.startswith("--"):
            raise SystemExit(f"unexpected argument {token!r}")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise SystemExit(f"override {token} needs a value") from None
        overrides[key] = value
    return overrides


def _parse_sweep(items: Sequence[str]) -> list[tuple[str, list[str]]]:
    out = []
    for item in items:
        key, _, values = item.partition("=")
        if not values:
            raise SystemExit(f"--sweep expects KEY=V1,V2,..., got {item!r}")
        out.append((key, [v for v in values.split(",") if v]))
    return out


def load_config(args: argparse.Namespace, overrides: dict[str, str]) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else default_config()
    direct = {k: v for k, v in overrides.items() if "," not in v}
    for name, key in (("cache_dir", "cache_dir"), ("seed", "seed"), ("jobs", "jobs")):
        value = getattr(args, name, None)
        if value is not None:
            direct[key] = value
    return cfg.with_overrides(direct) if direct else cfg


def _run_sweep(cfg: PipelineConfig, args, grid: list[tuple[str, list[str]]]) -> int:
    if len(grid) != 1:
        raise SystemExit("exactly one swept key is supported per run")
    key, values = grid[0]
    gateway = None if args.matrix else build_gateway(cfg, args.offline)
    out_dir = args.out or work_path(cfg, "sweeps")
    records = None
    for value in values:
        sub_cfg = cfg.with_overrides({key: value})
        stem = f"predictions.{ALIASES.get(key, key)}={value}"
        pred = run_ground(sub_cfg, gateway, args.matrix, Path(out_dir) / f"{stem}.jsonl")
        print(pred)
        if records is None:
            records = load_dataset(cfg.dataset.kind, cfg.dataset.annotation_path, cfg.dataset.durations_path)
        if any(r.gt is not None for r in records):
            run_eval(pred, records, out=Path(out_dir) / f"{stem}.metrics.json")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = parse_overrides(extra)
    try:
        cfg = load_config(args, overrides)
        if args.command == "init-config":
            text = default_config(args.kind).dumps()
            if args.out:
                atomic_write_text(args.out, text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        if args.command == "eval":
            return _cmd_eval(cfg, args)
        sweeps = [(k, v.split(",")) for k, v in overrides.items() if "," in v]
        if args.command == "sweep" or (args.command == "ground" and sweeps):
            return _run_sweep(cfg, args, _parse_sweep(getattr(args, "sweep", [])) + sweeps)
        if args.command == "ground":
            gateway = None if args.matrix else build_gateway(cfg, args.offline)
            print(run_ground(cfg, gateway, args.matrix, args.out))
            return EXIT_OK
        gateway = build_gateway(cfg, args.offline)
        if args.command in ("debias", "caption"):
            runner = run_debias if args.command == "debias" else run_caption
            report = runner(cfg, gateway, args.out)
            for item, err in report.failures.items():
                print(f"FAILED {item}: {err}", file=sys.stderr)
            for path in report.written:
                print(path)
            if report.failures:
                print(f"{len(report.failures)} {args.command} failures", file=sys.stderr)
            return EXIT_OK if report.ok else EXIT_FAILURE
        elif args.command == "embed":
            print(f"{run_embed(cfg, gateway)} texts embedded")
        elif args.command == "export-matrix":
            print(f"{len(run_export_matrix(cfg, gateway, args.out))} matrices written")
        return EXIT_OK
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (StageMissing, GatewayError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def _cmd_eval(cfg: PipelineConfig, args) -> int:
    pred = args.pred or work_path(cfg, "predictions.jsonl")
    gt_path = args.gt or cfg.dataset.annotation_path
    if gt_path is None:
        raise ValueError("no ground truth given; pass --gt or set dataset.annotation_path")
    kind = args.kind or cfg.dataset.kind
    records = load_dataset(kind, gt_path, cfg.dataset.durations_path)
    r1 = [float(x) for x in args.r1.split(",")] if args.r1 else (
        (0.3, 0.5, 0.7) if kind == "charades" else (0.5, 0.7)
    )
    out = args.out or Path(pred).with_suffix(".metrics.json")
    report = run_eval(Path(pred), records, args.grid, r1, args.strict, out)
    print(report.format_table())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
