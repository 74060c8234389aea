"""Command-line entry point.

Subcommands: ``gen`` (dataset to disk), ``train`` (model files), ``eval``
(verdicts and report table), ``sweep`` (all three end to end), and
``audit-directionality`` (feature-direction diagnostic). Failures exit
nonzero with a machine-readable JSON error on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .actors import DatasetPaths, generate_dataset
from .config import ConfigError, ExperimentConfig
from .pipeline import (
    ModelPaths,
    audit_directionality_run,
    evaluate_models,
    run_sweep,
    train_models,
)
from .stego import SYSTEMS


def _add_common(parser):
    parser.add_argument("--config", type=Path, help="experiment config JSON")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--threshold", type=float, help="override the reject threshold")
    parser.add_argument(
        "--csm", type=str, help="comma-separated CSM sweep points, e.g. 0,25,50,75,100"
    )
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--scale", type=float, help="scale factor for actor counts")


def _parse_csm(text):
    try:
        return tuple(int(v) for v in text.split(",") if v != "")
    except ValueError:
        raise ConfigError(f"cannot parse --csm value {text!r}") from None


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.from_json_file(args.config)
    else:
        cfg = ExperimentConfig.default()
    overrides = {}
    if args.seed is not None:
        # A fresh master seed re-derives the default sources as well.
        if args.config is None:
            cfg = ExperimentConfig.default(master_seed=args.seed)
        else:
            overrides["master_seed"] = args.seed
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    if getattr(args, "csm", None):
        overrides["csm_sweep"] = _parse_csm(args.csm)
    if args.scale is not None:
        overrides["scale"] = args.scale
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    return cfg.with_overrides(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actorsteg",
        description="Actor-based steganalysis with a cover-source-mismatch reject option.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate the dataset (images + manifests)")
    _add_common(p)

    p = sub.add_parser("train", help="train image and actor models")
    _add_common(p)
    p.add_argument("--dataset", type=Path, required=True, help="dataset directory from gen")

    p = sub.add_parser("eval", help="evaluate trained models over the sweep")
    _add_common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True)

    p = sub.add_parser("sweep", help="gen + train + eval in one run")
    _add_common(p)

    p = sub.add_parser("audit-directionality", help="feature directionality diagnostic")
    _add_common(p)
    p.add_argument("--covers", type=int, default=200)
    p.add_argument("--system", type=str, default="lsb_matching", choices=SYSTEMS)
    p.add_argument("--payload", type=float, default=0.4)

    return parser


def _run(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.out_dir)
    if args.command == "gen":
        ds = generate_dataset(cfg, out)
        print(json.dumps({"dataset": str(ds.root), "train_manifest": str(ds.train_manifest)}))
    elif args.command == "train":
        ds = DatasetPaths.from_dir(args.dataset)
        models = train_models(cfg, ds, out)
        print(json.dumps({"models": str(models.root)}))
    elif args.command == "eval":
        ds = DatasetPaths.from_dir(args.dataset)
        models = ModelPaths.from_dir(args.models)
        csm_points = _parse_csm(args.csm) if args.csm else None
        report = evaluate_models(cfg, ds, models, out, csm_points=csm_points)
        print(json.dumps(report, sort_keys=True))
    elif args.command == "sweep":
        report = run_sweep(cfg, out)
        print(json.dumps(report, sort_keys=True))
    elif args.command == "audit-directionality":
        result = audit_directionality_run(
            cfg, n_covers=args.covers, system=args.system, payload_bpp=args.payload
        )
        doc = json.dumps(result, sort_keys=True)
        if args.out is not None:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(doc + "\n")
        print(doc)
    else:  # pragma: no cover - argparse enforces the choices
        raise ConfigError(f"unknown command {args.command!r}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports all failures
        err = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(err), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
