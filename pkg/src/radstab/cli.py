"""Command-line interface.

Usage: ``radstab <subcommand> --config <path> [overrides]``. Exit code 0
means success (possibly with per-case warnings); 2 means total failure.
``RADSTAB_THREADS`` caps stage parallelism (currently single-threaded;
the variable is accepted for forward compatibility).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import PipelineConfig, RunRecord
from .errors import RadstabError
from .radiomics import default_registry
from .volume_io import load_volume_any, write_raw

EXIT_OK = 0
EXIT_TOTAL_FAILURE = 2


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config) if args.config \
        else PipelineConfig()
    for key in ("manifest", "out_dir", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    return cfg


def _finish(cfg: PipelineConfig, stage: str, result: dict) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = RunRecord(config_hash=cfg.hash(),
                       registry_version=default_registry().version,
                       tool_version=pipeline.TOOL_VERSION)
    errors = result.get("errors", {})
    total_units = result.get("n_ok", result.get("n_rows",
                             result.get("n_cases", 1)))
    status = "ok" if not errors else (
        "failed" if not total_units else "partial")
    record.mark(stage, status)
    record.write(out / "run_log.json")
    summary = {k: v for k, v in result.items() if k != "errors"}
    print(json.dumps({"stage": stage, "status": status, **summary},
                     default=str))
    for key, msg in errors.items():
        print(f"warning: {key}: {msg}", file=sys.stderr)
    return EXIT_OK if status != "failed" else EXIT_TOTAL_FAILURE


def cmd_convert(args) -> int:
    vol = load_volume_any(args.input)
    write_raw(vol, args.output)
    print(json.dumps({"stage": "convert", "output": args.output,
                      "dims": list(vol.header.dims)}))
    return EXIT_OK


def cmd_phantom(args) -> int:
    cfg = _load_config(args)
    return _finish(cfg, "phantom", pipeline.stage_phantom(cfg))


def cmd_preprocess(args) -> int:
    cfg = _load_config(args)
    cases = pipeline.manifest_for(cfg)
    return _finish(cfg, "preprocess", pipeline.stage_preprocess(cfg, cases))


def cmd_segmetrics(args) -> int:
    cfg = _load_config(args)
    cases = pipeline.manifest_for(cfg)
    return _finish(cfg, "segmetrics", pipeline.stage_segmetrics(cfg, cases))


def cmd_radiomics(args) -> int:
    cfg = _load_config(args)
    cases = pipeline.manifest_for(cfg)
    return _finish(cfg, "radiomics", pipeline.stage_radiomics(cfg, cases))


def cmd_stability(args) -> int:
    cfg = _load_config(args)
    sources = args.models
    if not sources:
        cases = pipeline.manifest_for(cfg)
        sources = sorted({m for c in cases for m in c.model_masks})
    return _finish(cfg, "stability", pipeline.stage_stability(cfg, sources))


def cmd_predict(args) -> int:
    cfg = _load_config(args)
    cases = pipeline.manifest_for(cfg)
    return _finish(cfg, "predict", pipeline.stage_predict(cfg, cases))


def cmd_ratings(args) -> int:
    cfg = _load_config(args)
    return _finish(cfg, "ratings", pipeline.stage_ratings(cfg, args.ratings))


def cmd_registry(args) -> int:
    print(json.dumps(default_registry().to_json_dict(), indent=2))
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    result = pipeline.stage_verify(cfg)
    print(json.dumps(result, indent=2))
    return EXIT_OK if result["ok"] else EXIT_TOTAL_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radstab",
        description="Segmentation trustworthiness evaluation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--manifest", help="case manifest path override")
        p.add_argument("--out-dir", dest="out_dir",
                       help="output directory override")
        p.add_argument("--seed", type=int, help="seed override")

    p = sub.add_parser("convert", help="NIfTI -> internal raw format")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_convert)

    for name, func, extra in [
            ("phantom", cmd_phantom, None),
            ("preprocess", cmd_preprocess, None),
            ("segmetrics", cmd_segmetrics, None),
            ("radiomics", cmd_radiomics, None),
            ("stability", cmd_stability, "models"),
            ("predict", cmd_predict, None),
            ("ratings", cmd_ratings, "ratings"),
            ("verify", cmd_verify, None)]:
        p = sub.add_parser(name)
        common(p)
        if extra == "models":
            p.add_argument("--models", nargs="*", default=None,
                           help="mask sources to compare against GT")
        if extra == "ratings":
            p.add_argument("--ratings", required=True,
                           help="CSV with header rater,model,question,score")
        p.set_defaults(func=func)

    p = sub.add_parser("registry", help="print the feature registry")
    p.set_defaults(func=cmd_registry)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RadstabError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TOTAL_FAILURE


if __name__ == "__main__":
    sys.exit(main())
