"""Command-line entry point.

Exit codes: 0 success, 1 partial failure (some clips failed, or an
evaluation/validation error), 2 invalid configuration or arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


def _cmd_generate(args) -> int:
    from .config import ConfigError, load_config
    from .pipeline import PipelineError, run_pipeline

    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.workers, args.output)
        cfg.validate()
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run_pipeline(cfg, overwrite=args.overwrite)
    except (ConfigError, PipelineError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if manifest.failed:
        print(f"{len(manifest.failed)} clip(s) failed; see manifest.json", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _write_report(report: dict, path) -> None:
    text = json.dumps(report, indent=1, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def _cmd_evaluate(args) -> int:
    from . import evaluation as ev
    from .dataset import read_coco

    report = {"ap": None, "fid": None, "kid": None, "config": {"metric": args.metric}}
    try:
        if args.metric == "ap":
            table = ev.evaluate_coco_ap(read_coco(args.gt), read_coco(args.pred),
                                        args.thresholds, args.ref_size)
            report["ap"] = {f"{t:g}": v for t, v in table.items()}
            report["config"].update(gt=str(args.gt), pred=str(args.pred),
                                    thresholds=list(args.thresholds), ref_size=args.ref_size)
        else:
            a, b = ev.load_embeddings(args.real), ev.load_embeddings(args.fake)
            report["config"].update(real=str(args.real), fake=str(args.fake), n_real=a.n, n_fake=b.n, d=a.d)
            if args.metric == "fid":
                report["fid"] = ev.fid(a, b)
            else:
                block = args.block or ev.default_block(a, b)
                mean, se = ev.kid_with_error(a, b, block)
                report["kid"] = mean
                report["kid_std_error"] = None if se != se else se
                report["config"]["block"] = block
    except (OSError, KeyError, json.JSONDecodeError, ev.EvaluationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARTIAL
    _write_report(report, args.report)
    return EXIT_OK


def _cmd_summarize(args) -> int:
    from .dataset import DatasetManifest, format_summary, summarize_dataset

    try:
        manifest = DatasetManifest.load(args.manifest)
    except (OSError, json.JSONDecodeError, TypeError, KeyError) as e:
        print(f"error: cannot read manifest: {e}", file=sys.stderr)
        return EXIT_CONFIG
    rows, total = summarize_dataset(manifest)
    print(format_summary(rows, total))
    return EXIT_OK


def _cmd_validate_asset(args) -> int:
    from .assets import AssetError, load_asset

    try:
        a = load_asset(args.file)
    except (OSError, AssetError, ValueError) as e:
        print(f"invalid: {e}", file=sys.stderr)
        return EXIT_PARTIAL
    print(f"ok: {a.n_gaussians} gaussians, sh degree {a.sh_degree}, skeleton {a.skeleton_id} "
          f"({a.skeleton.n_joints} joints)")
    return EXIT_OK


def _cmd_make_demo(args) -> int:
    from .demo import make_demo

    path = make_demo(args.dir, n_gaussians=args.gaussians, n_frames=args.frames, size=args.size,
                     clips=args.clips, seed=args.seed)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splatgen", description="Synthetic pose-dataset generator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a dataset from a YAML run config")
    g.add_argument("--config", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int, help="clip-level worker threads (0 = auto)")
    g.add_argument("--output", help="override output_dir")
    g.add_argument("--overwrite", action="store_true", help="replace an existing dataset")
    g.set_defaults(func=_cmd_generate)

    e = sub.add_parser("evaluate", help="AP / FID / KID metrics")
    e.add_argument("metric", choices=("ap", "fid", "kid"))
    e.add_argument("--gt", help="COCO-style ground truth (ap)")
    e.add_argument("--pred", help="COCO-style predictions or results list (ap)")
    e.add_argument("--thresholds", type=float, nargs="+", default=[5.0, 10.0, 15.0])
    e.add_argument("--ref-size", type=float, default=256.0)
    e.add_argument("--real", help=".emb file (fid/kid)")
    e.add_argument("--fake", help=".emb file (fid/kid)")
    e.add_argument("--block", type=int, default=0, help="KID block size (default min(100, n))")
    e.add_argument("--report", help="write the report JSON here as well as stdout")
    e.set_defaults(func=_cmd_evaluate)

    s = sub.add_parser("summarize", help="print the split table of a manifest")
    s.add_argument("--manifest", required=True)
    s.set_defaults(func=_cmd_summarize)

    v = sub.add_parser("validate-asset", help="check a .gsa asset file")
    v.add_argument("file")
    v.set_defaults(func=_cmd_validate_asset)

    d = sub.add_parser("make-demo", help="write demo dictionaries and a run config")
    d.add_argument("dir")
    d.add_argument("--gaussians", type=int, default=3000)
    d.add_argument("--frames", type=int, default=8)
    d.add_argument("--size", type=int, default=128)
    d.add_argument("--clips", type=int, default=2)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=_cmd_make_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "evaluate":
        need = ("gt", "pred") if args.metric == "ap" else ("real", "fake")
        missing = [f"--{n}" for n in need if getattr(args, n) is None]
        if missing:
            print(f"error: evaluate {args.metric} needs {' '.join(missing)}", file=sys.stderr)
            return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
