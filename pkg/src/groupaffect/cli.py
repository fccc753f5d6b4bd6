"""Command-line entry point.

Stage subcommands run the pipeline up to and including that stage, reusing
any persisted upstream artifacts whose config hash matches::

    groupaffect run --config cfg.json --manifest data/manifest.csv
    groupaffect fixture --out data/ --images 60

The log level comes from ``GROUPAFFECT_LOG_LEVEL`` (default WARNING).
"""

import argparse
import logging
import os
import sys

from .pipeline import STAGES, PipelineError, Run, load_config, load_manifest
from .pipeline.config import ConfigError
from .pipeline.fixture import fixture_config, make_fixture
from .pipeline.manifest import ManifestError
from .pipeline.report import export_report

STAGE_HELP = {
    "centrist": "compute CENTRIST scene descriptors",
    "codebook": "fit k-means / GMM vocabularies and the caption vocabulary on the train split",
    "encode": "encode every image with every configured encoder",
    "fuse": "concatenate the fusion-order encodings",
    "train": "train and score tier-1 classifiers on each feature set",
    "stack": "train the stacked ensemble on the fused features",
    "eval": "assemble and write the evaluation report",
    "run": "all stages end to end",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="groupaffect", description="Group-level affect: feature extraction, fusion and stacked classification.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "run"):
        p = sub.add_parser(name, help=STAGE_HELP[name])
        p.add_argument("--config", help="run configuration (JSON); defaults apply when omitted")
        p.add_argument("--manifest", required=True, help="dataset manifest (CSV or JSON)")
        p.add_argument("--seed", type=int, help="override the config root seed")
        p.add_argument("--output-dir", help="override the config output directory")
        p.add_argument("--workers", type=int, help="per-image worker threads")
        p.add_argument("--force", action="store_true", help="recompute instead of reusing artifacts")
        if name in ("eval", "run"):
            p.add_argument("--format", choices=("table", "json"), default="table",
                           help="what to print on stdout")
    fx = sub.add_parser("fixture", help="write the synthetic fixture dataset and a matching config")
    fx.add_argument("--out", required=True, help="dataset directory")
    fx.add_argument("--images", type=int, default=60)
    fx.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None):
    logging.basicConfig(level=os.environ.get("GROUPAFFECT_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "fixture":
        manifest = make_fixture(args.out, n_images=args.images, seed=args.seed)
        cfg_path = os.path.join(args.out, "config.json")
        fixture_config(os.path.join(args.out, "run")).save(cfg_path)
        print(f"manifest: {manifest}\nconfig:   {cfg_path}")
        return 0
    try:
        config = load_config(args.config, seed=args.seed, output_dir=args.output_dir, workers=args.workers)
        manifest = load_manifest(args.manifest)
        stage = "eval" if args.command == "run" else args.command
        report = Run(config, manifest, force=args.force).execute(stage)
    except (ConfigError, ManifestError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if report is not None:
        sys.stdout.write(export_report(report, args.format))
    else:
        print(f"stage {args.command} complete; artifacts in {config.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
