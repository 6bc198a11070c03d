"""featx command line: extract features / classify images."""

from __future__ import annotations

import argparse
import sys

from .classify import classify
from .errors import FeatxError
from .extract import DEFAULT_BATCH, DEFAULT_SEED, ExtractorConfig, extract
from .registry import EXTRACTOR_IDS


def cmd_extract(args) -> int:
    config = ExtractorConfig(
        extractor_id=args.model,
        layers=tuple(args.layers.split(",")) if args.layers else (),
        batch_size=args.batch_size,
        device=args.device,
        seed=args.seed,
        weights_path=args.weights,
        torch_threads=args.torch_threads,
    )
    manifests = extract(args.images, config, args.out, dataset_id=args.dataset_id)
    for path in manifests:
        print(path)
    return 0


def cmd_classify(args) -> int:
    labels = classify(
        args.images,
        args.out,
        seed=args.seed,
        batch_size=args.batch_size,
        weights_path=args.weights,
        device=args.device,
        torch_threads=args.torch_threads,
    )
    print(f"{labels.size} labels -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featx",
        description="Export vision backbone features/labels in the featdist engine formats",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--images", required=True, help="directory of image files")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help="weight-init seed when no checkpoint is given")
        p.add_argument("--weights", default=None, help="state-dict checkpoint path")
        p.add_argument("--batch-size", type=int, default=DEFAULT_BATCH)
        p.add_argument("--device", default="cpu")
        p.add_argument("--torch-threads", type=int, default=2)

    p_extract = sub.add_parser("extract", help="export per-layer features + manifests")
    common(p_extract)
    p_extract.add_argument("--model", required=True, choices=list(EXTRACTOR_IDS))
    p_extract.add_argument("--layers", default=None,
                           help="comma-separated layer ids (default: the backbone's pool tap)")
    p_extract.add_argument("--out", required=True, help="output directory")
    p_extract.add_argument("--dataset-id", default=None,
                           help="manifest dataset id (default: images directory name)")
    p_extract.set_defaults(func=cmd_extract)

    p_classify = sub.add_parser("classify", help="export argmax class labels")
    common(p_classify)
    p_classify.add_argument("--out", required=True, help="labels NPY path")
    p_classify.set_defaults(func=cmd_classify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FeatxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
