"""fset-extract: checkpoint + image folder -> FSET1 feature file."""
from __future__ import annotations

import argparse
import sys

from .extract import ExtractionJob, extract
from .models import ARCHITECTURES, ArchitectureMismatchError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fset-extract",
        description="Dump penultimate-layer activations of a pretrained "
        "backbone over a class-per-subdirectory image tree into an FSET1 file.",
    )
    parser.add_argument("--checkpoint", required=True, help="backbone weights (.ckpt/.pt/.pth)")
    parser.add_argument("--arch", required=True, choices=ARCHITECTURES,
                        help="architecture the checkpoint was trained with")
    parser.add_argument("--images", required=True, help="image root, one subdirectory per class")
    parser.add_argument("--out", required=True, help="output FSET1 path")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--device", default="cpu", help="torch device tag (cpu, cuda, cuda:0, ...)")
    parser.add_argument("--image-size", type=int, default=84,
                        help="square crop size; 84 for miniImageNet/CUB, 32 for CIFAR-FS")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExtractionJob(
        checkpoint=args.checkpoint,
        arch=args.arch,
        images_root=args.images,
        out=args.out,
        batch_size=args.batch_size,
        device=args.device,
        image_size=args.image_size,
    )
    try:
        result = extract(job)
    except (ArchitectureMismatchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"wrote {result.rows} x {result.dim} features "
        f"({result.class_count} classes, {result.skipped} skipped) to {result.out}"
    )
    return 0


def entrypoint() -> None:
    sys.exit(main())
