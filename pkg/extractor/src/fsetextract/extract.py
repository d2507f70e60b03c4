"""Walk a class-per-subdirectory image tree and dump features to FSET1.

Classes are numbered by the lexicographic order of their directory names.
Images are resized (factor 92/84 over the target size, both dimensions),
center-cropped, and normalized before inference; unreadable images are
skipped with a warning and excluded from the output. Inference runs in eval
mode with no augmentation, so extracting the same job twice produces
byte-identical files.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .models import ARCHITECTURES, FEATURE_DIMS, build_model, load_checkpoint

MAGIC = b"FSET1"

# channel statistics used to normalize inputs; override per dataset if the
# checkpoint was trained with different ones
DEFAULT_MEAN = (0.485, 0.456, 0.406)
DEFAULT_STD = (0.229, 0.224, 0.225)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


@dataclass(frozen=True)
class ExtractionJob:
    checkpoint: str
    arch: str
    images_root: str
    out: str
    batch_size: int = 64
    device: str = "cpu"
    image_size: int = 84
    mean: tuple[float, float, float] = DEFAULT_MEAN
    std: tuple[float, float, float] = DEFAULT_STD

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"arch must be one of {ARCHITECTURES}, got {self.arch!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.image_size < 8:
            raise ValueError(f"image_size must be >= 8, got {self.image_size}")


@dataclass(frozen=True)
class ExtractionResult:
    out: Path
    rows: int
    dim: int
    class_count: int
    skipped: int


def _list_classes(root: Path) -> list[Path]:
    if not root.is_dir():
        raise FileNotFoundError(f"image root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise FileNotFoundError(f"image root {root} has no class subdirectories")
    return class_dirs


def _load_image(path: Path, size: int, mean, std) -> np.ndarray:
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        enlarged = int(round(size * 92 / 84))
        rgb = rgb.resize((enlarged, enlarged), Image.BILINEAR)
        left = (enlarged - size) // 2
        rgb = rgb.crop((left, left, left + size, left + size))
        array = np.asarray(rgb, dtype=np.float32) / 255.0
    array = (array - np.asarray(mean, dtype=np.float32)) / np.asarray(std, dtype=np.float32)
    return array.transpose(2, 0, 1)


def extract(job: ExtractionJob) -> ExtractionResult:
    """Run the backbone over every readable image and write the feature file."""
    device = torch.device(job.device)
    model = build_model(job.arch)
    load_checkpoint(model, job.checkpoint, job.arch)
    model.to(device)
    model.eval()

    class_dirs = _list_classes(Path(job.images_root))
    tensors: list[np.ndarray] = []
    labels: list[int] = []
    skipped = 0
    for label, class_dir in enumerate(class_dirs):
        image_paths = sorted(
            p for p in class_dir.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        loaded_any = False
        for path in image_paths:
            try:
                tensors.append(_load_image(path, job.image_size, job.mean, job.std))
            except Exception as exc:
                warnings.warn(f"skipping unreadable image {path}: {exc}")
                skipped += 1
                continue
            labels.append(label)
            loaded_any = True
        if not loaded_any:
            raise FileNotFoundError(
                f"class directory {class_dir} contributed no readable images"
            )

    rows = []
    with torch.no_grad():
        for start in range(0, len(tensors), job.batch_size):
            batch = torch.from_numpy(np.stack(tensors[start : start + job.batch_size]))
            rows.append(model.features(batch.to(device)).cpu().numpy())
    features = np.concatenate(rows).astype(np.float32)
    assert features.shape[1] == FEATURE_DIMS[job.arch]

    out = Path(job.out)
    _write_fset1(out, features, np.asarray(labels, dtype=np.uint32), len(class_dirs))
    return ExtractionResult(
        out=out,
        rows=features.shape[0],
        dim=features.shape[1],
        class_count=len(class_dirs),
        skipped=skipped,
    )


def _write_fset1(path: Path, features: np.ndarray, labels: np.ndarray, classes: int) -> None:
    n, h = features.shape
    payload = b"".join(
        (
            MAGIC,
            struct.pack("<III", n, h, classes),
            labels.astype("<u4").tobytes(),
            features.astype("<f4").tobytes(),
        )
    )
    path.write_bytes(payload)
