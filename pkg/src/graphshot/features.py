"""Feature-set container, on-disk formats, and a synthetic generator.

A :class:`FeatureSet` is the universe of samples every other module draws
from: one nonnegative feature vector per row plus an integer class label.
Files store features as 32-bit floats (binary ``FSET1`` or CSV); all
downstream arithmetic promotes to 64-bit.

The synthetic generator produces rectified Gaussian blobs around nonnegative
class centers, so the whole pipeline can be exercised without any pretrained
backbone or image data.
"""
from __future__ import annotations

import dataclasses
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FeatureFileError, ValidationError

MAGIC = b"FSET1"
_HEADER = struct.Struct("<III")  # sample count, feature dim, class count

FORMATS = ("binary", "csv")


@dataclass(frozen=True)
class FeatureSet:
    """Immutable labeled matrix of feature vectors.

    features are stored float32, one row per sample, all entries >= 0
    (penultimate-layer activations sit behind a rectifier, and the cosine
    graph construction relies on that). Every class index in
    ``[0, class_count)`` must own at least one row.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = ""

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValidationError(
                f"features must be a nonempty 2-d matrix, got shape {feats.shape}"
            )
        if labels.ndim != 1 or labels.shape[0] != feats.shape[0]:
            raise ValidationError(
                f"labels must be one per row: {labels.shape} vs {feats.shape[0]} rows"
            )
        if self.class_count < 1:
            raise ValidationError(f"class_count must be >= 1, got {self.class_count}")
        if labels.min() < 0 or labels.max() >= self.class_count:
            bad = int(np.flatnonzero((labels < 0) | (labels >= self.class_count))[0])
            raise ValidationError(
                f"label {int(labels[bad])} at row {bad} outside [0, {self.class_count})"
            )
        if not np.all(np.isfinite(feats)):
            row, col = np.argwhere(~np.isfinite(feats))[0]
            raise ValidationError(f"non-finite feature at ({row}, {col})")
        if feats.min() < 0:
            row, col = np.argwhere(feats < 0)[0]
            raise ValidationError(
                f"negative feature at ({row}, {col}): {feats[row, col]}"
            )
        present = np.bincount(labels, minlength=self.class_count)
        if (present == 0).any():
            missing = int(np.flatnonzero(present == 0)[0])
            raise ValidationError(f"empty class: no rows labeled {missing}")
        feats.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def sample_count(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters for the rectified-Gaussian blob generator."""

    class_count: int
    per_class: int
    dim: int
    center_scale: float = 1.0
    noise_sigma: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.class_count < 2:
            raise ValidationError(f"class_count must be >= 2, got {self.class_count}")
        if self.per_class < 2:
            raise ValidationError(f"per_class must be >= 2, got {self.per_class}")
        if self.dim < 2:
            raise ValidationError(f"dim must be >= 2, got {self.dim}")
        if not self.center_scale > 0:
            raise ValidationError(f"center_scale must be > 0, got {self.center_scale}")
        if not self.noise_sigma > 0:
            raise ValidationError(f"noise_sigma must be > 0, got {self.noise_sigma}")


def generate_synthetic(config: SyntheticConfig) -> FeatureSet:
    """Draw a deterministic synthetic FeatureSet.

    Class centers have entries uniform in [0, center_scale]; each row is
    ``max(0, center + N(0, noise_sigma))``. Rectification keeps every entry
    nonnegative, matching what a ReLU backbone would emit.
    """
    rng = np.random.default_rng(config.seed)
    centers = rng.uniform(0.0, config.center_scale, (config.class_count, config.dim))
    n = config.class_count * config.per_class
    noise = rng.normal(0.0, config.noise_sigma, (n, config.dim))
    rows = np.maximum(np.repeat(centers, config.per_class, axis=0) + noise, 0.0)
    labels = np.repeat(np.arange(config.class_count), config.per_class)
    name = (
        f"synthetic-c{config.class_count}x{config.per_class}"
        f"-d{config.dim}-seed{config.seed}"
    )
    return FeatureSet(
        features=rows.astype(np.float32),
        labels=labels,
        class_count=config.class_count,
        name=name,
    )


def save_feature_set(fset: FeatureSet, path: str | Path, format: str = "binary") -> None:
    """Write a FeatureSet to disk.

    Binary is the canonical format and round-trips exactly; CSV is for
    human inspection and round-trips feature values through decimal text.
    Writes go through a same-directory temp file and an atomic rename, so a
    failed write never leaves a partial file at ``path``.
    """
    path = Path(path)
    if format == "binary":
        payload = b"".join(
            (
                MAGIC,
                _HEADER.pack(fset.sample_count, fset.dim, fset.class_count),
                fset.labels.astype("<u4").tobytes(),
                fset.features.astype("<f4").tobytes(),
            )
        )
    elif format == "csv":
        lines = ["label," + ",".join(f"f{i}" for i in range(fset.dim))]
        for label, row in zip(fset.labels, fset.features):
            # %.9g round-trips float32 exactly through decimal text
            lines.append(f"{label}," + ",".join(f"{float(v):.9g}" for v in row))
        payload = ("\n".join(lines) + "\n").encode("ascii")
    else:
        raise ValidationError(f"unknown format {format!r}, expected one of {FORMATS}")

    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as exc:
        raise FeatureFileError(f"cannot write {path}: {exc}") from exc


def load_feature_set(path: str | Path, format: str = "binary") -> FeatureSet:
    """Read a FeatureSet from disk and validate every invariant.

    Raises FeatureFileError for missing/truncated/mislabeled files and
    ValidationError when the parsed content violates FeatureSet invariants
    (negative entries, out-of-range labels, empty classes).
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FeatureFileError(f"cannot read {path}: {exc}") from exc

    if format == "binary":
        return _parse_binary(raw, path)
    if format == "csv":
        return _parse_csv(raw, path)
    raise ValidationError(f"unknown format {format!r}, expected one of {FORMATS}")


def _parse_binary(raw: bytes, path: Path) -> FeatureSet:
    if len(raw) < len(MAGIC) + _HEADER.size:
        raise FeatureFileError(
            f"{path}: truncated header ({len(raw)} bytes, need "
            f"{len(MAGIC) + _HEADER.size})"
        )
    magic = raw[: len(MAGIC)]
    if magic != MAGIC:
        raise FeatureFileError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    n, h, c = _HEADER.unpack_from(raw, len(MAGIC))
    body = raw[len(MAGIC) + _HEADER.size :]
    expected = 4 * n + 4 * n * h
    if len(body) != expected:
        raise FeatureFileError(
            f"{path}: body is {len(body)} bytes, expected {expected} "
            f"for n={n}, h={h}"
        )
    labels = np.frombuffer(body, dtype="<u4", count=n).astype(np.int64)
    feats = np.frombuffer(body, dtype="<f4", offset=4 * n).reshape(n, h)
    return FeatureSet(features=feats, labels=labels, class_count=c, name=path.stem)


def _parse_csv(raw: bytes, path: Path) -> FeatureSet:
    lines = raw.decode("utf-8").splitlines()
    if not lines:
        raise FeatureFileError(f"{path}: empty CSV")
    header = lines[0].split(",")
    if header[0] != "label" or any(
        col != f"f{i}" for i, col in enumerate(header[1:])
    ) or len(header) < 2:
        raise FeatureFileError(
            f"{path}: bad CSV header {lines[0]!r}, expected 'label,f0,f1,...'"
        )
    h = len(header) - 1
    labels, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != h + 1:
            raise FeatureFileError(
                f"{path}:{lineno}: {len(cells) - 1} feature columns, expected {h}"
            )
        try:
            labels.append(int(cells[0]))
            rows.append([float(v) for v in cells[1:]])
        except ValueError as exc:
            raise FeatureFileError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise FeatureFileError(f"{path}: no data rows")
    label_arr = np.asarray(labels, dtype=np.int64)
    return FeatureSet(
        features=np.asarray(rows, dtype=np.float32),
        labels=label_arr,
        class_count=int(label_arr.max()) + 1,
        name=path.stem,
    )


def infer_format(path: str | Path) -> str:
    """Map a file extension to a format name (.csv is CSV, anything else binary)."""
    return "csv" if Path(path).suffix.lower() == ".csv" else "binary"
