"""Dump pretrained-backbone activations into FSET1 feature files."""

from .extract import ExtractionJob, ExtractionResult, extract
from .models import (
    ARCHITECTURES,
    FEATURE_DIMS,
    ArchitectureMismatchError,
    build_model,
    load_checkpoint,
)

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "ArchitectureMismatchError",
    "ExtractionJob",
    "ExtractionResult",
    "FEATURE_DIMS",
    "build_model",
    "extract",
    "load_checkpoint",
]
