"""featx: exports per-layer vision backbone features and classifier labels in
the featdist engine's NPY + manifest file formats."""

from . import errors
from .classify import classify, classify_images
from .extract import ExtractorConfig, extract, extract_features, list_images
from .registry import EXTRACTOR_IDS, BackboneSpec, get_backbone

__version__ = "0.1.0"

__all__ = [
    "errors",
    "ExtractorConfig",
    "extract",
    "extract_features",
    "list_images",
    "classify",
    "classify_images",
    "EXTRACTOR_IDS",
    "BackboneSpec",
    "get_backbone",
    "__version__",
]
