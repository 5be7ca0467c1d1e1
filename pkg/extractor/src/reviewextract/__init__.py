"""Rule-based relation extraction and phrase encoding for review corpora."""

from .encode import HashEncoder, ModelLoadError, make_encoder
from .extract import extract_review, extract_reviews

__version__ = "0.1.0"

__all__ = [
    "HashEncoder",
    "ModelLoadError",
    "extract_review",
    "extract_reviews",
    "make_encoder",
    "__version__",
]
