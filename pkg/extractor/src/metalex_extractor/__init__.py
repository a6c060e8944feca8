"""Embedding extraction into MLEX stores for the metalex toolkit."""

from .errors import ConfigError, DataError, ExtractorError
from .extract import ExtractionConfig, ExtractionResult, extract

__all__ = [
    "ConfigError",
    "DataError",
    "ExtractorError",
    "ExtractionConfig",
    "ExtractionResult",
    "extract",
]

__version__ = "0.1.0"
