"""Transformer embedding exporter producing TMDE datasets with manifests."""

from .embed import ExportSpec, POOLINGS, embed_texts, load_model, pool_hidden, resolve_pooling
from .errors import ConfigError, ExportError, PairingError, ResolutionError
from .manifest import file_sha256, load_manifest, texts_sha256, write_manifest
from .synonyms import SubstitutionCounts, augment_text, augment_texts, load_synonyms
from .texts import read_text_file, resolve_texts
from .tmde import read_dataset, read_header, write_rows

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ExportError",
    "ExportSpec",
    "PairingError",
    "POOLINGS",
    "ResolutionError",
    "SubstitutionCounts",
    "augment_text",
    "augment_texts",
    "embed_texts",
    "file_sha256",
    "load_manifest",
    "load_model",
    "load_synonyms",
    "pool_hidden",
    "read_dataset",
    "read_header",
    "read_text_file",
    "resolve_pooling",
    "resolve_texts",
    "texts_sha256",
    "write_manifest",
    "write_rows",
]
