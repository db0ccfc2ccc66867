"""Text manifold defense: manifold approximation of embedding spaces with a
code-carrying GAN, on-manifold projection, distance diagnostics, and a
projection-defended classifier."""

from .bundle import ClassifierHead, ModelBundle, load_bundle, save_bundle
from .datastore import (
    EmbeddingDataset,
    Scaler,
    SyntheticSpec,
    displace_orthogonal,
    fit_scaler,
    load_dataset,
    make_synthetic,
    scale,
    scale_dataset,
    scale_matrix,
    synthetic_centers,
    write_dataset,
)
from .defense import (
    AttackReport,
    accuracy,
    classify,
    classify_defended,
    craft_boundary_attack,
    head_logits,
    train_head,
)
from .errors import (
    ConfigError,
    CorruptionError,
    DimensionError,
    FormatError,
    NumericError,
    SpaceError,
    TmdError,
    UnsupportedOperationError,
    ValidationError,
    VersionError,
)
from .estimators import (
    DefendedClassifier,
    EmbeddingClassifier,
    EmbeddingScaler,
    ManifoldApproximator,
)
from .nets import ArchConfig, configure_torch, init_buffers, init_params
from .projection import (
    BatchProjection,
    GdConfig,
    ManifoldEvaluator,
    ProjectionResult,
    distance_to_manifold,
    infer_code,
    project_batch,
    project_gd,
    project_sampling,
)
from .training import (
    PriorState,
    TrainConfig,
    TrainReport,
    gan_value,
    info_reg,
    prior_entropy,
    prior_loss,
    prior_step,
    sample_latent,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ArchConfig", "AttackReport", "BatchProjection", "ClassifierHead",
    "ConfigError", "CorruptionError", "DefendedClassifier", "DimensionError",
    "EmbeddingClassifier", "EmbeddingDataset", "EmbeddingScaler",
    "FormatError", "GdConfig", "ManifoldApproximator", "ManifoldEvaluator",
    "ModelBundle", "NumericError", "PriorState", "ProjectionResult", "Scaler",
    "SpaceError", "SyntheticSpec", "TmdError", "TrainConfig", "TrainReport",
    "UnsupportedOperationError", "ValidationError", "VersionError",
    "accuracy", "classify", "classify_defended", "configure_torch",
    "craft_boundary_attack", "displace_orthogonal", "distance_to_manifold",
    "fit_scaler", "gan_value", "head_logits", "infer_code", "info_reg",
    "init_buffers", "init_params", "load_bundle", "load_dataset", "make_synthetic",
    "prior_entropy", "prior_loss", "prior_step", "project_batch",
    "project_gd", "project_sampling", "sample_latent", "scale",
    "scale_dataset", "scale_matrix", "save_bundle", "synthetic_centers",
    "train", "train_head", "write_dataset",
]
