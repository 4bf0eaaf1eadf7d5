"""Collaborative Trees Ensemble: sum-of-trees regression grown root-first on
shared residuals, with an additive/interaction importance decomposition,
exact population oracles, synthetic data generators, an evaluation harness
and network-diagram export."""

from .core import (
    EncodedDataset,
    FeatureSchema,
    GroupSpec,
    build_schema,
    encode,
    encode_features,
)
from .forest import (
    CollabTreesModel,
    EnsembleModel,
    Hyperparams,
    SplitRound,
    grow,
    grow_ensemble,
    predict_ensemble,
    predict_model,
)
from .xmdi import XmdiMatrix, compute_xmdi, ensemble_xmdi, overall_importance

__all__ = [
    "EncodedDataset",
    "FeatureSchema",
    "GroupSpec",
    "build_schema",
    "encode",
    "encode_features",
    "CollabTreesModel",
    "EnsembleModel",
    "Hyperparams",
    "SplitRound",
    "grow",
    "grow_ensemble",
    "predict_ensemble",
    "predict_model",
    "XmdiMatrix",
    "compute_xmdi",
    "ensemble_xmdi",
    "overall_importance",
]

__version__ = "0.1.0"
