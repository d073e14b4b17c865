"""compoundsem: compound-internal semantics from word embeddings.

Quantifies, layer by layer, how much each constituent of a noun-noun
compound contributes to the compound's representation (meaning dominance)
and how recoverable the compound's meaning is from its parts
(transparency), then evaluates the predictions against human norms.
"""

__version__ = "0.1.0"

from .dataset import Covariates, Dataset, Triplet, join_covariates, load_dataset
from .embeddings import (
    EmbeddingStore,
    LayeredEmbedding,
    RepresentationSetting,
    SettingKind,
    StaticStore,
    embed_via_backend,
    load_dump,
    load_static,
    write_dump,
)
from .errors import BackendError, ValidationError
from .measures import (
    MeasureTable,
    SimilarityPair,
    WeightGrid,
    compute_table,
    cosine,
    lmd,
    reverse_compounds,
    st,
    st_weighted,
)
from .pooling import NCVariant, TokenizedInstance, pool_in_context, pool_nc, pool_templated
from .stats import EvalResult, RegressionResult, SweepReport, evaluate, mae, ols_fit, spearman, sweep

__all__ = [
    "BackendError",
    "Covariates",
    "Dataset",
    "EmbeddingStore",
    "EvalResult",
    "LayeredEmbedding",
    "MeasureTable",
    "NCVariant",
    "RegressionResult",
    "RepresentationSetting",
    "SettingKind",
    "SimilarityPair",
    "StaticStore",
    "SweepReport",
    "TokenizedInstance",
    "Triplet",
    "ValidationError",
    "WeightGrid",
    "compute_table",
    "cosine",
    "embed_via_backend",
    "evaluate",
    "join_covariates",
    "lmd",
    "load_dataset",
    "load_dump",
    "load_static",
    "mae",
    "ols_fit",
    "pool_in_context",
    "pool_nc",
    "pool_templated",
    "reverse_compounds",
    "spearman",
    "st",
    "st_weighted",
    "sweep",
    "write_dump",
]
