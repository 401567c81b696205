"""Taxonomy expansion: attach new terms by matching them to mini-paths.

A seed taxonomy is mined for fixed-length descending chains
(mini-paths). Three feature views of a (query, mini-path) pair, term
embeddings propagated over the tree, encoded dependency paths, and
string/frequency statistics, feed three classifiers co-trained to
predict the query's position on the chain. At inference the per-path
position probabilities are averaged into a parent ranking.
"""

from .autodiff import Parameter, Tensor, concat, dropout
from .checkpoint import load_checkpoint, save_checkpoint
from .context import ContextDims, DepPathStore, DepVocab, attend_pool, context_bundle, encode_path
from .embeddings import EmbeddingTable, GatParams, distributed_bundle, propagate
from .errors import (
    CheckpointError,
    ConfigError,
    DepPathError,
    EmbeddingError,
    FrequencyError,
    InputError,
    SamplingError,
    TaxonomyError,
    TrainingError,
)
from .features import FeatureBundle, FeatureContext
from .inference import (
    EvalReport,
    ParentRanking,
    accuracy,
    evaluate,
    mrr,
    score_parents,
    wu_palmer,
)
from .lexsyn import (
    FEATURES_PER_PAIR,
    LexSynVector,
    PairFrequencyTable,
    freq_features,
    lcs_length,
    length_diff,
    lex_flags,
    lexsyn_bundle,
    pair_vector,
)
from .model import (
    CoTrainModel,
    EpochStats,
    ModelSpec,
    TrainConfig,
    aggregate,
    format_trace,
    train,
)
from .optim import Adam
from .sampling import (
    SamplerConfig,
    TrainingInstance,
    build_training_set,
    generate_negatives,
    generate_positives,
    validate_instance,
)
from .seeding import derive_rng
from .taxonomy import MiniPath, Taxonomy, normalize_surface

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "CheckpointError",
    "FEATURES_PER_PAIR",
    "ConfigError",
    "ContextDims",
    "CoTrainModel",
    "DepPathError",
    "DepPathStore",
    "DepVocab",
    "EmbeddingError",
    "EmbeddingTable",
    "EpochStats",
    "EvalReport",
    "FeatureBundle",
    "FeatureContext",
    "FrequencyError",
    "GatParams",
    "InputError",
    "LexSynVector",
    "MiniPath",
    "ModelSpec",
    "PairFrequencyTable",
    "Parameter",
    "ParentRanking",
    "SamplerConfig",
    "SamplingError",
    "Taxonomy",
    "TaxonomyError",
    "Tensor",
    "TrainConfig",
    "TrainingError",
    "TrainingInstance",
    "accuracy",
    "aggregate",
    "attend_pool",
    "build_training_set",
    "concat",
    "context_bundle",
    "derive_rng",
    "distributed_bundle",
    "dropout",
    "encode_path",
    "evaluate",
    "format_trace",
    "freq_features",
    "generate_negatives",
    "generate_positives",
    "lcs_length",
    "length_diff",
    "lex_flags",
    "lexsyn_bundle",
    "load_checkpoint",
    "mrr",
    "normalize_surface",
    "pair_vector",
    "propagate",
    "save_checkpoint",
    "score_parents",
    "train",
    "validate_instance",
    "wu_palmer",
]
