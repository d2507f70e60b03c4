"""Transductive few-shot classification on similarity graphs.

Features from a frozen backbone (or the synthetic generator) are linked by
a cosine k-NN graph, interpolated by powers of the normalized adjacency,
and classified by softmax regression trained on the few labeled rows. The
evaluation harness scores the pipeline over many random episodes with
confidence intervals, hyperparameter sweeps, and imbalance studies.
"""

from .classify import (
    ClassifierWeights,
    Predictions,
    TrainConfig,
    predict,
    softmax,
    train_logistic,
)
from .episodes import (
    Episode,
    EpisodeSpec,
    episode_rng,
    sample_episode,
    sample_imbalanced_two_way,
)
from .errors import (
    ConvergenceError,
    EvaluationError,
    FeatureFileError,
    GraphshotError,
    ValidationError,
)
from .evaluate import (
    EpisodeResult,
    EvalReport,
    HyperParams,
    SweepReport,
    confidence_interval95,
    evaluate,
    evaluate_imbalance,
    reports_to_csv,
    reports_to_json,
    run_episode,
    sweep,
)
from .features import (
    FeatureSet,
    SyntheticConfig,
    generate_synthetic,
    infer_format,
    load_feature_set,
    save_feature_set,
)
from .graph import (
    LaplacianEmbedding,
    NormalizedAdjacency,
    PropagationParams,
    SimilarityMatrix,
    build_episode_graph,
    cosine_similarity_matrix,
    knn_sparsify,
    laplacian_embedding,
    propagate,
    symmetric_normalize,
)

__version__ = "0.1.0"

__all__ = [
    "ClassifierWeights",
    "ConvergenceError",
    "Episode",
    "EpisodeResult",
    "EpisodeSpec",
    "EvalReport",
    "EvaluationError",
    "FeatureFileError",
    "FeatureSet",
    "GraphshotError",
    "HyperParams",
    "LaplacianEmbedding",
    "NormalizedAdjacency",
    "Predictions",
    "PropagationParams",
    "SimilarityMatrix",
    "SweepReport",
    "SyntheticConfig",
    "TrainConfig",
    "ValidationError",
    "build_episode_graph",
    "confidence_interval95",
    "cosine_similarity_matrix",
    "episode_rng",
    "evaluate",
    "evaluate_imbalance",
    "generate_synthetic",
    "infer_format",
    "knn_sparsify",
    "laplacian_embedding",
    "load_feature_set",
    "predict",
    "propagate",
    "reports_to_csv",
    "reports_to_json",
    "run_episode",
    "sample_episode",
    "sample_imbalanced_two_way",
    "save_feature_set",
    "softmax",
    "sweep",
    "symmetric_normalize",
    "train_logistic",
]
