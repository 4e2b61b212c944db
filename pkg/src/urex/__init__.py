"""Unsupervised relation extraction from entity types.

Induce relation clusters either directly from the head-tail type pair or by
training a relation classifier through a bilinear link predictor with
confidence and anti-collapse regularizers, then score clusterings with
B-cubed, V-measure, and ARI.
"""

from .corpus import (
    Corpus,
    CorpusFormatError,
    RelationInstance,
    SynthConfig,
    TypedSpan,
    Vocabularies,
    bijective_synth_config,
    build_vocabularies,
    corpus_stats,
    load_corpus,
    parse_instance,
    relation_distribution,
    save_corpus,
    serialize_instance,
    synth_corpus,
)
from .etype import Clustering, etype_cluster, etype_label
from .features import (
    FeatureIndex,
    FeatureSet,
    SparseFeatureVector,
    build_feature_index,
    extract_features,
)
from .metrics import (
    ClusteringReport,
    EvaluationError,
    ari,
    b_cubed,
    evaluate,
    trivial_homogeneity_v,
    v_measure,
)
from .model import (
    LossBreakdown,
    ModelParams,
    RelationPosterior,
    batch_objective,
    classifier_posterior,
    dispersion_loss,
    init_params,
    link_loss,
    link_score,
    load_checkpoint,
    save_checkpoint,
    skewness_loss,
)
from .train import (
    ORACLE_SETTINGS,
    TrainConfig,
    TrainHistory,
    TrainResult,
    induce_clustering,
    march_config,
    oracle_assign,
    oracle_loss_curve,
    train,
)

__version__ = "0.1.0"
