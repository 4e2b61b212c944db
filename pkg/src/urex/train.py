"""Training loop, negative sampling, and the oracle-signal experiments."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .corpus import Corpus, Vocabularies, build_vocabularies
from .etype import Clustering
from .features import FeatureIndex, FeatureSet, build_feature_index, extract_features
from .metrics import evaluate
from .model import (
    LossBreakdown,
    ModelParams,
    _link_terms,
    batch_objective,
    classifier_posteriors,
    init_params,
    softplus,
)
from .optim import make_optimizer


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss or invalid setup)."""


class OracleError(ValueError):
    """An oracle assignment cannot be built for this corpus."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters for classifier training through the link predictor.

    The defaults reproduce the standard type-pair configuration: Adam at
    learning rate 0.001, batches of 100, L2 1e-5, 10-dimensional entity
    embeddings, skewness weight 1e-4, dispersion weight 0.02, early stopping
    with patience 10.
    """

    n_relations: int = 10
    dim: int = 10
    feature_set: FeatureSet = field(default_factory=FeatureSet)
    optimizer: str = "adam"
    learning_rate: float = 0.001
    batch_size: int = 100
    l2: float = 1e-5
    alpha: float = 0.0001
    beta: float = 0.02
    k_negatives: int = 5
    max_epochs: int = 30
    early_stop_patience: int = 10
    seed: int = 0
    lr_anneal: float | None = None
    min_entity_freq: int = 2
    freeze_classifier: bool = False

    def __post_init__(self):
        if self.n_relations < 2:
            raise ValueError("need at least two relation slots")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.dim < 1:
            raise ValueError("batch_size, max_epochs, and dim must be positive")
        if self.early_stop_patience < 1:
            raise ValueError("early stop patience must be >= 1")
        if self.k_negatives < 0 or self.l2 < 0 or self.alpha < 0 or self.beta < 0:
            raise ValueError("k_negatives, l2, alpha, beta must be non-negative")

    def to_dict(self) -> dict:
        return {
            "n_relations": self.n_relations,
            "dim": self.dim,
            "features": list(self.feature_set.enabled()),
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "l2": self.l2,
            "alpha": self.alpha,
            "beta": self.beta,
            "k_negatives": self.k_negatives,
            "max_epochs": self.max_epochs,
            "early_stop_patience": self.early_stop_patience,
            "seed": self.seed,
            "lr_anneal": self.lr_anneal,
            "min_entity_freq": self.min_entity_freq,
            "freeze_classifier": self.freeze_classifier,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        kwargs = dict(obj)
        names = kwargs.pop("features", None)
        if names is not None:
            kwargs["feature_set"] = FeatureSet.from_names(names)
        valid = {f.name for f in fields(cls)}
        unknown = set(kwargs) - valid
        if unknown:
            raise ValueError(
                f"unknown training config fields: {', '.join(sorted(unknown))}"
            )
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path) -> "TrainConfig":
        with Path(path).open("r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def march_config(**overrides) -> TrainConfig:
    """Feature-based variant: AdaGrad at 0.005, all hand-crafted templates,
    skewness weight 0.01, 10 epochs, L2 1e-7."""
    base = TrainConfig(
        feature_set=FeatureSet(
            type_pair=True, entity=True, bow=True, dep_path=True, pos=True, trigger=True
        ),
        optimizer="adagrad",
        learning_rate=0.005,
        l2=1e-7,
        alpha=0.01,
        beta=0.02,
        max_epochs=10,
    )
    return replace(base, **overrides) if overrides else base


@dataclass
class EncodedCorpus:
    """Feature indices plus entity ids for every instance, in corpus order."""

    feats: list[np.ndarray]
    heads: np.ndarray
    tails: np.ndarray

    def __len__(self) -> int:
        return len(self.feats)


def encode_corpus(
    corpus: Corpus,
    feature_set: FeatureSet,
    vocabs: Vocabularies,
    feature_index: FeatureIndex,
) -> EncodedCorpus:
    feats = [
        extract_features(inst, feature_set, vocabs, feature_index).indices
        for inst in corpus
    ]
    heads = np.asarray([vocabs.entity_id(inst.head.text) for inst in corpus], dtype=np.int64)
    tails = np.asarray([vocabs.entity_id(inst.tail.text) for inst in corpus], dtype=np.int64)
    return EncodedCorpus(feats, heads, tails)


class NegativeSampler:
    """Draws impostor entities from the unigram distribution raised to 0.75."""

    def __init__(self, heads: np.ndarray, tails: np.ndarray, n_entities: int, power: float = 0.75):
        counts = np.bincount(
            np.concatenate([heads, tails]), minlength=n_entities
        ).astype(np.float64)
        weights = counts**power
        total = weights.sum()
        if total <= 0:
            raise TrainingError("cannot sample negatives: no entity occurrences")
        self.probs = weights / total

    def sample(self, rng: np.random.Generator, n_rows: int, k: int) -> np.ndarray:
        if k == 0:
            return np.zeros((n_rows, 0), dtype=np.int64)
        flat = rng.choice(len(self.probs), size=n_rows * k, p=self.probs)
        return flat.reshape(n_rows, k).astype(np.int64)


@dataclass
class TrainHistory:
    """Per-epoch training losses, dev scores, and the selected epoch (1-based)."""

    epochs: list[LossBreakdown] = field(default_factory=list)
    dev_f1: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def to_dict(self) -> dict:
        rows = []
        for i, breakdown in enumerate(self.epochs):
            row = {"epoch": i + 1, **breakdown.to_dict()}
            if i < len(self.dev_f1):
                row["dev_b3_f1"] = self.dev_f1[i]
            rows.append(row)
        return {"epochs": rows, "best_epoch": self.best_epoch}


@dataclass
class TrainResult:
    """Best-dev parameters plus everything needed to featurize new corpora."""

    params: ModelParams
    history: TrainHistory
    vocabs: Vocabularies
    feature_index: FeatureIndex
    config: TrainConfig


def _epoch_mean(breakdowns: list[LossBreakdown], sizes: list[int], alpha, beta) -> LossBreakdown:
    n = sum(sizes)
    pos = sum(b.link_nll_pos * s for b, s in zip(breakdowns, sizes)) / n
    neg = sum(b.link_nll_neg * s for b, s in zip(breakdowns, sizes)) / n
    l_s = sum(b.l_s * s for b, s in zip(breakdowns, sizes)) / n
    l_d = sum(b.l_d * s for b, s in zip(breakdowns, sizes)) / n
    return LossBreakdown.weighted(pos, neg, l_s, l_d, alpha, beta)


def train(
    config: TrainConfig, train_corpus: Corpus, dev_corpus: Corpus | None = None
) -> TrainResult:
    """Minibatch training of the classifier through the link predictor.

    Minimizes link loss + alpha*L_s + beta*L_d + l2*||params||^2. When a
    labelled dev corpus is given, stops after ``early_stop_patience`` epochs
    without a dev B3 F1 improvement and returns the best-dev parameters.
    Identical seeds give identical histories.
    """
    if len(train_corpus) == 0:
        raise TrainingError("training corpus is empty")
    rng = np.random.default_rng(config.seed)
    vocabs = build_vocabularies(train_corpus, config.min_entity_freq)
    findex = build_feature_index(train_corpus, config.feature_set, vocabs)
    enc = encode_corpus(train_corpus, config.feature_set, vocabs, findex)
    dev_enc = (
        encode_corpus(dev_corpus, config.feature_set, vocabs, findex)
        if dev_corpus is not None
        else None
    )
    sampler = NegativeSampler(enc.heads, enc.tails, vocabs.n_entities)
    params = init_params(
        rng, config.n_relations, config.dim, vocabs.n_entities, findex.dimension
    )
    optimizer = make_optimizer(config.optimizer, config.learning_rate)
    history = TrainHistory()
    best_f1 = -1.0
    best_params = params.copy()
    stale = 0
    n = len(enc)

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        breakdowns: list[LossBreakdown] = []
        sizes: list[int] = []
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            negs_h = sampler.sample(rng, len(batch), config.k_negatives)
            negs_t = sampler.sample(rng, len(batch), config.k_negatives)
            breakdown, grads = batch_objective(
                params,
                [enc.feats[i] for i in batch],
                enc.heads[batch],
                enc.tails[batch],
                negs_h,
                negs_t,
                config.alpha,
                config.beta,
            )
            if not np.isfinite(breakdown.total):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}: "
                    f"{breakdown.to_dict()}"
                )
            blocks = params.blocks()
            if config.l2 > 0:
                for name in blocks:
                    grads[name] += 2.0 * config.l2 * blocks[name]
            if config.freeze_classifier:
                blocks = {"E": blocks["E"], "A": blocks["A"]}
            optimizer.step(blocks, grads)
            breakdowns.append(breakdown)
            sizes.append(len(batch))
        history.epochs.append(_epoch_mean(breakdowns, sizes, config.alpha, config.beta))

        if dev_enc is not None:
            labels = _argmax_labels(params, dev_enc)
            f1 = evaluate(labels, dev_corpus).b3.f1
            history.dev_f1.append(f1)
            if f1 > best_f1:
                best_f1 = f1
                best_params = params.copy()
                history.best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if config.lr_anneal is not None:
                    optimizer.lr *= config.lr_anneal
                if stale >= config.early_stop_patience:
                    break
        else:
            best_params = params
            history.best_epoch = epoch

    return TrainResult(best_params, history, vocabs, findex, config)


def _argmax_labels(params: ModelParams, enc: EncodedCorpus) -> list[int]:
    posteriors = classifier_posteriors(params, enc.feats)
    return [int(i) for i in posteriors.argmax(axis=1)]


def induce_clustering(
    params: ModelParams,
    corpus: Corpus,
    feature_set: FeatureSet,
    vocabs: Vocabularies,
    feature_index: FeatureIndex,
) -> Clustering:
    """Hard clustering by posterior argmax; ties go to the lowest slot."""
    enc = encode_corpus(corpus, feature_set, vocabs, feature_index)
    return Clustering(tuple(_argmax_labels(params, enc)))


ORACLE_SETTINGS = (
    "Rand10",
    "Rand10SilverFreq",
    "OneRelation",
    "EType16",
    "SilverTop10",
    "SilverFull",
)

_SILVER_SETTINGS = {"Rand10SilverFreq", "SilverTop10", "SilverFull"}


def _silver_ranked_labels(corpus: Corpus) -> list[str]:
    counts = Counter()
    for inst in corpus:
        counts[inst.gold_relation] += 1
    return [label for label, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]


def _silver_top10_slots(corpus: Corpus) -> np.ndarray:
    ranked = _silver_ranked_labels(corpus)
    slot_of = {label: min(i, 9) for i, label in enumerate(ranked)}
    return np.asarray([slot_of[inst.gold_relation] for inst in corpus], dtype=np.int64)


def oracle_assign(
    corpus: Corpus,
    setting: str,
    seed: int = 0,
    pair_slots: dict[tuple[str, str], int] | None = None,
) -> tuple[np.ndarray, int]:
    """Fixed one-hot relation assignment per instance, as (slot array, n_slots).

    Silver-based settings require a gold label on every instance. EType16
    derives slots from the corpus's coarse types (at most 4) unless an
    explicit pair-to-slot mapping is supplied.
    """
    if setting not in ORACLE_SETTINGS:
        raise OracleError(f"unknown oracle setting {setting!r}; choose from {ORACLE_SETTINGS}")
    n = len(corpus)
    if n == 0:
        raise OracleError("cannot build an oracle assignment for an empty corpus")
    if setting in _SILVER_SETTINGS and any(
        inst.gold_relation is None for inst in corpus
    ):
        raise OracleError(f"setting {setting} requires a gold label on every instance")
    rng = np.random.default_rng(seed)

    if setting == "Rand10":
        return rng.integers(0, 10, size=n, dtype=np.int64), 10
    if setting == "Rand10SilverFreq":
        silver = _silver_top10_slots(corpus)
        freqs = np.bincount(silver, minlength=10).astype(np.float64) / n
        return rng.choice(10, size=n, p=freqs).astype(np.int64), 10
    if setting == "OneRelation":
        return np.zeros(n, dtype=np.int64), 1
    if setting == "EType16":
        if pair_slots is not None:
            slots = np.asarray(
                [pair_slots[(inst.head.etype, inst.tail.etype)] for inst in corpus],
                dtype=np.int64,
            )
            return slots, max(pair_slots.values()) + 1
        types = sorted({t for inst in corpus for t in (inst.head.etype, inst.tail.etype)})
        if len(types) > 4:
            raise OracleError(
                f"EType16 expects at most 4 coarse entity types, found {len(types)}; "
                "pass an explicit pair_slots mapping instead"
            )
        slot_of = {
            (h, t): i * len(types) + j
            for i, h in enumerate(types)
            for j, t in enumerate(types)
        }
        slots = np.asarray(
            [slot_of[(inst.head.etype, inst.tail.etype)] for inst in corpus], dtype=np.int64
        )
        return slots, len(types) ** 2
    if setting == "SilverTop10":
        return _silver_top10_slots(corpus), 10
    # SilverFull
    ranked = _silver_ranked_labels(corpus)
    slot_of = {label: i for i, label in enumerate(ranked)}
    slots = np.asarray([slot_of[inst.gold_relation] for inst in corpus], dtype=np.int64)
    return slots, len(ranked)


@dataclass
class OracleCurve:
    """Mean positive-term NLL per epoch for one assignment setting.

    Entry 0 is the pre-training value; entry e is measured after epoch e.
    The logged value excludes the negative-sample terms, which are still
    part of the optimized loss.
    """

    setting: str
    n_slots: int
    nll_pos: list[float]
    per_run: list[list[float]]

    def to_dict(self) -> dict:
        return {
            "setting": self.setting,
            "n_slots": self.n_slots,
            "epochs": [
                {"epoch": i, "nll_pos": v} for i, v in enumerate(self.nll_pos)
            ],
            "runs": self.per_run,
        }


def _oracle_scores(params: ModelParams, slots: np.ndarray, heads, tails) -> np.ndarray:
    """Expected positive score per instance under a fixed one-hot assignment."""
    H = params.E[heads]
    T = params.E[tails]
    Ab = params.A[slots]
    return np.einsum("bd,bde,be->b", H, Ab, T)


def oracle_loss_curve(
    corpus: Corpus,
    setting: str,
    config: TrainConfig | None = None,
    epochs: int = 15,
    runs: int = 3,
    labelled_only: bool = True,
) -> OracleCurve:
    """Train only the link predictor under a fixed relation assignment.

    The classifier is replaced by the oracle's one-hot posterior; only the
    entity table and relation matrices are updated. Curves are averaged over
    ``runs`` seeds (seed, seed+1, ...). Relation matrices start at zero, so
    the epoch-0 value is exactly ln 2.
    """
    if config is None:
        config = TrainConfig(optimizer="adam", learning_rate=0.005)
    data = corpus.labelled_subset() if labelled_only else corpus
    if len(data) == 0:
        raise OracleError("no instances to run the oracle experiment on")
    vocabs = build_vocabularies(data, config.min_entity_freq)
    heads = np.asarray([vocabs.entity_id(i.head.text) for i in data], dtype=np.int64)
    tails = np.asarray([vocabs.entity_id(i.tail.text) for i in data], dtype=np.int64)
    sampler = NegativeSampler(heads, tails, vocabs.n_entities)
    n = len(data)
    per_run: list[list[float]] = []
    n_slots = 0

    for run in range(runs):
        seed = config.seed + run
        slots, n_slots = oracle_assign(data, setting, seed=seed)
        rng = np.random.default_rng(seed)
        params = init_params(
            rng, max(n_slots, 1), config.dim, vocabs.n_entities, 0, zero_bilinear=True
        )
        optimizer = make_optimizer(config.optimizer, config.learning_rate)
        eye = np.eye(max(n_slots, 1))
        curve = [float(softplus(-_oracle_scores(params, slots, heads, tails)).mean())]
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, config.batch_size):
                batch = order[start : start + config.batch_size]
                Q = eye[slots[batch]]
                negs_h = sampler.sample(rng, len(batch), config.k_negatives)
                negs_t = sampler.sample(rng, len(batch), config.k_negatives)
                nll_pos, _, _, dE, dA = _link_terms(
                    params.E, params.A, Q, heads[batch], tails[batch], negs_h, negs_t
                )
                if not np.isfinite(nll_pos):
                    raise TrainingError(f"non-finite oracle loss in setting {setting}")
                grads = {"E": dE, "A": dA}
                if config.l2 > 0:
                    grads["E"] += 2.0 * config.l2 * params.E
                    grads["A"] += 2.0 * config.l2 * params.A
                optimizer.step({"E": params.E, "A": params.A}, grads)
            curve.append(
                float(softplus(-_oracle_scores(params, slots, heads, tails)).mean())
            )
        per_run.append(curve)

    mean_curve = [float(np.mean([run[i] for run in per_run])) for i in range(epochs + 1)]
    return OracleCurve(setting=setting, n_slots=n_slots, nll_pos=mean_curve, per_run=per_run)
