"""Feature templates feeding the relation classifier.

The type-pair template is the one-hot backbone; the remaining templates are
the hand-crafted extras (entity surfaces, bag of words between the entities,
dependency-path tokens, POS tags, and dependency-path tokens minus stop
words). Each template owns a disjoint id range in the feature index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .corpus import Corpus, RelationInstance, UNK_PAIR, Vocabularies

TEMPLATES = ("TypePair", "Entity", "BOW", "DepPath", "POS", "Trigger")

_NAME_ALIASES = {t.lower(): t for t in TEMPLATES}
_NAME_ALIASES["type_pair"] = "TypePair"
_NAME_ALIASES["dep_path"] = "DepPath"


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    path = Path(__file__).with_name("stopwords.txt")
    return frozenset(
        w.strip() for w in path.read_text(encoding="utf-8").splitlines() if w.strip()
    )


@dataclass(frozen=True)
class FeatureSet:
    """Which templates are active; EType+ configurations keep type_pair on."""

    type_pair: bool = True
    entity: bool = False
    bow: bool = False
    dep_path: bool = False
    pos: bool = False
    trigger: bool = False

    _FLAGS = {
        "TypePair": "type_pair",
        "Entity": "entity",
        "BOW": "bow",
        "DepPath": "dep_path",
        "POS": "pos",
        "Trigger": "trigger",
    }

    def enabled(self) -> tuple[str, ...]:
        return tuple(t for t in TEMPLATES if getattr(self, self._FLAGS[t]))

    @classmethod
    def from_names(cls, names) -> "FeatureSet":
        flags = dict.fromkeys(cls._FLAGS.values(), False)
        for name in names:
            canonical = _NAME_ALIASES.get(str(name).strip().lower())
            if canonical is None:
                raise ValueError(
                    f"unknown feature template {name!r}; valid names: {', '.join(TEMPLATES)}"
                )
            flags[cls._FLAGS[canonical]] = True
        return cls(**flags)


@dataclass(frozen=True)
class SparseFeatureVector:
    """Multi-hot vector as sorted unique active indices plus the total width."""

    indices: np.ndarray
    dimension: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        object.__setattr__(self, "indices", idx)
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.dimension):
            raise ValueError("indices must be strictly increasing and within dimension")


def _between_slice(inst: RelationInstance) -> tuple[int, int]:
    lo = min(inst.head.end, inst.tail.end)
    hi = max(inst.head.start, inst.tail.start)
    return lo, max(lo, hi)


def _template_strings(
    inst: RelationInstance, template: str, stopwords: frozenset[str]
) -> list[str]:
    if template == "Entity":
        return [f"head={inst.head.text}", f"tail={inst.tail.text}"]
    if template == "BOW":
        lo, hi = _between_slice(inst)
        return sorted({w.lower() for w in inst.tokens[lo:hi]})
    if template == "DepPath":
        seq = inst.dep_path or ()
        if not seq:
            return []
        return ["path=" + "_".join(seq)] + [f"tok={w}" for w in seq]
    if template == "POS":
        if inst.pos is None:
            return []
        lo, hi = _between_slice(inst)
        seq = inst.pos[lo:hi]
        if not seq:
            return []
        return ["seq=" + "_".join(seq)] + [f"tag={t}" for t in seq]
    if template == "Trigger":
        return [f"tok={w}" for w in (inst.dep_path or ()) if w.lower() not in stopwords]
    raise ValueError(f"unknown template {template!r}")


@dataclass(frozen=True)
class FeatureIndex:
    """Explicit (template, string) -> id map; templates occupy disjoint ranges.

    The TypePair block mirrors the type-pair vocabulary (UNK pair at local
    id 0) and always sits at offset 0, so a type-pair-only vector's single
    active index equals the vocabulary id.
    """

    blocks: dict[str, dict[str, int]]
    offsets: dict[str, int]
    dimension: int

    def lookup(self, template: str, feature: str) -> int | None:
        block = self.blocks.get(template)
        if block is None:
            return None
        local = block.get(feature)
        if local is None:
            return None
        return self.offsets[template] + local

    def to_records(self) -> list[dict]:
        records = []
        for template in TEMPLATES:
            block = self.blocks.get(template)
            if block is None:
                continue
            offset = self.offsets[template]
            for feature, local in block.items():
                records.append(
                    {"template": template, "string": feature, "id": offset + local}
                )
        return sorted(records, key=lambda r: r["id"])

    def dump_json(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as f:
            for record in self.to_records():
                f.write(json.dumps(record, ensure_ascii=False))
                f.write("\n")


def _pair_key(pair: tuple[str, str]) -> str:
    return f"{pair[0]}|{pair[1]}"


def build_feature_index(
    corpus: Corpus,
    feature_set: FeatureSet,
    vocabularies: Vocabularies,
    stopwords: frozenset[str] | None = None,
) -> FeatureIndex:
    """Enumerate feature strings over the training corpus in first-seen order."""
    if stopwords is None:
        stopwords = default_stopwords()
    blocks: dict[str, dict[str, int]] = {}
    if feature_set.type_pair:
        blocks["TypePair"] = {
            _pair_key(pair): fid for pair, fid in vocabularies.type_pair_vocab.items()
        }
    for template in feature_set.enabled():
        if template == "TypePair":
            continue
        block: dict[str, int] = {}
        for inst in corpus:
            for feature in _template_strings(inst, template, stopwords):
                if feature not in block:
                    block[feature] = len(block)
        blocks[template] = block
    offsets: dict[str, int] = {}
    dimension = 0
    for template in TEMPLATES:
        if template in blocks:
            offsets[template] = dimension
            dimension += len(blocks[template])
    return FeatureIndex(blocks=blocks, offsets=offsets, dimension=dimension)


def extract_features(
    instance: RelationInstance,
    feature_set: FeatureSet,
    vocabularies: Vocabularies,
    feature_index: FeatureIndex,
    stopwords: frozenset[str] | None = None,
) -> SparseFeatureVector:
    """Active feature ids for one instance.

    Unseen strings are dropped, except the type pair which falls back to the
    UNK pair; missing annotations simply contribute no features.
    """
    if stopwords is None:
        stopwords = default_stopwords()
    ids: list[int] = []
    for template in feature_set.enabled():
        if template == "TypePair":
            pair = (instance.head.etype, instance.tail.etype)
            pair_id = vocabularies.type_pair_vocab.get(
                pair, vocabularies.type_pair_vocab[UNK_PAIR]
            )
            ids.append(feature_index.offsets["TypePair"] + pair_id)
            continue
        for feature in _template_strings(instance, template, stopwords):
            fid = feature_index.lookup(template, feature)
            if fid is not None:
                ids.append(fid)
    return SparseFeatureVector(np.unique(np.asarray(ids, dtype=np.int64)), feature_index.dimension)
