"""Training-free baseline: the relation cluster is the head-tail type concatenation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus


@dataclass(frozen=True)
class Clustering:
    """Cluster assignment per corpus instance, aligned by index.

    Labels may be strings or integers; all downstream metrics treat them as
    opaque identifiers.
    """

    labels: tuple

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __getitem__(self, i: int):
        return self.labels[i]

    def to_json(self) -> str:
        return json.dumps({"labels": list(self.labels)}, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Clustering":
        obj = json.loads(text)
        return cls(tuple(obj["labels"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Clustering":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def etype_label(head_type: str, tail_type: str) -> str:
    """Join the two entity types with a hyphen; order-sensitive."""
    if not head_type or not tail_type:
        raise ValueError("entity types must be non-empty strings")
    return f"{head_type}-{tail_type}"


def etype_cluster(corpus: Corpus) -> Clustering:
    """Assign every instance the cluster named after its entity-type pair."""
    return Clustering(
        tuple(etype_label(inst.head.etype, inst.tail.etype) for inst in corpus)
    )
