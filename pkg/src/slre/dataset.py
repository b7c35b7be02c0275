"""Array-backed dataset splits and their JSON-lines file format.

Each line is ``{"id", "subj_feat", "obj_feat", "pair_feat", "gold"}`` where
``gold`` is ``{"subj", "rel", "obj"}`` (type names) or ``null``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from slre.model import Instance
from slre.ontology import Ontology
from slre.statespace import State

__all__ = ["Split", "Dataset", "write_jsonl", "read_jsonl", "write_dataset", "read_dataset",
           "SPLITS"]

SPLITS = ("labeled", "unlabeled", "validation", "test")


@dataclass(frozen=True)
class Split:
    xs: np.ndarray
    xo: np.ndarray
    xp: np.ndarray
    gold: Optional[np.ndarray] = None  # (N, 3) state indices
    ids: Optional[tuple] = None

    def __len__(self) -> int:
        return self.xs.shape[0]

    def __post_init__(self):
        n = self.xs.shape[0]
        if self.xo.shape[0] != n or self.xp.shape[0] != n:
            raise ValueError("feature arrays have different lengths")
        if self.gold is not None and self.gold.shape != (n, 3):
            raise ValueError("gold must be an (N, 3) array")
        if self.ids is None:
            object.__setattr__(self, "ids", tuple(range(n)))

    def subset(self, index) -> "Split":
        index = np.asarray(index, dtype=int)
        gold = None if self.gold is None else self.gold[index]
        return Split(self.xs[index], self.xo[index], self.xp[index], gold,
                     tuple(self.ids[i] for i in index))

    def without_gold(self) -> "Split":
        return Split(self.xs, self.xo, self.xp, None, self.ids)

    def with_gold(self, gold: np.ndarray) -> "Split":
        return Split(self.xs, self.xo, self.xp, np.asarray(gold, dtype=int), self.ids)

    @staticmethod
    def concat(splits: Iterable["Split"]) -> "Split":
        splits = [s for s in splits if len(s)]
        if not splits:
            raise ValueError("nothing to concatenate")
        golds = [s.gold for s in splits]
        gold = None if any(g is None for g in golds) else np.concatenate(golds)
        return Split(np.concatenate([s.xs for s in splits]), np.concatenate([s.xo for s in splits]),
                     np.concatenate([s.xp for s in splits]), gold,
                     tuple(i for s in splits for i in s.ids))

    def instances(self) -> list[Instance]:
        return [Instance(self.xs[i], self.xo[i], self.xp[i],
                         None if self.gold is None else State(*map(int, self.gold[i])))
                for i in range(len(self))]


@dataclass(frozen=True)
class Dataset:
    labeled: Split
    unlabeled: Split
    validation: Split
    test: Split

    def splits(self) -> dict[str, Split]:
        return {name: getattr(self, name) for name in SPLITS}


def write_jsonl(split: Split, o: Ontology, path) -> None:
    with open(path, "w") as fh:
        for i in range(len(split)):
            gold = None
            if split.gold is not None:
                s, r, t = split.gold[i]
                gold = {"subj": o.entity_types[s], "rel": o.relation_types[r], "obj": o.entity_types[t]}
            rec = {"id": split.ids[i], "subj_feat": split.xs[i].tolist(),
                   "obj_feat": split.xo[i].tolist(), "pair_feat": split.xp[i].tolist(), "gold": gold}
            fh.write(json.dumps(rec) + "\n")


def read_jsonl(path, o: Ontology) -> Split:
    ents = {e: i for i, e in enumerate(o.entity_types)}
    rels = {r: i for i, r in enumerate(o.relation_types)}
    ids, xs, xo, xp, gold = [], [], [], [], []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            ids.append(rec["id"])
            xs.append(rec["subj_feat"])
            xo.append(rec["obj_feat"])
            xp.append(rec["pair_feat"])
            g = rec.get("gold")
            gold.append(None if g is None else (ents[g["subj"]], rels[g["rel"]], ents[g["obj"]]))
    g = None if not gold or any(x is None for x in gold) else np.array(gold, dtype=int)
    return Split(np.array(xs, dtype=float), np.array(xo, dtype=float), np.array(xp, dtype=float),
                 g, tuple(ids))


def write_dataset(ds: Dataset, o: Ontology, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, split in ds.splits().items():
        write_jsonl(split, o, directory / f"{name}.jsonl")


def read_dataset(directory, o: Ontology) -> Dataset:
    directory = Path(directory)
    return Dataset(*(read_jsonl(directory / f"{name}.jsonl", o) for name in SPLITS))
