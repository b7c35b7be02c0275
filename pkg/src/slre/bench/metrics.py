"""avg-f1, tri-f1 and constraint-violation rate over predicted states."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.metrics import f1_score

from slre.ontology import Ontology
from slre.statespace import valid_mask

__all__ = ["MetricsReport", "evaluate", "macro_f1", "triple_f1"]


@dataclass(frozen=True)
class MetricsReport:
    avg_f1: float
    tri_f1: float
    violation_rate: float
    subject_f1: np.ndarray = field(repr=False, default=None)
    relation_f1: np.ndarray = field(repr=False, default=None)
    object_f1: np.ndarray = field(repr=False, default=None)
    method: Optional[str] = None
    regime: Optional[str] = None
    labels_per_class: Optional[int] = None
    seed: Optional[int] = None

    def row(self) -> dict:
        return {"method": self.method, "regime": self.regime, "labels": self.labels_per_class,
                "seed": self.seed, "avg_f1": self.avg_f1, "tri_f1": self.tri_f1,
                "violation_rate": self.violation_rate}


def macro_f1(gold: np.ndarray, pred: np.ndarray, exclude: Optional[int] = None) -> float:
    """Macro F1 over the classes present in ``gold`` or ``pred``, minus ``exclude``."""
    labels = sorted(set(np.unique(gold)) | set(np.unique(pred)))
    if exclude is not None:
        labels = [c for c in labels if c != exclude]
    if not labels:
        return 1.0
    return float(f1_score(gold, pred, labels=labels, average="macro", zero_division=0))


def triple_f1(gold: np.ndarray, pred: np.ndarray, negative_relation: Optional[int] = None) -> float:
    """Micro F1 of exact triple matches; triples with the negative relation are not positives."""
    if negative_relation is None:
        gold_pos = np.ones(len(gold), dtype=bool)
        pred_pos = np.ones(len(pred), dtype=bool)
    else:
        gold_pos = gold[:, 1] != negative_relation
        pred_pos = pred[:, 1] != negative_relation
    tp = int(np.sum(np.all(gold == pred, axis=1) & gold_pos))
    n_pred, n_gold = int(pred_pos.sum()), int(gold_pos.sum())
    if n_pred == 0 and n_gold == 0:
        return 1.0
    if tp == 0:
        return 0.0
    precision, recall = tp / n_pred, tp / n_gold
    return 2 * precision * recall / (precision + recall)


def evaluate(pred: np.ndarray, gold: np.ndarray, o: Ontology, mask: Optional[np.ndarray] = None,
             per_class: bool = True, **tags) -> MetricsReport:
    """Score ``(N, 3)`` predicted states against ``(N, 3)`` gold states.

    avg-f1 is the unweighted mean of the subject-type, object-type and relation
    macro F1 scores; the no-relation class, if any, is excluded from the
    relation average and from tri-f1 positives.
    """
    pred = np.asarray(pred, dtype=int).reshape(-1, 3)
    gold = np.asarray(gold, dtype=int).reshape(-1, 3)
    if pred.shape != gold.shape:
        raise ValueError(f"{len(pred)} predictions for {len(gold)} gold states")
    if mask is None:
        mask = valid_mask(o)
    none_idx = o.relation_types.index(o.none_relation) if o.none_relation is not None else None
    n = len(pred)
    if n == 0:
        return MetricsReport(0.0, 0.0, 0.0, **tags)
    subj = macro_f1(gold[:, 0], pred[:, 0])
    obj = macro_f1(gold[:, 2], pred[:, 2])
    rel = macro_f1(gold[:, 1], pred[:, 1], exclude=none_idx)
    violations = ~mask[pred[:, 0], pred[:, 1], pred[:, 2]]

    def class_f1(col: int, k: int) -> Optional[np.ndarray]:
        if not per_class:
            return None
        return f1_score(gold[:, col], pred[:, col], labels=list(range(k)), average=None, zero_division=0)

    return MetricsReport(
        avg_f1=(subj + obj + rel) / 3.0,
        tri_f1=triple_f1(gold, pred, none_idx),
        violation_rate=float(violations.mean()),
        subject_f1=class_f1(0, o.n_entities),
        relation_f1=class_f1(1, o.n_relations),
        object_f1=class_f1(2, o.n_entities),
        **tags,
    )
