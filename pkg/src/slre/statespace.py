"""Factorized distributions over (subject type, relation, object type) states."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from slre.circuit import LiteralWeights
from slre.ontology import Ontology, object_var, relation_var, subject_var

__all__ = [
    "State", "StateDistribution", "state_probability", "full_distribution",
    "to_literal_weights", "literal_weight_arrays", "valid_states", "valid_mask",
    "state_names",
]


class State(NamedTuple):
    subject: int
    relation: int
    object: int


def _check_probs(name: str, p: np.ndarray, atol: float = 1e-9) -> None:
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError(f"{name} must be finite and non-negative")
    if abs(p.sum() - 1.0) > atol:
        raise ValueError(f"{name} sums to {p.sum()!r}, not 1")


@dataclass(frozen=True)
class StateDistribution:
    subject_probs: np.ndarray
    relation_probs: np.ndarray
    object_probs: np.ndarray

    def __post_init__(self):
        for name in ("subject_probs", "relation_probs", "object_probs"):
            p = np.asarray(getattr(self, name), dtype=float)
            _check_probs(name, p)
            object.__setattr__(self, name, p)
        if self.subject_probs.shape != self.object_probs.shape:
            raise ValueError("subject and object vectors must range over the same entity types")

    @classmethod
    def for_ontology(cls, o: Ontology, subject, relation, obj) -> "StateDistribution":
        d = cls(subject, relation, obj)
        if d.subject_probs.size != o.n_entities or d.relation_probs.size != o.n_relations:
            raise ValueError("distribution dimensions do not match the ontology")
        return d

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.subject_probs.size, self.relation_probs.size, self.object_probs.size)

    def joint(self) -> np.ndarray:
        """Array ``[s, r, o]`` of state probabilities."""
        return np.einsum("s,r,o->sro", self.subject_probs, self.relation_probs, self.object_probs)


def state_probability(d: StateDistribution, s: State) -> float:
    n_e, n_r, _ = d.shape
    if not (0 <= s.subject < n_e and 0 <= s.relation < n_r and 0 <= s.object < n_e):
        raise IndexError(f"state {tuple(s)} out of range for shape {d.shape}")
    return float(d.subject_probs[s.subject] * d.relation_probs[s.relation] * d.object_probs[s.object])


def full_distribution(d: StateDistribution) -> dict[State, float]:
    n_e, n_r, _ = d.shape
    return {State(s, r, o): state_probability(d, State(s, r, o))
            for s in range(n_e) for r in range(n_r) for o in range(n_e)}


def to_literal_weights(d: StateDistribution, o: Ontology) -> LiteralWeights:
    """Categorical literal weights: ``w(v)`` is the class probability and ``w(-v) = 1``.

    With the exactly-one groups of the lowered constraint every model fixes one
    class per group, so the weighted model count is exactly the summed
    probability of the permitted states.
    """
    pos = {}
    for i, e in enumerate(o.entity_types):
        pos[subject_var(e)] = float(d.subject_probs[i])
        pos[object_var(e)] = float(d.object_probs[i])
    for i, r in enumerate(o.relation_types):
        pos[relation_var(r)] = float(d.relation_probs[i])
    return LiteralWeights(pos, {k: 1.0 for k in pos})


def literal_weight_arrays(names, o: Ontology, subject: np.ndarray, relation: np.ndarray,
                          obj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched form of :func:`to_literal_weights`.

    ``subject``/``object`` are ``(B, E)`` and ``relation`` is ``(B, R)``; the
    result is a ``(pos, neg)`` pair of ``(len(names), B)`` arrays ordered as ``names``.
    """
    source = {}
    for i, e in enumerate(o.entity_types):
        source[subject_var(e)] = subject[:, i]
        source[object_var(e)] = obj[:, i]
    for i, r in enumerate(o.relation_types):
        source[relation_var(r)] = relation[:, i]
    pos = np.stack([source[n] for n in names]) if names else np.zeros((0, subject.shape[0]))
    return pos, np.ones_like(pos)


def state_names(o: Ontology, s: State) -> tuple[str, str, str]:
    return (o.entity_types[s.subject], o.relation_types[s.relation], o.entity_types[s.object])


def valid_states(o: Ontology) -> list[State]:
    """Permitted states in lexicographic (subject, relation, object) index order."""
    return [State(si, ri, oi)
            for si, s in enumerate(o.entity_types)
            for ri, r in enumerate(o.relation_types)
            for oi, t in enumerate(o.entity_types)
            if (r, s, t) in o.permitted]


def valid_mask(o: Ontology) -> np.ndarray:
    mask = np.zeros((o.n_entities, o.n_relations, o.n_entities), dtype=bool)
    for s in valid_states(o):
        mask[s] = True
    return mask
