"""Unconstrained and constrained MAP decoding of a factorized state distribution.

Constrained decoding enumerates the valid states, which is exact for
constraints that range over a single (subject, relation, object) triple.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from slre.statespace import State, StateDistribution, state_probability

__all__ = ["Prediction", "decode_unconstrained", "decode_constrained", "decode_batch"]


@dataclass(frozen=True)
class Prediction:
    state: State
    probability: float
    constrained: bool = False


def decode_unconstrained(d: StateDistribution) -> Prediction:
    """Per-factor argmax; ties go to the lowest index."""
    s = State(int(np.argmax(d.subject_probs)), int(np.argmax(d.relation_probs)),
              int(np.argmax(d.object_probs)))
    return Prediction(s, state_probability(d, s), constrained=False)


def decode_constrained(d: StateDistribution, valid_states: Iterable[State]) -> Prediction:
    """Most probable state among ``valid_states``; ties go to the lexicographically smallest."""
    best: Optional[State] = None
    best_p = -1.0
    for s in sorted(State(*s) for s in valid_states):
        p = state_probability(d, s)
        if p > best_p:
            best, best_p = s, p
    if best is None:
        raise ValueError("no valid states to decode into")
    return Prediction(best, best_p, constrained=True)


def decode_batch(subject: np.ndarray, relation: np.ndarray, obj: np.ndarray,
                 mask: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized decoding of ``(B, .)`` probability rows.

    Returns ``(states, probabilities)`` with ``states`` a ``(B, 3)`` int array.
    With a boolean ``mask`` of shape ``(E, R, E)`` only masked-in states are
    eligible; tie-breaking matches the scalar decoders.
    """
    if mask is None:
        s = subject.argmax(axis=1)
        r = relation.argmax(axis=1)
        o = obj.argmax(axis=1)
        rows = np.arange(subject.shape[0])
        p = subject[rows, s] * relation[rows, r] * obj[rows, o]
        return np.stack([s, r, o], axis=1), p
    if not mask.any():
        raise ValueError("no valid states to decode into")
    # same multiplication order as state_probability, so ties resolve identically
    joint = (subject[:, :, None, None] * relation[:, None, :, None]) * obj[:, None, None, :]
    joint = np.where(mask[None], joint, -1.0)
    flat = joint.reshape(joint.shape[0], -1)
    idx = flat.argmax(axis=1)
    states = np.stack(np.unravel_index(idx, mask.shape), axis=1)
    return states, flat[np.arange(flat.shape[0]), idx]
