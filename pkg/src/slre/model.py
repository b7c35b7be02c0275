"""Linear-softmax entity and relation classifiers.

One shared NER head types both arguments of a pair.  The RE head reads the
pair features, both argument feature vectors and both NER probability
vectors, so relation gradients also flow back into the NER head.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from slre.statespace import State, StateDistribution

__all__ = [
    "Instance", "ModelParams", "Batch", "softmax", "init_params", "forward", "backward",
    "forward_batch", "backward_batch", "save_params", "load_params", "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Instance:
    subject_features: np.ndarray
    object_features: np.ndarray
    pair_features: np.ndarray
    gold: Optional[State] = None


@dataclass
class ModelParams:
    ner_w: np.ndarray  # (E, F)
    ner_b: np.ndarray  # (E,)
    re_w: np.ndarray   # (R, G + 2F + 2E)
    re_b: np.ndarray   # (R,)

    def __post_init__(self):
        e, f = self.ner_w.shape
        r, width = self.re_w.shape
        if self.ner_b.shape != (e,) or self.re_b.shape != (r,):
            raise ValueError("bias shapes do not match weight shapes")
        if width - 2 * f - 2 * e < 0:
            raise ValueError("relation weight width too small for the entity head")

    @property
    def dims(self) -> dict:
        e, f = self.ner_w.shape
        r, width = self.re_w.shape
        return {"entities": e, "relations": r, "features": f, "pair_features": width - 2 * f - 2 * e}

    def arrays(self) -> tuple:
        return (self.ner_w, self.ner_b, self.re_w, self.re_b)

    def copy(self) -> "ModelParams":
        return ModelParams(*(a.copy() for a in self.arrays()))

    def axpy(self, alpha: float, other: "ModelParams") -> None:
        """In place ``self += alpha * other``."""
        for mine, theirs in zip(self.arrays(), other.arrays()):
            mine += alpha * theirs

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])


def init_params(n_entities: int, n_relations: int, n_features: int, n_pair_features: int,
                rng: Optional[np.random.Generator] = None, scale: float = 0.0) -> ModelParams:
    width = n_pair_features + 2 * n_features + 2 * n_entities
    shapes = [(n_entities, n_features), (n_entities,), (n_relations, width), (n_relations,)]
    if rng is None or scale == 0.0:
        return ModelParams(*(np.zeros(s) for s in shapes))
    return ModelParams(*(scale * rng.standard_normal(s) for s in shapes))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _softmax_backward(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    return p * (g - (g * p).sum(axis=-1, keepdims=True))


@dataclass
class Batch:
    """Forward activations of a batch, kept for :func:`backward_batch`."""

    xs: np.ndarray
    xo: np.ndarray
    re_in: np.ndarray
    subject: np.ndarray
    relation: np.ndarray
    object: np.ndarray


def forward_batch(params: ModelParams, xs: np.ndarray, xo: np.ndarray, xp: np.ndarray) -> Batch:
    e, f = params.ner_w.shape
    if xs.shape[1] != f or xo.shape[1] != f:
        raise ValueError(f"entity features must have dimension {f}")
    g = params.dims["pair_features"]
    if xp.shape[1] != g:
        raise ValueError(f"pair features must have dimension {g}")
    subject = softmax(xs @ params.ner_w.T + params.ner_b)
    obj = softmax(xo @ params.ner_w.T + params.ner_b)
    re_in = np.concatenate([xp, xs, xo, subject, obj], axis=1)
    relation = softmax(re_in @ params.re_w.T + params.re_b)
    return Batch(xs, xo, re_in, subject, relation, obj)


def backward_batch(params: ModelParams, batch: Batch, d_subject: np.ndarray,
                   d_relation: np.ndarray, d_object: np.ndarray) -> ModelParams:
    """Parameter gradients given loss gradients w.r.t. the three probability arrays."""
    e = params.ner_w.shape[0]
    dz_r = _softmax_backward(batch.relation, d_relation)
    re_w = dz_r.T @ batch.re_in
    re_b = dz_r.sum(axis=0)
    d_in = dz_r @ params.re_w
    d_subject = d_subject + d_in[:, -2 * e:-e]
    d_object = d_object + d_in[:, -e:]
    dz_s = _softmax_backward(batch.subject, d_subject)
    dz_o = _softmax_backward(batch.object, d_object)
    ner_w = dz_s.T @ batch.xs + dz_o.T @ batch.xo
    ner_b = dz_s.sum(axis=0) + dz_o.sum(axis=0)
    return ModelParams(ner_w, ner_b, re_w, re_b)


def _stack(instance: Instance):
    return (np.asarray(instance.subject_features, dtype=float)[None],
            np.asarray(instance.object_features, dtype=float)[None],
            np.asarray(instance.pair_features, dtype=float)[None])


def forward(params: ModelParams, instance: Instance) -> StateDistribution:
    b = forward_batch(params, *_stack(instance))
    return StateDistribution(b.subject[0], b.relation[0], b.object[0])


def backward(params: ModelParams, instance: Instance, upstream: tuple) -> ModelParams:
    """Gradients for one instance; ``upstream`` is ``(d_subject, d_relation, d_object)``."""
    b = forward_batch(params, *_stack(instance))
    ds, dr, do = (np.asarray(u, dtype=float)[None] for u in upstream)
    if ds.shape != b.subject.shape or dr.shape != b.relation.shape or do.shape != b.object.shape:
        raise ValueError("upstream gradient shapes do not match the distribution")
    return backward_batch(params, b, ds, dr, do)


def save_params(params: ModelParams, path, meta: Optional[dict] = None) -> None:
    """Decimal-text JSON checkpoint; floats are written with round-trip precision."""
    doc = {"format": "slre-params", "version": CHECKPOINT_VERSION, "dims": params.dims,
           "meta": meta or {},
           "ner_w": params.ner_w.tolist(), "ner_b": params.ner_b.tolist(),
           "re_w": params.re_w.tolist(), "re_b": params.re_b.tolist()}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_params(path) -> ModelParams:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "slre-params" or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} slre checkpoint")
    params = ModelParams(*(np.array(doc[k], dtype=float) for k in ("ner_w", "ner_b", "re_w", "re_b")))
    if params.dims != doc["dims"]:
        raise ValueError(f"{path}: dims header does not match the stored arrays")
    return params
