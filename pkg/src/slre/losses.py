"""Semantic loss, product t-norm loss and cross-entropy, with gradients.

All losses are in nats.  Gradients are taken w.r.t. the class probabilities,
not logits; :mod:`slre.model` chains them through the softmax heads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from slre.circuit import Circuit, wmc_arrays_gradient
from slre.logic import And, Const, Formula, Implies, Not, Or, Var
from slre.ontology import Ontology, object_var, relation_var, subject_var
from slre.statespace import StateDistribution, literal_weight_arrays

__all__ = [
    "LossValue", "UnmappedVariableError", "semantic_loss", "semantic_loss_batch",
    "tnorm_probability", "tnorm_probability_gradient", "tnorm_loss", "tnorm_loss_batch",
    "cross_entropy", "DEFAULT_EPS",
]

DEFAULT_EPS = 1e-12


class UnmappedVariableError(KeyError):
    pass


@dataclass(frozen=True)
class LossValue:
    """A loss and its gradient.

    For state-level losses ``grad`` is ``(d_subject, d_relation, d_object)``;
    for cross-entropy it is ``(d_probs,)``.  ``inconsistent`` marks a
    constraint with zero satisfaction probability (``value`` is then inf).
    """

    value: float
    grad: tuple = field(default_factory=tuple)
    inconsistent: bool = False
    clamped: bool = False


# -- semantic loss ---------------------------------------------------------------

def semantic_loss_batch(circuit: Circuit, o: Ontology, subject: np.ndarray, relation: np.ndarray,
                        obj: np.ndarray, eps: Optional[float] = None):
    """Per-row semantic loss and probability gradients for ``(B, .)`` probability arrays.

    Returns ``(loss, wmc, d_subject, d_relation, d_object)``.  With ``eps`` the
    satisfaction probability is clamped from below, otherwise rows with zero
    probability get an infinite loss and NaN gradients.
    """
    pos, neg = literal_weight_arrays(circuit.variables, o, subject, relation, obj)
    value, dpos, dneg = wmc_arrays_gradient(circuit, pos, neg)
    value = np.broadcast_to(np.asarray(value, dtype=float), (subject.shape[0],))
    if eps is not None:
        loss = -np.log(np.maximum(value, eps))
        scale = np.where(value > eps, -1.0 / np.maximum(value, eps), 0.0)
    else:
        with np.errstate(divide="ignore"):
            loss = -np.log(value)
        scale = np.where(value > 0, -1.0 / np.where(value > 0, value, 1.0), np.nan)
    # negative literal weights are the constant 1, so only w(v) = p depends on p
    dprob = dpos * scale
    grads = {n: dprob[i] for i, n in enumerate(circuit.variables)}
    zeros = np.zeros(subject.shape[0])
    d_subject = np.stack([grads.get(subject_var(e), zeros) for e in o.entity_types], axis=1)
    d_object = np.stack([grads.get(object_var(e), zeros) for e in o.entity_types], axis=1)
    d_relation = np.stack([grads.get(relation_var(r), zeros) for r in o.relation_types], axis=1)
    return loss, value, d_subject, d_relation, d_object


def semantic_loss(circuit: Circuit, d: StateDistribution, o: Ontology,
                  eps: Optional[float] = None) -> LossValue:
    """``-ln`` of the probability that a state drawn from ``d`` satisfies the compiled constraint."""
    loss, value, ds, dr, do = semantic_loss_batch(
        circuit, o, d.subject_probs[None], d.relation_probs[None], d.object_probs[None], eps)
    inconsistent = bool(value[0] <= 0)
    return LossValue(float(loss[0]), (ds[0], dr[0], do[0]), inconsistent=inconsistent,
                     clamped=eps is not None and bool(value[0] < eps))


# -- product t-norm ----------------------------------------------------------------

def _tnorm_tape(f: Formula, probs: Mapping[str, object], tape: list) -> int:
    if isinstance(f, Var):
        try:
            v = np.asarray(probs[f.name], dtype=float)
        except KeyError:
            raise UnmappedVariableError(f.name) from None
        tape.append((f, (), v))
    elif isinstance(f, Const):
        tape.append((f, (), np.asarray(1.0 if f.value else 0.0)))
    elif isinstance(f, Not):
        c = _tnorm_tape(f.child, probs, tape)
        tape.append((f, (c,), 1.0 - tape[c][2]))
    elif isinstance(f, And):
        kids = tuple(_tnorm_tape(c, probs, tape) for c in f.children)
        v = tape[kids[0]][2]
        for k in kids[1:]:
            v = v * tape[k][2]
        tape.append((f, kids, v))
    elif isinstance(f, Or):
        # n-ary probabilistic sum, the left fold of a + b - ab
        kids = tuple(_tnorm_tape(c, probs, tape) for c in f.children)
        miss = 1.0 - tape[kids[0]][2]
        for k in kids[1:]:
            miss = miss * (1.0 - tape[k][2])
        tape.append((f, kids, 1.0 - miss))
    elif isinstance(f, Implies):
        a = _tnorm_tape(f.left, probs, tape)
        b = _tnorm_tape(f.right, probs, tape)
        tape.append((f, (a, b), tape[a][2] * (tape[b][2] - 1.0) + 1.0))
    else:
        raise TypeError(f"not a formula: {f!r}")
    return len(tape) - 1


def _others_product(values: list) -> list:
    """For each position, the product of all other entries (no division)."""
    n = len(values)
    out = [None] * n
    run = None
    for j in range(n):
        out[j] = run
        run = values[j] if run is None else run * values[j]
    run = None
    for j in range(n - 1, -1, -1):
        if run is not None:
            out[j] = run if out[j] is None else out[j] * run
        if out[j] is None:
            out[j] = np.ones_like(values[j])
        run = values[j] if run is None else run * values[j]
    return out


def tnorm_probability(f: Formula, probs: Mapping[str, object]):
    """Product t-norm value of ``f`` with variable truth degrees ``probs``."""
    tape: list = []
    root = _tnorm_tape(f, probs, tape)
    v = tape[root][2]
    return float(v) if np.ndim(v) == 0 else v


def tnorm_probability_gradient(f: Formula, probs: Mapping[str, object]):
    """Value and ``{variable: d value / d probs[variable]}`` for the product t-norm."""
    tape: list = []
    root = _tnorm_tape(f, probs, tape)
    adj: list = [None] * len(tape)
    adj[root] = np.ones_like(tape[root][2])
    grads: dict = {}
    for i in range(root, -1, -1):
        a = adj[i]
        if a is None:
            continue
        node, kids, _ = tape[i]

        def push(k, g):
            adj[k] = g if adj[k] is None else adj[k] + g

        if isinstance(node, Var):
            grads[node.name] = grads[node.name] + a if node.name in grads else a
        elif isinstance(node, Not):
            push(kids[0], -a)
        elif isinstance(node, And):
            for k, other in zip(kids, _others_product([tape[k][2] for k in kids])):
                push(k, a * other)
        elif isinstance(node, Or):
            for k, other in zip(kids, _others_product([1.0 - tape[k][2] for k in kids])):
                push(k, a * other)
        elif isinstance(node, Implies):
            va, vb = tape[kids[0]][2], tape[kids[1]][2]
            push(kids[0], a * (vb - 1.0))
            push(kids[1], a * va)
    return tape[root][2], grads


def tnorm_loss_batch(f: Formula, o: Ontology, subject: np.ndarray, relation: np.ndarray,
                     obj: np.ndarray, eps: float = DEFAULT_EPS):
    """Per-row ``-ln(max(eps, [f]))`` and probability gradients; see :func:`semantic_loss_batch`."""
    probs = {}
    for i, e in enumerate(o.entity_types):
        probs[subject_var(e)] = subject[:, i]
        probs[object_var(e)] = obj[:, i]
    for i, r in enumerate(o.relation_types):
        probs[relation_var(r)] = relation[:, i]
    value, grads = tnorm_probability_gradient(f, probs)
    value = np.broadcast_to(np.asarray(value, dtype=float), (subject.shape[0],))
    denom = np.maximum(value, eps)
    loss = -np.log(denom)
    scale = np.where(value > eps, -1.0 / denom, 0.0)
    zeros = np.zeros(subject.shape[0])
    d_subject = np.stack([scale * grads.get(subject_var(e), zeros) for e in o.entity_types], axis=1)
    d_object = np.stack([scale * grads.get(object_var(e), zeros) for e in o.entity_types], axis=1)
    d_relation = np.stack([scale * grads.get(relation_var(r), zeros) for r in o.relation_types], axis=1)
    return loss, value, d_subject, d_relation, d_object


def tnorm_loss(f: Formula, d: StateDistribution, o: Ontology, eps: float = DEFAULT_EPS) -> LossValue:
    loss, value, ds, dr, do = tnorm_loss_batch(
        f, o, d.subject_probs[None], d.relation_probs[None], d.object_probs[None], eps)
    return LossValue(float(loss[0]), (ds[0], dr[0], do[0]), clamped=bool(value[0] <= eps))


# -- cross-entropy -------------------------------------------------------------------

def cross_entropy(probs, gold: int, eps: float = DEFAULT_EPS) -> LossValue:
    probs = np.asarray(probs, dtype=float)
    if not 0 <= gold < probs.size:
        raise IndexError(f"gold class {gold} out of range for {probs.size} classes")
    p = probs[gold]
    clamped = bool(p < eps)
    p = max(p, eps)
    grad = np.zeros_like(probs)
    grad[gold] = 0.0 if clamped else -1.0 / p
    return LossValue(float(-np.log(p)), (grad,), clamped=clamped)
