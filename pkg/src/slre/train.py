"""Training regimes: base, semantic loss, product t-norm and CoDL.

Every regime runs mini-batch SGD with a plateau schedule: the learning rate is
multiplied by ``lr_decay`` after every ``decay_every`` consecutive epochs
without a strict improvement in validation tri-f1, and training stops after
``patience`` such epochs or ``max_epochs`` in total.  The returned parameters
are the best-by-validation checkpoint; epoch 0 (the initial parameters) is a
candidate too.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from slre.bench.metrics import MetricsReport, evaluate
from slre.circuit import Circuit, compile_formula
from slre.dataset import Split
from slre.decode import decode_batch
from slre.logic import Formula
from slre.losses import DEFAULT_EPS, semantic_loss_batch, tnorm_loss_batch
from slre.model import ModelParams, backward_batch, forward_batch, init_params
from slre.ontology import Ontology, lower_to_constraint, relation_clauses
from slre.statespace import valid_mask

__all__ = [
    "METHODS", "SL_WEIGHT_GRID", "TNORM_WEIGHT_GRID", "LABEL_GRID",
    "TrainConfig", "EpochRecord", "TrainResult", "Constraint", "PlateauSchedule",
    "train_base", "train_constrained", "train_codl", "train", "predict", "score_split",
]

log = logging.getLogger(__name__)

METHODS = ("base", "sl", "tnorm", "codl")
SL_WEIGHT_GRID = (0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0)
TNORM_WEIGHT_GRID = SL_WEIGHT_GRID + (2.0, 4.0)
LABEL_GRID = (3, 5, 10, 15, 25, 50, 75)


@dataclass(frozen=True)
class TrainConfig:
    method: str = "base"
    constraint_weight: float = 0.05
    labels_per_class: int = 3
    transductive: bool = False
    seed: int = 0
    initial_lr: float = 1.0
    lr_decay: float = 0.9
    decay_every: int = 10
    max_epochs: int = 100
    patience: int = 20
    batch_size: int = 32
    unlabeled_ratio: float = 1.0
    codl_rounds: int = 3
    codl_finetune_from_best: bool = True
    init_scale: float = 0.01

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.constraint_weight < 0:
            raise ValueError("constraint_weight must be non-negative")
        if self.labels_per_class < 1 or self.batch_size < 1:
            raise ValueError("labels_per_class and batch_size must be positive")
        if self.codl_rounds < 0 or self.unlabeled_ratio < 0:
            raise ValueError("codl_rounds and unlabeled_ratio must be non-negative")

    @property
    def effective_weight(self) -> float:
        return self.constraint_weight if self.method in ("sl", "tnorm") else 0.0


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    ce_loss: float
    constraint_loss: float
    total_loss: float
    val_avg_f1: float
    val_tri_f1: float
    violation_rate: float
    round: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass
class TrainResult:
    params: ModelParams
    log: list = field(default_factory=list)
    best_epoch: int = 0
    best_metric: float = float("-inf")

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.log:
                fh.write(rec.to_json() + "\n")


@dataclass(frozen=True)
class Constraint:
    """An ontology with its lowered formula, compiled circuit and valid-state mask."""

    ontology: Ontology
    formula: Formula
    clauses: Formula
    circuit: Circuit
    mask: np.ndarray

    @classmethod
    def from_ontology(cls, o: Ontology) -> "Constraint":
        formula = lower_to_constraint(o)
        # relation indicators first, then subject types, then object types
        circuit = compile_formula(formula, o.variables())
        return cls(o, formula, relation_clauses(o), circuit, valid_mask(o))


class PlateauSchedule:
    def __init__(self, initial_lr: float = 1.0, decay: float = 0.9, every: int = 10,
                 patience: int = 20):
        self.initial_lr = initial_lr
        self.decay = decay
        self.every = every
        self.patience = patience
        self.best = float("-inf")
        self.stagnant = 0
        self.decays = 0

    @property
    def lr(self) -> float:
        return self.initial_lr * self.decay ** self.decays

    @property
    def should_stop(self) -> bool:
        return self.stagnant >= self.patience

    def step(self, metric: float) -> bool:
        """Record one epoch's validation metric; True if it strictly improved."""
        if metric > self.best:
            self.best = metric
            self.stagnant = 0
            return True
        self.stagnant += 1
        if self.stagnant % self.every == 0:
            self.decays += 1
        return False


Validator = Callable[[ModelParams], MetricsReport]


def predict(params: ModelParams, split: Split, mask: Optional[np.ndarray] = None) -> np.ndarray:
    b = forward_batch(params, split.xs, split.xo, split.xp)
    states, _ = decode_batch(b.subject, b.relation, b.object, mask)
    return states


def score_split(params: ModelParams, split: Split, constraint: Constraint, constrained: bool = False,
                per_class: bool = False, **tags) -> MetricsReport:
    pred = predict(params, split, constraint.mask if constrained else None)
    return evaluate(pred, split.gold, constraint.ontology, constraint.mask, per_class=per_class, **tags)


def _ce_grads(b, gold: np.ndarray, n: int, eps: float = DEFAULT_EPS):
    """Summed NER (subject, object) and RE cross-entropy over the first ``n`` rows.

    Gradient arrays cover the whole batch; rows past ``n`` stay zero.
    """
    rows = np.arange(n)
    total = 0.0
    grads = []
    for probs, col in ((b.subject, 0), (b.relation, 1), (b.object, 2)):
        g = np.zeros_like(probs)
        p = probs[rows, gold[:, col]]
        total += float(-np.log(np.maximum(p, eps)).sum())
        g[rows, gold[:, col]] = np.where(p > eps, -1.0 / np.maximum(p, eps), 0.0)
        grads.append(g)
    return total, grads


def _fit(params: ModelParams, config: TrainConfig, labeled: Split, unlabeled: Optional[Split],
         constraint: Constraint, validate: Validator, *, weight: float, method: str,
         rng: np.random.Generator, first_epoch: int = 1, round_: int = 0) -> TrainResult:
    if len(labeled) == 0:
        raise ValueError("labeled set is empty")
    if labeled.gold is None:
        raise ValueError("labeled split has no gold states")
    use_constraint = weight > 0 and method in ("sl", "tnorm")
    pool = unlabeled if use_constraint and unlabeled is not None and len(unlabeled) else None
    n_unl = int(round(config.unlabeled_ratio * config.batch_size)) if pool is not None else 0
    u_order = rng.permutation(len(pool)) if pool is not None else None
    u_pos = 0

    schedule = PlateauSchedule(config.initial_lr, config.lr_decay, config.decay_every, config.patience)
    best = params.copy()
    schedule.step(validate(params).tri_f1)
    result = TrainResult(best, [], first_epoch - 1, schedule.best)

    for epoch in range(first_epoch, first_epoch + config.max_epochs):
        lr = schedule.lr
        order = rng.permutation(len(labeled))
        ce_sum = con_sum = tot_sum = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            nl = len(idx)
            xs, xo, xp = labeled.xs[idx], labeled.xo[idx], labeled.xp[idx]
            if n_unl:
                take = []
                while len(take) < n_unl:
                    if u_pos == len(u_order):
                        u_order, u_pos = rng.permutation(len(pool)), 0
                    step = min(n_unl - len(take), len(u_order) - u_pos)
                    take.extend(u_order[u_pos:u_pos + step])
                    u_pos += step
                xs = np.concatenate([xs, pool.xs[take]])
                xo = np.concatenate([xo, pool.xo[take]])
                xp = np.concatenate([xp, pool.xp[take]])
            b = forward_batch(params, xs, xo, xp)
            ce, (gs, gr, go) = _ce_grads(b, labeled.gold[idx], nl)
            gs, gr, go = gs / nl, gr / nl, go / nl
            ce /= nl
            con = 0.0
            if use_constraint:
                loss_fn = semantic_loss_batch if method == "sl" else tnorm_loss_batch
                target = constraint.circuit if method == "sl" else constraint.clauses
                losses, _, ds, dr, do = loss_fn(target, constraint.ontology, b.subject, b.relation,
                                                b.object, eps=DEFAULT_EPS)
                m = len(losses)
                con = float(losses.mean())
                gs = gs + weight * ds / m
                gr = gr + weight * dr / m
                go = go + weight * do / m
            grad = backward_batch(params, b, gs, gr, go)
            params.axpy(-lr, grad)
            ce_sum += ce
            con_sum += con
            tot_sum += ce + weight * con
            n_batches += 1

        report = validate(params)
        improved = schedule.step(report.tri_f1)
        result.log.append(EpochRecord(epoch, lr, ce_sum / n_batches, con_sum / n_batches,
                                      tot_sum / n_batches, report.avg_f1, report.tri_f1,
                                      report.violation_rate, round_))
        if improved:
            result.params = params.copy()
            result.best_epoch = epoch
            result.best_metric = schedule.best
        if schedule.should_stop:
            break
    return result


def _setup(config: TrainConfig, labeled: Split, constraint: Constraint,
           validation: Optional[Split], validate: Optional[Validator], params: Optional[ModelParams]):
    rng = np.random.default_rng(config.seed)
    o = constraint.ontology
    if params is None:
        params = init_params(o.n_entities, o.n_relations, labeled.xs.shape[1], labeled.xp.shape[1],
                             rng, config.init_scale)
    if validate is None:
        if validation is None:
            raise ValueError("need a validation split or a validate callback")
        validate = lambda p: score_split(p, validation, constraint)  # noqa: E731
    return rng, params.copy(), validate


def train_base(config: TrainConfig, labeled: Split, validation: Optional[Split],
               constraint: Constraint, *, validate: Optional[Validator] = None,
               params: Optional[ModelParams] = None) -> TrainResult:
    """Cross-entropy only; unlabeled data and the constraint weight are ignored."""
    rng, params, validate = _setup(config, labeled, constraint, validation, validate, params)
    return _fit(params, config, labeled, None, constraint, validate, weight=0.0, method="base", rng=rng)


def train_constrained(config: TrainConfig, labeled: Split, unlabeled: Optional[Split],
                      validation: Optional[Split], constraint: Constraint, *,
                      test_inputs: Optional[Split] = None, validate: Optional[Validator] = None,
                      params: Optional[ModelParams] = None) -> TrainResult:
    """Cross-entropy on labeled rows plus the weighted constraint loss on every row of a batch.

    Each labeled mini-batch is joined by ``unlabeled_ratio * batch_size``
    rows drawn without replacement from a reshuffled unlabeled stream.  With
    ``transductive`` set, ``test_inputs`` (gold stripped) join that stream.
    """
    if config.method not in ("sl", "tnorm"):
        raise ValueError(f"train_constrained needs method sl or tnorm, not {config.method!r}")
    rng, params, validate = _setup(config, labeled, constraint, validation, validate, params)
    pool = unlabeled.without_gold() if unlabeled is not None and len(unlabeled) else None
    if config.transductive and test_inputs is not None and len(test_inputs):
        pool = Split.concat([p for p in (pool, test_inputs.without_gold()) if p is not None])
    return _fit(params, config, labeled, pool, constraint, validate,
                weight=config.constraint_weight, method=config.method, rng=rng)


def train_codl(config: TrainConfig, labeled: Split, unlabeled: Split, validation: Optional[Split],
               constraint: Constraint, *, test_inputs: Optional[Split] = None,
               validate: Optional[Validator] = None,
               params: Optional[ModelParams] = None) -> TrainResult:
    """Base training, then rounds of constrained pseudo-labeling and fine-tuning.

    Each round labels every unlabeled instance with its most probable valid
    state under the current best model and trains on labeled plus
    pseudo-labeled data, starting from the best checkpoint (or from scratch
    when ``codl_finetune_from_best`` is off).  A round's checkpoint replaces
    the incumbent only if it is strictly better on validation.
    """
    pool = unlabeled.without_gold() if unlabeled is not None else None
    if config.transductive and test_inputs is not None and len(test_inputs):
        pool = Split.concat([p for p in (pool, test_inputs.without_gold()) if p is not None])
    if pool is None or len(pool) == 0:
        raise ValueError("CoDL needs a non-empty unlabeled set")
    rng, start, validate = _setup(config, labeled, constraint, validation, validate, params)
    init = start.copy()
    result = _fit(start, config, labeled, None, constraint, validate, weight=0.0, method="base", rng=rng)
    for r in range(1, config.codl_rounds + 1):
        pseudo = predict(result.params, pool, constraint.mask)
        if not constraint.mask[pseudo[:, 0], pseudo[:, 1], pseudo[:, 2]].all():
            raise AssertionError("constrained decoding produced an invalid pseudo-label")
        train_set = Split.concat([labeled, pool.with_gold(pseudo)])
        begin = result.params.copy() if config.codl_finetune_from_best else init.copy()
        next_epoch = result.log[-1].epoch + 1 if result.log else 1
        rnd = _fit(begin, config, train_set, None, constraint, validate, weight=0.0, method="base",
                   rng=rng, first_epoch=next_epoch, round_=r)
        result.log.extend(rnd.log)
        if rnd.best_metric > result.best_metric:
            result.params = rnd.params
            result.best_epoch = rnd.best_epoch
            result.best_metric = rnd.best_metric
        log.debug("codl round %d: best tri-f1 %.4f", r, result.best_metric)
    return result


def train(config: TrainConfig, labeled: Split, unlabeled: Optional[Split], validation: Optional[Split],
          constraint: Constraint, *, test_inputs: Optional[Split] = None,
          validate: Optional[Validator] = None) -> TrainResult:
    """Dispatch on ``config.method``."""
    if config.method == "base":
        return train_base(config, labeled, validation, constraint, validate=validate)
    if config.method == "codl":
        return train_codl(config, labeled, unlabeled, validation, constraint,
                          test_inputs=test_inputs, validate=validate)
    return train_constrained(config, labeled, unlabeled, validation, constraint,
                             test_inputs=test_inputs, validate=validate)
