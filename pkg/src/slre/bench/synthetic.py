"""Synthetic entity-relation data with a known constraint.

Gold triples are drawn uniformly from the ontology's permitted set.  Entity
features are a type mean plus isotropic Gaussian noise (subjects and objects
share the type means); pair features are a relation mean plus noise.  Type and
relation means are random directions scaled so that two means lie about
``separation`` apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from slre.dataset import Dataset, Split
from slre.ontology import Ontology, parse_ontology

__all__ = ["SyntheticSpec", "generate", "DEFAULT_ONTOLOGY", "default_ontology"]

DEFAULT_ONTOLOGY = """\
# desk-scale schema: 4 entity types, 5 relations including the no-relation class
entities Person, Organization, Location, Facility;
relations Kill(Person, Person), Kill(Organization, Person),
          LivesIn(Person, Location),
          WorksFor(Person, Organization),
          LocatedIn(Organization, Location), LocatedIn(Facility, Location);
none NoRel;
"""


def default_ontology() -> Ontology:
    return parse_ontology(DEFAULT_ONTOLOGY)


@dataclass(frozen=True)
class SyntheticSpec:
    ontology: Ontology = field(default_factory=default_ontology)
    n_features: int = 16
    n_pair_features: int = 16
    separation: float = 4.0
    noise: float = 1.0
    pair_separation: float = 4.0
    labels_per_class: int = 3
    n_unlabeled: int = 2000
    n_validation: int = 300
    n_test: int = 500
    seed: int = 0

    def __post_init__(self):
        if min(self.n_features, self.n_pair_features) < 1:
            raise ValueError("feature dimensions must be positive")
        if min(self.separation, self.pair_separation) <= 0 or self.noise < 0:
            raise ValueError("separations must be positive and noise non-negative")
        if self.labels_per_class < 1:
            raise ValueError("labels_per_class must be positive")
        if min(self.n_unlabeled, self.n_validation, self.n_test) < 0:
            raise ValueError("split sizes must be non-negative")

    def with_labels(self, labels_per_class: int) -> "SyntheticSpec":
        return replace(self, labels_per_class=labels_per_class)


def _means(rng: np.random.Generator, k: int, dim: int, separation: float) -> np.ndarray:
    m = rng.standard_normal((k, dim))
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    return m * separation / np.sqrt(2.0)


def _sample(rng, triples: np.ndarray, ent_means, rel_means, noise) -> tuple:
    n = len(triples)
    f, g = ent_means.shape[1], rel_means.shape[1]
    xs = ent_means[triples[:, 0]] + noise * rng.standard_normal((n, f))
    xo = ent_means[triples[:, 2]] + noise * rng.standard_normal((n, f))
    xp = rel_means[triples[:, 1]] + noise * rng.standard_normal((n, g))
    return xs, xo, xp


def generate(spec: SyntheticSpec) -> Dataset:
    """Labeled, unlabeled, validation and test splits; deterministic given ``spec.seed``.

    The labeled split holds exactly ``labels_per_class`` instances per
    relation; every other split samples permitted triples uniformly.
    Unlabeled gold states are kept for analysis but trainers strip them.
    """
    o = spec.ontology
    permitted = sorted((o.entity_types.index(s), o.relation_types.index(r), o.entity_types.index(t))
                       for r, s, t in o.permitted)
    if not permitted:
        raise ValueError("ontology permits no triple")
    by_rel = {ri: [p for p in permitted if p[1] == ri] for ri in range(o.n_relations)}
    empty = [o.relation_types[ri] for ri, ps in by_rel.items() if not ps]
    if empty:
        raise ValueError(f"cannot draw labeled examples for relation(s) without permitted triples: {empty}")

    # one stream per split so that changing labels_per_class leaves the
    # class means and the other splits untouched
    world, *streams = (np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(5))
    ent_means = _means(world, o.n_entities, spec.n_features, spec.separation)
    rel_means = _means(world, o.n_relations, spec.n_pair_features, spec.pair_separation)
    table = np.array(permitted, dtype=int)

    lab_rng = streams[0]
    labeled_triples = np.array([by_rel[ri][j] for ri in range(o.n_relations)
                                for j in lab_rng.integers(len(by_rel[ri]), size=spec.labels_per_class)],
                               dtype=int)
    out = {"labeled": Split(*_sample(lab_rng, labeled_triples, ent_means, rel_means, spec.noise),
                            labeled_triples, tuple(f"labeled-{i}" for i in range(len(labeled_triples))))}
    sizes = (("unlabeled", spec.n_unlabeled), ("validation", spec.n_validation), ("test", spec.n_test))
    for (name, n), rng in zip(sizes, streams[1:]):
        triples = table[rng.integers(len(table), size=n)].reshape(n, 3)
        xs, xo, xp = _sample(rng, triples, ent_means, rel_means, spec.noise)
        out[name] = Split(xs, xo, xp, triples, tuple(f"{name}-{i}" for i in range(n)))
    return Dataset(**out)
