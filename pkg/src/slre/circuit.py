"""Knowledge compilation to smooth deterministic decomposable circuits.

A formula is first built into a reduced ordered BDD with a unique table and
memoized apply, then each decision node ``v ? hi : lo`` becomes
``(v * hi') + (-v * lo')`` where the primed branches are padded with
``(u + -u)`` for every variable the sibling branch mentions and they do not.
The result supports weighted model counting and its gradient in one forward
and one backward sweep over the node arena.

Weights may be given per variable as scalars or as columns of a batch; all
evaluation routines broadcast over a trailing batch axis.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from slre.logic import And, Const, Formula, Implies, Not, Or, Var, variables

__all__ = [
    "Circuit", "LiteralWeights", "WmcGradient", "CompilationError",
    "MissingWeightError", "compile_formula", "wmc", "wmc_gradient", "model_count",
    "check_decomposable", "check_deterministic", "check_smooth", "dumps", "loads",
]

TRUE_NODE = ("T",)
FALSE_NODE = ("F",)


class CompilationError(RuntimeError):
    pass


class MissingWeightError(KeyError):
    pass


@dataclass(frozen=True)
class Circuit:
    """Node arena in topological order; the root is the last node.

    Node tuples: ``("T",)``, ``("F",)``, ``("L", var_index, positive)``,
    ``("+", child_ids)``, ``("*", child_ids)``.
    """

    nodes: tuple
    variables: tuple

    @property
    def root(self) -> int:
        return len(self.nodes) - 1

    @property
    def size(self) -> int:
        return len(self.nodes)

    def node_vars(self) -> list[frozenset]:
        out: list[frozenset] = []
        for node in self.nodes:
            if node[0] == "L":
                out.append(frozenset((node[1],)))
            elif node[0] in "+*":
                out.append(frozenset().union(*(out[c] for c in node[1])))
            else:
                out.append(frozenset())
        return out


@dataclass(frozen=True)
class LiteralWeights:
    """Positive and negative literal weights keyed by variable name."""

    pos: Mapping[str, object]
    neg: Mapping[str, object]

    @classmethod
    def complementary(cls, pos: Mapping[str, object]) -> "LiteralWeights":
        """Weights with ``w(-v) = 1 - w(v)``."""
        return cls(dict(pos), {k: 1.0 - np.asarray(v, dtype=float) for k, v in pos.items()})

    def arrays(self, names: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        try:
            pos = np.array([np.asarray(self.pos[n], dtype=float) for n in names], dtype=float)
            neg = np.array([np.asarray(self.neg[n], dtype=float) for n in names], dtype=float)
        except KeyError as e:
            raise MissingWeightError(e.args[0]) from None
        return pos, neg


@dataclass(frozen=True)
class WmcGradient:
    value: object
    pos: dict
    neg: dict


# -- BDD ---------------------------------------------------------------------

class _Bdd:
    """Reduced ordered BDD; node 0 is False, node 1 is True, others (level, lo, hi)."""

    def __init__(self, n_levels: int, budget: int):
        self.nodes: list = [None, None]
        self.unique: dict = {}
        self.apply_cache: dict = {}
        self.budget = budget
        self.n_levels = n_levels

    def level(self, u: int) -> int:
        return self.n_levels if u < 2 else self.nodes[u][0]

    def mk(self, level: int, lo: int, hi: int) -> int:
        if lo == hi:
            return lo
        key = (level, lo, hi)
        u = self.unique.get(key)
        if u is None:
            if len(self.nodes) >= self.budget:
                raise CompilationError(f"node budget of {self.budget} exceeded")
            u = len(self.nodes)
            self.nodes.append(key)
            self.unique[key] = u
        return u

    def var(self, level: int) -> int:
        return self.mk(level, 0, 1)

    def negate(self, u: int) -> int:
        if u < 2:
            return 1 - u
        key = ("!", u)
        r = self.apply_cache.get(key)
        if r is None:
            lvl, lo, hi = self.nodes[u]
            r = self.mk(lvl, self.negate(lo), self.negate(hi))
            self.apply_cache[key] = r
        return r

    def apply(self, op: str, a: int, b: int) -> int:
        if op == "&":
            if a == 0 or b == 0:
                return 0
            if a == 1:
                return b
            if b == 1 or a == b:
                return a
        else:
            if a == 1 or b == 1:
                return 1
            if a == 0:
                return b
            if b == 0 or a == b:
                return a
        if a > b:
            a, b = b, a
        key = (op, a, b)
        r = self.apply_cache.get(key)
        if r is not None:
            return r
        la, lb = self.level(a), self.level(b)
        top = min(la, lb)
        a_lo, a_hi = (self.nodes[a][1], self.nodes[a][2]) if la == top else (a, a)
        b_lo, b_hi = (self.nodes[b][1], self.nodes[b][2]) if lb == top else (b, b)
        r = self.mk(top, self.apply(op, a_lo, b_lo), self.apply(op, a_hi, b_hi))
        self.apply_cache[key] = r
        return r

    def build(self, f: Formula, index: Mapping[str, int], memo: dict) -> int:
        r = memo.get(f)
        if r is not None:
            return r
        if isinstance(f, Var):
            r = self.var(index[f.name])
        elif isinstance(f, Const):
            r = 1 if f.value else 0
        elif isinstance(f, Not):
            r = self.negate(self.build(f.child, index, memo))
        elif isinstance(f, (And, Or)):
            op = "&" if isinstance(f, And) else "|"
            r = self.build(f.children[0], index, memo)
            for c in f.children[1:]:
                r = self.apply(op, r, self.build(c, index, memo))
        elif isinstance(f, Implies):
            r = self.apply("|", self.negate(self.build(f.left, index, memo)),
                           self.build(f.right, index, memo))
        else:
            raise TypeError(f"not a formula: {f!r}")
        memo[f] = r
        return r


# -- circuit construction ------------------------------------------------------

class _Arena:
    def __init__(self, budget: int):
        self.nodes: list = []
        self.index: dict = {}
        self.budget = budget

    def add(self, node: tuple) -> int:
        i = self.index.get(node)
        if i is None:
            if len(self.nodes) >= self.budget:
                raise CompilationError(f"node budget of {self.budget} exceeded")
            i = len(self.nodes)
            self.nodes.append(node)
            self.index[node] = i
        return i

    def lit(self, var: int, positive: bool) -> int:
        return self.add(("L", var, positive))

    def pad(self, var: int) -> int:
        return self.add(("+", (self.lit(var, True), self.lit(var, False))))

    def product(self, kids: list[int]) -> int:
        kids = [k for k in kids if self.nodes[k] != TRUE_NODE]
        if any(self.nodes[k] == FALSE_NODE for k in kids):
            return self.add(FALSE_NODE)
        if not kids:
            return self.add(TRUE_NODE)
        if len(kids) == 1:
            return kids[0]
        return self.add(("*", tuple(sorted(kids))))

    def sum(self, kids: list[int]) -> int:
        kids = [k for k in kids if self.nodes[k] != FALSE_NODE]
        if not kids:
            return self.add(FALSE_NODE)
        if len(kids) == 1:
            return kids[0]
        return self.add(("+", tuple(kids)))


def compile_formula(f: Formula, order: Optional[Sequence[str]] = None, *,
                    max_vars: int = 64, node_budget: int = 10**6) -> Circuit:
    """Compile ``f`` to a smooth d-DNNF over ``vars(f)``, ordered as in ``order``.

    ``order`` defaults to sorted variable names.  Variables in ``order`` that
    do not occur in ``f`` are ignored.
    """
    fvars = variables(f)
    if order is None:
        order = sorted(fvars)
    missing = fvars - set(order)
    if missing:
        raise CompilationError(f"variables missing from order: {sorted(missing)}")
    names = tuple(v for v in dict.fromkeys(order) if v in fvars)
    if len(names) > max_vars:
        raise CompilationError(f"{len(names)} variables exceeds cap {max_vars}")
    index = {n: i for i, n in enumerate(names)}

    bdd = _Bdd(len(names), node_budget)
    root = bdd.build(f, index, {})

    # variables mentioned below each bdd node
    support: dict[int, frozenset] = {0: frozenset(), 1: frozenset()}
    for u in range(2, len(bdd.nodes)):
        lvl, lo, hi = bdd.nodes[u]
        support[u] = support[lo] | support[hi] | {lvl}

    arena = _Arena(node_budget)
    converted: dict[int, int] = {0: arena.add(FALSE_NODE), 1: arena.add(TRUE_NODE)}

    def branch(level: int, positive: bool, child: int, scope: frozenset) -> int:
        kids = [arena.lit(level, positive), converted[child]]
        kids += [arena.pad(v) for v in sorted(scope - support[child] - {level})]
        return arena.product(kids)

    reachable = sorted(_reachable(bdd, root), key=lambda u: bdd.nodes[u][0], reverse=True)
    for u in reachable:
        lvl, lo, hi = bdd.nodes[u]
        scope = support[u]
        converted[u] = arena.sum([branch(lvl, True, hi, scope), branch(lvl, False, lo, scope)])

    top = converted[root]
    if root != 0:
        top = arena.product([top] + [arena.pad(v) for v in range(len(names)) if v not in support[root]])
    return Circuit(_compact(arena.nodes, top), names)


def _reachable(bdd: _Bdd, root: int) -> set:
    seen = set()
    stack = [root]
    while stack:
        u = stack.pop()
        if u < 2 or u in seen:
            continue
        seen.add(u)
        stack.append(bdd.nodes[u][1])
        stack.append(bdd.nodes[u][2])
    return seen


def _compact(nodes: list, root: int) -> tuple:
    """Keep nodes reachable from ``root``, renumbered in topological order with the root last."""
    keep = set()
    stack = [root]
    while stack:
        i = stack.pop()
        if i in keep:
            continue
        keep.add(i)
        if nodes[i][0] in "+*":
            stack.extend(nodes[i][1])
    # arena ids already respect child < parent
    old = sorted(keep)
    new_id = {o: n for n, o in enumerate(old)}
    out = []
    for o in old:
        node = nodes[o]
        if node[0] in "+*":
            node = (node[0], tuple(new_id[c] for c in node[1]))
        out.append(node)
    return tuple(out)


# -- evaluation ----------------------------------------------------------------

def _forward(c: Circuit, pos: np.ndarray, neg: np.ndarray) -> list:
    values: list = []
    ones = np.ones(pos.shape[1:])
    for node in c.nodes:
        kind = node[0]
        if kind == "L":
            values.append(pos[node[1]] if node[2] else neg[node[1]])
        elif kind == "+":
            kids = node[1]
            v = values[kids[0]]
            for k in kids[1:]:
                v = v + values[k]
            values.append(v)
        elif kind == "*":
            kids = node[1]
            v = values[kids[0]]
            for k in kids[1:]:
                v = v * values[k]
            values.append(v)
        elif kind == "T":
            values.append(ones)
        else:
            values.append(0.0 * ones)
    return values


def _weight_arrays(c: Circuit, w) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(w, LiteralWeights):
        return w.arrays(c.variables)
    pos, neg = w
    return np.asarray(pos, dtype=float), np.asarray(neg, dtype=float)


def wmc(c: Circuit, w) -> object:
    """Weighted model count; a float, or an array over the weights' batch axis.

    ``w`` is a :class:`LiteralWeights` or a ``(pos, neg)`` pair of arrays
    indexed by ``c.variables``.
    """
    pos, neg = _weight_arrays(c, w)
    value = _forward(c, pos, neg)[c.root]
    return float(value) if np.ndim(value) == 0 else value


def wmc_arrays_gradient(c: Circuit, pos: np.ndarray, neg: np.ndarray):
    """Value and partials w.r.t. positive and negative literal weights (arrays)."""
    values = _forward(c, pos, neg)
    adj = [None] * c.size
    adj[c.root] = np.ones(pos.shape[1:])
    dpos = np.zeros_like(pos)
    dneg = np.zeros_like(neg)
    for i in range(c.root, -1, -1):
        a = adj[i]
        if a is None:
            continue
        node = c.nodes[i]
        kind = node[0]
        if kind == "L":
            if node[2]:
                dpos[node[1]] += a
            else:
                dneg[node[1]] += a
        elif kind == "+":
            for k in node[1]:
                adj[k] = a if adj[k] is None else adj[k] + a
        elif kind == "*":
            kids = node[1]
            # prefix/suffix products avoid dividing by zero-valued children
            prefix = [None] * len(kids)
            run = a
            for j, k in enumerate(kids):
                prefix[j] = run
                run = run * values[k]
            run = None
            for j in range(len(kids) - 1, -1, -1):
                g = prefix[j] if run is None else prefix[j] * run
                k = kids[j]
                adj[k] = g if adj[k] is None else adj[k] + g
                run = values[kids[j]] if run is None else run * values[kids[j]]
    return values[c.root], dpos, dneg


def wmc_gradient(c: Circuit, w) -> WmcGradient:
    """Exact partials of the WMC w.r.t. every literal weight, in one backward sweep."""
    pos, neg = _weight_arrays(c, w)
    value, dpos, dneg = wmc_arrays_gradient(c, pos, neg)
    if np.ndim(value) == 0:
        value = float(value)
        return WmcGradient(value, {n: float(dpos[i]) for i, n in enumerate(c.variables)},
                           {n: float(dneg[i]) for i, n in enumerate(c.variables)})
    return WmcGradient(value, dict(zip(c.variables, dpos)), dict(zip(c.variables, dneg)))


def model_count(c: Circuit, over: Iterable[str] = ()) -> int:
    """Number of models over ``c.variables`` plus any extra variables in ``over``."""
    n = len(c.variables)
    extra = len(set(over) - set(c.variables))
    count = wmc(c, (np.ones(n), np.ones(n)))
    return int(round(count)) << extra


# -- structural validators -------------------------------------------------------

def check_decomposable(c: Circuit) -> bool:
    nv = c.node_vars()
    for node in c.nodes:
        if node[0] == "*":
            seen: set = set()
            for k in node[1]:
                if seen & nv[k]:
                    return False
                seen |= nv[k]
    return True


def check_smooth(c: Circuit) -> bool:
    nv = c.node_vars()
    return all(len({nv[k] for k in node[1]}) == 1 for node in c.nodes if node[0] == "+")


def check_deterministic(c: Circuit, max_vars: int = 16) -> bool:
    """Sum children are pairwise inconsistent, checked on every total assignment."""
    n = len(c.variables)
    if n > max_vars:
        raise ValueError(f"{n} variables exceeds exhaustive check cap {max_vars}")
    if n == 0:
        return all(node[0] != "+" for node in c.nodes)
    table = np.array(list(itertools.product((0.0, 1.0), repeat=n))).T
    values = _forward(c, table, 1.0 - table)
    for node in c.nodes:
        if node[0] == "+":
            active = sum((np.asarray(values[k]) > 0).astype(int) for k in node[1])
            if np.any(active > 1):
                return False
    return True


# -- text format -------------------------------------------------------------------

def dumps(c: Circuit) -> str:
    """One node per line as ``id kind args...``, preceded by a ``vars`` line; root last."""
    lines = ["vars " + " ".join(c.variables)]
    for i, node in enumerate(c.nodes):
        kind = node[0]
        if kind == "L":
            lines.append(f"{i} L {c.variables[node[1]]} {'+' if node[2] else '-'}")
        elif kind in "+*":
            lines.append(f"{i} {kind} " + " ".join(map(str, node[1])))
        else:
            lines.append(f"{i} {kind}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Circuit:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0][0] != "vars":
        raise ValueError("missing vars header")
    names = tuple(lines[0][1:])
    index = {n: i for i, n in enumerate(names)}
    nodes = []
    for expected, parts in enumerate(lines[1:]):
        if int(parts[0]) != expected:
            raise ValueError(f"node ids must be consecutive, got {parts[0]}")
        kind = parts[1]
        if kind == "L":
            nodes.append(("L", index[parts[2]], parts[3] == "+"))
        elif kind in ("+", "*"):
            kids = tuple(int(p) for p in parts[2:])
            if any(k >= expected for k in kids):
                raise ValueError(f"node {expected} references a later node")
            nodes.append((kind, kids))
        elif kind in ("T", "F"):
            nodes.append((kind,))
        else:
            raise ValueError(f"unknown node kind {kind!r}")
    return Circuit(tuple(nodes), names)
