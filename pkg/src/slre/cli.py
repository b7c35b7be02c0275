"""Command-line entry point: ``slre <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from slre import circuit as circuit_mod
from slre.bench.grid import REGIMES, ExperimentConfig, run_grid
from slre.bench.synthetic import DEFAULT_ONTOLOGY, SyntheticSpec, generate
from slre.dataset import read_dataset, write_dataset
from slre.decode import decode_constrained, decode_unconstrained
from slre.logic import parse_formula
from slre.losses import semantic_loss, tnorm_loss, tnorm_probability
from slre.model import save_params
from slre.ontology import induce_ontology, parse_ontology, render
from slre.statespace import StateDistribution, state_names, to_literal_weights, valid_states
from slre.train import METHODS, Constraint, TrainConfig, score_split, train

log = logging.getLogger("slre")


def _ontology(path):
    if path is None:
        return parse_ontology(DEFAULT_ONTOLOGY)
    return parse_ontology(Path(path).read_text())


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _int_list(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _distribution(path, o) -> StateDistribution:
    """Distribution JSON: ``{"subject": [...], "relation": [...], "object": [...]}`` in ontology order."""
    doc = json.loads(Path(path).read_text())
    return StateDistribution.for_ontology(o, doc["subject"], doc["relation"], doc["object"])


def cmd_compile(args) -> int:
    o = _ontology(args.ontology)
    if args.formula:
        f = parse_formula(args.formula)
        c = circuit_mod.compile_formula(f)
    else:
        c = Constraint.from_ontology(o).circuit
    _emit(circuit_mod.dumps(c), args.out)
    log.info("%d nodes, %d models", c.size, circuit_mod.model_count(c))
    return 0


def cmd_loss(args) -> int:
    o = _ontology(args.ontology)
    d = _distribution(args.dist, o)
    con = Constraint.from_ontology(o)
    sl = semantic_loss(con.circuit, d, o)
    tn = tnorm_loss(con.clauses, d, o)
    doc = {
        "wmc": float(np.exp(-sl.value)) if not sl.inconsistent else 0.0,
        "semantic_loss": sl.value if not sl.inconsistent else "inf",
        "inconsistent": sl.inconsistent,
        "semantic_loss_grad": {k: g.tolist() for k, g in zip(("subject", "relation", "object"), sl.grad)},
        "tnorm_probability": tnorm_probability(con.clauses, to_literal_weights(d, o).pos),
        "tnorm_loss": tn.value,
        "tnorm_loss_grad": {k: g.tolist() for k, g in zip(("subject", "relation", "object"), tn.grad)},
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def cmd_decode(args) -> int:
    o = _ontology(args.ontology)
    d = _distribution(args.dist, o)
    if args.regime == "I":
        pred = decode_constrained(d, valid_states(o))
    else:
        pred = decode_unconstrained(d)
    subj, rel, obj = state_names(o, pred.state)
    doc = {"subject": subj, "relation": rel, "object": obj, "probability": pred.probability,
           "constrained": pred.constrained, "valid": o.is_permitted(subj, rel, obj)}
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def _spec(args, o) -> SyntheticSpec:
    kw = {}
    for name in ("n_unlabeled", "n_validation", "n_test", "noise", "separation"):
        value = getattr(args, name, None)
        if value is not None:
            kw[name] = value
    return SyntheticSpec(ontology=o, seed=args.seed, **kw)


def cmd_generate(args) -> int:
    o = _ontology(args.ontology)
    spec = replace(_spec(args, o), labels_per_class=args.labels)
    out = Path(args.out)
    write_dataset(generate(spec), o, out)
    (out / "ontology.txt").write_text(render(o))
    log.info("wrote dataset to %s", out)
    return 0


def cmd_train(args) -> int:
    data = Path(args.data)
    onto_path = args.ontology or (data / "ontology.txt" if (data / "ontology.txt").exists() else None)
    o = _ontology(onto_path)
    ds = read_dataset(data, o)
    con = Constraint.from_ontology(o)
    config = TrainConfig(method=args.method, constraint_weight=args.constraint_weight,
                         labels_per_class=args.labels, transductive=args.transductive,
                         seed=args.seed, batch_size=args.batch_size, max_epochs=args.max_epochs)
    result = train(config, ds.labeled, ds.unlabeled, ds.validation, con, test_inputs=ds.test)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_params(result.params, out / "params.json",
                meta={"method": args.method, "seed": args.seed, "best_epoch": result.best_epoch})
    result.write_log(out / "metrics.jsonl")
    summary = {}
    if ds.test.gold is not None:
        for regime, constrained in (("N", False), ("I", True)):
            r = score_split(result.params, ds.test, con, constrained=constrained)
            summary[regime] = {"avg_f1": r.avg_f1, "tri_f1": r.tri_f1, "violation_rate": r.violation_rate}
    (out / "test_metrics.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps({"best_epoch": result.best_epoch, "test": summary}))
    return 0


def cmd_grid(args) -> int:
    o = _ontology(args.ontology)
    methods = tuple(args.method.split(",")) if args.method else METHODS
    regimes = tuple(args.regime.split(",")) if args.regime else REGIMES
    weights = {}
    if args.constraint_weight is not None:
        weights = {"sl": args.constraint_weight, "tnorm": args.constraint_weight}
    config = ExperimentConfig(spec=_spec(args, o), methods=methods, labels=_int_list(args.labels),
                              seeds=_int_list(args.seeds), regimes=regimes,
                              constraint_weights=weights, jobs=args.jobs)
    start = time.perf_counter()
    results = run_grid(config)
    paths = results.write(args.out)
    for row in results.table_rows("tri_f1"):
        print("\t".join(row))
    log.info("grid finished in %.1fs; wrote %s", time.perf_counter() - start,
             ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_induce(args) -> int:
    triples = []
    for line in Path(args.triples).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            parts = line.replace(",", " ").split()
            if len(parts) != 3:
                raise SystemExit(f"expected 'subject relation object', got {line!r}")
            triples.append(tuple(parts))
    o = induce_ontology(triples, args.threshold, none_relation=args.none)
    _emit(render(o), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slre", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, ontology=True):
        if ontology:
            sp.add_argument("--ontology", help="schema DSL file (default: the built-in desk-scale schema)")
        sp.add_argument("--out", help="output path (default: stdout)")

    sp = sub.add_parser("compile", help="compile an ontology constraint (or --formula) to a circuit dump")
    common(sp)
    sp.add_argument("--formula", help="compile this formula text instead of the ontology constraint")
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("loss", help="semantic loss and t-norm loss of a distribution")
    common(sp)
    sp.add_argument("--dist", required=True, help="distribution JSON file")
    sp.set_defaults(func=cmd_loss)

    sp = sub.add_parser("decode", help="decode a distribution without (N) or with (I) the constraint")
    common(sp)
    sp.add_argument("--dist", required=True)
    sp.add_argument("--regime", choices=("N", "I"), default="I")
    sp.set_defaults(func=cmd_decode)

    def data_flags(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--n-unlabeled", dest="n_unlabeled", type=int)
        sp.add_argument("--n-validation", dest="n_validation", type=int)
        sp.add_argument("--n-test", dest="n_test", type=int)
        sp.add_argument("--noise", type=float)
        sp.add_argument("--separation", type=float)

    sp = sub.add_parser("generate", help="write a synthetic dataset as JSON-lines files")
    sp.add_argument("--ontology")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--labels", type=int, default=3, help="labeled instances per relation")
    data_flags(sp)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("train", help="train one model; writes params.json and metrics.jsonl")
    sp.add_argument("--data", required=True, help="dataset directory from 'generate'")
    sp.add_argument("--ontology")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--method", choices=METHODS, default="sl")
    sp.add_argument("--constraint-weight", dest="constraint_weight", type=float, default=0.05)
    sp.add_argument("--labels", type=int, default=3)
    sp.add_argument("--transductive", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    sp.add_argument("--max-epochs", dest="max_epochs", type=int, default=100)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("grid", help="run the methods x labels x seeds experiment grid")
    sp.add_argument("--ontology")
    sp.add_argument("--out", required=True, help="output directory for TSV/CSV results")
    sp.add_argument("--method", help="comma-separated subset of " + ",".join(METHODS))
    sp.add_argument("--regime", help="comma-separated subset of N,I,T")
    sp.add_argument("--labels", default="3,5,10,15,25,50,75")
    sp.add_argument("--seeds", default="0,1,2")
    sp.add_argument("--constraint-weight", dest="constraint_weight", type=float)
    sp.add_argument("--jobs", type=int, default=1)
    data_flags(sp)
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("induce", help="induce an ontology from observed gold triples")
    sp.add_argument("--triples", required=True, help="file with one 'subject relation object' per line")
    sp.add_argument("--threshold", type=int, default=1)
    sp.add_argument("--none", help="name of a no-relation class to add")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_induce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
