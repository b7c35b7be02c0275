from dataclasses import replace

import numpy as np
import pytest

from slre.bench.grid import ExperimentConfig, GridResults, run_grid
from slre.bench.metrics import evaluate, macro_f1, triple_f1
from slre.bench.synthetic import SyntheticSpec, default_ontology, generate
from slre.dataset import read_dataset, read_jsonl, write_dataset, write_jsonl
from slre.ontology import parse_ontology
from slre.train import Constraint, TrainConfig, score_split, train

TINY = SyntheticSpec(n_unlabeled=100, n_validation=50, n_test=80)
FAST = TrainConfig(max_epochs=10, batch_size=16, codl_rounds=1)

# entities Person=0, Location=1; relations Kill=0, LivesIn=1
GOLD = np.array([(0, 0, 0), (0, 0, 0), (0, 1, 1), (0, 1, 1), (0, 1, 1), (0, 0, 0)])
PRED = np.array([(0, 0, 0), (1, 0, 0), (0, 1, 1), (0, 0, 1), (0, 1, 0), (0, 0, 0)])


class TestMetrics:
    def test_hand_computed_fixture(self, toy):
        r = evaluate(PRED, GOLD, toy)
        # subject: class 0 P=1 R=5/6, class 1 never gold and predicted once
        subject = (10 / 11 + 0.0) / 2
        # object and relation share the confusion pattern: F1 6/7 and 4/5
        other = (6 / 7 + 4 / 5) / 2
        assert r.avg_f1 == pytest.approx((subject + 2 * other) / 3, abs=1e-12)
        assert r.tri_f1 == pytest.approx(0.5, abs=1e-12)
        assert r.violation_rate == pytest.approx(0.5, abs=1e-12)
        assert r.subject_f1 == pytest.approx([10 / 11, 0.0])
        assert r.relation_f1 == pytest.approx([6 / 7, 4 / 5])

    def test_none_relation_is_not_a_positive(self):
        o = parse_ontology("entities Person, Location; relations Kill(Person,Person), "
                           "LivesIn(Person,Location); none NoRel;")
        gold = np.array([(0, 0, 0), (0, 2, 1), (1, 2, 1), (0, 1, 1)])
        pred = np.array([(0, 0, 0), (0, 2, 1), (0, 1, 1), (0, 2, 1)])
        r = evaluate(pred, gold, o)
        assert r.tri_f1 == pytest.approx(0.5, abs=1e-12)
        assert macro_f1(gold[:, 1], pred[:, 1], exclude=2) == pytest.approx(0.5, abs=1e-12)

    def test_perfect(self, toy):
        r = evaluate(GOLD, GOLD, toy)
        assert (r.avg_f1, r.tri_f1, r.violation_rate) == (1.0, 1.0, 0.0)

    def test_wrong_relation_right_arguments(self, toy):
        pred = GOLD.copy()
        pred[:, 1] = 1 - pred[:, 1]
        r = evaluate(pred, GOLD, toy)
        assert r.tri_f1 == 0.0 and r.avg_f1 > 0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        o = default_ontology()
        for _ in range(20):
            gold = np.stack([rng.integers(4, size=40), rng.integers(5, size=40), rng.integers(4, size=40)], 1)
            pred = np.stack([rng.integers(4, size=40), rng.integers(5, size=40), rng.integers(4, size=40)], 1)
            perm = rng.permutation(40)
            a, b = evaluate(pred, gold, o), evaluate(pred[perm], gold[perm], o)
            assert (a.avg_f1, a.tri_f1, a.violation_rate) == pytest.approx((b.avg_f1, b.tri_f1, b.violation_rate),
                                                                        abs=1e-12)
            assert 0 <= a.avg_f1 <= 1 and 0 <= a.tri_f1 <= 1 and 0 <= a.violation_rate <= 1

    def test_length_mismatch(self, toy):
        with pytest.raises(ValueError):
            evaluate(PRED[:2], GOLD, toy)

    def test_degenerate_triple_f1(self):
        empty = np.zeros((0, 3), dtype=int)
        assert triple_f1(empty, empty) == 1.0


class TestSynthetic:
    def test_labels_per_class_and_validity(self):
        for labels in (1, 3, 7):
            ds = generate(replace(TINY, labels_per_class=labels))
            o = TINY.ontology
            counts = np.bincount(ds.labeled.gold[:, 1], minlength=o.n_relations)
            assert np.all(counts == labels)
            mask = Constraint.from_ontology(o).mask
            for split in ds.splits().values():
                assert mask[split.gold[:, 0], split.gold[:, 1], split.gold[:, 2]].all()

    def test_deterministic_files(self, tmp_path):
        o = TINY.ontology
        write_dataset(generate(TINY), o, tmp_path / "a")
        write_dataset(generate(TINY), o, tmp_path / "b")
        for name in ("labeled", "unlabeled", "validation", "test"):
            assert (tmp_path / "a" / f"{name}.jsonl").read_bytes() == (tmp_path / "b" / f"{name}.jsonl").read_bytes()
        assert (tmp_path / "a" / "test.jsonl").read_bytes() != _bytes_for(replace(TINY, seed=1), tmp_path)

    def test_label_count_leaves_other_splits_unchanged(self):
        a, b = generate(TINY), generate(replace(TINY, labels_per_class=10))
        assert np.array_equal(a.test.xs, b.test.xs) and np.array_equal(a.unlabeled.gold, b.unlabeled.gold)

    def test_errors(self):
        with pytest.raises(ValueError):
            generate(SyntheticSpec(ontology=parse_ontology("entities A; relations R;")))
        with pytest.raises(ValueError):
            SyntheticSpec(separation=0)
        with pytest.raises(ValueError):
            SyntheticSpec(labels_per_class=0)

    def test_noiseless_limit_is_separable(self):
        spec = replace(TINY, noise=1e-3, labels_per_class=3)
        ds = generate(spec)
        c = Constraint.from_ontology(spec.ontology)
        result = train(TrainConfig(method="base", max_epochs=100), ds.labeled, None, ds.validation, c)
        assert score_split(result.params, ds.test, c).tri_f1 >= 0.99


def _bytes_for(spec, tmp_path):
    write_dataset(generate(spec), spec.ontology, tmp_path / "other")
    return (tmp_path / "other" / "test.jsonl").read_bytes()


def test_jsonl_round_trip(tmp_path):
    o = TINY.ontology
    ds = generate(TINY)
    write_jsonl(ds.test, o, tmp_path / "t.jsonl")
    back = read_jsonl(tmp_path / "t.jsonl", o)
    assert np.array_equal(back.xs, ds.test.xs) and np.array_equal(back.gold, ds.test.gold)
    assert back.ids == ds.test.ids
    write_jsonl(ds.test.without_gold(), o, tmp_path / "u.jsonl")
    assert read_jsonl(tmp_path / "u.jsonl", o).gold is None
    first = (tmp_path / "t.jsonl").read_text().splitlines()[0]
    assert first.startswith('{"id": "test-0", "subj_feat": [')
    assert '"gold": {"subj": ' in first
    write_dataset(ds, o, tmp_path / "all")
    assert np.array_equal(read_dataset(tmp_path / "all", o).labeled.xp, ds.labeled.xp)


@pytest.fixture(scope="module")
def small_grid():
    cfg = ExperimentConfig(spec=TINY, methods=("base", "sl", "codl"), labels=(3,), seeds=(0, 1), train=FAST)
    return cfg, run_grid(cfg)


class TestGrid:
    def test_empty_grid(self, tmp_path):
        results = run_grid(ExperimentConfig(spec=TINY, methods=(), labels=(3,), seeds=(0,)))
        assert results.cells == [] and results.reports() == []
        assert results.table_rows("tri_f1") == [["method", "3/N", "3/I", "3/T"]]
        paths = results.write(tmp_path)
        assert (tmp_path / "runs.tsv").read_text().count("\n") == 1
        assert paths["plot"].read_text().count("\n") == 1

    def test_reproducible(self, small_grid):
        cfg, results = small_grid
        again = run_grid(cfg)
        assert [r.row() for r in again.reports()] == [r.row() for r in results.reports()]

    def test_parallel_matches_serial(self, small_grid):
        cfg, results = small_grid
        parallel = run_grid(replace(cfg, jobs=2))
        assert [r.row() for r in parallel.reports()] == [r.row() for r in results.reports()]

    def test_regime_i_never_violates(self, small_grid):
        _, results = small_grid
        assert all(r.violation_rate == 0 for r in results.reports() if r.regime == "I")

    def test_base_transductive_is_inductive(self, small_grid):
        _, results = small_grid
        for seed in (0, 1):
            n = [r for r in results.reports() if (r.method, r.regime, r.seed) == ("base", "N", seed)][0]
            t = [r for r in results.reports() if (r.method, r.regime, r.seed) == ("base", "T", seed)][0]
            assert n.tri_f1 == t.tri_f1

    def test_summary_and_files(self, small_grid, tmp_path):
        cfg, results = small_grid
        vals = results.values("sl", 3, "N", "tri_f1")
        mean, se = results.summary("sl", 3, "N", "tri_f1")
        assert mean == pytest.approx(np.mean(vals))
        assert se == pytest.approx(np.std(vals, ddof=1) / np.sqrt(2))
        paths = results.write(tmp_path)
        table = paths["results"].read_text().splitlines()
        assert table[0].startswith("# avg_f1") and table[1] == "method\t3/N\t3/I\t3/T"
        assert table[2].startswith("base\t") and "±" in table[2]
        assert paths["runs"].read_text().count("\n") == 1 + 3 * 2 * 3
        assert paths["plot"].read_text().splitlines()[0] == "method,labels,regime,metric,mean,stderr"
        with pytest.raises(KeyError):
            results.summary("tnorm", 3, "N", "tri_f1")

    def test_bad_config(self):
        with pytest.raises(ValueError):
            ExperimentConfig(methods=("adam",))
        with pytest.raises(ValueError):
            ExperimentConfig(regimes=("X",))

    def test_grid_results_type(self, small_grid):
        assert isinstance(small_grid[1], GridResults)
