import random

import numpy as np
import pytest

from docalign.ingest.records import Post
from docalign.io import read_table
from docalign.metrics import (
    affinity,
    agreement,
    attention,
    attraction,
    co_frequency,
    compute_metric_table,
    dominance,
    frequency,
    kus_per_document,
    occurrence,
    popularity,
    write_metric_table,
)

from oracles import all_metrics, close, random_instance


def test_occurrence_threshold():
    assert occurrence(0.51) is True
    assert occurrence(0.5) is False
    assert occurrence(0.0) is False


def test_dominance_examples():
    assert dominance([0.2, 0.9, 0.9]) == 1
    assert dominance([0.0, 0.0, 0.1]) == 2
    assert dominance([0.3]) == 0
    with pytest.raises(ValueError):
        dominance([])


def test_dominance_invariant_under_monotone_transform():
    rng = np.random.default_rng(0)
    probs = rng.random((100, 6))
    probs[::7, 2] = probs[::7, 4]
    for transform in (np.sqrt, lambda x: x ** 3, lambda x: np.log1p(x) * 5 + 2):
        assert np.array_equal(dominance(transform(probs)), dominance(probs))


def test_prevalence_examples():
    probs = np.array([[0.6, 0.1], [0.4, 0.2], [0.9, 0.3]])
    assert frequency(probs, 0) == 2
    assert sum(popularity(probs, j) for j in range(2)) == 3


def test_affinity_examples():
    probs = np.zeros((15, 2))
    probs[:10, 0] = 0.9
    probs[5:15, 1] = 0.9
    assert co_frequency(probs, 0, 1) == 5
    assert affinity(probs, 0, 1) == 0.5
    disjoint = np.array([[0.9, 0.1], [0.1, 0.9]])
    assert affinity(disjoint, 0, 1) == 0.0
    assert affinity(np.zeros((3, 2)), 0, 1) is None
    with pytest.raises(ValueError):
        co_frequency(probs, 1, 1)


def test_awareness_examples():
    probs = np.array([[0.9, 0.1]] * 4 + [[0.1, 0.2]])
    posts = (np.array([1, 0, 2, 5, 0]), np.zeros(5, dtype=bool))
    assert attraction(probs, 0, posts) == 0.75
    assert attraction(np.array([[0.9, 0.1]]), 1, (np.array([1]), np.array([False]))) is None

    probs = np.array([[0.6], [0.8], [0.3]])
    assert attention(probs, 0, (np.array([1, 3, 9]), np.zeros(3, bool))) == pytest.approx(3.0 / 1.4, abs=1e-15)
    assert attention(probs, 0, (np.array([0, 0, 9]), np.zeros(3, bool))) == 0.0
    assert attention(np.array([[0.2]]), 0, (np.array([1]), np.array([True]))) is None

    probs = np.full((10, 1), 0.7)
    accepted = np.array([True] * 4 + [False] * 6)
    assert agreement(probs, 0, (np.ones(10), accepted)) == 0.4
    assert agreement(probs, 0, (np.ones(10), np.zeros(10, bool))) == 0.0


def test_kus_per_document_examples():
    summary = kus_per_document(np.array([[0.6, 0.7, 0.2], [0.0, 0.0, 0.0], [0.9, 0.9, 0.9]]))
    assert summary.counts == (2, 0, 3)
    assert summary.median == 2.0


def test_against_oracle_on_random_instances():
    rng = random.Random(1234)
    for _ in range(200):
        probs, answers, accepted = random_instance(rng)
        expect = all_metrics(probs, answers, accepted)
        arr = np.array(probs)
        posts = (np.array(answers), np.array(accepted))
        m = arr.shape[1]
        assert dominance(arr).tolist() == expect["dominance"]
        assert occurrence(arr).tolist() == expect["occurrence"]
        table = compute_metric_table(arr, [f"k{j}" for j in range(m)], "concrete")
        assert table.frequency == expect["frequency"]
        assert table.popularity == expect["popularity"]
        assert table.co_frequency == expect["co_frequency"]
        assert all(close(table.affinity[k], v) for k, v in expect["affinity"].items())
        assert list(table.kus_per_doc.counts) == expect["kus_per_document"]
        for j in range(m):
            assert close(attraction(arr, j, posts), expect["attraction"][j])
            assert close(attention(arr, j, posts), expect["attention"][j])
            assert close(agreement(arr, j, posts), expect["agreement"][j])


def test_invariants_on_random_instances():
    rng = random.Random(99)
    for _ in range(100):
        probs, answers, accepted = random_instance(rng)
        arr = np.array(probs)
        n, m = arr.shape
        table = compute_metric_table(arr, [f"k{j}" for j in range(m)], "concrete")
        assert sum(table.popularity) == n
        assert all(0 <= f <= n for f in table.frequency)
        for (a, b), c in table.co_frequency.items():
            assert c <= min(table.frequency[a], table.frequency[b])
            assert c == co_frequency(arr, b, a)
            aff = table.affinity[(a, b)]
            assert aff is None or 0.0 <= aff <= 1.0
            assert affinity(arr, b, a) == aff


def _post(i, source, n_answers, accepted):
    return Post(id=str(i), source=source, title="", question_body="", answer_bodies=["x"] * n_answers,
                has_accepted=accepted, accepted_date="d" if accepted else None)


def test_metric_table_sites_and_modes(tmp_path):
    probs = np.array([[0.9, 0.2], [0.8, 0.6], [0.1, 0.7], [0.3, 0.9]])
    posts = [_post(0, "stack-exchange", 1, True), _post(1, "discourse", 0, False),
             _post(2, "stack-exchange", 2, False), _post(3, "discourse", 3, True)]
    merged = compute_metric_table(probs, ["A", "B"], "concrete", posts)
    assert merged.awareness_mode == "merged"
    assert merged.attraction == [0.5, 1.0]
    assert merged.agreement == [0.5, 1 / 3]
    site = compute_metric_table(probs, ["A", "B"], "concrete", posts, site="discourse")
    assert site.awareness_mode == "discourse"
    assert site.attraction == [0.0, 1.0]

    doc = compute_metric_table(probs, ["A", "B"], "documentation")
    assert not doc.has_awareness
    with pytest.raises(ValueError):
        compute_metric_table(probs, ["A", "B"], "documentation", posts)
    with pytest.raises(ValueError):
        compute_metric_table(probs, ["A"], "concrete")

    write_metric_table(merged, tmp_path / "ku.csv", tmp_path / "pairs.csv")
    rows = read_table(tmp_path / "ku.csv")
    assert list(rows[0]) == ["ku", "model", "n_docs", "frequency", "popularity",
                             "attraction", "attention", "agreement", "awareness_mode"]
    assert rows[0]["frequency"] == "2" and rows[1]["attraction"] == "1.0"
    pairs = read_table(tmp_path / "pairs.csv")
    assert pairs == [{"ku_a": "A", "ku_b": "B", "model": "concrete", "co_frequency": "1", "affinity": "0.4"}]

    write_metric_table(doc, tmp_path / "dku.csv", tmp_path / "dpairs.csv")
    assert list(read_table(tmp_path / "dku.csv")[0]) == ["ku", "model", "n_docs", "frequency", "popularity"]


def test_undefined_awareness_written_as_empty(tmp_path):
    probs = np.array([[0.9, 0.1]])
    table = compute_metric_table(probs, ["A", "B"], "concrete", [_post(0, "discourse", 0, False)])
    write_metric_table(table, tmp_path / "ku.csv", tmp_path / "pairs.csv")
    row_b = read_table(tmp_path / "ku.csv")[1]
    assert row_b["attraction"] == "" and row_b["attention"] == "" and row_b["agreement"] == ""
