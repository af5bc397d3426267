import numpy as np
import pytest

from docalign.preprocess import Vocabulary, matrix_from_rows


def planted_corpus(n_docs=200, words_per_cluster=10, rate=0.5, noise=0.05, seed=7):
    """Two disjoint word clusters; word 0 of each cluster is its anchor and
    appears in every document of that cluster. Returns (matrix, labels, anchors)."""
    rng = np.random.default_rng(seed)
    vocab = Vocabulary([f"a{i}" for i in range(words_per_cluster)] + [f"b{i}" for i in range(words_per_cluster)])
    labels = np.arange(n_docs) % 2
    rows = []
    for label in labels:
        own = range(label * words_per_cluster, (label + 1) * words_per_cluster)
        other = range((1 - label) * words_per_cluster, (2 - label) * words_per_cluster)
        cols = [own[0]] + [c for c in own[1:] if rng.random() < rate] + [c for c in other[1:] if rng.random() < noise]
        rows.append(cols)
    matrix = matrix_from_rows(rows, [f"d{i}" for i in range(n_docs)], vocab)
    return matrix, labels, {0: ["a0"], 1: ["b0"]}


def noise_corpus(n_docs=2000, n_words=20, rate=0.3, seed=11):
    rng = np.random.default_rng(seed)
    vocab = Vocabulary([f"w{i:02d}" for i in range(n_words)])
    dense = rng.random((n_docs, n_words)) < rate
    rows = [np.flatnonzero(r).tolist() for r in dense]
    return matrix_from_rows(rows, [f"n{i}" for i in range(n_docs)], vocab)


@pytest.fixture(scope="session")
def planted():
    return planted_corpus()


# Eight KUs ranked by hand. Concrete cutoffs 50/25 give thresholds 40 and 20
# (G sits exactly on the low cutoff); documentation cutoffs 75/50 give 7 and 5
# (E sits exactly on the high cutoff).
EIGHT_KU_CONCRETE = {"A": 80, "B": 70, "C": 60, "D": 50, "E": 40, "F": 30, "G": 20, "H": 10}
EIGHT_KU_DOCUMENTATION = {"A": 9, "B": 1, "C": 8, "D": 2, "E": 7, "F": 6, "G": 5, "H": 3}
EIGHT_KU_CLASSES = {
    "A": "convergent", "C": "convergent",
    "B": "divergent", "D": "divergent",
    "H": "absent",
    "E": "unclassified", "F": "unclassified", "G": "unclassified",
}
EIGHT_KU_CATEGORIES = {
    "A": "Language features", "B": "Programming niche", "C": "Data types", "D": "Programming niche",
    "E": "Development tooling", "F": "Language features", "G": "Data types", "H": "Programming niche",
}


def eight_ku_registry():
    from docalign.registry import KnowledgeUnit, KURegistry

    return KURegistry(tuple(KnowledgeUnit(k, c, (k.lower() + "_anchor",)) for k, c in EIGHT_KU_CATEGORIES.items()))


def mini_config_path():
    from pathlib import Path

    import docalign

    return Path(docalign.__file__).parent / "data" / "mini" / "config.toml"


def tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="session")
def mini_run(tmp_path_factory):
    """One complete run of the bundled mini-fixture, shared read-only across tests."""
    from docalign.config import load_config
    from docalign.pipeline import run

    out = tmp_path_factory.mktemp("mini") / "out"
    cfg = load_config(mini_config_path(), out_dir=out)
    run("all", cfg)
    return cfg


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record and print one pass/fail line per acceptance criterion."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}" + (f": {detail}" if detail else "")
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
