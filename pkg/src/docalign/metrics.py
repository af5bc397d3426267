"""Prevalence and awareness metrics of knowledge units over topic probabilities.

``probs`` is always an (n_docs, n_topics) array of p(y_j = 1 | x). A topic
*occurs* in a document when its probability exceeds one half, and a
document's *dominant* topic is its argmax. Undefined values are ``None``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .io import write_table

CONCRETE = "concrete"
DOCUMENTATION = "documentation"
MODEL_TAGS = (CONCRETE, DOCUMENTATION)
MERGED = "merged"

OCCURRENCE_THRESHOLD = 0.5


def occurrence(p) -> np.ndarray | bool:
    """True where ``p > 0.5`` (strict)."""
    out = np.asarray(p) > OCCURRENCE_THRESHOLD
    return bool(out) if out.ndim == 0 else out


def dominance(doc_probs) -> int | np.ndarray:
    """Index of the most probable topic, lowest index on ties.

    A 2-D input gives one index per row.
    """
    arr = np.asarray(doc_probs, dtype=float)
    if arr.shape[-1] == 0:
        raise ValueError("need at least one topic")
    idx = np.argmax(arr, axis=-1)
    return int(idx) if arr.ndim == 1 else idx


def _probs(probs) -> np.ndarray:
    arr = np.asarray(getattr(probs, "doc_topic_prob", probs), dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected an (n_docs, n_topics) probability table")
    return arr


def _check_topic(arr: np.ndarray, topic: int) -> None:
    if not 0 <= topic < arr.shape[1]:
        raise IndexError(f"topic {topic} outside 0..{arr.shape[1] - 1}")


def frequency(probs, topic: int) -> int:
    """Number of documents in which ``topic`` occurs."""
    arr = _probs(probs)
    _check_topic(arr, topic)
    return int(occurrence(arr[:, topic]).sum())


def popularity(probs, topic: int) -> int:
    """Number of documents in which ``topic`` is dominant."""
    arr = _probs(probs)
    _check_topic(arr, topic)
    return int((dominance(arr) == topic).sum())


def co_frequency(probs, topic_a: int, topic_b: int) -> int:
    """Number of documents in which both topics occur."""
    arr = _probs(probs)
    if topic_a == topic_b:
        raise ValueError("co-frequency needs two distinct topics")
    _check_topic(arr, topic_a)
    _check_topic(arr, topic_b)
    return int((occurrence(arr[:, topic_a]) & occurrence(arr[:, topic_b])).sum())


def _affinity(cofreq: int, freq_a: int, freq_b: int) -> float | None:
    mean = (freq_a + freq_b) / 2
    return None if mean == 0 else cofreq / mean


def affinity(probs, topic_a: int, topic_b: int) -> float | None:
    """Co-frequency relative to the mean frequency of the two topics."""
    cofreq = co_frequency(probs, topic_a, topic_b)
    return _affinity(cofreq, frequency(probs, topic_a), frequency(probs, topic_b))


def _post_arrays(posts, n_docs: int) -> tuple[np.ndarray, np.ndarray]:
    """(answer counts, accepted flags) from posts or an explicit pair of arrays."""
    if isinstance(posts, tuple) and len(posts) == 2 and not hasattr(posts[0], "n_answers"):
        answers, accepted = (np.asarray(a) for a in posts)
    else:
        answers = np.array([p.n_answers for p in posts], dtype=float)
        accepted = np.array([p.has_accepted for p in posts], dtype=bool)
    if len(answers) != n_docs or len(accepted) != n_docs:
        raise ValueError(f"{len(answers)} posts for {n_docs} probability rows")
    return answers.astype(float), accepted.astype(bool)


def attraction(probs, topic: int, posts) -> float | None:
    """Share of answered posts among those where ``topic`` is dominant."""
    arr = _probs(probs)
    _check_topic(arr, topic)
    answers, _ = _post_arrays(posts, len(arr))
    mask = dominance(arr) == topic
    if not mask.any():
        return None
    return float((answers[mask] > 0).sum() / mask.sum())


def attention(probs, topic: int, posts) -> float | None:
    """Probability-weighted mean answer count over posts where ``topic`` occurs."""
    arr = _probs(probs)
    _check_topic(arr, topic)
    answers, _ = _post_arrays(posts, len(arr))
    mask = occurrence(arr[:, topic])
    if not mask.any():
        return None
    p = arr[mask, topic]
    return float(np.dot(p, answers[mask]) / p.sum())


def agreement(probs, topic: int, posts) -> float | None:
    """Share of posts with an accepted answer among those where ``topic`` occurs."""
    arr = _probs(probs)
    _check_topic(arr, topic)
    _, accepted = _post_arrays(posts, len(arr))
    mask = occurrence(arr[:, topic])
    if not mask.any():
        return None
    return float(accepted[mask].sum() / mask.sum())


@dataclass(frozen=True)
class KUCountSummary:
    counts: tuple[int, ...]
    median: float
    q1: float
    q3: float


def kus_per_document(probs) -> KUCountSummary:
    """Number of occurring topics per document, with median and quartiles."""
    arr = _probs(probs)
    counts = occurrence(arr).sum(axis=1).astype(int)
    if len(counts) == 0:
        return KUCountSummary((), float("nan"), float("nan"), float("nan"))
    q1, med, q3 = np.percentile(counts, [25, 50, 75])
    return KUCountSummary(tuple(counts.tolist()), float(med), float(q1), float(q3))


@dataclass
class MetricTable:
    model_tag: str
    ku_names: list[str]
    n_docs: int
    frequency: list[int]
    popularity: list[int]
    co_frequency: dict[tuple[int, int], int]
    affinity: dict[tuple[int, int], float | None]
    attraction: list[float | None] | None = None
    attention: list[float | None] | None = None
    agreement: list[float | None] | None = None
    awareness_mode: str | None = None
    kus_per_doc: KUCountSummary | None = field(default=None, repr=False)

    @property
    def has_awareness(self) -> bool:
        return self.attraction is not None

    def values(self, metric: str) -> dict[str, float | None]:
        """Per-KU values of one metric, keyed by KU name."""
        column = getattr(self, metric, None)
        if not isinstance(column, list):
            raise KeyError(f"no per-KU metric {metric!r} in a {self.model_tag} table")
        return dict(zip(self.ku_names, column))


def compute_metric_table(
    probs,
    ku_names: Sequence[str],
    model_tag: str,
    posts=None,
    site: str | None = None,
) -> MetricTable:
    """All metrics of one model.

    Awareness metrics need ``posts`` (aligned with the probability rows) and
    a concrete model. With ``site`` set they use only the posts of that
    source; otherwise all posts are merged.
    """
    if model_tag not in MODEL_TAGS:
        raise ValueError(f"model_tag must be one of {MODEL_TAGS}")
    arr = _probs(probs)
    n, m = arr.shape
    if len(ku_names) != m:
        raise ValueError(f"{len(ku_names)} KU names for {m} topics")

    occ = occurrence(arr)
    freq = occ.sum(axis=0).astype(int)
    dom = dominance(arr) if n else np.zeros(0, dtype=int)
    pop = np.bincount(dom, minlength=m).astype(int)
    both = occ.T.astype(np.int64) @ occ.astype(np.int64)
    cofreq = {(a, b): int(both[a, b]) for a, b in combinations(range(m), 2)}
    aff = {(a, b): _affinity(c, int(freq[a]), int(freq[b])) for (a, b), c in cofreq.items()}
    table = MetricTable(
        model_tag=model_tag,
        ku_names=list(ku_names),
        n_docs=n,
        frequency=freq.tolist(),
        popularity=pop.tolist(),
        co_frequency=cofreq,
        affinity=aff,
        kus_per_doc=kus_per_document(arr),
    )
    if posts is None:
        return table
    if model_tag != CONCRETE:
        raise ValueError("awareness metrics are defined for the concrete model only")
    posts = list(posts)
    if len(posts) != n:
        raise ValueError(f"{len(posts)} posts for {n} probability rows")
    if site is not None:
        rows = [i for i, p in enumerate(posts) if p.source == site]
        arr = arr[rows]
        posts = [posts[i] for i in rows]
    table.attraction = [attraction(arr, j, posts) for j in range(m)]
    table.attention = [attention(arr, j, posts) for j in range(m)]
    table.agreement = [agreement(arr, j, posts) for j in range(m)]
    table.awareness_mode = site or MERGED
    return table


KU_COLUMNS = ("ku", "model", "n_docs", "frequency", "popularity")
AWARENESS_COLUMNS = ("attraction", "attention", "agreement", "awareness_mode")
PAIR_COLUMNS = ("ku_a", "ku_b", "model", "co_frequency", "affinity")


def write_metric_table(table: MetricTable, ku_path: str | Path, pair_path: str | Path) -> None:
    """Per-KU and per-pair delimited files; awareness columns only when computed."""
    header = list(KU_COLUMNS) + (list(AWARENESS_COLUMNS) if table.has_awareness else [])
    rows = []
    for j, name in enumerate(table.ku_names):
        row = [name, table.model_tag, table.n_docs, table.frequency[j], table.popularity[j]]
        if table.has_awareness:
            row += [table.attraction[j], table.attention[j], table.agreement[j], table.awareness_mode]
        rows.append(row)
    write_table(ku_path, header, rows)
    pairs = [
        [table.ku_names[a], table.ku_names[b], table.model_tag, c, table.affinity[(a, b)]]
        for (a, b), c in sorted(table.co_frequency.items())
    ]
    write_table(pair_path, PAIR_COLUMNS, pairs)
