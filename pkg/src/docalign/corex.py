"""Anchored Correlation Explanation (CorEx) over binary document-term matrices.

Every topic ``j`` is a binary latent factor ``Y_j``. Each word type is
connected to exactly one topic (a tree structure), except anchor words,
which are connected to their anchored topics with weight ``beta`` (the
anchor strength). Training is coordinate ascent on the CorEx lower bound of
``TC(X; Y)``; once the latent posteriors are refreshed the bound equals the
sample mean of ``log Z_j(x)`` with

    Z_j(x) = sum_y p(y_j = y) * prod_i (p(x_i | y_j = y) / p(x_i)) ** alpha_ji

so ``topic_tc[j] = mean_x log Z_j(x)`` and the sum over topics never
decreases between iterations. All probability products are accumulated in
the log domain.
"""
from __future__ import annotations

import io
import json
import math
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .io import atomic_write_bytes
from .preprocess import DocTermMatrix, Vocabulary

_EPS = 1e-12


class AnchorError(ValueError):
    def __init__(self, token: str, topic: int):
        super().__init__(f"anchor {token!r} of topic {topic} is not in the vocabulary")
        self.token = token
        self.topic = topic


@dataclass(frozen=True)
class TrainConfig:
    n_topics: int
    anchor_strength: float = 10.0
    max_iter: int = 200
    tol: float = 1e-5
    seed: int = 42

    def __post_init__(self):
        if self.n_topics < 1:
            raise ValueError("n_topics must be >= 1")
        if self.anchor_strength < 1:
            raise ValueError("anchor_strength must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class TopicModel:
    config: TrainConfig
    vocabulary: Vocabulary
    anchor_map: dict[int, tuple[str, ...]]
    alpha: np.ndarray  # (m, v) connection weights
    log_p_y: np.ndarray  # (2, m) log p(y_j = 0), log p(y_j = 1)
    log_p_x_given_y: np.ndarray  # (2, 2, m, v) [x value, y value]
    log_p_x: np.ndarray  # (2, v) log p(x_i = 0), log p(x_i = 1)
    mis: np.ndarray  # (m, v) mutual information I(X_i; Y_j) in nats
    doc_topic_prob: np.ndarray  # (n, m) p(y_j = 1 | x)
    topic_tc: np.ndarray  # (m,)
    total_tc: float
    doc_ids: list[str] = field(default_factory=list)
    tc_history: list[float] = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False

    @property
    def n_topics(self) -> int:
        return self.config.n_topics

    @property
    def anchor_strength(self) -> float:
        return self.config.anchor_strength

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def word_topic_assoc(self) -> np.ndarray:
        """Connection-weighted mutual information, ``alpha * I(X_i; Y_j)``."""
        return self.alpha * self.mis


def _binary(matrix) -> "np.ndarray":
    mat = matrix.matrix if isinstance(matrix, DocTermMatrix) else matrix
    mat = mat.tocsr().astype(np.float64)
    mat.data[:] = 1.0
    return mat


def _log_pair(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, _EPS, 1.0 - _EPS)
    return np.stack([np.log1p(-p), np.log(p)])


def _marginals(X) -> np.ndarray:
    n = X.shape[0]
    df = np.asarray(X.sum(axis=0)).ravel()
    return _log_pair(df / n)


def _m_step(X, q: np.ndarray, n_docs: int):
    """ML estimates of p(y_j) and p(x_i = 1 | y_j) from soft labels ``q``."""
    mass1 = q.sum(axis=0)
    mass0 = n_docs - mass1
    co1 = np.asarray(X.T @ q).T  # (m, v) expected co-occurrence with y = 1
    df = np.asarray(X.sum(axis=0)).ravel()
    co0 = df[np.newaxis, :] - co1
    with np.errstate(divide="ignore", invalid="ignore"):
        p1 = co1 / mass1[:, np.newaxis]
        p0 = co0 / mass0[:, np.newaxis]
    p1 = np.nan_to_num(p1, nan=0.5)
    p0 = np.nan_to_num(p0, nan=0.5)
    log_p_y = _log_pair(mass1 / n_docs)
    lp0 = _log_pair(p0)  # [x value] for y = 0
    lp1 = _log_pair(p1)
    log_p_x_given_y = np.stack([np.stack([lp0[0], lp1[0]]), np.stack([lp0[1], lp1[1]])])
    return log_p_y, log_p_x_given_y


def _mutual_information(log_p_y: np.ndarray, log_p_x_given_y: np.ndarray, log_p_x: np.ndarray) -> np.ndarray:
    p_y = np.exp(log_p_y)  # (2, m)
    mi = np.zeros(log_p_x_given_y.shape[2:])
    for xv in (0, 1):
        for yv in (0, 1):
            lp = log_p_x_given_y[xv, yv]
            mi += p_y[yv][:, np.newaxis] * np.exp(lp) * (lp - log_p_x[xv][np.newaxis, :])
    return np.maximum(mi, 0.0)


def _tree_alpha(mis: np.ndarray, anchor_cols: dict[int, list[int]], beta: float) -> np.ndarray:
    m, v = mis.shape
    alpha = np.zeros((m, v))
    alpha[np.argmax(mis, axis=0), np.arange(v)] = 1.0
    if anchor_cols:
        for cols in anchor_cols.values():
            alpha[:, cols] = 0.0
        for j, cols in anchor_cols.items():
            alpha[j, cols] = beta
    return alpha


def _e_step(X, alpha, log_p_y, log_p_x_given_y, log_p_x):
    """Return ``(p(y=1|x), log Z)``, both shaped (n, m)."""
    logs = []
    for yv in (0, 1):
        ratio0 = log_p_x_given_y[0, yv] - log_p_x[0][np.newaxis, :]
        ratio1 = log_p_x_given_y[1, yv] - log_p_x[1][np.newaxis, :]
        base = np.einsum("ji,ji->j", alpha, ratio0)
        slope = alpha * (ratio1 - ratio0)  # (m, v)
        logs.append(log_p_y[yv][np.newaxis, :] + base[np.newaxis, :] + np.asarray(X @ slope.T))
    log_z = np.logaddexp(logs[0], logs[1])
    p1 = np.exp(logs[1] - log_z)
    return np.clip(p1, 0.0, 1.0), log_z


def _resolve_anchors(anchors, vocabulary: Vocabulary, n_topics: int) -> dict[int, tuple[str, ...]]:
    if anchors is None:
        return {}
    if isinstance(anchors, Mapping):
        items = anchors.items()
    else:
        items = enumerate(anchors)
    out: dict[int, tuple[str, ...]] = {}
    for j, tokens in items:
        if isinstance(tokens, str):
            tokens = [tokens]
        tokens = tuple(dict.fromkeys(tokens))
        if not tokens:
            continue
        if not 0 <= j < n_topics:
            raise ValueError(f"anchored topic {j} outside 0..{n_topics - 1}")
        for token in tokens:
            if token not in vocabulary:
                raise AnchorError(token, j)
        out[int(j)] = tokens
    return out


def train(
    matrix: DocTermMatrix,
    anchors: Mapping[int, Sequence[str]] | Sequence[Sequence[str]] | None,
    cfg: TrainConfig,
) -> TopicModel:
    """Fit an anchored CorEx topic model to a binary document-term matrix.

    ``anchors`` maps topic index to anchor tokens (a sequence is read in
    topic order). Training stops when the relative change of total TC stays
    below ``cfg.tol`` for two consecutive iterations, or after
    ``cfg.max_iter`` iterations, in which case ``converged`` is false.
    """
    X = _binary(matrix)
    n, v = X.shape
    if n == 0 or v == 0:
        raise ValueError("cannot train on an empty matrix")
    vocab = matrix.vocabulary
    anchor_map = _resolve_anchors(anchors, vocab, cfg.n_topics)
    anchor_cols = {j: [vocab.index[t] for t in toks] for j, toks in anchor_map.items()}
    m = cfg.n_topics

    rng = np.random.default_rng(cfg.seed)
    q = rng.random((n, m))
    for j, cols in anchor_cols.items():
        presence = np.asarray(X[:, cols].mean(axis=1)).ravel()
        q[:, j] = 0.5 * q[:, j] + 0.5 * presence

    log_p_x = _marginals(X)
    history: list[float] = []
    converged = False
    for _ in range(cfg.max_iter):
        log_p_y, log_p_x_given_y = _m_step(X, q, n)
        mis = _mutual_information(log_p_y, log_p_x_given_y, log_p_x)
        alpha = _tree_alpha(mis, anchor_cols, cfg.anchor_strength)
        q, log_z = _e_step(X, alpha, log_p_y, log_p_x_given_y, log_p_x)
        history.append(float(log_z.mean(axis=0).sum()))
        if len(history) >= 3 and all(
            abs(history[k] - history[k - 1]) <= cfg.tol * max(abs(history[k]), _EPS)
            for k in (-1, -2)
        ):
            converged = True
            break

    # orient every factor so that y = 1 is the state where its words appear;
    # anchored factors follow their anchors, the rest their strongest word
    lift = np.exp(log_p_x_given_y[1, 1]) - np.exp(log_p_x_given_y[1, 0])
    weight = alpha * mis
    for j, cols in anchor_cols.items():
        weight[j] = 0.0
        weight[j, cols] = 1.0
    top = np.argmax(weight, axis=1)
    flip = lift[np.arange(m), top] < 0
    for j, cols in anchor_cols.items():
        flip[j] = lift[j, cols].sum() < 0
    if flip.any():
        log_p_y[:, flip] = log_p_y[::-1][:, flip]
        log_p_x_given_y[:, :, flip] = log_p_x_given_y[:, ::-1][:, :, flip]
        q, log_z = _e_step(X, alpha, log_p_y, log_p_x_given_y, log_p_x)
    # contiguous copies keep predict bit-identical after save/load
    log_p_y = np.ascontiguousarray(log_p_y)
    log_p_x_given_y = np.ascontiguousarray(log_p_x_given_y)

    topic_tc = log_z.mean(axis=0)
    return TopicModel(
        config=cfg,
        vocabulary=vocab,
        anchor_map=anchor_map,
        alpha=alpha,
        log_p_y=log_p_y,
        log_p_x_given_y=log_p_x_given_y,
        log_p_x=log_p_x,
        mis=mis,
        doc_topic_prob=q,
        topic_tc=topic_tc,
        total_tc=math.fsum(topic_tc.tolist()),
        doc_ids=list(matrix.doc_ids),
        tc_history=history,
        iterations_run=len(history),
        converged=converged,
    )


def predict(model: TopicModel, matrix: DocTermMatrix) -> np.ndarray:
    """``p(y_j = 1 | x)`` for new documents with the trained parameters held fixed."""
    n_terms = matrix.n_terms if isinstance(matrix, DocTermMatrix) else matrix.shape[1]
    if n_terms != len(model.vocabulary):
        raise ValueError(f"matrix has {n_terms} columns, model vocabulary has {len(model.vocabulary)}")
    if isinstance(matrix, DocTermMatrix) and matrix.vocabulary != model.vocabulary:
        raise ValueError("matrix vocabulary differs from the model vocabulary")
    X = _binary(matrix)
    p1, _ = _e_step(X, model.alpha, model.log_p_y, model.log_p_x_given_y, model.log_p_x)
    return p1


def topic_tc_distribution(model: TopicModel) -> tuple[list[float], list[float]]:
    """Per-topic TC in topic order, and the same values sorted descending."""
    values = model.topic_tc.tolist()
    return values, sorted(values, reverse=True)


def top_words(model: TopicModel, topic: int, k: int = 20) -> list[str]:
    """The ``k`` most associated word types of ``topic``; ties break lexicographically."""
    if not 0 <= topic < model.n_topics:
        raise IndexError(f"topic {topic} outside 0..{model.n_topics - 1}")
    if k < 1:
        raise ValueError("k must be >= 1")
    assoc = model.word_topic_assoc[topic]
    words = model.vocabulary.word_types
    order = sorted(range(len(words)), key=lambda i: (-assoc[i], words[i]))
    return [words[i] for i in order[:k]]


# -- persistence ------------------------------------------------------------

_ARRAYS = ("alpha", "log_p_y", "log_p_x_given_y", "log_p_x", "mis", "doc_topic_prob", "topic_tc")


def _zip_member(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_model(model: TopicModel, path: str | Path) -> None:
    """Write the model as a zip of ``.npy`` arrays plus a JSON header.

    Entries carry a fixed timestamp so identical models give identical bytes.
    """
    meta = {
        "config": {
            "n_topics": model.config.n_topics,
            "anchor_strength": model.config.anchor_strength,
            "max_iter": model.config.max_iter,
            "tol": model.config.tol,
            "seed": model.config.seed,
        },
        "vocabulary_sha256": model.vocabulary.digest(),
        "vocabulary": model.vocabulary.word_types,
        "anchor_map": {str(j): list(t) for j, t in sorted(model.anchor_map.items())},
        "doc_ids": model.doc_ids,
        "topic_tc": model.topic_tc.tolist(),
        "total_tc": model.total_tc,
        "tc_history": model.tc_history,
        "iterations_run": model.iterations_run,
        "converged": model.converged,
    }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        _zip_member(zf, "model.json", json.dumps(meta, sort_keys=True, indent=1).encode("utf-8"))
        for name in _ARRAYS:
            arr = io.BytesIO()
            np.lib.format.write_array(arr, np.ascontiguousarray(getattr(model, name)), allow_pickle=False)
            _zip_member(zf, f"{name}.npy", arr.getvalue())
    atomic_write_bytes(path, buf.getvalue())


def load_model(path: str | Path) -> TopicModel:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("model.json"))
        arrays = {
            name: np.lib.format.read_array(io.BytesIO(zf.read(f"{name}.npy")), allow_pickle=False)
            for name in _ARRAYS
        }
    vocab = Vocabulary(meta["vocabulary"])
    if vocab.digest() != meta["vocabulary_sha256"]:
        raise ValueError("model vocabulary does not match its recorded hash")
    return TopicModel(
        config=TrainConfig(**meta["config"]),
        vocabulary=vocab,
        anchor_map={int(j): tuple(t) for j, t in meta["anchor_map"].items()},
        total_tc=meta["total_tc"],
        doc_ids=meta["doc_ids"],
        tc_history=meta["tc_history"],
        iterations_run=meta["iterations_run"],
        converged=meta["converged"],
        **arrays,
    )
