"""Text cleaning, vocabulary building and binary document-term matrices.

Cleaning applies six steps in order: drop ``<code>`` contents, strip the
remaining markup, keep only ASCII letters, underscore compound anchor
phrases, lemmatize, and drop stop words. The pass is repeated on its own
output until it no longer changes, which makes ``clean`` idempotent.
"""
from __future__ import annotations

import functools
import gzip
import hashlib
import re
import warnings
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from bs4 import BeautifulSoup, MarkupResemblesLocatorWarning

from .registry import underscore_form

STOPLIST_SHA256 = "6d8e6b98440939e713e85dc329b607645db097aa07f2cb57244e4f87c67009b3"

_NON_ALPHA = re.compile(r"[^a-z]+")
_MAX_PASSES = 8


def _data_path(name: str) -> Path:
    return Path(str(resources.files("docalign") / "data" / name))


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_stoplist(path: str | Path | None = None) -> frozenset[str]:
    """Load a stop list, one word per line.

    The bundled list is verified against its pinned hash.
    """
    if path is None:
        path = _data_path("stopwords_en.txt")
        digest = file_sha256(path)
        if digest != STOPLIST_SHA256:
            raise RuntimeError(f"bundled stop list hash mismatch: {digest}")
    words = Path(path).read_text(encoding="utf-8").split()
    return frozenset(w.lower() for w in words)


def load_lemma_table(path: str | Path | None = None) -> dict[str, str]:
    """Load a ``word<TAB>lemma`` table (optionally gzipped)."""
    path = Path(path) if path is not None else _data_path("lemma_en.tsv.gz")
    opener = gzip.open if path.suffix == ".gz" else open
    table = {}
    with opener(path, "rt", encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) == 2 and parts[0]:
                table[parts[0]] = parts[1]
    return table


@functools.lru_cache(maxsize=1)
def _default_resources() -> tuple[frozenset[str], dict[str, str]]:
    return load_stoplist(), load_lemma_table()


def normalize_letters(text: str) -> str:
    """Lowercase and replace every run of non-letters with one space."""
    return _NON_ALPHA.sub(" ", text.lower()).strip()


def strip_markup(html: str) -> str:
    """Drop ``<code>`` elements with their content, then all other tags."""
    if "<" not in html and "&" not in html:
        return html
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MarkupResemblesLocatorWarning)
        soup = BeautifulSoup(html, "html.parser")
    for node in soup.find_all("code"):
        node.decompose()
    return soup.get_text(" ")


class Preprocessor:
    """Reusable cleaner bound to an anchor lexicon, stop list and lemma table."""

    def __init__(
        self,
        anchor_lexicon: Iterable[str] = (),
        stopwords: Iterable[str] | None = None,
        lemmas: dict[str, str] | None = None,
    ):
        default_stop, default_lemmas = _default_resources()
        self.stopwords = frozenset(stopwords) if stopwords is not None else default_stop
        self.lemmas = lemmas if lemmas is not None else default_lemmas
        self._phrases: dict[str, str] = {}
        for phrase in anchor_lexicon:
            words = normalize_letters(phrase)
            if " " in words:
                self._phrases[words] = underscore_form(words)
        self._pattern = self._compile(self._phrases)

    @staticmethod
    def _compile(phrases: dict[str, str]) -> re.Pattern | None:
        if not phrases:
            return None
        # longest alternative first so overlapping shorter phrases lose
        ordered = sorted(phrases, key=lambda p: (-len(p), p))
        alts = []
        for phrase in ordered:
            *head, last = phrase.split(" ")
            body = " ".join(re.escape(w) for w in head)
            alts.append(f"{body} {re.escape(last)}(?:e?s)?")
        return re.compile(r"\b(?:" + "|".join(alts) + r")\b")

    def _join_phrase(self, match: re.Match) -> str:
        text = match.group(0)
        for candidate in (text, text[:-2] if text.endswith("es") else None, text[:-1]):
            if candidate and candidate in self._phrases:
                return self._phrases[candidate]
        return text.replace(" ", "_")

    def _pass(self, text: str) -> list[str]:
        text = normalize_letters(text)
        if self._pattern is not None:
            text = self._pattern.sub(self._join_phrase, text)
        out = []
        for token in text.split():
            if "_" not in token:
                token = self.lemmas.get(token, token)
                if token in self.stopwords:
                    continue
            out.append(token)
        return out

    def clean(self, text: str) -> list[str]:
        if not text:
            return []
        tokens = self._pass(strip_markup(text))
        for _ in range(_MAX_PASSES):
            again = self._pass(" ".join(tokens))
            if again == tokens:
                break
            tokens = again
        return tokens

    def anchor_token(self, phrase: str) -> str | None:
        """The corpus token an anchor phrase is rewritten to, if any."""
        tokens = self.clean(phrase)
        return tokens[0] if len(tokens) == 1 else None


def clean(text: str, anchor_lexicon: Iterable[str] = ()) -> list[str]:
    return _cached_preprocessor(frozenset(anchor_lexicon)).clean(text)


@functools.lru_cache(maxsize=8)
def _cached_preprocessor(lexicon: frozenset[str]) -> Preprocessor:
    return Preprocessor(sorted(lexicon))


def assemble_post_text(post) -> str:
    """Title, question body and every answer body, space-joined."""
    return " ".join([post.title, post.question_body, *post.answer_bodies])


@dataclass(frozen=True)
class TokenizedDocument:
    doc_id: str
    tokens: tuple[str, ...]


class Vocabulary:
    """Ordered word types; order is descending document frequency, then lexicographic."""

    def __init__(self, word_types: Sequence[str]):
        self.word_types = list(word_types)
        self.index = {w: i for i, w in enumerate(self.word_types)}
        if len(self.index) != len(self.word_types):
            raise ValueError("vocabulary word types must be distinct")

    def __len__(self) -> int:
        return len(self.word_types)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __iter__(self):
        return iter(self.word_types)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.word_types == other.word_types

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.word_types).encode("utf-8")).hexdigest()


def document_frequencies(docs: Iterable[TokenizedDocument]) -> Counter:
    df: Counter = Counter()
    for doc in docs:
        df.update(set(doc.tokens))
    return df


def build_vocabulary(docs: Sequence[TokenizedDocument], min_df: int = 2) -> Vocabulary:
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    docs = list(docs)
    if not docs:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    df = document_frequencies(docs)
    kept = [(w, n) for w, n in df.items() if n >= min_df]
    kept.sort(key=lambda item: (-item[1], item[0]))
    return Vocabulary([w for w, _ in kept])


@dataclass
class DocTermMatrix:
    """Sparse binary presence matrix (CSR, one row per document)."""

    matrix: sp.csr_matrix
    doc_ids: list[str]
    vocabulary: Vocabulary

    @property
    def n_docs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_terms(self) -> int:
        return self.matrix.shape[1]

    def rows(self) -> Iterable[tuple[str, list[int]]]:
        indptr, indices = self.matrix.indptr, self.matrix.indices
        for r, doc_id in enumerate(self.doc_ids):
            yield doc_id, indices[indptr[r]:indptr[r + 1]].tolist()


def matrix_from_rows(rows: Sequence[Sequence[int]], doc_ids: list[str], vocab: Vocabulary) -> DocTermMatrix:
    indptr = [0]
    indices: list[int] = []
    for cols in rows:
        cols = sorted(set(cols))
        indices.extend(cols)
        indptr.append(len(indices))
    data = np.ones(len(indices), dtype=np.float64)
    mat = sp.csr_matrix(
        (data, np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(rows), len(vocab)),
    )
    return DocTermMatrix(matrix=mat, doc_ids=list(doc_ids), vocabulary=vocab)


def vectorize(docs: Sequence[TokenizedDocument], vocab: Vocabulary) -> DocTermMatrix:
    """Binary presence rows; out-of-vocabulary tokens are dropped."""
    if len(vocab) == 0:
        raise ValueError("vocabulary is empty")
    index = vocab.index
    rows = [[index[t] for t in doc.tokens if t in index] for doc in docs]
    return matrix_from_rows(rows, [d.doc_id for d in docs], vocab)
