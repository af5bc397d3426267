"""Corpus record types and their newline-delimited JSON store."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from ..io import atomic_write_text

STACK_EXCHANGE = "stack-exchange"
DISCOURSE = "discourse"
SOURCES = (STACK_EXCHANGE, DISCOURSE)


@dataclass
class Post:
    """One Q&A thread: a question and its answers.

    Timestamps are kept as the ISO-8601 strings the sources emit.
    """

    id: str
    source: str
    title: str
    question_body: str
    answer_bodies: list[str] = field(default_factory=list)
    has_accepted: bool = False
    accepted_date: str | None = None
    tags: list[str] = field(default_factory=list)
    created: str = ""

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown post source {self.source!r}")
        if self.has_accepted and not self.answer_bodies:
            raise ValueError(f"post {self.key} is accepted but has no answers")

    @property
    def n_answers(self) -> int:
        return len(self.answer_bodies)

    @property
    def key(self) -> str:
        """Corpus-wide identifier, ``<source>:<id>``."""
        return f"{self.source}:{self.id}"

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["n_answers"] = self.n_answers
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Post":
        rec = dict(rec)
        n = rec.pop("n_answers", None)
        post = cls(**rec)
        if n is not None and n != post.n_answers:
            raise ValueError(f"post {post.key}: n_answers {n} != {post.n_answers} bodies")
        return post


@dataclass
class CorpusDocument:
    book: str
    chapter_path: str
    text: str

    @property
    def key(self) -> str:
        return self.chapter_path

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "CorpusDocument":
        return cls(**rec)


def dedupe_posts(posts: Iterable[Post]) -> list[Post]:
    """Keep one post per ``(source, id)``; later entries replace earlier ones.

    Output is ordered by source, then numeric id where ids are numeric.
    """
    latest: dict[tuple[str, str], Post] = {}
    for post in posts:
        latest[(post.source, post.id)] = post

    def order(item):
        (source, pid), _ = item
        return (source, 0, int(pid), "") if pid.isdigit() else (source, 1, 0, pid)

    return [post for _, post in sorted(latest.items(), key=order)]


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def write_records(path: str | Path, records: Iterable[dict]) -> None:
    atomic_write_text(path, "".join(dumps_record(r) + "\n" for r in records))


def read_records(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def write_posts(path: str | Path, posts: Iterable[Post]) -> None:
    write_records(path, (p.to_record() for p in posts))


def read_posts(path: str | Path) -> list[Post]:
    return [Post.from_record(r) for r in read_records(path)]


def write_documents(path: str | Path, docs: Iterable[CorpusDocument]) -> None:
    write_records(path, (d.to_record() for d in docs))


def read_documents(path: str | Path) -> list[CorpusDocument]:
    return [CorpusDocument.from_record(r) for r in read_records(path)]
