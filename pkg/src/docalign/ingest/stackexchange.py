"""Streaming reader for Stack Exchange ``Posts.xml`` dumps.

Each ``<row>`` is a question (``PostTypeId="1"``) or an answer
(``PostTypeId="2"``). The misspelled ``PostIdType`` attribute is accepted as
a synonym. Answers are linked to questions through ``ParentId``.
"""
from __future__ import annotations

import io
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Callable, Iterable, Iterator
from xml.parsers import expat

from .records import STACK_EXCHANGE, Post
from .tags import TagStats

log = logging.getLogger(__name__)

QUESTION, ANSWER = "1", "2"
_ANGLE_TAGS = re.compile(r"<([^<>]+)>")


class DumpParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


def parse_tags(raw: str | None) -> list[str]:
    """Split ``<a><b>`` (classic) or ``|a|b|`` (newer dumps) tag strings."""
    if not raw:
        return []
    if "<" in raw:
        return _ANGLE_TAGS.findall(raw)
    return [t for t in raw.split("|") if t]


def _post_type(attrs: dict) -> str | None:
    return attrs.get("PostTypeId", attrs.get("PostIdType"))


def iter_rows(source: str | Path | BinaryIO) -> Iterator[dict]:
    """Yield the attribute dict of every ``row`` element, streaming."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            yield from iter_rows(fh)
        return

    pending: list[dict] = []
    parser = expat.ParserCreate()

    def start(name, attrs):
        if name == "row":
            pending.append(attrs)

    parser.StartElementHandler = start
    while True:
        chunk = source.read(1 << 20)
        try:
            parser.Parse(chunk, not chunk)
        except expat.ExpatError as exc:
            raise DumpParseError(expat.ErrorString(exc.code), parser.ErrorByteIndex) from None
        yield from pending
        pending.clear()
        if not chunk:
            break


@dataclass
class DumpParseResult:
    posts: list[Post] = field(default_factory=list)
    n_questions_seen: int = 0
    n_answer_rows: int = 0
    orphan_answers: int = 0

    def __iter__(self):
        return iter(self.posts)

    def __len__(self) -> int:
        return len(self.posts)

    @property
    def n_answers(self) -> int:
        return sum(p.n_answers for p in self.posts)


def parse_stackexchange_dump(
    source: str | Path | BinaryIO | bytes,
    keep: Callable[[list[str]], bool] | None = None,
) -> DumpParseResult:
    """Build one :class:`Post` per question, attaching its answers.

    ``keep`` receives a question's tags and decides whether the question is
    retained; answers of dropped questions are discarded silently. Answers
    whose parent is not a question anywhere in the stream are counted as
    orphans.
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)

    questions: dict[str, dict] = {}
    seen_questions: set[str] = set()
    answers: dict[str, list[dict]] = {}
    result = DumpParseResult()

    for attrs in iter_rows(source):
        kind = _post_type(attrs)
        if kind == QUESTION:
            qid = attrs["Id"]
            seen_questions.add(qid)
            result.n_questions_seen += 1
            tags = parse_tags(attrs.get("Tags"))
            if keep is None or keep(tags):
                questions[qid] = {**attrs, "_tags": tags}
        elif kind == ANSWER:
            result.n_answer_rows += 1
            parent = attrs.get("ParentId")
            # buffer until the parent is known; dropped parents are discarded
            if parent in questions or parent not in seen_questions:
                answers.setdefault(parent, []).append(attrs)

    for parent, rows in answers.items():
        if parent not in seen_questions:
            result.orphan_answers += len(rows)
    if result.orphan_answers:
        log.warning("%d answer rows reference no question", result.orphan_answers)

    for qid in sorted(questions, key=lambda s: (len(s), s)):
        q = questions[qid]
        rows = sorted(answers.get(qid, []), key=lambda a: (len(a["Id"]), a["Id"]))
        accepted_id = q.get("AcceptedAnswerId")
        accepted = next((a for a in rows if a["Id"] == accepted_id), None)
        result.posts.append(
            Post(
                id=qid,
                source=STACK_EXCHANGE,
                title=q.get("Title", ""),
                question_body=q.get("Body", ""),
                answer_bodies=[a.get("Body", "") for a in rows],
                has_accepted=accepted is not None,
                accepted_date=accepted.get("CreationDate") if accepted else None,
                tags=q["_tags"],
                created=q.get("CreationDate", ""),
            )
        )
    return result


def seed_matcher(seed_tags: Iterable[str], seed_prefixes: Iterable[str] = ()) -> Callable[[str], bool]:
    seeds = frozenset(seed_tags)
    prefixes = tuple(seed_prefixes)
    return lambda tag: tag in seeds or (bool(prefixes) and tag.startswith(prefixes))


def collect_tag_stats(
    source: str | Path | BinaryIO | bytes,
    seed_tags: Iterable[str],
    seed_prefixes: Iterable[str] = (),
) -> tuple[list[TagStats], int, set[str]]:
    """Count, per tag, target posts (also carrying a seed tag) and total posts.

    Returns the stats of every tag that co-occurs with a seed tag, the post
    count of the most popular seed tag, and the resolved seed set.
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    is_seed = seed_matcher(seed_tags, seed_prefixes)
    total: Counter = Counter()
    target: Counter = Counter()
    seeds_found: set[str] = set()
    for attrs in iter_rows(source):
        if _post_type(attrs) != QUESTION:
            continue
        tags = set(parse_tags(attrs.get("Tags")))
        total.update(tags)
        hits = {t for t in tags if is_seed(t)}
        if hits:
            seeds_found |= hits
            target.update(tags)
    stats = [TagStats(tag=t, n_target_posts=target[t], n_total_posts=total[t]) for t in sorted(target)]
    reference = max((target[s] for s in seeds_found), default=0)
    return stats, reference, seeds_found
