"""Discourse forum crawler: category listing plus per-topic post streams.

Listing pages (``/c/<category>.json?page=N``) are read until one comes back
empty. Each topic (``/t/-/<id>.json?page=N``) becomes one :class:`Post`, with
the first post as the question and every later post as an answer.
Progress is persisted to a cursor file so an interrupted crawl resumes
without refetching finished topics.
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import requests

from ..io import atomic_write_text
from .records import DISCOURSE, Post, dumps_record

log = logging.getLogger(__name__)

DELAY_ENV = "DOCALIGN_FORUM_DELAY"
DEFAULT_DELAY = 1.0
RETRY_STATUS = frozenset((429, 500, 502, 503, 504))


class DiscourseError(RuntimeError):
    pass


class SchemaError(DiscourseError):
    def __init__(self, field: str, where: str):
        super().__init__(f"missing field {field!r} in {where}")
        self.field = field


def _require(obj, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(key, where)
    return obj[key]


class DiscourseClient:
    """JSON client with a shared politeness delay and retry with backoff."""

    def __init__(
        self,
        base_url: str,
        session: requests.Session | None = None,
        delay: float | None = None,
        max_retries: int = 4,
        backoff: float = 1.0,
        timeout: float = 30.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.session = session or requests.Session()
        if delay is None:
            delay = float(os.environ.get(DELAY_ENV, DEFAULT_DELAY))
        self.delay = delay
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def _wait_turn(self):
        with self._lock:
            now = time.monotonic()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + self.delay
        if wait > 0:
            time.sleep(wait)

    def get_json(self, path: str, params: dict | None = None) -> dict | None:
        """GET ``path``; returns ``None`` on 404."""
        url = f"{self.base_url}{path}"
        last_error = None
        for attempt in range(self.max_retries + 1):
            self._wait_turn()
            try:
                resp = self.session.get(url, params=params, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code == 404:
                    return None
                if resp.status_code not in RETRY_STATUS:
                    if resp.status_code >= 400:
                        raise DiscourseError(f"GET {url} failed with HTTP {resp.status_code}")
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise DiscourseError(f"GET {url} returned invalid JSON") from exc
                last_error = DiscourseError(f"HTTP {resp.status_code}")
                retry_after = resp.headers.get("Retry-After")
                if retry_after and retry_after.isdigit():
                    time.sleep(float(retry_after))
            if attempt < self.max_retries:
                time.sleep(self.backoff * 2 ** attempt)
        raise DiscourseError(f"GET {url} failed after {self.max_retries + 1} attempts: {last_error}")

    def list_page(self, category: str, page: int) -> list[dict]:
        data = self.get_json(f"/c/{category}.json", {"page": page})
        if data is None:
            return []
        topic_list = _require(data, "topic_list", f"category page {page}")
        topics = _require(topic_list, "topics", f"category page {page}")
        for t in topics:
            _require(t, "id", f"category page {page} topic")
        return topics

    def topic_page(self, topic_id: int, page: int) -> dict | None:
        return self.get_json(f"/t/-/{topic_id}.json", {"page": page})


def fetch_topic(client: DiscourseClient, topic_id: int) -> Post:
    """Fetch every page of one topic and fold it into a post."""
    posts: dict[int, dict] = {}
    title = None
    expected = None
    page = 1
    while True:
        data = client.topic_page(topic_id, page)
        if data is None:
            break
        where = f"topic {topic_id} page {page}"
        if title is None:
            title = _require(data, "title", where)
            expected = data.get("posts_count")
        stream = _require(_require(data, "post_stream", where), "posts", where)
        fresh = 0
        for p in stream:
            number = _require(p, "post_number", where)
            for key in ("cooked", "created_at"):
                _require(p, key, where)
            if p.get("topic_id", topic_id) != topic_id:
                continue
            if number not in posts:
                fresh += 1
            posts[number] = p
        if not fresh or (expected is not None and len(posts) >= expected):
            break
        page += 1

    if title is None:
        raise DiscourseError(f"topic {topic_id} not found")
    ordered = [posts[n] for n in sorted(posts)]
    if not ordered or ordered[0]["post_number"] != 1:
        raise SchemaError("post_number", f"topic {topic_id} (no opening post)")
    question, replies = ordered[0], ordered[1:]
    accepted = next((r for r in replies if r.get("accepted_answer")), None)
    return Post(
        id=str(topic_id),
        source=DISCOURSE,
        title=title,
        question_body=question["cooked"],
        answer_bodies=[r["cooked"] for r in replies],
        has_accepted=accepted is not None,
        accepted_date=accepted["created_at"] if accepted else None,
        tags=[],
        created=question["created_at"],
    )


class _Cursor:
    """Crawl state: listing progress in a JSON file, finished posts in a sidecar."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self.next_page = 0
        self.listing_done = False
        self.topic_ids: list[int] = []
        self.done: dict[int, Post] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            state = json.loads(self.path.read_text(encoding="utf-8"))
            self.next_page = state["next_page"]
            self.listing_done = state["listing_done"]
            self.topic_ids = state["topic_ids"]
            if self.sidecar.exists():
                for line in self.sidecar.read_text(encoding="utf-8").splitlines():
                    try:
                        post = Post.from_record(json.loads(line))
                    except ValueError:
                        continue  # torn final line of an interrupted write
                    self.done[int(post.id)] = post

    @property
    def sidecar(self) -> Path:
        return self.path.with_name(self.path.name + ".posts.ndjson")

    def save(self):
        if self.path:
            state = {
                "next_page": self.next_page,
                "listing_done": self.listing_done,
                "topic_ids": self.topic_ids,
                "last_topic_id": self.topic_ids[-1] if self.topic_ids else None,
            }
            atomic_write_text(self.path, json.dumps(state, sort_keys=True))

    def finish(self, post: Post):
        with self._lock:
            self.done[int(post.id)] = post
            if self.path:
                with open(self.sidecar, "a", encoding="utf-8") as fh:
                    fh.write(dumps_record(post.to_record()) + "\n")


def fetch_discourse(
    base_url: str,
    category: str,
    cursor_path: str | Path | None = None,
    client: DiscourseClient | None = None,
    max_workers: int = 4,
) -> list[Post]:
    """Crawl every topic of ``category`` (e.g. ``"help/5"``) into posts, ordered by id."""
    client = client or DiscourseClient(base_url)
    cursor = _Cursor(cursor_path)

    known = set(cursor.topic_ids)
    while not cursor.listing_done:
        topics = client.list_page(category, cursor.next_page)
        if not topics:
            cursor.listing_done = True
        else:
            for t in topics:
                if t["id"] not in known:
                    known.add(t["id"])
                    cursor.topic_ids.append(t["id"])
            cursor.next_page += 1
        cursor.save()

    todo = sorted(tid for tid in cursor.topic_ids if tid not in cursor.done)
    log.info("%d topics listed, %d to fetch", len(cursor.topic_ids), len(todo))

    def work(tid):
        cursor.finish(fetch_topic(client, tid))

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        for future in [pool.submit(work, tid) for tid in todo]:
            future.result()
    return [cursor.done[tid] for tid in sorted(cursor.done)]
