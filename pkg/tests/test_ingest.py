import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import pytest

from docalign.ingest.discourse import DiscourseClient, SchemaError, fetch_discourse
from docalign.ingest.docs import DocExtractionError, extract_doc_chapters, paragraph_text
from docalign.ingest.records import Post, dedupe_posts, read_posts, write_posts
from docalign.ingest.stackexchange import (
    DumpParseError,
    collect_tag_stats,
    parse_stackexchange_dump,
    parse_tags,
)
from docalign.ingest.tags import TagStats, expand_tags, final_tag_set

DUMP = b"""<?xml version="1.0" encoding="utf-8"?>
<posts>
  <row Id="1" PostTypeId="1" Title="Q1" Body="&lt;p&gt;q1&lt;/p&gt;" Tags="&lt;rust&gt;&lt;lifetime&gt;" AcceptedAnswerId="3" CreationDate="2020-01-01T00:00:00.000" />
  <row Id="2" PostTypeId="2" ParentId="1" Body="a" CreationDate="2020-01-02T00:00:00.000" />
  <row Id="3" PostTypeId="2" ParentId="1" Body="b" CreationDate="2020-01-03T00:00:00.000" />
  <row Id="4" PostTypeId="2" ParentId="5" Body="early answer" CreationDate="2020-01-04T00:00:00.000" />
  <row Id="5" PostIdType="1" Title="Q5" Body="x" Tags="|python|" CreationDate="2020-01-04T00:00:00.000" />
  <row Id="6" PostTypeId="2" ParentId="77" Body="orphan" CreationDate="2020-01-05T00:00:00.000" />
  <row Id="7" PostTypeId="1" Title="Q7" Body="y" Tags="&lt;rust&gt;" CreationDate="2020-01-06T00:00:00.000" />
</posts>
"""


def test_dump_linkage_and_acceptance():
    result = parse_stackexchange_dump(DUMP)
    by_id = {p.id: p for p in result}
    assert list(by_id) == ["1", "5", "7"]
    q1 = by_id["1"]
    assert q1.n_answers == 2 and q1.answer_bodies == ["a", "b"]
    assert q1.has_accepted and q1.accepted_date == "2020-01-03T00:00:00.000"
    assert q1.tags == ["rust", "lifetime"]
    assert by_id["5"].n_answers == 1 and by_id["5"].tags == ["python"]
    assert not by_id["7"].has_accepted and by_id["7"].accepted_date is None
    assert result.orphan_answers == 1
    # every answer row whose parent resolves is attached
    assert result.n_answers == result.n_answer_rows - result.orphan_answers


def test_dump_keep_filter_drops_answers_of_dropped_questions():
    result = parse_stackexchange_dump(DUMP, keep=lambda tags: "rust" in tags)
    assert [p.id for p in result] == ["1", "7"]
    assert result.orphan_answers == 1
    assert result.n_answers == 2


def test_dump_parse_error_reports_offset():
    bad = b'<posts><row Id="1" PostTypeId="1" /><row Id="2" </posts>'
    with pytest.raises(DumpParseError) as info:
        parse_stackexchange_dump(bad)
    assert 0 < info.value.offset <= len(bad)


def test_parse_tags_forms():
    assert parse_tags("<a><b-c>") == ["a", "b-c"]
    assert parse_tags("|a|b|") == ["a", "b"]
    assert parse_tags(None) == [] and parse_tags("") == []


def test_collect_tag_stats():
    stats, reference, seeds = collect_tag_stats(DUMP, ["rust"])
    table = {s.tag: (s.n_target_posts, s.n_total_posts) for s in stats}
    assert table == {"rust": (2, 2), "lifetime": (1, 1)}
    assert reference == 2 and seeds == {"rust"}


def test_expand_tags_examples():
    kept = expand_tags({"rust"}, [TagStats("serde", 60, 100)], reference_count=1000)
    assert kept == {"rust", "serde"}
    kept = expand_tags({"rust"}, [TagStats("web", 40, 100)], reference_count=10)
    assert kept == {"rust"}


def test_expand_tags_strict_and_zero_total(caplog):
    stats = [TagStats("edge_tet", 50, 100), TagStats("edge_tst", 10, 10), TagStats("empty", 0, 0)]
    assert expand_tags({"rust"}, stats, 0.5, 0.01, reference_count=1000) == {"rust"}
    assert "empty" in caplog.text


@pytest.mark.parametrize("kwargs", [{"reference_count": 0}, {"tet_min": 1.0}, {"tst_min": 0.0}])
def test_expand_tags_bad_parameters(kwargs):
    args = {"tet_min": 0.5, "tst_min": 0.01, "reference_count": 10, **kwargs}
    with pytest.raises(ValueError):
        expand_tags({"rust"}, [], **args)


def test_expand_tags_monotone():
    stats = [TagStats(f"t{i}", i, 100) for i in range(101)]
    reference = 200
    prev = None
    for tet in (0.1, 0.3, 0.5, 0.7, 0.9):
        kept = expand_tags(set(), stats, tet, 0.05, reference)
        if prev is not None:
            assert kept <= prev
        prev = kept


def test_target_posts_cannot_exceed_total():
    with pytest.raises(ValueError):
        TagStats("x", 5, 4)


def test_final_tag_set():
    assert final_tag_set({"rust", "generics"}, ["serde", "lifetime"], ["generics"]) == {"rust", "serde", "lifetime"}


# -- documentation -----------------------------------------------------------

def test_paragraph_text_concatenation():
    assert paragraph_text("<p>a b.</p><div>skip</div><p>c\n  d.</p>") == "a b. c d."
    assert paragraph_text("<p>first<ul><li>x</li></ul>tail") == "first"
    assert paragraph_text("<p>a &amp; b<br>c</p><script><p>no</p></script>") == "a & b c"


def test_extract_doc_chapters(tmp_path):
    (tmp_path / "book" / "ch1").mkdir(parents=True)
    (tmp_path / "book" / "ch1" / "intro.html").write_text("<p>a b.</p><p>c d.</p>", encoding="utf-8")
    (tmp_path / "book" / "empty.html").write_text("<h1>Nothing</h1>", encoding="utf-8")
    (tmp_path / "book" / "print.html").write_text("<p>all</p>", encoding="utf-8")
    (tmp_path / "reference").mkdir()
    (tmp_path / "reference" / "x.html").write_text("<p>ref</p", encoding="utf-8")
    (tmp_path / "notes.txt").write_text("<p>not html</p>", encoding="utf-8")
    result = extract_doc_chapters(tmp_path)
    docs = {d.chapter_path: d for d in result}
    assert docs["book/ch1/intro.html"].text == "a b. c d."
    assert docs["book/ch1/intro.html"].book == "book"
    assert docs["reference/x.html"].book == "reference"
    assert result.skipped == ["book/empty.html"]
    assert result.n_scanned == len(result) + len(result.skipped) == 3


def test_extract_doc_chapters_bad_root(tmp_path):
    with pytest.raises(DocExtractionError):
        extract_doc_chapters(tmp_path / "missing")


# -- records --------------------------------------------------------------------

def test_post_invariants_and_round_trip(tmp_path):
    with pytest.raises(ValueError):
        Post(id="1", source="stack-exchange", title="", question_body="", has_accepted=True)
    with pytest.raises(ValueError):
        Post(id="1", source="mailing-list", title="", question_body="")
    posts = [
        Post(id="10", source="stack-exchange", title="t", question_body="q", answer_bodies=["a"], has_accepted=True,
             accepted_date="2020", tags=["rust"], created="2019"),
        Post(id="2", source="discourse", title="t2", question_body="ü"),
    ]
    path = tmp_path / "posts.ndjson"
    write_posts(path, posts)
    assert read_posts(path) == posts


def test_dedupe_later_replaces_earlier():
    a = Post(id="2", source="stack-exchange", title="old", question_body="")
    b = Post(id="10", source="stack-exchange", title="x", question_body="")
    c = Post(id="2", source="stack-exchange", title="new", question_body="")
    d = Post(id="2", source="discourse", title="forum", question_body="")
    out = dedupe_posts([a, b, c, d])
    assert [(p.source, p.id, p.title) for p in out] == [
        ("discourse", "2", "forum"), ("stack-exchange", "2", "new"), ("stack-exchange", "10", "x"),
    ]


# -- discourse --------------------------------------------------------------------

class ForumState:
    def __init__(self, n_pages=2, per_page=30, posts_per_page=20, fail_first=0):
        self.topics = [100 + i for i in range(n_pages * per_page)]
        self.per_page = per_page
        self.posts_per_page = posts_per_page
        self.list_requests = 0
        self.topic_requests = 0
        self.fail_first = fail_first
        self.lock = threading.Lock()

    def replies(self, tid):
        return 3 if tid % 2 else 45  # long topics span several pages


def make_handler(state):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _json(self, code, obj):
            body = json.dumps(obj).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            url = urlparse(self.path)
            page = int(parse_qs(url.query).get("page", ["0"])[0])
            with state.lock:
                if state.fail_first > 0:
                    state.fail_first -= 1
                    return self._json(503, {"error": "busy"})
            if url.path == "/c/help/5.json":
                with state.lock:
                    state.list_requests += 1
                chunk = state.topics[page * state.per_page:(page + 1) * state.per_page]
                return self._json(200, {"topic_list": {"topics": [{"id": t} for t in chunk]}})
            if url.path.startswith("/t/-/"):
                tid = int(url.path.split("/")[3].split(".")[0])
                if tid not in state.topics:
                    return self._json(404, {})
                with state.lock:
                    state.topic_requests += 1
                total = 1 + state.replies(tid)
                numbers = range(1 + (page - 1) * state.posts_per_page, min(total, page * state.posts_per_page) + 1)
                posts = [
                    {"post_number": n, "topic_id": tid, "cooked": f"<p>post {n}</p>",
                     "created_at": f"2021-01-{n % 28 + 1:02d}", "accepted_answer": n == 2}
                    for n in numbers
                ]
                return self._json(200, {"title": f"topic {tid}", "posts_count": total, "post_stream": {"posts": posts}})
            self._json(404, {})

    return Handler


@pytest.fixture
def forum():
    servers = []

    def start(**kwargs):
        state = ForumState(**kwargs)
        server = ThreadingHTTPServer(("127.0.0.1", 0), make_handler(state))
        threading.Thread(target=server.serve_forever, daemon=True).start()
        servers.append(server)
        return state, f"http://127.0.0.1:{server.server_address[1]}"

    yield start
    for server in servers:
        server.shutdown()


def test_fetch_discourse_paginates_listing(forum, tmp_path):
    state, url = forum()
    client = DiscourseClient(url, delay=0.0)
    posts = fetch_discourse(url, "help/5", cursor_path=tmp_path / "cursor.json", client=client)
    assert len(posts) == 60
    assert state.list_requests == 3
    assert [int(p.id) for p in posts] == sorted(state.topics)
    odd = next(p for p in posts if int(p.id) % 2)
    even = next(p for p in posts if int(p.id) % 2 == 0)
    assert odd.n_answers == 3 and odd.has_accepted and odd.accepted_date == "2021-01-03"
    assert even.n_answers == 45
    assert odd.source == "discourse" and odd.question_body == "<p>post 1</p>"


def test_fetch_discourse_resumes_from_cursor(forum, tmp_path):
    state, url = forum()
    client = DiscourseClient(url, delay=0.0)
    cursor = tmp_path / "cursor.json"
    first = fetch_discourse(url, "help/5", cursor_path=cursor, client=client)
    lists, topics = state.list_requests, state.topic_requests
    again = fetch_discourse(url, "help/5", cursor_path=cursor, client=client)
    assert again == first
    assert (state.list_requests, state.topic_requests) == (lists, topics)
    saved = json.loads(cursor.read_text())
    assert saved["listing_done"] and saved["last_topic_id"] == state.topics[-1]


def test_fetch_discourse_retries_transient_errors(forum):
    state, url = forum(n_pages=1, per_page=2, fail_first=2)
    client = DiscourseClient(url, delay=0.0, backoff=0.01)
    posts = fetch_discourse(url, "help/5", client=client)
    assert len(posts) == 2


def test_fetch_discourse_gives_up(forum):
    from docalign.ingest.discourse import DiscourseError

    state, url = forum(fail_first=100)
    client = DiscourseClient(url, delay=0.0, backoff=0.0, max_retries=2)
    with pytest.raises(DiscourseError, match="3 attempts"):
        fetch_discourse(url, "help/5", client=client)


def test_schema_drift_names_field():
    class Stub(DiscourseClient):
        def get_json(self, path, params=None):
            if path.startswith("/c/"):
                return {"topic_list": {"topics": [{"id": 1}]}} if params["page"] == 0 else {"topic_list": {"topics": []}}
            return {"title": "t", "post_stream": {"posts": [{"post_number": 1, "created_at": "x"}]}}

    with pytest.raises(SchemaError) as info:
        fetch_discourse("http://unused", "help/5", client=Stub("http://unused", delay=0.0))
    assert info.value.field == "cooked"


def test_delay_from_environment(monkeypatch):
    monkeypatch.setenv("DOCALIGN_FORUM_DELAY", "0.25")
    assert DiscourseClient("http://x").delay == 0.25
