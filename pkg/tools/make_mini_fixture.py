"""Regenerate the bundled mini-fixture under src/docalign/data/mini/.

Five KUs, 40 Stack Exchange questions (plus off-topic rows that tag
selection must drop), 10 forum topics and 10 documentation chapters. The
per-KU post and chapter counts are chosen so the default cutoffs give one
convergent, one divergent and one absent KU.
"""
from __future__ import annotations

import argparse
import json
import random
from html import escape
from pathlib import Path

KUS = [
    {"name": "Ownership", "category": "Language features", "anchors": ["ownership", "borrow", "move"]},
    {"name": "Structs", "category": "Data types", "anchors": ["struct", "named field"]},
    {"name": "Testing", "category": "Development tooling", "anchors": ["test", "unit test", "assert"]},
    {"name": "Web development", "category": "Programming niche", "anchors": ["web", "rocket", "actix web"]},
    {"name": "Macros", "category": "Language features", "anchors": ["macro", "procedural macro"]},
]

WORDS = {
    "Ownership": "ownership borrow move owner heap stack value drop borrowck moved".split(),
    "Structs": "struct field method instance impl constructor named_field record".split(),
    "Testing": "test assert unit_test fixture coverage harness failing mock".split(),
    "Web development": "web rocket actix_web server route request handler endpoint".split(),
    "Macros": "macro procedural_macro derive token expansion syntax quote hygiene".split(),
}
FILLER = "rust code compile example problem question idea version project simple".split()

# posts per KU (Stack Exchange, forum) and chapters per KU
POSTS = {"Web development": (11, 3), "Ownership": (10, 2), "Testing": (8, 2), "Structs": (6, 2), "Macros": (5, 1)}
CHAPTERS = {"Ownership": 4, "Structs": 3, "Testing": 2, "Web development": 1, "Macros": 0}


def sentence(rng: random.Random, ku: str, n: int = 8) -> str:
    words = [w.replace("_", " ") for w in rng.sample(WORDS[ku], 4)] + rng.sample(FILLER, 3)
    rng.shuffle(words)
    return " ".join(words[:n]).capitalize() + "."


def body(rng: random.Random, ku: str) -> str:
    return (
        f"<p>{escape(sentence(rng, ku))}</p>"
        f"<pre><code>fn main() {{ let x = {rng.randint(1, 99)}; }}</code></pre>"
        f"<p>{escape(sentence(rng, ku))}</p>"
    )


def make_posts(rng: random.Random):
    rows, forum = [], []
    next_id = 1
    schedule = [(ku, site) for ku, (se, df) in POSTS.items() for site, n in (("se", se), ("forum", df)) for _ in range(n)]
    rng.shuffle(schedule)
    tags_for = {
        "Web development": "<rust><rust-rocket>",
        "Testing": "<rust><unit-testing>",
        "Macros": "<rust><rust-macros>",
        "Ownership": "<rust><borrow-checker>",
        "Structs": "<rust><struct>",
    }
    topic_id = 100
    for ku, site in schedule:
        n_answers = rng.choice([0, 1, 1, 2, 3]) if ku != "Macros" else rng.choice([0, 0, 1])
        answers = [body(rng, ku) for _ in range(n_answers)]
        accepted = n_answers > 0 and rng.random() < 0.6
        if site == "se":
            qid = next_id
            next_id += 1
            answer_ids = list(range(next_id, next_id + n_answers))
            next_id += n_answers
            q = {
                "Id": str(qid), "PostTypeId": "1", "CreationDate": f"2020-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}T10:00:00.000",
                "Title": sentence(rng, ku, 5), "Body": body(rng, ku), "Tags": tags_for[ku],
            }
            if accepted:
                q["AcceptedAnswerId"] = str(answer_ids[0])
            rows.append(q)
            for aid, text in zip(answer_ids, answers):
                rows.append({"Id": str(aid), "PostTypeId": "2", "ParentId": str(qid),
                             "CreationDate": "2020-12-31T12:00:00.000", "Body": text})
        else:
            topic_id += 1
            forum.append({
                "id": str(topic_id), "source": "discourse", "title": sentence(rng, ku, 5),
                "question_body": body(rng, ku), "answer_bodies": answers,
                "has_accepted": accepted, "accepted_date": "2020-12-30T09:00:00.000Z" if accepted else None,
                "tags": [], "created": "2020-12-01T09:00:00.000Z", "n_answers": len(answers),
            })
    # off-topic questions that tag selection must drop, and an orphan answer
    for i in range(6):
        rows.append({"Id": str(next_id), "PostTypeId": "1", "CreationDate": "2020-06-01T00:00:00.000",
                     "Title": "Python list question", "Body": "<p>How do I sort a python list?</p>",
                     "Tags": "<python><list>" if i % 2 else "<python><pytest>"})
        next_id += 1
    rows.append({"Id": str(next_id), "PostTypeId": "2", "ParentId": "99999",
                 "CreationDate": "2020-06-02T00:00:00.000", "Body": "<p>orphan</p>"})
    return rows, forum


def dump_xml(rows) -> str:
    lines = ['<?xml version="1.0" encoding="utf-8"?>', "<posts>"]
    for row in rows:
        attrs = " ".join(f'{k}="{escape(v, quote=True)}"' for k, v in row.items())
        lines.append(f"  <row {attrs} />")
    lines.append("</posts>")
    return "\n".join(lines) + "\n"


def chapter(rng: random.Random, title: str, ku: str | None) -> str:
    paras = [sentence(rng, ku) for _ in range(3)] if ku else []
    inner = "".join(f"<p>{escape(p)}</p>" for p in paras)
    return (f"<!DOCTYPE html><html><head><title>{escape(title)}</title></head><body>"
            f"<nav><a href='index.html'>index</a></nav><main><h1>{escape(title)}</h1>{inner}"
            f"<pre><code>cargo build</code></pre></main></body></html>\n")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/docalign/data/mini"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    rng = random.Random(20210211)
    rows, forum = make_posts(rng)
    out.mkdir(parents=True, exist_ok=True)
    (out / "Posts.xml").write_text(dump_xml(rows), encoding="utf-8")
    (out / "forum_posts.ndjson").write_text(
        "".join(json.dumps(p, sort_keys=True, separators=(",", ":")) + "\n" for p in forum), encoding="utf-8")
    (out / "registry.json").write_text(json.dumps({"language": "Rust", "units": KUS}, indent=1) + "\n", encoding="utf-8")

    docs = out / "docs"
    n = 0
    for ku, count in CHAPTERS.items():
        for i in range(count):
            book = "book" if n % 2 == 0 else "reference"
            path = docs / book / f"ch{n:02d}.html"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(chapter(rng, f"{ku} {i}", ku), encoding="utf-8")
            n += 1
    (docs / "book" / "title-page.html").write_text(chapter(rng, "Title page", None), encoding="utf-8")
    (docs / "book" / "print.html").write_text(chapter(rng, "All chapters", "Macros"), encoding="utf-8")

    (out / "config.toml").write_text(
        'out = "out"\n\n'
        "[inputs]\n"
        'dump = "Posts.xml"\nforum_posts = "forum_posts.ndjson"\ndocs_root = "docs"\nregistry = "registry.json"\n\n'
        "[tags]\n"
        'seeds = ["rust"]\ninclude = ["struct"]\nexclude = ["rust-rocket"]\ntet = 0.5\ntst = 0.01\n\n'
        "[preprocess]\nmin_df = 2\n\n"
        "[train]\nanchor_strength = 10\nseed = 42\n\n"
        '[alignment]\nranking_metric = "frequency"\n\n'
        "[stats]\nalpha = 0.05\n",
        encoding="utf-8",
    )


if __name__ == "__main__":
    main()
