"""Stage orchestration. Every stage reads the files of the previous one and
writes its own under the output directory, atomically and deterministically.

Layout::

    corpus/      posts.ndjson, documents.ndjson, tag_stats.csv, summary.json
    tokens/      posts.ndjson, documents.ndjson, vocabulary.txt, anchors.json
    model/       model.npz, concrete_doc_topic.csv, topic_tc.csv, top_words.csv,
                 documentation_doc_topic.csv
    metrics/     <model>_ku.csv, <model>_pairs.csv, kus_per_document.csv
    alignment/   alignment.csv, crosstab_by_class.csv, crosstab_by_category.csv, slope.csv
    stats/       skewness.csv, spearman.csv, kus_per_document_test.csv, awareness_battery.csv
    figures/     prevalence.csv, topic_tc.csv, kus_per_document.csv, awareness.csv, slope.csv
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from . import alignment as al
from . import metrics as mt
from . import stats as st
from .config import RunConfig
from .corex import TrainConfig, load_model, predict, save_model, top_words, topic_tc_distribution, train
from .ingest.discourse import fetch_discourse
from .ingest.docs import extract_doc_chapters
from .ingest.records import (
    dedupe_posts,
    read_documents,
    read_posts,
    read_records,
    write_documents,
    write_posts,
    write_records,
)
from .ingest.stackexchange import collect_tag_stats, parse_stackexchange_dump
from .ingest.tags import expand_tags, final_tag_set
from .io import atomic_write_text, read_table, write_table
from .preprocess import (
    Preprocessor,
    TokenizedDocument,
    Vocabulary,
    assemble_post_text,
    build_vocabulary,
    load_lemma_table,
    load_stoplist,
    vectorize,
)
from .registry import KURegistry, load_bundled_registry, load_registry, validate_anchors

log = logging.getLogger(__name__)

STAGES = ("ingest", "preprocess", "train", "predict", "metrics", "align", "stats")
TOP_K = 20


class MissingArtifactError(RuntimeError):
    def __init__(self, stage: str, path: Path):
        super().__init__(f"{path} not found; run {stage} first")
        self.stage = stage
        self.path = path


def _need(path: Path, stage: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(stage, path)
    return path


def _dump_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _registry(cfg: RunConfig) -> KURegistry:
    return load_registry(cfg.registry) if cfg.registry else load_bundled_registry()


def _preprocessor(cfg: RunConfig, registry: KURegistry) -> Preprocessor:
    return Preprocessor(
        registry.anchor_lexicon(),
        stopwords=load_stoplist(cfg.stoplist) if cfg.stoplist else None,
        lemmas=load_lemma_table(cfg.lemma_table) if cfg.lemma_table else None,
    )


# -- ingest -----------------------------------------------------------------

def run_ingest(cfg: RunConfig) -> None:
    out = cfg.out_dir / "corpus"
    posts = []
    summary: dict = {}
    tag_rows = []
    if cfg.dump:
        stats, reference, seeds = collect_tag_stats(cfg.dump, cfg.seed_tags, cfg.seed_prefixes)
        if reference == 0:
            raise ValueError("no question in the dump carries a seed tag")
        expanded = expand_tags(seeds | set(cfg.seed_tags), stats, cfg.tet, cfg.tst, reference)
        selected = final_tag_set(expanded, cfg.tags_include, cfg.tags_exclude)
        for s in stats:
            tag_rows.append([
                s.tag, s.n_target_posts, s.n_total_posts,
                s.exclusivity() if s.n_total_posts else None, s.significance(reference),
                s.tag in expanded, s.tag in selected,
            ])
        parsed = parse_stackexchange_dump(cfg.dump, keep=lambda tags: any(t in selected for t in tags))
        posts.extend(parsed.posts)
        summary["stack_exchange"] = {
            "reference_count": reference,
            "selected_tags": sorted(selected),
            "questions_seen": parsed.n_questions_seen,
            "posts": len(parsed.posts),
            "answers": parsed.n_answers,
            "orphan_answers": parsed.orphan_answers,
        }
    if cfg.forum_url or cfg.forum_posts:
        if cfg.forum_posts:
            forum = read_posts(cfg.forum_posts)
        else:
            forum = fetch_discourse(cfg.forum_url, cfg.forum_category, cursor_path=out / "forum_cursor.json")
        posts.extend(forum)
        summary["discourse"] = {"posts": len(forum), "answers": sum(p.n_answers for p in forum)}
    posts = dedupe_posts(posts)

    extracted = extract_doc_chapters(cfg.docs_root)
    summary["documentation"] = {
        "documents": len(extracted.documents),
        "scanned": extracted.n_scanned,
        "skipped": extracted.skipped,
    }
    summary["posts"] = len(posts)
    summary["answers"] = sum(p.n_answers for p in posts)

    write_posts(out / "posts.ndjson", posts)
    write_documents(out / "documents.ndjson", extracted.documents)
    write_table(
        out / "tag_stats.csv",
        ("tag", "n_target_posts", "n_total_posts", "exclusivity", "significance", "expanded", "selected"),
        tag_rows,
    )
    _dump_json(out / "summary.json", summary)
    log.info("ingest: %d posts, %d documents", len(posts), len(extracted.documents))


# -- preprocess ---------------------------------------------------------------

def _write_tokens(path: Path, docs: list[TokenizedDocument]) -> None:
    write_records(path, ({"doc_id": d.doc_id, "tokens": list(d.tokens)} for d in docs))


def _read_tokens(path: Path) -> list[TokenizedDocument]:
    return [TokenizedDocument(r["doc_id"], tuple(r["tokens"])) for r in read_records(path)]


def run_preprocess(cfg: RunConfig) -> None:
    corpus = cfg.out_dir / "corpus"
    posts = read_posts(_need(corpus / "posts.ndjson", "ingest"))
    docs = read_documents(_need(corpus / "documents.ndjson", "ingest"))
    registry = _registry(cfg)
    prep = _preprocessor(cfg, registry)

    post_tokens = [TokenizedDocument(p.key, tuple(prep.clean(assemble_post_text(p)))) for p in posts]
    doc_tokens = [TokenizedDocument(d.key, tuple(prep.clean(d.text))) for d in docs]
    vocab = build_vocabulary(post_tokens, cfg.min_df)

    coverage = validate_anchors(registry, vocab, to_token=prep.anchor_token)
    anchors = {}
    for unit in registry.units:
        tokens = []
        for phrase in unit.anchors:
            tok = prep.anchor_token(phrase)
            if tok is not None and tok in vocab and tok not in tokens:
                tokens.append(tok)
        anchors[unit.name] = tokens
    for name, missing in coverage.missing.items():
        log.warning("KU %r: anchors not in vocabulary: %s", name, ", ".join(missing))

    out = cfg.out_dir / "tokens"
    _write_tokens(out / "posts.ndjson", post_tokens)
    _write_tokens(out / "documents.ndjson", doc_tokens)
    atomic_write_text(out / "vocabulary.txt", "".join(w + "\n" for w in vocab))
    _dump_json(out / "anchors.json", {
        "units": [{"name": n, "tokens": anchors[n]} for n in registry.names],
        "missing": coverage.missing,
        "coverage": coverage.coverage,
        "vocabulary_sha256": vocab.digest(),
    })


def _load_vocab(out: Path) -> Vocabulary:
    path = _need(out / "tokens" / "vocabulary.txt", "preprocess")
    return Vocabulary(path.read_text(encoding="utf-8").split("\n")[:-1])


# -- train / predict ----------------------------------------------------------

def _topic_names(registry: KURegistry, n_topics: int) -> list[str]:
    names = list(registry.names)
    return names + [f"unanchored_{j}" for j in range(len(names), n_topics)]


def _write_doc_topic(path: Path, doc_ids, probs: np.ndarray) -> None:
    header = ["doc_id"] + [f"topic_{j}" for j in range(probs.shape[1])]
    write_table(path, header, ([doc_id, *row] for doc_id, row in zip(doc_ids, probs.tolist())))


def _read_doc_topic(path: Path) -> tuple[list[str], np.ndarray]:
    rows = read_table(path)
    if not rows:
        return [], np.zeros((0, 0))
    cols = [c for c in rows[0] if c != "doc_id"]
    return [r["doc_id"] for r in rows], np.array([[float(r[c]) for c in cols] for r in rows])


def run_train(cfg: RunConfig) -> None:
    out = cfg.out_dir
    vocab = _load_vocab(out)
    tokens = _read_tokens(_need(out / "tokens" / "posts.ndjson", "preprocess"))
    anchor_doc = json.loads(_need(out / "tokens" / "anchors.json", "preprocess").read_text(encoding="utf-8"))
    registry = _registry(cfg)
    if [u["name"] for u in anchor_doc["units"]] != registry.names:
        raise MissingArtifactError("preprocess", out / "tokens" / "anchors.json")
    n_topics = cfg.n_topics or len(registry)
    if n_topics < len(registry):
        raise ValueError(f"n_topics {n_topics} is smaller than the {len(registry)} registry units")
    anchors = {j: u["tokens"] for j, u in enumerate(anchor_doc["units"]) if u["tokens"]}

    matrix = vectorize(tokens, vocab)
    tcfg = TrainConfig(n_topics, cfg.anchor_strength, cfg.max_iter, cfg.tol, cfg.seed)
    model = train(matrix, anchors, tcfg)
    if not model.converged:
        log.warning("training stopped at max_iter=%d before converging", cfg.max_iter)

    mdir = out / "model"
    save_model(model, mdir / "model.npz")
    _write_doc_topic(mdir / "concrete_doc_topic.csv", matrix.doc_ids, model.doc_topic_prob)
    names = _topic_names(registry, n_topics)
    values, _ = topic_tc_distribution(model)
    write_table(mdir / "topic_tc.csv", ("topic", "ku", "topic_tc"), [[j, names[j], v] for j, v in enumerate(values)])
    write_table(
        mdir / "top_words.csv",
        ("topic", "ku", "rank", "word"),
        [[j, names[j], r + 1, w] for j in range(n_topics) for r, w in enumerate(top_words(model, j, TOP_K))],
    )
    _dump_json(mdir / "training.json", {
        "iterations_run": model.iterations_run,
        "converged": model.converged,
        "total_tc": model.total_tc,
        "tc_history": model.tc_history,
    })


def run_predict(cfg: RunConfig) -> None:
    out = cfg.out_dir
    model = load_model(_need(out / "model" / "model.npz", "train"))
    tokens = _read_tokens(_need(out / "tokens" / "documents.ndjson", "preprocess"))
    matrix = vectorize(tokens, model.vocabulary)
    _write_doc_topic(out / "model" / "documentation_doc_topic.csv", matrix.doc_ids, predict(model, matrix))


# -- metrics --------------------------------------------------------------------

def _tables(cfg: RunConfig):
    out = cfg.out_dir
    _need(out / "model" / "model.npz", "train")
    conc_ids, conc = _read_doc_topic(_need(out / "model" / "concrete_doc_topic.csv", "train"))
    doc_ids, docs = _read_doc_topic(_need(out / "model" / "documentation_doc_topic.csv", "predict"))
    posts = {p.key: p for p in read_posts(_need(out / "corpus" / "posts.ndjson", "ingest"))}
    aligned = [posts[k] for k in conc_ids]
    names = _topic_names(_registry(cfg), conc.shape[1])
    if docs.size == 0:
        docs = np.zeros((0, conc.shape[1]))
    return names, conc_ids, conc, aligned, doc_ids, docs


def run_metrics(cfg: RunConfig) -> None:
    names, conc_ids, conc, posts, doc_ids, docs = _tables(cfg)
    mdir = cfg.out_dir / "metrics"
    concrete = mt.compute_metric_table(conc, names, mt.CONCRETE, posts=posts)
    documentation = mt.compute_metric_table(docs, names, mt.DOCUMENTATION)
    mt.write_metric_table(concrete, mdir / "concrete_ku.csv", mdir / "concrete_pairs.csv")
    mt.write_metric_table(documentation, mdir / "documentation_ku.csv", mdir / "documentation_pairs.csv")
    for site in sorted({p.source for p in posts}):
        per_site = mt.compute_metric_table(conc, names, mt.CONCRETE, posts=posts, site=site)
        mt.write_metric_table(per_site, mdir / f"concrete_ku_{site}.csv", mdir / f"concrete_pairs_{site}.csv")
    rows = [[mt.CONCRETE, d, c] for d, c in zip(conc_ids, concrete.kus_per_doc.counts)]
    rows += [[mt.DOCUMENTATION, d, c] for d, c in zip(doc_ids, documentation.kus_per_doc.counts)]
    write_table(mdir / "kus_per_document.csv", ("model", "doc_id", "n_kus"), rows)


def _number(text: str) -> int | float | None:
    if text == "":
        return None
    return int(text) if text.lstrip("-").isdigit() else float(text)


def _read_ku_table(path: Path) -> dict[str, dict[str, float | None]]:
    out: dict[str, dict[str, float | None]] = {}
    for row in read_table(path):
        for key, value in row.items():
            if key in ("ku", "model", "awareness_mode"):
                continue
            out.setdefault(key, {})[row["ku"]] = _number(value)
    return out


# -- align ------------------------------------------------------------------------

def run_align(cfg: RunConfig) -> None:
    out = cfg.out_dir
    conc = _read_ku_table(_need(out / "metrics" / "concrete_ku.csv", "metrics"))
    docs = _read_ku_table(_need(out / "metrics" / "documentation_ku.csv", "metrics"))
    registry = _registry(cfg)
    metric = cfg.ranking_metric
    cvals = {k: conc[metric][k] for k in registry.names}
    dvals = {k: docs[metric][k] for k in registry.names}
    result = al.align(cvals, dvals, cfg.cutoffs, metric)
    adir = out / "alignment"
    al.write_alignment(result, cvals, dvals, registry, adir)
    slope = al.slope_data(result.concrete_rank, result.documentation_rank, result.classes)
    write_table(
        adir / "slope.csv",
        ("ku", "concrete_rank", "documentation_rank", "alignment", "rank_distance"),
        [[r.ku, r.concrete_rank, r.documentation_rank, r.alignment, r.rank_distance] for r in slope],
    )


# -- stats --------------------------------------------------------------------------

def _estimate_row(what: str, fn, *args):
    try:
        est = fn(*args)
    except ValueError as exc:
        return [what, None, None, None, None, str(exc)]
    return [what, est.value, est.label, est.p_value, est.significant, ""]


def run_stats(cfg: RunConfig) -> None:
    out = cfg.out_dir
    conc = _read_ku_table(_need(out / "metrics" / "concrete_ku.csv", "metrics"))
    docs = _read_ku_table(_need(out / "metrics" / "documentation_ku.csv", "metrics"))
    classes = {r["ku"]: r["alignment"] for r in read_table(_need(out / "alignment" / "alignment.csv", "align")) if r["alignment"]}
    names = _registry(cfg).names
    sdir = out / "stats"
    header = ("measure", "value", "label", "p_value", "significant", "note")

    def vec(table, metric):
        return [table[metric][k] for k in names]

    skew_rows = [
        _estimate_row(f"{model} {metric}", st.skewness_g1, vec(table, metric), cfg.alpha)
        for model, table in ((mt.CONCRETE, conc), (mt.DOCUMENTATION, docs))
        for metric in ("frequency", "popularity")
    ]
    write_table(sdir / "skewness.csv", header, skew_rows)
    pairs = [
        ("concrete frequency vs popularity", vec(conc, "frequency"), vec(conc, "popularity")),
        ("documentation frequency vs popularity", vec(docs, "frequency"), vec(docs, "popularity")),
        ("frequency concrete vs documentation", vec(conc, "frequency"), vec(docs, "frequency")),
        ("popularity concrete vs documentation", vec(conc, "popularity"), vec(docs, "popularity")),
    ]
    write_table(sdir / "spearman.csv", header, [_estimate_row(w, st.spearman, x, y, cfg.alpha) for w, x, y in pairs])

    counts = {mt.CONCRETE: [], mt.DOCUMENTATION: []}
    for row in read_table(_need(out / "metrics" / "kus_per_document.csv", "metrics")):
        counts[row["model"]].append(int(row["n_kus"]))
    kpd_rows = []
    if counts[mt.CONCRETE] and counts[mt.DOCUMENTATION]:
        a, b = counts[mt.CONCRETE], counts[mt.DOCUMENTATION]
        test = st.mann_whitney(a, b, st.A_GREATER, cfg.alpha)
        delta = st.cliffs_delta(a, b)
        kpd_rows.append([
            "concrete > documentation", float(np.median(a)), float(np.median(b)), test.value,
            test.method, test.p_value, test.significant, delta.value, delta.label,
        ])
    write_table(
        sdir / "kus_per_document_test.csv",
        ("comparison", "median_concrete", "median_documentation", "u", "method", "p_value", "significant", "delta", "delta_label"),
        kpd_rows,
    )
    awareness = {m: {k: conc[m][k] for k in names} for m in st.AWARENESS_METRICS if m in conc}
    battery = st.awareness_battery(awareness, classes, cfg.alpha, metrics=tuple(awareness)) if awareness else []
    st.write_battery(battery, sdir / "awareness_battery.csv")
    emit_figure_data(cfg)


# -- figure data --------------------------------------------------------------------

def emit_figure_data(cfg: RunConfig) -> None:
    """Plot-ready tables: prevalence, topic TC, KUs per document, awareness, slope."""
    out = cfg.out_dir
    fdir = out / "figures"
    registry = _registry(cfg)
    names = registry.names
    tables = {
        mt.CONCRETE: _read_ku_table(_need(out / "metrics" / "concrete_ku.csv", "metrics")),
        mt.DOCUMENTATION: _read_ku_table(_need(out / "metrics" / "documentation_ku.csv", "metrics")),
    }
    classes = {r["ku"]: r["alignment"] for r in read_table(_need(out / "alignment" / "alignment.csv", "align"))}

    rows = []
    for model, table in tables.items():
        for k in names:
            rows.append([k, model, int(table["frequency"][k]), int(table["popularity"][k])])
    write_table(fdir / "prevalence.csv", ("ku", "model", "frequency", "popularity"), rows)

    tc = read_table(_need(out / "model" / "topic_tc.csv", "train"))
    ordered = sorted(tc, key=lambda r: (-float(r["topic_tc"]), int(r["topic"])))
    write_table(
        fdir / "topic_tc.csv",
        ("rank", "topic", "ku", "topic_tc"),
        [[i + 1, int(r["topic"]), r["ku"], float(r["topic_tc"])] for i, r in enumerate(ordered)],
    )

    hist: dict[tuple[str, int], int] = {}
    for row in read_table(out / "metrics" / "kus_per_document.csv"):
        key = (row["model"], int(row["n_kus"]))
        hist[key] = hist.get(key, 0) + 1
    write_table(
        fdir / "kus_per_document.csv",
        ("model", "n_kus", "n_documents"),
        [[m, n, c] for (m, n), c in sorted(hist.items())],
    )

    rows = []
    for metric in st.AWARENESS_METRICS:
        values = tables[mt.CONCRETE].get(metric)
        if values is None:
            continue
        defined = [(k, values[k]) for k in names if values[k] is not None]
        for rank, (k, v) in enumerate(sorted(defined, key=lambda kv: (-kv[1], kv[0])), start=1):
            rows.append([metric, rank, k, v, classes.get(k, "")])
    write_table(fdir / "awareness.csv", ("metric", "rank", "ku", "value", "alignment"), rows)

    slope = read_table(_need(out / "alignment" / "slope.csv", "align"))
    write_table(
        fdir / "slope.csv",
        ("ku", "concrete_rank", "documentation_rank", "alignment", "rank_distance"),
        [[r["ku"], int(r["concrete_rank"]), int(r["documentation_rank"]), r["alignment"], int(r["rank_distance"])] for r in slope],
    )


RUNNERS = {
    "ingest": run_ingest,
    "preprocess": run_preprocess,
    "train": run_train,
    "predict": run_predict,
    "metrics": run_metrics,
    "align": run_align,
    "stats": run_stats,
}


def run(stage: str, cfg: RunConfig) -> None:
    if stage == "all":
        for name in STAGES:
            log.info("stage %s", name)
            RUNNERS[name](cfg)
        return
    if stage not in RUNNERS:
        raise ValueError(f"unknown stage {stage!r}; choose from {', '.join(STAGES + ('all',))}")
    RUNNERS[stage](cfg)
