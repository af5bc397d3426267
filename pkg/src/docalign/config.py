"""Run configuration: one JSON or TOML file, paths relative to the file itself.

Example (TOML)::

    out = "report"

    [inputs]
    dump = "Posts.xml"
    forum_posts = "forum.ndjson"   # or forum_url + forum_category for a live crawl
    docs_root = "docs"
    registry = "registry.json"     # omitted: bundled registry

    [tags]
    seeds = ["rust"]
    include = ["serde"]
    exclude = ["generics"]
    tet = 0.5
    tst = 0.01

    [preprocess]
    min_df = 2

    [train]
    anchor_strength = 10
    seed = 42

    [alignment]
    ranking_metric = "frequency"
    concrete_high = 50
    concrete_low = 25

    [stats]
    alpha = 0.05
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .alignment import CutoffConfig

RANKING_METRICS = ("frequency", "popularity")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))
        self.problems = problems


@dataclass(frozen=True)
class RunConfig:
    out_dir: Path
    dump: Path | None = None
    forum_url: str | None = None
    forum_category: str | None = None
    forum_posts: Path | None = None
    docs_root: Path | None = None
    registry: Path | None = None
    seed_tags: tuple[str, ...] = ()
    seed_prefixes: tuple[str, ...] = ()
    tags_include: tuple[str, ...] = ()
    tags_exclude: tuple[str, ...] = ()
    tet: float = 0.5
    tst: float = 0.01
    min_df: int = 2
    stoplist: Path | None = None
    lemma_table: Path | None = None
    n_topics: int | None = None
    anchor_strength: float = 10.0
    max_iter: int = 200
    tol: float = 1e-5
    seed: int = 42
    cutoffs: CutoffConfig = field(default_factory=CutoffConfig)
    ranking_metric: str = "frequency"
    alpha: float = 0.05

    def with_overrides(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self


def _read(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            return tomllib.loads(text)
        return json.loads(text)
    except ValueError as exc:
        raise ConfigError([f"cannot parse {path}: {exc}"]) from exc


_SECTIONS = {
    "inputs": {"dump", "forum_url", "forum_category", "forum_posts", "docs_root", "registry"},
    "tags": {"seeds", "seed_prefixes", "include", "exclude", "tet", "tst"},
    "preprocess": {"min_df", "stoplist", "lemma_table"},
    "train": {"n_topics", "anchor_strength", "max_iter", "tol", "seed"},
    "alignment": {"ranking_metric", "concrete_high", "concrete_low", "documentation_high", "documentation_low"},
    "stats": {"alpha"},
}


def load_config(path: str | Path, out_dir: str | Path | None = None) -> RunConfig:
    """Parse and validate a run configuration; every problem is reported at once."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file {path} does not exist"])
    doc = _read(path)
    base = path.resolve().parent
    problems: list[str] = []

    for key in doc:
        if key not in _SECTIONS and key != "out":
            problems.append(f"unknown key {key!r}")
    for section, allowed in _SECTIONS.items():
        value = doc.get(section, {})
        if not isinstance(value, dict):
            problems.append(f"[{section}] must be a table")
            doc[section] = {}
            continue
        for key in value:
            if key not in allowed:
                problems.append(f"unknown key {section}.{key}")

    inputs, tags, prep = doc.get("inputs", {}), doc.get("tags", {}), doc.get("preprocess", {})
    train, align, st = doc.get("train", {}), doc.get("alignment", {}), doc.get("stats", {})

    def local(section: str, key: str, value, kind: str = "file") -> Path | None:
        if value is None:
            return None
        p = (base / str(value)).resolve()
        ok = p.is_dir() if kind == "dir" else p.is_file()
        if not ok:
            problems.append(f"{section}.{key}: {kind} {p} does not exist")
        return p

    def number(section: str, key: str, value, default, cast=float, check=None, rule=""):
        if value is None:
            return default
        try:
            out = cast(value)
        except (TypeError, ValueError):
            problems.append(f"{section}.{key} must be a number, got {value!r}")
            return default
        if isinstance(value, bool) or (cast is int and out != value):
            problems.append(f"{section}.{key} must be an integer, got {value!r}")
            return default
        if check is not None and not check(out):
            problems.append(f"{section}.{key} {rule}, got {value!r}")
        return out

    def strings(section: str, key: str, value) -> tuple[str, ...]:
        if value is None:
            return ()
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            problems.append(f"{section}.{key} must be a list of strings")
            return ()
        return tuple(value)

    dump = local("inputs", "dump", inputs.get("dump"))
    forum_posts = local("inputs", "forum_posts", inputs.get("forum_posts"))
    docs_root = local("inputs", "docs_root", inputs.get("docs_root"), kind="dir")
    registry = local("inputs", "registry", inputs.get("registry"))
    forum_url = inputs.get("forum_url")
    forum_category = inputs.get("forum_category")
    if forum_url and not forum_category:
        problems.append("inputs.forum_category is required with inputs.forum_url")
    if forum_url and forum_posts:
        problems.append("inputs.forum_url and inputs.forum_posts are mutually exclusive")
    if dump is None and forum_posts is None and not forum_url:
        problems.append("inputs: need at least one of dump, forum_posts, forum_url")
    if docs_root is None and "docs_root" not in inputs:
        problems.append("inputs.docs_root is required")

    seeds = strings("tags", "seeds", tags.get("seeds"))
    prefixes = strings("tags", "seed_prefixes", tags.get("seed_prefixes"))
    if dump is not None and not seeds and not prefixes:
        problems.append("tags.seeds or tags.seed_prefixes is required with inputs.dump")

    open_unit = lambda v: 0.0 < v < 1.0  # noqa: E731
    cutoff_args = {}
    for key in ("concrete_high", "concrete_low", "documentation_high", "documentation_low"):
        if key in align:
            cutoff_args[key] = number("alignment", key, align[key], None, check=lambda v: 0 < v < 100, rule="must lie in (0, 100)")
    cutoffs = CutoffConfig()
    try:
        cutoffs = CutoffConfig(**{k: v for k, v in cutoff_args.items() if v is not None})
    except ValueError as exc:
        problems.append(f"alignment: {exc}")
    ranking = align.get("ranking_metric", "frequency")
    if ranking not in RANKING_METRICS:
        problems.append(f"alignment.ranking_metric must be one of {RANKING_METRICS}, got {ranking!r}")

    out = out_dir if out_dir is not None else doc.get("out", "out")
    cfg = RunConfig(
        out_dir=(base / str(out)).resolve() if out_dir is None else Path(out_dir).resolve(),
        dump=dump,
        forum_url=forum_url,
        forum_category=forum_category,
        forum_posts=forum_posts,
        docs_root=docs_root,
        registry=registry,
        seed_tags=seeds,
        seed_prefixes=prefixes,
        tags_include=strings("tags", "include", tags.get("include")),
        tags_exclude=strings("tags", "exclude", tags.get("exclude")),
        tet=number("tags", "tet", tags.get("tet"), 0.5, check=open_unit, rule="must lie in (0, 1)"),
        tst=number("tags", "tst", tags.get("tst"), 0.01, check=open_unit, rule="must lie in (0, 1)"),
        min_df=number("preprocess", "min_df", prep.get("min_df"), 2, cast=int, check=lambda v: v >= 1, rule="must be >= 1"),
        stoplist=local("preprocess", "stoplist", prep.get("stoplist")),
        lemma_table=local("preprocess", "lemma_table", prep.get("lemma_table")),
        n_topics=number("train", "n_topics", train.get("n_topics"), None, cast=int, check=lambda v: v >= 1, rule="must be >= 1"),
        anchor_strength=number("train", "anchor_strength", train.get("anchor_strength"), 10.0, check=lambda v: v >= 1, rule="must be >= 1"),
        max_iter=number("train", "max_iter", train.get("max_iter"), 200, cast=int, check=lambda v: v >= 1, rule="must be >= 1"),
        tol=number("train", "tol", train.get("tol"), 1e-5, check=lambda v: v > 0, rule="must be positive"),
        seed=number("train", "seed", train.get("seed"), 42, cast=int),
        cutoffs=cutoffs,
        ranking_metric=ranking,
        alpha=number("stats", "alpha", st.get("alpha"), 0.05, check=open_unit, rule="must lie in (0, 1)"),
    )
    if problems:
        raise ConfigError(problems)
    return cfg
