"""Rank-segment alignment of knowledge units between the concrete and documentation models."""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .io import write_table
from .registry import CATEGORIES, KURegistry

log = logging.getLogger(__name__)

HIGH, MID, LOW = "high", "mid", "low"
ABSENT, DIVERGENT, CONVERGENT, UNCLASSIFIED = "absent", "divergent", "convergent", "unclassified"
CLASSES = (ABSENT, DIVERGENT, CONVERGENT, UNCLASSIFIED)


@dataclass(frozen=True)
class CutoffConfig:
    concrete_high: float = 50.0
    concrete_low: float = 25.0
    documentation_high: float = 75.0
    documentation_low: float = 50.0

    def __post_init__(self):
        for name in ("concrete_high", "concrete_low", "documentation_high", "documentation_low"):
            value = getattr(self, name)
            if not 0.0 < value < 100.0:
                raise ValueError(f"{name} must lie in (0, 100), got {value}")
        if self.concrete_high < self.concrete_low:
            raise ValueError("concrete_high must be >= concrete_low")
        if self.documentation_high < self.documentation_low:
            raise ValueError("documentation_high must be >= documentation_low")


def nearest_rank_percentile(values, pct: float) -> float:
    """The ceil(pct/100 * n)-th smallest value (at least the first)."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("percentile of an empty sample")
    k = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[k - 1]


def _defined(values: Mapping[str, float | None]) -> dict[str, float]:
    return {k: v for k, v in values.items() if v is not None}


def segment(values: Mapping[str, float | None], high_pct: float, low_pct: float) -> dict[str, str]:
    """Split KUs into high/mid/low by strict comparison with two percentiles.

    KUs with undefined values are left out of the result. Values equal to a
    cutoff fall to mid.
    """
    defined = _defined(values)
    if len(defined) < 3:
        raise ValueError(f"segmenting needs at least 3 defined values, got {len(defined)}")
    if high_pct < low_pct:
        raise ValueError("high percentile must be >= low percentile")
    if len(set(defined.values())) == 1:
        log.warning("all %d metric values are equal; every KU is mid", len(defined))
    hi = nearest_rank_percentile(defined.values(), high_pct)
    lo = nearest_rank_percentile(defined.values(), low_pct)
    return {k: HIGH if v > hi else LOW if v < lo else MID for k, v in defined.items()}


def classify(concrete_seg: str, documentation_seg: str) -> str:
    if concrete_seg == LOW and documentation_seg == LOW:
        return ABSENT
    if concrete_seg == HIGH and documentation_seg == LOW:
        return DIVERGENT
    if concrete_seg == HIGH and documentation_seg == HIGH:
        return CONVERGENT
    return UNCLASSIFIED


def rank_descending(values: Mapping[str, float | None]) -> dict[str, int]:
    """1-based ranks, largest value first; ties share the smallest rank."""
    defined = _defined(values)
    ordered = sorted(defined.values(), reverse=True)
    first = {}
    for i, v in enumerate(ordered, start=1):
        first.setdefault(v, i)
    return {k: first[v] for k, v in defined.items()}


@dataclass
class Alignment:
    metric: str
    concrete_segments: dict[str, str]
    documentation_segments: dict[str, str]
    classes: dict[str, str]
    concrete_rank: dict[str, int]
    documentation_rank: dict[str, int]
    excluded: list[str] = field(default_factory=list)

    def members(self, cls: str) -> list[str]:
        return [k for k, c in self.classes.items() if c == cls]


def align(
    concrete_values: Mapping[str, float | None],
    documentation_values: Mapping[str, float | None],
    cutoffs: CutoffConfig = CutoffConfig(),
    metric: str = "frequency",
) -> Alignment:
    """Segment both models and classify every KU defined in both."""
    names = [k for k in concrete_values if k in documentation_values]
    both = [k for k in names if concrete_values[k] is not None and documentation_values[k] is not None]
    excluded = [k for k in names if k not in both]
    conc = {k: concrete_values[k] for k in both}
    docs = {k: documentation_values[k] for k in both}
    cseg = segment(conc, cutoffs.concrete_high, cutoffs.concrete_low)
    dseg = segment(docs, cutoffs.documentation_high, cutoffs.documentation_low)
    return Alignment(
        metric=metric,
        concrete_segments=cseg,
        documentation_segments=dseg,
        classes={k: classify(cseg[k], dseg[k]) for k in both},
        concrete_rank=rank_descending(conc),
        documentation_rank=rank_descending(docs),
        excluded=excluded,
    )


def _round_pct(count: int, total: int) -> float:
    return round(100.0 * count / total, 1)


def category_crosstab(
    classes: Mapping[str, str], registry: KURegistry
) -> tuple[dict[str, dict[str, float]], dict[str, dict[str, float]]]:
    """Percentages of categories within each class, and of classes within each category.

    Only classes (resp. categories) with at least one KU get a row; every row
    lists all categories (resp. classes). Values are rounded to one decimal.
    """
    category = {u.name: u.category for u in registry.units}
    pairs = Counter((cls, category[name]) for name, cls in classes.items())
    by_class_total = Counter(classes.values())
    by_cat_total = Counter(category[name] for name in classes)
    within_class = {
        cls: {cat: _round_pct(pairs[(cls, cat)], by_class_total[cls]) for cat in CATEGORIES}
        for cls in CLASSES
        if by_class_total[cls]
    }
    within_category = {
        cat: {cls: _round_pct(pairs[(cls, cat)], by_cat_total[cat]) for cls in CLASSES}
        for cat in CATEGORIES
        if by_cat_total[cat]
    }
    return within_class, within_category


@dataclass(frozen=True)
class SlopeRecord:
    ku: str
    concrete_rank: int
    documentation_rank: int
    alignment: str
    rank_distance: int


def slope_data(
    concrete_rank: Mapping[str, int],
    documentation_rank: Mapping[str, int],
    classes: Mapping[str, str],
) -> list[SlopeRecord]:
    """Rank pairs per KU, grouped by class, largest rank distance first."""
    records = [
        SlopeRecord(k, concrete_rank[k], documentation_rank[k], cls, abs(concrete_rank[k] - documentation_rank[k]))
        for k, cls in classes.items()
    ]
    order = {c: i for i, c in enumerate(CLASSES)}
    return sorted(records, key=lambda r: (order[r.alignment], -r.rank_distance, r.ku))


CLASS_COLUMNS = (
    "ku", "category", "metric", "concrete_value", "documentation_value",
    "concrete_segment", "documentation_segment", "alignment",
)


def write_alignment(
    result: Alignment,
    concrete_values: Mapping[str, float | None],
    documentation_values: Mapping[str, float | None],
    registry: KURegistry,
    out_dir: str | Path,
) -> None:
    """Classification table plus both cross-tabs as delimited files."""
    out_dir = Path(out_dir)
    category = {u.name: u.category for u in registry.units}
    rows = []
    for name in registry.names:
        if name not in concrete_values:
            continue
        rows.append([
            name, category[name], result.metric, concrete_values[name], documentation_values.get(name),
            result.concrete_segments.get(name), result.documentation_segments.get(name),
            result.classes.get(name),
        ])
    write_table(out_dir / "alignment.csv", CLASS_COLUMNS, rows)
    within_class, within_category = category_crosstab(result.classes, registry)
    write_table(
        out_dir / "crosstab_by_class.csv",
        ("alignment", *CATEGORIES),
        [[cls, *(row[c] for c in CATEGORIES)] for cls, row in within_class.items()],
    )
    write_table(
        out_dir / "crosstab_by_category.csv",
        ("category", *CLASSES),
        [[cat, *(row[c] for c in CLASSES)] for cat, row in within_category.items()],
    )
