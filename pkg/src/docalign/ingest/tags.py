"""Tag-set expansion by exclusivity (TET) and significance (TST) thresholds."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TagStats:
    tag: str
    n_target_posts: int
    n_total_posts: int

    def __post_init__(self):
        if self.n_target_posts > self.n_total_posts:
            raise ValueError(f"tag {self.tag!r}: target posts exceed total posts")

    def exclusivity(self) -> float:
        return self.n_target_posts / self.n_total_posts

    def significance(self, reference_count: int) -> float:
        return self.n_target_posts / reference_count


def expand_tags(
    seed_tags: Iterable[str],
    tag_stats: Iterable[TagStats],
    tet_min: float = 0.5,
    tst_min: float = 0.01,
    reference_count: int = 1,
) -> frozenset[str]:
    """Seed tags plus every tag with TET > ``tet_min`` and TST > ``tst_min``.

    Both comparisons are strict. ``reference_count`` is the post count of
    the most popular seed tag. Tags with no posts at all are skipped and
    logged.
    """
    if reference_count <= 0:
        raise ValueError("reference_count must be positive")
    for name, value in (("tet_min", tet_min), ("tst_min", tst_min)):
        if not 0.0 < value < 1.0:
            raise ValueError(f"{name} must lie in (0, 1), got {value}")

    kept = set(seed_tags)
    zero = []
    for stats in tag_stats:
        if stats.n_total_posts == 0:
            zero.append(stats.tag)
            continue
        if stats.exclusivity() > tet_min and stats.significance(reference_count) > tst_min:
            kept.add(stats.tag)
    if zero:
        log.warning("excluded %d tags with no posts: %s", len(zero), ", ".join(sorted(zero)))
    return frozenset(kept)


def final_tag_set(
    expanded: Iterable[str],
    include: Iterable[str] = (),
    exclude: Iterable[str] = (),
) -> frozenset[str]:
    """Apply the manually curated include/exclude lists."""
    return frozenset((set(expanded) | set(include)) - set(exclude))
