"""Paragraph text extraction from an HTML documentation tree (mdBook output)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable

from .records import CorpusDocument

log = logging.getLogger(__name__)

# mdBook aggregate/auxiliary pages; not chapters
DEFAULT_EXCLUDE = ("print.html", "toc.html", "404.html")

# start tags that implicitly close an open <p>
_CLOSES_P = frozenset(
    "address article aside blockquote details div dl fieldset figcaption figure footer "
    "form h1 h2 h3 h4 h5 h6 header hgroup hr main menu nav ol p pre section table ul".split()
)
_SKIP = frozenset(("script", "style", "template"))


class DocExtractionError(OSError):
    def __init__(self, path, cause):
        super().__init__(f"cannot read {path}: {cause}")
        self.path = path


class _ParagraphCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.paragraphs: list[str] = []
        self._buf: list[str] | None = None
        self._skip_depth = 0

    def _close(self):
        if self._buf is not None:
            text = " ".join("".join(self._buf).split())
            if text:
                self.paragraphs.append(text)
            self._buf = None

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP:
            self._skip_depth += 1
        elif tag in _CLOSES_P:
            self._close()
            if tag == "p":
                self._buf = []
        elif tag == "br" and self._buf is not None:
            self._buf.append(" ")

    def handle_endtag(self, tag):
        if tag in _SKIP:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag == "p" or tag in _CLOSES_P or tag in ("body", "html"):
            self._close()

    def handle_data(self, data):
        if self._buf is not None and not self._skip_depth:
            self._buf.append(data)

    def close(self):
        super().close()
        self._close()


def paragraph_text(html: str) -> str:
    """Text of every ``<p>`` element, in document order, space-joined."""
    collector = _ParagraphCollector()
    collector.feed(html)
    collector.close()
    return " ".join(collector.paragraphs)


@dataclass
class ExtractionResult:
    documents: list[CorpusDocument] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    @property
    def n_scanned(self) -> int:
        return len(self.documents) + len(self.skipped)

    def __iter__(self):
        return iter(self.documents)

    def __len__(self) -> int:
        return len(self.documents)


def extract_doc_chapters(root: str | Path, exclude: Iterable[str] = DEFAULT_EXCLUDE) -> ExtractionResult:
    """One :class:`CorpusDocument` per HTML file under ``root``.

    The book is the file's top-level directory below ``root``. Files without
    paragraph text are skipped and listed in ``skipped``.
    """
    root = Path(root)
    if not root.is_dir():
        raise DocExtractionError(root, "not a directory")
    excluded = set(exclude)
    result = ExtractionResult()
    files = sorted(p for p in root.rglob("*") if p.suffix.lower() in (".html", ".htm") and p.is_file())
    for path in files:
        if path.name in excluded:
            continue
        rel = path.relative_to(root).as_posix()
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise DocExtractionError(path, exc) from exc
        text = paragraph_text(raw.decode("utf-8", errors="replace"))
        if not text:
            result.skipped.append(rel)
            continue
        parts = rel.split("/")
        book = parts[0] if len(parts) > 1 else root.name
        result.documents.append(CorpusDocument(book=book, chapter_path=rel, text=text))
    if result.skipped:
        log.info("skipped %d chapters without paragraph text", len(result.skipped))
    return result
