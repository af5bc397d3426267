"""Knowledge-unit registry: named KUs, their category and anchor phrases.

The registry is data. Units are stored in a JSON or TOML file whose order is
the canonical topic order of the model (topic ``j`` is ``units[j]``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

CATEGORIES = (
    "Data types",
    "Development tooling",
    "Language features",
    "Programming niche",
)


class RegistryError(ValueError):
    """Base class for registry validation failures."""

    def __init__(self, message: str, unit: str | None = None):
        super().__init__(message)
        self.unit = unit


class RegistryParseError(RegistryError):
    pass


class EmptyRegistryError(RegistryError):
    pass


class DuplicateUnitError(RegistryError):
    pass


class DuplicateAnchorSetError(RegistryError):
    pass


class EmptyAnchorsError(RegistryError):
    pass


class UnknownCategoryError(RegistryError):
    pass


@dataclass(frozen=True)
class KnowledgeUnit:
    name: str
    category: str
    anchors: tuple[str, ...]


@dataclass(frozen=True)
class KURegistry:
    units: tuple[KnowledgeUnit, ...]
    language: str = ""

    def __len__(self) -> int:
        return len(self.units)

    def __iter__(self):
        return iter(self.units)

    @property
    def names(self) -> list[str]:
        return [u.name for u in self.units]

    def index(self, name: str) -> int:
        for j, unit in enumerate(self.units):
            if unit.name == name:
                return j
        raise KeyError(name)

    def anchor_lexicon(self) -> set[str]:
        """All anchor phrases of the registry, lowercased."""
        return {a for u in self.units for a in u.anchors}


def underscore_form(phrase: str) -> str:
    """Lowercase ``phrase`` and join its words with underscores.

    >>> underscore_form("primitive type")
    'primitive_type'
    """
    return "_".join(phrase.lower().split())


def _read_document(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            return tomllib.loads(text)
        return json.loads(text)
    except ValueError as exc:  # JSONDecodeError and TOMLDecodeError subclass it
        raise RegistryParseError(f"cannot parse registry {path}: {exc}") from exc


def registry_from_dict(doc: dict) -> KURegistry:
    """Validate a parsed registry document and build the registry."""
    if not isinstance(doc, dict) or not isinstance(doc.get("units", []), list):
        raise RegistryParseError("registry must be a mapping with a 'units' array")
    raw_units = doc.get("units") or []
    if not raw_units:
        raise EmptyRegistryError("empty registry")

    units: list[KnowledgeUnit] = []
    seen_names: set[str] = set()
    seen_anchor_sets: dict[frozenset, str] = {}
    for raw in raw_units:
        if not isinstance(raw, dict) or "name" not in raw:
            raise RegistryParseError(f"unit entry without a name: {raw!r}")
        name = str(raw["name"])
        if name in seen_names:
            raise DuplicateUnitError(f"duplicate unit name {name!r}", unit=name)
        category = raw.get("category")
        if category not in CATEGORIES:
            raise UnknownCategoryError(
                f"unit {name!r} has unknown category {category!r}", unit=name
            )
        anchors = raw.get("anchors") or []
        if not isinstance(anchors, list) or not anchors:
            raise EmptyAnchorsError(f"unit {name!r} has no anchors", unit=name)
        cleaned = []
        for anchor in anchors:
            phrase = " ".join(str(anchor).split()).lower()
            if not phrase:
                raise EmptyAnchorsError(f"unit {name!r} has an empty anchor", unit=name)
            cleaned.append(phrase)
        key = frozenset(cleaned)
        if key in seen_anchor_sets:
            raise DuplicateAnchorSetError(
                f"unit {name!r} repeats the anchor set of {seen_anchor_sets[key]!r}",
                unit=name,
            )
        seen_anchor_sets[key] = name
        seen_names.add(name)
        units.append(KnowledgeUnit(name=name, category=category, anchors=tuple(cleaned)))
    return KURegistry(units=tuple(units), language=str(doc.get("language", "")))


def load_registry(path: str | Path) -> KURegistry:
    path = Path(path)
    if not path.is_file():
        raise RegistryParseError(f"registry file not found: {path}")
    return registry_from_dict(_read_document(path))


def registry_to_dict(registry: KURegistry) -> dict:
    return {
        "language": registry.language,
        "units": [
            {"name": u.name, "category": u.category, "anchors": list(u.anchors)}
            for u in registry.units
        ],
    }


def write_registry(registry: KURegistry, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(registry_to_dict(registry), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def bundled_registry_path() -> Path:
    return Path(str(resources.files("docalign") / "data" / "rust_kus.json"))


def load_bundled_registry() -> KURegistry:
    """The 47-unit Rust registry shipped with the package."""
    return load_registry(bundled_registry_path())


@dataclass
class CoverageReport:
    missing: dict[str, list[str]] = field(default_factory=dict)
    coverage: float = 0.0
    n_anchors: int = 0
    n_present: int = 0


def validate_anchors(
    registry: KURegistry,
    vocabulary: Iterable[str],
    to_token=underscore_form,
) -> CoverageReport:
    """Report which anchor tokens are absent from ``vocabulary``.

    ``to_token`` maps an anchor phrase to the token form it takes in the
    corpus; the default is plain underscoring.
    """
    vocab = set(vocabulary)
    report = CoverageReport()
    tokens_seen: set[str] = set()
    present: set[str] = set()
    for unit in registry.units:
        absent = []
        for phrase in unit.anchors:
            token = to_token(phrase)
            if token is None:
                continue
            tokens_seen.add(token)
            if token in vocab:
                present.add(token)
            elif token not in absent:
                absent.append(token)
        if absent:
            report.missing[unit.name] = absent
    report.n_anchors = len(tokens_seen)
    report.n_present = len(present)
    report.coverage = report.n_present / report.n_anchors if report.n_anchors else 0.0
    return report
