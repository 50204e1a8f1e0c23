"""Class nomenclature and remapping tables.

The study legend has two levels: five broad land-cover classes (level 1)
and 19 arable crop-type classes (level 2) grouped into six crop groups.
Source nomenclatures (LUCAS survey codes, national parcel-declaration
schemes, reported-statistics codes) are remapped onto study codes through
plain-text mapping tables shipped with the package; users add their own
scheme files in the same format.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path


class LegendError(ValueError):
    """Unknown class code or malformed/inconsistent mapping table."""


@dataclass(frozen=True)
class StudyClass:
    code: int
    label: str
    level1: int
    group: int | None = None


_CLASSES = [
    StudyClass(100, "Artificial land", 100),
    StudyClass(200, "Arable land", 200),
    StudyClass(211, "Common wheat", 200, 210),
    StudyClass(212, "Durum wheat", 200, 210),
    StudyClass(213, "Barley", 200, 210),
    StudyClass(214, "Rye", 200, 210),
    StudyClass(215, "Oats", 200, 210),
    StudyClass(216, "Maize", 200, 210),
    StudyClass(217, "Rice", 200, 210),
    StudyClass(218, "Triticale", 200, 210),
    StudyClass(219, "Other cereals", 200, 210),
    StudyClass(221, "Potatoes", 200, 220),
    StudyClass(222, "Sugar beet", 200, 220),
    StudyClass(223, "Other root crops", 200, 220),
    StudyClass(230, "Other non-permanent industrial crops", 200, 230),
    StudyClass(231, "Sunflower", 200, 230),
    StudyClass(232, "Rape and turnip rape", 200, 230),
    StudyClass(233, "Soya", 200, 230),
    StudyClass(240, "Dry pulses, vegetables and flowers", 200, 240),
    StudyClass(250, "Other fodder crops", 200, 250),
    StudyClass(290, "Bare arable land", 200, 290),
    StudyClass(300, "Woodland and shrubland", 300),
    StudyClass(500, "Grassland", 500),
    StudyClass(600, "Bare land and lichens/moss", 600),
]

STUDY_CLASSES: dict[int, StudyClass] = {c.code: c for c in _CLASSES}
LEVEL1_CODES = (100, 200, 300, 500, 600)
ARABLE_CODES = tuple(c.code for c in _CLASSES if c.level1 == 200 and c.code != 200)
GROUP_CODES = (210, 220, 230, 240, 250, 290)
GROUP_LABELS = {
    210: "Cereals",
    220: "Root crops",
    230: "Non-permanent industrial crops",
    240: "Dry pulses, vegetables and flowers",
    250: "Fodder crops",
    290: "Bare arable land",
}


def study_class(code: int) -> StudyClass:
    try:
        return STUDY_CLASSES[code]
    except KeyError:
        raise LegendError(f"unknown study class code {code}") from None


def level1_of(code: int) -> int:
    """Level-1 parent; level-1 codes map to themselves."""
    return study_class(code).level1


def group_of(code: int) -> int | None:
    """Crop-group code for arable level-2 classes, None for everything else."""
    return study_class(code).group


@dataclass(frozen=True)
class MappingRow:
    scheme: str
    source_code: str
    land_use: str | None
    study_code: int


@dataclass
class LegendMapping:
    """Source-scheme codes -> study codes. Many-to-one allowed, one-to-many not."""

    scheme: str
    entries: dict[tuple[str, str | None], int]

    def source_codes(self) -> set[str]:
        return {code for code, _ in self.entries}


def map_code(mapping: LegendMapping, source_code: str, land_use: str | None = None) -> int | None:
    """Deterministic lookup; returns None for unmapped codes (callers filter).

    If a land-use code is supplied, a land-use-specific entry takes
    precedence over the plain entry for the same source code.
    """
    source_code = str(source_code).strip()
    if land_use is not None:
        hit = mapping.entries.get((source_code, str(land_use).strip()))
        if hit is not None:
            return hit
    return mapping.entries.get((source_code, None))


def read_mapping_rows(path: str | Path) -> list[MappingRow]:
    """Parse a mapping table: tab-separated columns
       scheme, source_code, land_use (may be empty), study_code."""
    rows = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise LegendError(f"{path}:{ln}: expected 4 tab-separated columns, got {len(parts)}")
        scheme, source, land_use, study = (p.strip() for p in parts)
        if scheme == "scheme":  # header
            continue
        try:
            study_code = int(study)
        except ValueError:
            raise LegendError(f"{path}:{ln}: study code {study!r} is not an integer") from None
        if study_code not in STUDY_CLASSES:
            raise LegendError(f"{path}:{ln}: {study_code} is not a study class")
        rows.append(MappingRow(scheme, source, land_use or None, study_code))
    return rows


def build_mapping(rows: list[MappingRow], scheme: str) -> LegendMapping:
    """Assemble one scheme's mapping, rejecting one-to-many source codes."""
    entries: dict[tuple[str, str | None], int] = {}
    found = False
    for row in rows:
        if row.scheme != scheme:
            continue
        found = True
        key = (row.source_code, row.land_use)
        if key in entries and entries[key] != row.study_code:
            raise LegendError(
                f"scheme {scheme!r}: source code {row.source_code!r} maps to both "
                f"{entries[key]} and {row.study_code} (one-to-many forbidden)"
            )
        entries[key] = row.study_code
    if not found:
        raise LegendError(f"scheme {scheme!r} not present in mapping rows")
    return LegendMapping(scheme=scheme, entries=entries)


def load_scheme(path: str | Path, scheme: str) -> LegendMapping:
    return build_mapping(read_mapping_rows(path), scheme)


def _packaged(name: str) -> Path:
    return Path(str(resources.files("sarcrop").joinpath("data", name)))


def lucas_mapping() -> LegendMapping:
    """Survey label -> study code table shipped with the package."""
    return load_scheme(_packaged("lucas_study.tsv"), "lucas")


def eurostat_mapping() -> LegendMapping:
    """Reported-statistics crop codes -> study codes."""
    return load_scheme(_packaged("eurostat_study.tsv"), "eurostat")


def gsaa_rows() -> list[MappingRow]:
    """Per-region parcel-declaration code tables, transcribed as published.

    National code semantics cannot be verified here; two regions
    (frcv2018, si2018) contain source codes published against several study
    classes, so building a functional mapping for them raises
    LegendError. The remaining regions load cleanly.
    """
    return read_mapping_rows(_packaged("gsaa_as_published.tsv"))


def gsaa_mapping(region: str) -> LegendMapping:
    return build_mapping(gsaa_rows(), region)


def coverage_report(rows: list[MappingRow]) -> str:
    """Human-readable validation summary for a mapping table."""
    schemes = sorted({r.scheme for r in rows})
    lines = []
    for scheme in schemes:
        sub = [r for r in rows if r.scheme == scheme]
        sources = {(r.source_code, r.land_use) for r in sub}
        targets = sorted({r.study_code for r in sub})
        try:
            build_mapping(sub, scheme)
            status = "ok"
        except LegendError as e:
            status = f"CONFLICT ({e})"
        lines.append(
            f"scheme {scheme}: {len(sources)} source codes -> "
            f"{len(targets)} study classes {targets}; {status}"
        )
    return "\n".join(lines)
