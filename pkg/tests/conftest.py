"""Shared fixtures: parsers for the published golden tables."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"


def _to_float(tok: str) -> float:
    if tok in ("-", "nan", ""):
        return float("nan")
    return float(tok)


def parse_count_table(lines: list[str]) -> dict:
    """Parse one golden count-confusion block into arrays."""
    out: dict = {"classes": None, "rows": [], "row_labels": []}
    for line in lines:
        parts = line.rstrip("\n").split("\t")
        key = parts[0]
        if key == "classes":
            out["classes"] = [int(c) for c in parts[1:]]
        elif key == "row":
            out["row_labels"].append(int(parts[1]))
            out["rows"].append([int(v) for v in parts[2:]])
        elif key == "row_totals":
            out["row_totals"] = np.array([int(v) for v in parts[1:]])
        elif key == "col_totals":
            out["col_totals"] = np.array([int(v) for v in parts[1:]])
        elif key in ("ua", "pa"):
            out[key] = np.array([_to_float(v) for v in parts[1:]])
        elif key in ("ua_pct", "pa_pct", "se_ua_pct", "se_pa_pct"):
            out[key] = np.array([_to_float(v) for v in parts[1:]])
        elif key in ("total", "oa_pct"):
            out[key] = float(parts[1])
    out["counts"] = np.array(out["rows"], dtype=np.int64)
    assert out["row_labels"] == out["classes"], "matrix rows out of order"
    return out


@pytest.fixture(scope="session")
def lucas_counts() -> dict:
    lines = [
        l for l in (DATA / "lucas_points_counts.tsv").read_text().splitlines()
        if l.strip() and not l.startswith("#")
    ]
    return parse_count_table(lines)


@pytest.fixture(scope="session")
def parcel_tables() -> dict[str, dict]:
    tables: dict[str, dict] = {}
    region = None
    block: list[str] = []
    for line in (DATA / "parcel_confusions.tsv").read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith("[region "):
            if region is not None:
                tables[region] = parse_count_table(block)
            region = line[len("[region "):-1]
            block = []
        else:
            block.append(line)
    if region is not None:
        tables[region] = parse_count_table(block)
    return tables


@pytest.fixture(scope="session")
def published_areas() -> dict:
    areas: dict[int, float] = {}
    weighted: dict = {}
    section = None
    for line in (DATA / "published_areas_and_weighted.tsv").read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith("["):
            section = line.strip("[]")
            continue
        parts = line.split("\t")
        if section == "areas_ha":
            if parts[0] == "total_arable_ha":
                weighted["total_arable_ha"] = float(parts[1])
            else:
                areas[int(parts[0])] = float(parts[1])
        else:
            if parts[0] == "classes":
                weighted["classes"] = [int(c) for c in parts[1:]]
            elif parts[0] == "oa_pct":
                weighted["oa_pct"] = float(parts[1])
            else:
                weighted[parts[0]] = np.array([_to_float(v) for v in parts[1:]])
    return {"areas": areas, **weighted}
