"""File formats: fund CSV, imputation JSON lines, atomic writes."""
from __future__ import annotations

import csv
import json
import os
import tempfile
from collections import OrderedDict
from pathlib import Path

from .fund_data import FundDataError, FundRecord, Quarter

FUND_COLUMNS = ("fund_id", "vintage_year", "commitment", "quarter_index", "called_pct", "dpi_pct", "rvpi_pct")


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    """Canonical JSON: sorted keys, shortest round-trip float repr."""
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def funds_to_csv(records) -> str:
    lines = [",".join(FUND_COLUMNS)]
    for r in records:
        for q in r.quarters:
            lines.append(",".join([
                r.fund_id, str(r.vintage_year), repr(float(r.commitment)), str(q.index),
                _fmt(q.called_pct), _fmt(q.dpi_pct), _fmt(q.rvpi_pct),
            ]))
    return "\n".join(lines) + "\n"


def write_funds_csv(path, records) -> None:
    atomic_write_text(path, funds_to_csv(records))


def read_funds_csv(path) -> list:
    """Parse the fund CSV; rows of a fund may appear in any order."""
    rows: "OrderedDict[str, dict]" = OrderedDict()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != FUND_COLUMNS:
            raise FundDataError(f"{path}: expected header {','.join(FUND_COLUMNS)}, got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            try:
                fid = row["fund_id"]
                entry = rows.setdefault(fid, {"vintage": int(row["vintage_year"]),
                                              "commitment": float(row["commitment"]), "q": {}})
                if entry["vintage"] != int(row["vintage_year"]) or entry["commitment"] != float(row["commitment"]):
                    raise FundDataError(f"fund {fid}: inconsistent vintage/commitment across rows")
                qi = int(row["quarter_index"])
                if qi in entry["q"]:
                    raise FundDataError(f"fund {fid}: duplicate quarter_index {qi}")
                vals = tuple(None if row[c].strip() == "" else float(row[c]) for c in FUND_COLUMNS[4:])
                entry["q"][qi] = vals
            except (KeyError, ValueError) as exc:
                if isinstance(exc, FundDataError):
                    raise
                raise FundDataError(f"{path}:{lineno}: {exc}") from exc
    out = []
    for fid, e in rows.items():
        quarters = [Quarter(i, *e["q"][i]) for i in sorted(e["q"])]
        out.append(FundRecord(fid, e["vintage"], e["commitment"], quarters))
    return out


def reports_to_jsonl(reports) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in reports)
