"""CSV ingestion for count data.

Input follows the lab sheet layout: one row per (date, dose, duration)
with the total observed count and the per-category splits.  Header
matching is case- and punctuation-insensitive ("0 Spicules", "dead /
delayed" both work).  ``records_to_csv`` writes the normalized form,
which round-trips byte-identically through ``ingest_csv``.
"""

from __future__ import annotations

import csv
import io
import re
from pathlib import Path

from .errors import ValidationError
from .fitting import CountRecord

CANONICAL_HEADER = [
    "date", "dose", "duration", "observed", "normal", "radial",
    "0 spicules", "dead/delayed",
]

_KEYS = {
    "date": "date",
    "dose": "dose",
    "duration": "duration",
    "observed": "observed",
    "normal": "normal",
    "radial": "radial",
    "0spicules": "zero_spicules",
    "spicules0": "zero_spicules",
    "zerospicules": "zero_spicules",
    "deaddelayed": "dead_delayed",
}


def _norm_key(name: str) -> str:
    return re.sub(r"[^a-z0-9]", "", name.lower())


def _parse_int(value, field, line):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{field} is not a number: {value!r}", line) from None
    if v != int(v):
        raise ValidationError(f"{field} must be an integer count: {value!r}", line)
    return int(v)


def ingest_csv(source) -> list[CountRecord]:
    """Parse count records from a path, file object or CSV text."""
    if isinstance(source, Path) or (
        isinstance(source, str) and "\n" not in source and source.endswith(".csv")
    ):
        text = Path(source).read_text()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader]
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ValidationError("empty input: no header row found")
    header = [_norm_key(h) for h in rows[0]]
    unknown = [h for h in header if h not in _KEYS]
    if unknown:
        raise ValidationError(f"unrecognized columns: {unknown}", line=1)
    cols = [_KEYS[h] for h in header]
    required = {"date", "dose", "duration", "observed", "normal", "radial",
                "zero_spicules", "dead_delayed"}
    missing = required - set(cols)
    if missing:
        raise ValidationError(f"missing columns: {sorted(missing)}", line=1)
    if len(rows) == 1:
        raise ValidationError("empty input: header but no data rows")

    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(cols):
            raise ValidationError(
                f"expected {len(cols)} fields, got {len(row)}", lineno
            )
        d = {c: v.strip() for c, v in zip(cols, row)}
        try:
            dose = float(d["dose"])
        except ValueError:
            raise ValidationError(f"dose is not a number: {d['dose']!r}", lineno) from None
        if dose < 0:
            raise ValidationError(f"dose must be nonnegative: {dose}", lineno)
        observed = _parse_int(d["observed"], "observed", lineno)
        normal = _parse_int(d["normal"], "normal", lineno)
        radial = _parse_int(d["radial"], "radial", lineno)
        zero_sp = _parse_int(d["zero_spicules"], "0 spicules", lineno)
        dead = _parse_int(d["dead_delayed"], "dead/delayed", lineno)
        if min(observed, normal, radial, zero_sp, dead) < 0:
            raise ValidationError("counts must be nonnegative", lineno)
        other = observed - normal - radial
        if other < 0:
            raise ValidationError(
                f"normal + radial = {normal + radial} exceeds observed = {observed}",
                lineno,
            )
        if zero_sp + dead > other:
            raise ValidationError(
                f"abnormal columns sum to {zero_sp + dead} but only {other} "
                "non-normal, non-radial embryos were observed",
                lineno,
            )
        records.append(
            CountRecord(
                date=d["date"], dose=dose, duration=d["duration"],
                observed=observed, normal=normal, radial=radial,
                other_abnormal=other, zero_spicules=zero_sp, dead_delayed=dead,
            )
        )
    return records


def records_to_csv(records) -> str:
    """Serialize to the normalized CSV schema (stable formatting)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CANONICAL_HEADER)
    for r in records:
        zero_sp = r.zero_spicules if r.zero_spicules is not None else 0
        dead = (
            r.dead_delayed
            if r.dead_delayed is not None
            else r.other_abnormal - zero_sp
        )
        writer.writerow([
            r.date, format(r.dose, "g"), r.duration, r.observed,
            r.normal, r.radial, zero_sp, dead,
        ])
    return buf.getvalue()


def group_by_date(records) -> dict[str, list[CountRecord]]:
    groups: dict[str, list[CountRecord]] = {}
    for r in records:
        groups.setdefault(r.date, []).append(r)
    return groups
