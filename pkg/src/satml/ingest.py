"""Parsing and validation of raw telemetry channel files.

Every channel arrives as UTF-8 CSV with one header line.  Parsing is strict:
the header must match the declared schema, malformed data lines are skipped
and recorded in the parse report, and rows come out stably sorted by their
time column.  Outliers are flagged, never deleted, so downstream stages can
re-include them.
"""

from __future__ import annotations

import enum
import io
import math
import re
from dataclasses import dataclass, field

import numpy as np


class ChannelKind(enum.Enum):
    SAA = "SAA"
    DMOP = "DMOP"
    FTL = "FTL"
    EVT = "EVT"
    LT = "LT"
    PW = "PW"
    IREM = "IREM"
    ORBIT = "ORBIT"
    ECLIPSE = "ECLIPSE"


class SchemaError(ValueError):
    """Fatal: header mismatch or empty stream."""


ECLIPSE_EVENTS = ("earth_umbra", "earth_penumbra", "moon_penumbra")

# Fixed schemas: (column, type) with type in {int, float, text, eclipse_event}.
# PW is special-cased: ut_ms plus one float column per NPWDxxxx power line.
_SCHEMAS = {
    ChannelKind.SAA: [("ut_ms", "int"), ("sa", "float"), ("sx", "float"),
                      ("sy", "float"), ("sz", "float")],
    ChannelKind.DMOP: [("ut_ms", "int"), ("command", "text")],
    ChannelKind.FTL: [("utb_ms", "int"), ("ute_ms", "int"), ("pointing", "text")],
    ChannelKind.EVT: [("ut_ms", "int"), ("description", "text")],
    ChannelKind.LT: [("ut_ms", "int"), ("sunmars_km", "float"),
                     ("eclipseduration_min", "float"),
                     ("occultationduration_min", "float")],
    ChannelKind.IREM: [("ut_ms", "int"), ("count_rate", "float")],
    ChannelKind.ORBIT: [("rev", "int"), ("perigee_ms", "int"),
                        ("perigee_alt_km", "float"), ("apogee_ms", "int"),
                        ("apogee_alt_km", "float"), ("perigee_lon_deg", "float"),
                        ("semimajor_km", "float"), ("eccentricity", "float"),
                        ("inclination_deg", "float"), ("raan_deg", "float"),
                        ("argp_deg", "float"), ("period_s", "float"),
                        ("period_diff_s", "float")],
    ChannelKind.ECLIPSE: [("rev", "int"), ("event", "eclipse_event"),
                          ("enter_ms", "int"), ("exit_ms", "int")],
}

# Column used for sorting / time-bucketing per kind.
TIME_COLUMN = {
    ChannelKind.SAA: "ut_ms", ChannelKind.DMOP: "ut_ms", ChannelKind.FTL: "utb_ms",
    ChannelKind.EVT: "ut_ms", ChannelKind.LT: "ut_ms", ChannelKind.PW: "ut_ms",
    ChannelKind.IREM: "ut_ms", ChannelKind.ORBIT: "perigee_ms",
    ChannelKind.ECLIPSE: "enter_ms",
}

_NPWD_RE = re.compile(r"NPWD\d{4}$")


@dataclass
class RawTable:
    kind: ChannelKind
    columns: dict  # name -> np.ndarray (int64 / float64 / object for text)
    source_name: str = ""
    outlier_mask: np.ndarray = None  # bool per row, True = flagged

    def __post_init__(self):
        if self.outlier_mask is None:
            self.outlier_mask = np.zeros(self.n_rows, dtype=bool)

    @property
    def n_rows(self) -> int:
        if not self.columns:
            return 0
        return len(next(iter(self.columns.values())))

    @property
    def column_names(self):
        return list(self.columns)

    @property
    def timestamps(self) -> np.ndarray:
        return self.columns[TIME_COLUMN[self.kind]]

    def clean(self) -> "RawTable":
        """Copy with outlier-flagged rows removed."""
        keep = ~self.outlier_mask
        cols = {k: v[keep] for k, v in self.columns.items()}
        return RawTable(self.kind, cols, self.source_name)


@dataclass
class ParseReport:
    accepted: int = 0
    rejected: int = 0
    rejection_reasons: list = field(default_factory=list)  # (line number, reason)
    outliers_flagged: int = 0


@dataclass(frozen=True)
class OutlierRule:
    column: str
    low: float = -math.inf
    high: float = math.inf


# Default physical-range rules; flagged rows are excluded downstream.
def default_outlier_rules(kind: ChannelKind, columns=None):
    if kind is ChannelKind.SAA:
        return [OutlierRule(c, 0.0, 360.0) for c in ("sa", "sx", "sy", "sz")]
    if kind is ChannelKind.PW:
        return [OutlierRule(c, 0.0) for c in (columns or []) if _NPWD_RE.match(c)]
    if kind is ChannelKind.IREM:
        return [OutlierRule("count_rate", 0.0)]
    return []


def schema_for(kind: ChannelKind, header_fields=None):
    """Schema as a list of (column, type).  PW derives its columns from the
    header, which must be ut_ms followed by NPWDxxxx names."""
    if kind is not ChannelKind.PW:
        return list(_SCHEMAS[kind])
    if header_fields is None:
        raise SchemaError("PW schema depends on the header")
    if len(header_fields) < 2 or header_fields[0] != "ut_ms":
        raise SchemaError("PW header must be ut_ms followed by NPWD columns")
    for name in header_fields[1:]:
        if not _NPWD_RE.match(name):
            raise SchemaError(f"bad PW column name: {name!r}")
    return [("ut_ms", "int")] + [(c, "float") for c in header_fields[1:]]


def _convert(token: str, typ: str):
    if typ == "int":
        return int(token)
    if typ == "float":
        value = float(token)
        if math.isnan(value):
            raise ValueError("nan")
        return value
    if typ == "eclipse_event":
        if token not in ECLIPSE_EVENTS:
            raise ValueError(f"unknown eclipse event {token!r}")
        return token
    return token


def parse_channel(kind: ChannelKind, stream: bytes, source_name: str = "") -> tuple:
    """Parse one channel file into a typed, time-sorted table plus a report.

    Malformed lines are skipped (reason recorded with its 1-based file line
    number); a wrong header or empty stream is fatal.
    """
    text = stream.decode("utf-8") if isinstance(stream, (bytes, bytearray)) else stream
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise SchemaError(f"{kind.value}: empty stream")
    header = [f.strip() for f in lines[0].split(",")]
    schema = schema_for(kind, header)
    expected = [name for name, _ in schema]
    if header != expected:
        raise SchemaError(
            f"{kind.value}: header mismatch, expected {expected}, got {header}")

    report = ParseReport()
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != len(schema):
            report.rejected += 1
            report.rejection_reasons.append((lineno, "arity"))
            continue
        try:
            row = tuple(_convert(tok.strip(), typ)
                        for tok, (_, typ) in zip(fields, schema))
        except ValueError as exc:
            report.rejected += 1
            reason = "type" if "eclipse event" not in str(exc) else "enum"
            report.rejection_reasons.append((lineno, reason))
            continue
        rows.append(row)
        report.accepted += 1

    columns = {}
    for i, (name, typ) in enumerate(schema):
        values = [r[i] for r in rows]
        if typ == "int":
            columns[name] = np.array(values, dtype=np.int64)
        elif typ == "float":
            columns[name] = np.array(values, dtype=np.float64)
        else:
            columns[name] = np.array(values, dtype=object)
    table = RawTable(kind, columns, source_name=source_name)

    order = np.argsort(table.timestamps, kind="stable")
    table = RawTable(kind, {k: v[order] for k, v in table.columns.items()},
                     source_name=source_name)
    return table, report


def write_channel(table: RawTable) -> bytes:
    """Serialize a table back to its CSV schema (round-trips with parse_channel)."""
    buf = io.StringIO()
    buf.write(",".join(table.column_names) + "\n")
    cols = [table.columns[c] for c in table.column_names]
    for i in range(table.n_rows):
        parts = []
        for col in cols:
            v = col[i]
            if isinstance(v, (np.integer, int)):
                parts.append(str(int(v)))
            elif isinstance(v, (np.floating, float)):
                parts.append(repr(float(v)))
            else:
                parts.append(str(v))
        buf.write(",".join(parts) + "\n")
    return buf.getvalue().encode("utf-8")


def flag_outliers(table: RawTable, rule: OutlierRule) -> tuple:
    """Mark rows whose value falls outside [rule.low, rule.high].

    Returns (table with updated mask, number of newly examined rows flagged).
    """
    if rule.column not in table.columns:
        raise ValueError(f"no such column: {rule.column}")
    col = table.columns[rule.column]
    if col.dtype == object:
        raise ValueError(f"outlier rule on non-numeric column {rule.column}")
    bad = (col < rule.low) | (col > rule.high)
    mask = table.outlier_mask | bad
    flagged = RawTable(table.kind, table.columns, table.source_name, mask)
    return flagged, int(bad.sum())
