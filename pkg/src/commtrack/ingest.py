"""Communication-record ingestion: CSV records to a monthly social graph.

Pipeline: parse CSV records, keep those inside a sliding window of calendar
months, count directed traffic per ordered pair, keep an undirected edge only
where traffic flowed in both directions, then drop nodes whose connection
count exceeds a cap (call centers, spam farms) in one pass.

Record format (header optional, UTF-8):
    origin,target,timestamp,kind,duration_s
with ISO-8601 timestamps, kind one of call|sms, integer seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone, tzinfo
from enum import Enum
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from .errors import InputError
from .graph import Graph, build_graph

__all__ = [
    "CdrKind",
    "CdrRecord",
    "WindowSpec",
    "PairCounts",
    "DirectedCounts",
    "RejectionReport",
    "FilterReport",
    "IngestReport",
    "parse_cdr",
    "iter_parse_cdr",
    "aggregate_window",
    "merge_counts",
    "symmetrize",
    "filter_high_degree",
    "ingest_pipeline",
]


class CdrKind(Enum):
    CALL = "call"
    SMS = "sms"


@dataclass(frozen=True)
class CdrRecord:
    """One validated communication event. Self-records never survive parsing,
    and sms records always carry duration 0."""

    origin: str
    target: str
    timestamp: datetime
    kind: CdrKind
    duration_s: int


@dataclass
class RejectionReport:
    """Per-reason counts of dropped input lines, plus the first offending
    line number for each reason (1-based, for error messages)."""

    n_lines: int = 0
    n_valid: int = 0
    reasons: Dict[str, int] = field(default_factory=dict)
    first_line: Dict[str, int] = field(default_factory=dict)

    @property
    def n_rejected(self) -> int:
        return sum(self.reasons.values())

    def rejected_fraction(self) -> float:
        return self.n_rejected / self.n_lines if self.n_lines else 0.0

    def note(self, reason: str, lineno: int) -> None:
        self.reasons[reason] = self.reasons.get(reason, 0) + 1
        self.first_line.setdefault(reason, lineno)

    def merge(self, other: "RejectionReport") -> None:
        self.n_lines += other.n_lines
        self.n_valid += other.n_valid
        for reason, count in other.reasons.items():
            self.reasons[reason] = self.reasons.get(reason, 0) + count
        for reason, lineno in other.first_line.items():
            self.first_line.setdefault(reason, lineno)


@lru_cache(maxsize=1 << 16)
def _parse_timestamp(text: str) -> Optional[datetime]:
    """ISO-8601 parse; the cache pays off because CDR batches reuse many
    identical timestamps. 'Z' suffixes are accepted."""
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        return None


_HEADER_FIELDS = ("origin", "target")


def iter_parse_cdr(
    lines: Iterable[str],
    report: RejectionReport,
) -> Iterator[CdrRecord]:
    """Validate lines one at a time, updating ``report`` in place.

    A leading header line (first field "origin", second "target") is skipped
    without counting as a rejection; blank lines are ignored.
    """
    first_content = True
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        report.n_lines += 1
        fields = [f.strip() for f in line.split(",")]
        if first_content:
            first_content = False
            if (
                len(fields) >= 2
                and fields[0].lower() == _HEADER_FIELDS[0]
                and fields[1].lower() == _HEADER_FIELDS[1]
            ):
                report.n_lines -= 1
                continue
        if len(fields) != 5:
            report.note("field_count", lineno)
            continue
        origin, target, ts_text, kind_text, dur_text = fields
        if not origin or not target:
            report.note("empty_id", lineno)
            continue
        if origin == target:
            report.note("self_record", lineno)
            continue
        ts = _parse_timestamp(ts_text)
        if ts is None:
            report.note("bad_timestamp", lineno)
            continue
        kind_lower = kind_text.lower()
        if kind_lower == "call":
            kind = CdrKind.CALL
        elif kind_lower == "sms":
            kind = CdrKind.SMS
        else:
            report.note("bad_kind", lineno)
            continue
        try:
            duration = int(dur_text)
        except ValueError:
            report.note("bad_duration", lineno)
            continue
        if duration < 0:
            report.note("bad_duration", lineno)
            continue
        if kind is CdrKind.SMS and duration != 0:
            report.note("sms_nonzero_duration", lineno)
            continue
        report.n_valid += 1
        yield CdrRecord(origin, target, ts, kind, duration)


def parse_cdr(
    lines: Iterable[str],
    max_rejected_fraction: float = 1.0,
) -> Tuple[List[CdrRecord], RejectionReport]:
    """Parse a record stream; malformed lines are counted, not fatal.

    Raises only when the rejected fraction strictly exceeds
    ``max_rejected_fraction`` (the default 1.0 can never be exceeded).
    """
    if not 0.0 <= max_rejected_fraction <= 1.0:
        raise InputError("max_rejected_fraction must lie in [0, 1]")
    report = RejectionReport()
    records = list(iter_parse_cdr(lines, report))
    if report.rejected_fraction() > max_rejected_fraction:
        raise InputError(
            f"rejected {report.n_rejected} of {report.n_lines} lines "
            f"({report.rejected_fraction():.1%}), above the allowed "
            f"{max_rejected_fraction:.1%}; reasons: {report.reasons}"
        )
    return records, report


# --- window aggregation -------------------------------------------------------


@dataclass(frozen=True)
class WindowSpec:
    """A sliding window of whole calendar months ending at the anchor month.

    Spans ``span_months`` months: {anchor, anchor-1, ..., anchor-span+1}.
    Naive timestamps are taken to already be in ``tz``; aware ones are
    converted.
    """

    year: int
    month: int
    span_months: int = 3
    tz: tzinfo = timezone.utc

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise InputError(f"month must be 1..12, got {self.month}")
        if self.span_months < 1:
            raise InputError(f"span_months must be >= 1, got {self.span_months}")

    @classmethod
    def from_label(cls, label: str, span_months: int = 3, tz: tzinfo = timezone.utc) -> "WindowSpec":
        """Build from a "YYYY-MM" anchor label."""
        parts = label.split("-")
        if len(parts) != 2:
            raise InputError(f"month label must look like YYYY-MM, got {label!r}")
        try:
            year, month = int(parts[0]), int(parts[1])
        except ValueError:
            raise InputError(f"month label must look like YYYY-MM, got {label!r}") from None
        return cls(year=year, month=month, span_months=span_months, tz=tz)

    @property
    def _anchor_index(self) -> int:
        return self.year * 12 + (self.month - 1)

    def months(self) -> List[Tuple[int, int]]:
        """The (year, month) pairs covered, oldest first."""
        out = []
        for idx in range(self._anchor_index - self.span_months + 1, self._anchor_index + 1):
            out.append((idx // 12, idx % 12 + 1))
        return out

    def contains(self, ts: datetime) -> bool:
        if ts.tzinfo is not None:
            ts = ts.astimezone(self.tz)
        idx = ts.year * 12 + (ts.month - 1)
        return self._anchor_index - self.span_months < idx <= self._anchor_index


@dataclass
class PairCounts:
    """Traffic totals for one ordered (origin, target) pair."""

    __slots__ = ("calls", "smses", "duration_s")

    calls: int
    smses: int
    duration_s: int

    @property
    def comms(self) -> int:
        return self.calls + self.smses

    def add(self, record: CdrRecord) -> None:
        if record.kind is CdrKind.CALL:
            self.calls += 1
            self.duration_s += record.duration_s
        else:
            self.smses += 1


DirectedCounts = Dict[Tuple[str, str], PairCounts]


def aggregate_window(records: Iterable[CdrRecord], window: WindowSpec) -> DirectedCounts:
    """Directed pair totals over exactly the records inside the window."""
    counts: DirectedCounts = {}
    for rec in records:
        if not window.contains(rec.timestamp):
            continue
        key = (rec.origin, rec.target)
        pc = counts.get(key)
        if pc is None:
            pc = PairCounts(0, 0, 0)
            counts[key] = pc
        pc.add(rec)
    return counts


def merge_counts(*batches: DirectedCounts) -> DirectedCounts:
    """Order-independent merge, so sharded aggregation equals one big pass."""
    out: DirectedCounts = {}
    for batch in batches:
        for key, pc in batch.items():
            acc = out.get(key)
            if acc is None:
                out[key] = PairCounts(pc.calls, pc.smses, pc.duration_s)
            else:
                acc.calls += pc.calls
                acc.smses += pc.smses
                acc.duration_s += pc.duration_s
    return out


# --- graph construction -------------------------------------------------------


def symmetrize(counts: DirectedCounts, weight_mode: str = "unit") -> Graph:
    """Undirected graph with an edge (A,B) iff traffic flowed A→B and B→A.

    Weight is 1.0 in "unit" mode or the total communication count in both
    directions in "comm_count" mode. The node set is the endpoints of the
    retained edges (one-way-only contacts are not social ties and vanish
    here); edges are emitted in sorted order so the result is independent of
    record order.
    """
    if weight_mode not in ("unit", "comm_count"):
        raise InputError(f"unknown weight_mode {weight_mode!r}")
    edges = []
    for (a, b), fwd in counts.items():
        if a < b:
            rev = counts.get((b, a))
            if rev is not None:
                w = 1.0 if weight_mode == "unit" else float(fwd.comms + rev.comms)
                edges.append((a, b, w))
    edges.sort()
    return build_graph(edges)


@dataclass
class FilterReport:
    cap: int
    removed: List[str] = field(default_factory=list)
    n_nodes_before: int = 0
    n_nodes_after: int = 0
    n_edges_before: int = 0
    n_edges_after: int = 0

    @property
    def n_removed(self) -> int:
        return len(self.removed)


def filter_high_degree(g: Graph, cap: int = 200) -> Tuple[Graph, FilterReport]:
    """Drop every node with more than ``cap`` neighbors, in a single pass.

    Connection counts are measured on the input graph only, so the removal of
    a hub never cascades; nodes it leaves isolated stay in the node set.
    Self-loops do not count toward the cap and survive with their node.
    """
    if cap < 1:
        raise InputError(f"cap must be a positive integer, got {cap}")
    report = FilterReport(
        cap=cap,
        n_nodes_before=g.n,
        n_edges_before=g.n_edges,
    )
    keep = g.neighbor_counts() <= cap
    removed_idx = np.nonzero(~keep)[0]
    report.removed = [g.ids.ids[int(i)] for i in removed_idx]

    kept_nodes = [g.ids.ids[int(i)] for i in np.nonzero(keep)[0]]
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    mask = keep[rows] & keep[g.nbr] & (rows < g.nbr)
    ids = g.ids.ids
    edges = [
        (ids[int(u)], ids[int(v)], float(w))
        for u, v, w in zip(rows[mask], g.nbr[mask], g.wgt[mask])
    ]
    for i in np.nonzero(keep & (g.self_loops > 0))[0]:
        edges.append((ids[int(i)], ids[int(i)], float(g.self_loops[int(i)])))

    out = build_graph(edges, nodes=kept_nodes)
    report.n_nodes_after = out.n
    report.n_edges_after = out.n_edges
    return out, report


# --- end-to-end pipeline --------------------------------------------------------


@dataclass
class IngestReport:
    rejections: RejectionReport
    n_in_window: int
    n_out_of_window: int
    n_directed_pairs: int
    filter: FilterReport


def ingest_pipeline(
    lines: Iterable[str],
    window: WindowSpec,
    cap: int = 200,
    weight_mode: str = "unit",
    max_rejected_fraction: float = 1.0,
) -> Tuple[Graph, IngestReport]:
    """Streamed parse → window filter → aggregate → symmetrize → degree cap.

    One pass over the input; only per-pair totals are held in memory.
    """
    if not 0.0 <= max_rejected_fraction <= 1.0:
        raise InputError("max_rejected_fraction must lie in [0, 1]")
    rejections = RejectionReport()
    counts: DirectedCounts = {}
    n_in = 0
    n_out = 0
    for rec in iter_parse_cdr(lines, rejections):
        if not window.contains(rec.timestamp):
            n_out += 1
            continue
        n_in += 1
        key = (rec.origin, rec.target)
        pc = counts.get(key)
        if pc is None:
            pc = PairCounts(0, 0, 0)
            counts[key] = pc
        pc.add(rec)
    if rejections.rejected_fraction() > max_rejected_fraction:
        raise InputError(
            f"rejected {rejections.n_rejected} of {rejections.n_lines} lines, above "
            f"the allowed fraction {max_rejected_fraction}; reasons: {rejections.reasons}"
        )
    g = symmetrize(counts, weight_mode)
    n_pairs = len(counts)
    del counts
    g, filter_report = filter_high_degree(g, cap)
    return g, IngestReport(
        rejections=rejections,
        n_in_window=n_in,
        n_out_of_window=n_out,
        n_directed_pairs=n_pairs,
        filter=filter_report,
    )
