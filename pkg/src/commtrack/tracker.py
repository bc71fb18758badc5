"""Timeline orchestration: one detection run per snapshot, labels that persist.

A timeline owns the label space. Step 0 issues fresh labels 0..c-1; every
later step seeds detection with the previous partition, so surviving
communities keep their labels, and brand-new communities draw from a counter
that never goes backward (a label used at step t can never reappear as a
different community later).

Persistence is one directory per timeline: ``step_<k>.graph.tsv`` and
``step_<k>.partition.tsv`` per snapshot, ``history.jsonl`` with one
comparison report per transition, and ``meta.json`` for the label counter and
per-step bookkeeping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import InputError
from .graph import (
    CommunityLabel,
    Graph,
    Partition,
    read_edge_tsv,
    read_partition_tsv,
    write_edge_tsv,
    write_partition_tsv,
)
from .louvain import (
    DynamicContext,
    LouvainConfig,
    derive_seed,
    louvain_dynamic,
    louvain_static,
    renumber_partition,
)
from .metrics import ComparisonReport, MatchConfig, compare

__all__ = [
    "TimelineStep",
    "StepEvents",
    "Timeline",
    "bootstrap",
    "step",
    "derive_step_seed",
    "save_timeline",
    "load_timeline",
]


@dataclass
class TimelineStep:
    snapshot_id: str
    graph: Graph
    partition: Partition


@dataclass
class StepEvents:
    """Lineage bookkeeping for one transition (reporting only)."""

    step_index: int
    births: List[int] = field(default_factory=list)  # labels new and unmatched
    deaths: List[int] = field(default_factory=list)  # labels gone and unmatched
    n_fixed: int = 0
    n_pref: int = 0
    # runtime diagnostic, not persisted
    fixed_ids: Optional[Tuple] = None


@dataclass
class Timeline:
    steps: List[TimelineStep] = field(default_factory=list)
    label_counter: int = 0
    history: List[ComparisonReport] = field(default_factory=list)
    events: List[StepEvents] = field(default_factory=list)
    label_origins: Dict[int, CommunityLabel] = field(default_factory=dict)

    @property
    def last(self) -> TimelineStep:
        if not self.steps:
            raise InputError("timeline is empty")
        return self.steps[-1]

    def _register_labels(self, part: Partition, step_index: int) -> None:
        for lab in sorted(part.labels_set):
            if lab not in self.label_origins:
                self.label_origins[lab] = CommunityLabel(lab, step_index)
        if len(part.labels):
            self.label_counter = max(self.label_counter, int(part.labels.max()) + 1)


def derive_step_seed(base_seed: int, step_index: int) -> int:
    """One reproducible sub-seed per transition of a timeline."""
    return derive_seed(base_seed, step_index)


def bootstrap(
    g0: Graph,
    cfg: LouvainConfig = LouvainConfig(),
    snapshot_id: Optional[str] = None,
) -> Timeline:
    """Start a timeline: plain detection on the first snapshot, labels 0..c-1."""
    part, _report = louvain_static(g0, cfg)
    part = renumber_partition(part, start=0)
    tl = Timeline()
    tl.steps.append(TimelineStep(snapshot_id if snapshot_id is not None else "0", g0, part))
    tl._register_labels(part, 0)
    return tl


def step(
    tl: Timeline,
    g_next: Graph,
    p: float,
    q: float,
    seed: int,
    cfg: LouvainConfig = LouvainConfig(),
    match_cfg: MatchConfig = MatchConfig(),
    snapshot_id: Optional[str] = None,
) -> Timeline:
    """Detect on the next snapshot with stability (p, q) and append the result.

    The timeline is mutated only after detection and comparison both succeed,
    so a failing transition (e.g. disjoint node sets, where the comparison is
    undefined) leaves it unchanged.
    """
    if not tl.steps:
        raise InputError("cannot step an empty timeline; bootstrap first")
    prev = tl.last.partition
    ctx = DynamicContext.from_previous(
        prev, g_next, p, q, seed, fresh_label_start=tl.label_counter
    )
    part, _report = louvain_dynamic(g_next, ctx, cfg)
    report = compare(prev, part, g_next, match_cfg)

    step_index = len(tl.steps)
    matched_prev = {a for a, _ in report.matching}
    matched_next = {b for _, b in report.matching}
    prev_labels = prev.labels_set
    next_labels = part.labels_set
    events = StepEvents(
        step_index=step_index,
        births=sorted(next_labels - prev_labels - matched_next),
        deaths=sorted(prev_labels - next_labels - matched_prev),
        n_fixed=len(ctx.fixed),
        n_pref=len(ctx.pref),
        fixed_ids=tuple(g_next.ids.ids[int(i)] for i in ctx.fixed),
    )

    tl.steps.append(
        TimelineStep(snapshot_id if snapshot_id is not None else str(step_index), g_next, part)
    )
    tl.history.append(report)
    tl.events.append(events)
    tl._register_labels(part, step_index)
    return tl


# --- persistence ---------------------------------------------------------------


def save_timeline(tl: Timeline, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for k, st in enumerate(tl.steps):
        write_edge_tsv(st.graph, d / f"step_{k}.graph.tsv")
        write_partition_tsv(st.partition, d / f"step_{k}.partition.tsv")
    with open(d / "history.jsonl", "w", encoding="utf-8") as fh:
        for report in tl.history:
            fh.write(report.to_json() + "\n")
    meta = {
        "n_steps": len(tl.steps),
        "snapshot_ids": [st.snapshot_id for st in tl.steps],
        "label_counter": tl.label_counter,
        "label_origins": {str(lab): cl.origin_snapshot for lab, cl in tl.label_origins.items()},
        "events": [
            {
                "step_index": ev.step_index,
                "births": ev.births,
                "deaths": ev.deaths,
                "n_fixed": ev.n_fixed,
                "n_pref": ev.n_pref,
            }
            for ev in tl.events
        ],
    }
    with open(d / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_timeline(directory) -> Timeline:
    d = Path(directory)
    meta_path = d / "meta.json"
    if not meta_path.exists():
        raise InputError(f"no timeline found in {d} (missing meta.json)")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)

    tl = Timeline(label_counter=int(meta["label_counter"]))
    for k in range(int(meta["n_steps"])):
        gpath = d / f"step_{k}.graph.tsv"
        ppath = d / f"step_{k}.partition.tsv"
        if not gpath.exists() or not ppath.exists():
            raise InputError(f"timeline in {d} is missing files for step {k}")
        g = read_edge_tsv(gpath)
        part = read_partition_tsv(ppath, graph=g)
        tl.steps.append(TimelineStep(meta["snapshot_ids"][k], g, part))
    history_path = d / "history.jsonl"
    if history_path.exists():
        with open(history_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    tl.history.append(ComparisonReport.from_json(line))
    for rec in meta.get("events", []):
        tl.events.append(
            StepEvents(
                step_index=int(rec["step_index"]),
                births=[int(x) for x in rec["births"]],
                deaths=[int(x) for x in rec["deaths"]],
                n_fixed=int(rec["n_fixed"]),
                n_pref=int(rec["n_pref"]),
            )
        )
    for lab_s, origin in meta.get("label_origins", {}).items():
        lab = int(lab_s)
        tl.label_origins[lab] = CommunityLabel(lab, int(origin))
    if len(tl.history) != max(0, len(tl.steps) - 1):
        raise InputError(
            f"timeline in {d} is inconsistent: {len(tl.steps)} steps but "
            f"{len(tl.history)} history rows"
        )
    return tl
