"""Batch ingest and update over a data root."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .engine import ReputationState, iter_updates
from .errors import DataError, SealedPeriod, StateGap, UnorderedInput
from .ontology import event_to_edges, parse_event_line, tally
from .params import EngineParams
from .temporal_graph import GraphStore, period_of


@dataclass
class PeriodSummary:
    period: int
    events: int
    records: int
    dangling: int
    self_pairs: int

    def line(self) -> str:
        return (
            f"period {self.period}: events={self.events} records={self.records} "
            f"dangling={self.dangling} self_pairs={self.self_pairs}"
        )


def _with_line(exc: DataError, where: str) -> DataError:
    new = type(exc)(f"{where}: {exc}")
    new.__cause__ = None
    return new


def ingest(
    lines: Iterable[str],
    root,
    params: EngineParams = EngineParams(),
    name: str = "<input>",
) -> list[PeriodSummary]:
    """Parse event lines into sealed, persisted evidence subgraphs.

    Input must be in period order (order within a period is free). A period
    is sealed and written as soon as the input moves past it, so only one
    evidence subgraph is held at a time. Days between the earliest and latest
    evidence (old or new) that have no events get an empty evidence file, so
    a quiet day is distinguishable from missing data. Periods already on disk
    are sealed; an event falling into one is rejected. Files are staged and
    only committed when the whole input is valid.
    """
    existing = set(root.evidence_periods())
    staged = root.stage()
    store = GraphStore(params.period_seconds, max_resident=1)
    summaries: list[PeriodSummary] = []
    current: Optional[int] = None
    events = 0

    def flush():
        g = store.subgraph(current)
        store.seal_period(current)
        store.persist_period(current, staged)
        self_pairs, dangling = tally(g)
        summaries.append(PeriodSummary(current, events, g.record_count, dangling, self_pairs))
        store.evict_period(current)

    try:
        for lineno, line in enumerate(lines, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                ev = parse_event_line(text, params)
                edges = event_to_edges(ev, params)
            except DataError as exc:
                raise _with_line(exc, f"{name}:{lineno}") from None
            p = period_of(ev.timestamp, params.period_seconds)
            if p != current:
                if p in existing:
                    raise SealedPeriod(f"{name}:{lineno}: evidence for period {p} is already sealed and persisted")
                if current is not None:
                    if p < current:
                        raise UnorderedInput(
                            f"{name}:{lineno}: period {p} follows period {current}; "
                            "sort the input by timestamp"
                        )
                    flush()
                current, events = p, 0
                store.open_period(p)
            for src, rel, dst, rec in edges:
                store.add_edge(p, src, rel, dst, rec)
            events += 1
        if current is not None:
            flush()

        known = existing.union(s.period for s in summaries)
        if known:
            for p in range(min(known), max(known) + 1):
                if p not in known:
                    current, events = p, 0
                    store.open_period(p)
                    flush()
        root.commit(staged)
    except BaseException:
        root.discard(staged)
        raise
    summaries.sort(key=lambda s: s.period)
    return summaries


@dataclass(frozen=True)
class UpdateSummary:
    period: int
    accounts: int


def update(
    root,
    params: EngineParams = EngineParams(),
    start: Optional[int] = None,
    end: Optional[int] = None,
) -> list[UpdateSummary]:
    """Run sequential updates, persisting each state into ``root``.

    By default resumes after the last persisted state and runs through the
    last evidence period. States go to ``root`` as they are computed; only
    one period's summary is kept per update.
    """
    evidence = root.evidence_periods()
    if start is None:
        states = root.state_periods()
        if states:
            start = states[-1] + 1
        elif evidence:
            start = evidence[0]
        else:
            return []
    if end is None:
        if not evidence:
            return []
        end = evidence[-1]
    if start > end:
        return []
    if root.has_state(start - 1):
        prev = root.load_state(start - 1)
    elif not evidence or start <= evidence[0]:
        prev = ReputationState.genesis(start)
    else:
        raise StateGap(f"no persisted state for period {start - 1}; update earlier periods first")
    store = GraphStore(params.period_seconds)
    return [
        UpdateSummary(s.period, len(s))
        for s in iter_updates(store, start, end, prev, params, source=root, sink=root)
    ]
