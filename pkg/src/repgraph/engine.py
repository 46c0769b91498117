"""Incremental reputation update.

One update consumes the sealed evidence subgraph of period ``t`` and the
reputation state of period ``t-1`` and produces the state of period ``t``:

1. derive direct ratings from the evidence;
2. accumulate each ratee's raw score: sum of rater reputation x quality x weight;
3. normalize raw scores by the network-wide maximum;
4. blend: ``new = (1 - alpha) * prev + alpha * normalized``.

Accounts that received nothing simply decay by ``(1 - alpha)``. Newcomers
start from the default reputation. State values are kept on the 12-decimal
grid they are persisted with, so an in-memory state and its file are the
same thing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional

from .errors import MissingEvidence, NegativeInput, NotSealed, StateGap
from .ontology import DerivedRating, derive
from .params import EngineParams
from .temporal_graph import GraphStore, NodeId

STATE_DIGITS = 12
# evidence(t), state(t-1), state(t)
MEMORY_BUDGET = 3


@dataclass
class ReputationState:
    period: int
    values: dict[NodeId, float] = field(default_factory=dict)

    @classmethod
    def genesis(cls, first_period: int) -> "ReputationState":
        """The empty state preceding ``first_period``."""
        return cls(first_period - 1, {})

    def __len__(self):
        return len(self.values)


def quantize(value: float) -> float:
    return min(1.0, max(0.0, round(value, STATE_DIGITS)))


def get_reputation(
    state: ReputationState, account: NodeId, params: EngineParams = EngineParams()
) -> float:
    return state.values.get(account, params.default_reputation)


def differential(
    ratings: Iterable[DerivedRating], prev: ReputationState, params: EngineParams
) -> dict[NodeId, float]:
    raw: dict[NodeId, float] = {}
    default = params.default_reputation
    prev_values = prev.values
    for r in ratings:
        rep = prev_values.get(r.rater, default)
        raw[r.ratee] = raw.get(r.ratee, 0.0) + rep * r.quality * r.weight
    return raw


def normalize(raw: Mapping[NodeId, float]) -> dict[NodeId, float]:
    if not raw:
        return {}
    if any(v < 0 for v in raw.values()):
        raise NegativeInput("raw scores must be non-negative")
    top = max(raw.values())
    if top == 0:
        return {k: 0.0 for k in raw}
    return {k: v / top for k, v in raw.items()}


def blend(
    prev: ReputationState,
    dr: Mapping[NodeId, float],
    alpha: float,
    default_reputation: float = 0.5,
    period: Optional[int] = None,
) -> ReputationState:
    keep = 1.0 - alpha
    values = {}
    for account, old in prev.values.items():
        if account not in dr:
            values[account] = quantize(keep * old)
    for account, d in dr.items():
        base = prev.values.get(account, default_reputation)
        values[account] = quantize(keep * base + alpha * d)
    return ReputationState(prev.period + 1 if period is None else period, values)


def update_period(
    store: GraphStore,
    period: int,
    prev_state: ReputationState,
    params: EngineParams,
    sink=None,
) -> ReputationState:
    """Advance ``prev_state`` by one period of evidence.

    ``sink`` (anything with ``save_state``) receives the new state before
    return. Residency is capped at :data:`MEMORY_BUDGET` graphs throughout.
    """
    evidence = store.subgraph(period)
    if not evidence.sealed:
        raise NotSealed(f"evidence for period {period} is not sealed")
    if prev_state.period != period - 1:
        raise StateGap(f"state for period {prev_state.period} cannot precede period {period}")

    store.begin_cycle(cap=MEMORY_BUDGET)
    try:
        store.hold_state(prev_state.period)
        ratings = derive(evidence, params).ratings
        dr = normalize(differential(ratings, prev_state, params))
        store.hold_state(period)
        new = blend(prev_state, dr, params.alpha, params.default_reputation, period)
        if sink is not None:
            sink.save_state(new)
    finally:
        store.release_state(prev_state.period)
        store.release_state(period)
        store.end_cycle()
    return new


def iter_updates(
    store: GraphStore,
    start: int,
    end: int,
    prev_state: ReputationState,
    params: EngineParams,
    source=None,
    sink=None,
) -> Iterator[ReputationState]:
    """Sequential updates over ``[start, end]`` starting from ``prev_state``.

    Periods missing from the store are loaded from ``source`` one at a time
    and evicted again after their update. Availability of every period is
    checked before the first update.
    """
    for p in range(start, end + 1):
        if p not in store.resident and (source is None or not source.has_subgraph(p)):
            raise MissingEvidence(f"no evidence for period {p}")
    return _updates(store, start, end, prev_state, params, source, sink)


def _updates(store, start, end, state, params, source, sink):
    for p in range(start, end + 1):
        loaded = p not in store.resident
        if loaded:
            store.load_period(p, source)
        try:
            state = update_period(store, p, state, params, sink)
        finally:
            if loaded:
                store.evict_period(p)
        yield state


def run_updates(
    store: GraphStore,
    start: int,
    end: int,
    prev_state: ReputationState,
    params: EngineParams,
    source=None,
    sink=None,
) -> list[ReputationState]:
    """:func:`iter_updates`, collected into a list."""
    return list(iter_updates(store, start, end, prev_state, params, source, sink))


def replay_range(
    store: GraphStore,
    start: int,
    end: int,
    params: EngineParams,
    source=None,
    sink=None,
) -> list[ReputationState]:
    """Recompute every state in ``[start, end]`` from an empty genesis state."""
    return run_updates(store, start, end, ReputationState.genesis(start), params, source, sink)
