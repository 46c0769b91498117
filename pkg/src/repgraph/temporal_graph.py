"""Period-partitioned labeled graph store.

Each observation period (one UTC day by default) owns a :class:`TemporalSubgraph`
holding every labeled edge seen in that period. An edge carries an
:class:`EdgeValue`: the ordered list of transaction records plus cached
aggregates. Periods are sealed once closed, after which they never change;
sealed periods can be persisted, evicted from memory and loaded back.

The store also tracks how many graphs (evidence subgraphs and reputation
states) are resident at once, so the engine can enforce its memory budget.
"""
from __future__ import annotations

import bisect
import decimal
import enum
import functools
import operator
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional

from .errors import (
    InvalidRecord,
    NotPersisted,
    NotSealed,
    PeriodMismatch,
    PeriodNotResident,
    ResidencyExceeded,
    SealedPeriod,
    UnknownPeriod,
)

DAY_SECONDS = 86400


class EntityKind(enum.IntEnum):
    ACCOUNT = 1
    SMART_CONTRACT = 2
    PRODUCT = 3
    POST = 4
    WORD = 5
    TAG = 6

    @property
    def prefix(self) -> str:
        return _PREFIXES[self]


_PREFIXES = {
    EntityKind.ACCOUNT: "acct",
    EntityKind.SMART_CONTRACT: "sc",
    EntityKind.PRODUCT: "prod",
    EntityKind.POST: "post",
    EntityKind.WORD: "word",
    EntityKind.TAG: "tag",
}
_KIND_BY_PREFIX = {v: k for k, v in _PREFIXES.items()}


class RelationKind(enum.IntEnum):
    """Edge labels. Integer values fix the canonical ordering."""

    VOTES = 1
    AUTHORS = 2
    MENTIONS = 3
    USES = 4
    RELATES = 5
    PROVIDES = 6
    FOLLOWS = 7
    CREATES = 8
    CALLS = 9
    PAYS = 10

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_label(cls, text: str) -> "RelationKind":
        try:
            return _RELATIONS_BY_LABEL[text]
        except KeyError:
            raise ValueError(f"unknown relation kind {text!r}") from None


_RELATIONS_BY_LABEL = {r.label: r for r in RelationKind}


class Polarity(enum.Enum):
    UP = "up"
    DOWN = "down"


_FORBIDDEN_ID_CHARS = frozenset("\t\r\n")


class NodeId(tuple):
    """A typed graph node, written ``<prefix>:<id>``.

    Stored as the tuple ``(id, kind)``: hashing and equality are plain tuple
    operations, and tuple order is the canonical node order (id first, kind
    only breaking ties between same-id nodes).
    """

    __slots__ = ()

    def __new__(cls, kind: EntityKind, id: str):
        if type(kind) is not EntityKind:
            kind = EntityKind(kind)
        if not isinstance(id, str) or not id:
            raise ValueError("node id must be a non-empty string")
        if _FORBIDDEN_ID_CHARS.intersection(id):
            raise ValueError(f"node id contains a tab or newline: {id!r}")
        return tuple.__new__(cls, (id, kind))

    id = property(operator.itemgetter(0))
    kind = property(operator.itemgetter(1))

    def __getnewargs__(self):
        return (self[1], self[0])

    def __str__(self):
        return f"{_PREFIXES[self[1]]}:{self[0]}"

    def __repr__(self):
        return f"NodeId(kind={self[1]!r}, id={self[0]!r})"

    @property
    def sort_key(self) -> tuple[str, EntityKind]:
        return self

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        return parse_node(text)

    @classmethod
    def account(cls, id: str) -> "NodeId":
        return cls(EntityKind.ACCOUNT, id)


@functools.lru_cache(maxsize=4096)
def parse_node(text: str) -> NodeId:
    """Parse ``<prefix>:<id>``, e.g. ``acct:alice`` or ``post:p1``."""
    prefix, sep, ident = text.partition(":")
    if not sep:
        raise ValueError(f"node reference {text!r} lacks a kind prefix")
    try:
        kind = _KIND_BY_PREFIX[prefix]
    except KeyError:
        raise ValueError(f"unknown node kind prefix {prefix!r}") from None
    return NodeId(kind, ident)


def canonical_decimal(value: Decimal) -> Decimal:
    """Strip trailing zeros and exponent so equal amounts render identically."""
    if value == 0:
        return Decimal(0)
    text = str(value)
    if "E" not in text and not ("." in text and text[-1] == "0"):
        return value
    return Decimal(format(value.normalize(), "f"))


def to_decimal(value) -> Decimal:
    t = type(value)
    if t is Decimal:
        d = value
    elif t is str:
        d = Decimal(value.strip())
    elif t is int or t is float:
        d = Decimal(str(value))
    else:
        raise InvalidOperation(f"not a decimal: {value!r}")
    if not d.is_finite():
        raise InvalidOperation(f"not a finite decimal: {value!r}")
    return canonical_decimal(d)


@dataclass(frozen=True, slots=True)
class TransactionRecord:
    """One interaction carried on an edge.

    ``amount`` is in base currency units (already converted); ``currency``
    keeps the code the amount was originally quoted in.
    """

    timestamp: int
    amount: Optional[Decimal] = None
    currency: Optional[str] = None
    rating: Optional[Decimal] = None
    polarity: Optional[Polarity] = None

    def __post_init__(self):
        # type() rather than isinstance(): bool is an int subclass
        if type(self.timestamp) is not int:
            raise InvalidRecord(f"timestamp must be an integer, got {self.timestamp!r}")
        if self.amount is not None:
            amount = _record_decimal("amount", self.amount)
            if amount < 0:
                raise InvalidRecord(f"negative amount {amount}")
            object.__setattr__(self, "amount", amount)
        if self.rating is not None:
            rating = _record_decimal("rating", self.rating)
            if not (0 <= rating <= 1):
                raise InvalidRecord(f"rating {rating} outside [0, 1]")
            object.__setattr__(self, "rating", rating)
        if self.currency is not None and (
            not self.currency or _FORBIDDEN_ID_CHARS.intersection(self.currency)
        ):
            raise InvalidRecord(f"bad currency code {self.currency!r}")
        if self.polarity is not None and type(self.polarity) is not Polarity:
            raise InvalidRecord(f"bad polarity {self.polarity!r}")


def _record_decimal(name: str, raw) -> Decimal:
    try:
        return to_decimal(raw)
    except (InvalidOperation, ValueError):
        raise InvalidRecord(f"{name} is not a decimal: {raw!r}") from None


_ZERO, _ONE = Decimal(0), Decimal(1)
# addition and multiplication of finite decimals never round in this context
EXACT = decimal.Context(prec=decimal.MAX_PREC, Emax=decimal.MAX_EMAX, Emin=decimal.MIN_EMIN)


class EdgeValue:
    """Record list of one (src, rel, dst) edge plus running aggregates."""

    __slots__ = ("_records", "agg_amount", "_rating_num", "_rating_den")

    def __init__(self, records: Iterable[TransactionRecord] = ()):
        self._records: list[TransactionRecord] = []
        self.agg_amount = self._rating_num = self._rating_den = _ZERO
        for rec in records:
            self._append(rec)

    def _append(self, rec: TransactionRecord) -> None:
        recs = self._records
        if not recs or recs[-1].timestamp <= rec.timestamp:
            recs.append(rec)
        else:
            # after any records sharing the timestamp: keeps insertion order
            bisect.insort_right(recs, rec, key=_record_ts)
        if rec.amount is not None:
            self.agg_amount = EXACT.add(self.agg_amount, rec.amount)
        if rec.rating is not None:
            w = EXACT.add(rec.amount or 0, _ONE)
            self._rating_num = EXACT.add(self._rating_num, EXACT.multiply(w, rec.rating))
            self._rating_den = EXACT.add(self._rating_den, w)

    @property
    def records(self) -> tuple[TransactionRecord, ...]:
        return tuple(self._records)

    def __iter__(self) -> Iterator[TransactionRecord]:
        return iter(self._records)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def agg_count(self) -> int:
        return len(self._records)

    @property
    def agg_rating(self) -> Optional[Decimal]:
        """Mean of present ratings, each weighted by its amount plus one."""
        if not self._rating_den:
            return None
        return self._rating_num / self._rating_den

    def __eq__(self, other):
        if not isinstance(other, EdgeValue):
            return NotImplemented
        return self._records == other._records

    def __repr__(self):
        return f"EdgeValue(count={self.agg_count}, amount={self.agg_amount})"


def _record_ts(rec: TransactionRecord) -> int:
    return rec.timestamp


EdgeKey = tuple[NodeId, RelationKind, NodeId]


def edge_sort_key(key: EdgeKey):
    # node tuples already compare in canonical order
    return key


def period_of(timestamp: int, period_seconds: int = DAY_SECONDS) -> int:
    return timestamp // period_seconds


class _EdgeSet:
    """Edge map with per-relation adjacency indexes in both directions."""

    def __init__(self):
        self._edges: dict[EdgeKey, EdgeValue] = {}
        # (node, relation) -> neighbours, in insertion order
        self._by_src: dict[tuple[NodeId, RelationKind], list[NodeId]] = {}
        self._by_dst: dict[tuple[NodeId, RelationKind], list[NodeId]] = {}

    def _edge_value(self, src: NodeId, rel: RelationKind, dst: NodeId) -> EdgeValue:
        key = (src, rel, dst)
        ev = self._edges.get(key)
        if ev is None:
            ev = self._edges[key] = EdgeValue()
            self._by_src.setdefault((src, rel), []).append(dst)
            self._by_dst.setdefault((dst, rel), []).append(src)
        return ev

    @property
    def edges(self) -> Mapping[EdgeKey, EdgeValue]:
        return MappingProxyType(self._edges)

    def __len__(self) -> int:
        return len(self._edges)

    @property
    def record_count(self) -> int:
        return sum(len(ev) for ev in self._edges.values())

    def iter_edges(self) -> Iterator[tuple[NodeId, RelationKind, NodeId, EdgeValue]]:
        """All edges in canonical (src, rel, dst) order."""
        edges = self._edges
        return iter([(*key, edges[key]) for key in sorted(edges)])

    def sources(self, dst: NodeId, rel: RelationKind) -> list[NodeId]:
        return list(self._by_dst.get((dst, rel), ()))

    def targets(self, src: NodeId, rel: RelationKind) -> list[NodeId]:
        return list(self._by_src.get((src, rel), ()))

    def query(
        self,
        src: Optional[NodeId] = None,
        rel: Optional[RelationKind] = None,
        dst: Optional[NodeId] = None,
    ) -> list[tuple[NodeId, RelationKind, NodeId, EdgeValue]]:
        rels = list(RelationKind) if rel is None else [rel]
        if src is not None:
            keys = [
                (src, r, d)
                for r in rels
                for d in self._by_src.get((src, r), ())
                if dst is None or d == dst
            ]
        elif dst is not None:
            keys = [(s, r, dst) for r in rels for s in self._by_dst.get((dst, r), ())]
        else:
            keys = [k for k in self._edges if rel is None or k[1] == rel]
        keys.sort(key=edge_sort_key)
        return [(*k, self._edges[k]) for k in keys]


class TemporalSubgraph(_EdgeSet):
    """All edges of one observation period."""

    def __init__(self, period: int, period_seconds: int = DAY_SECONDS):
        super().__init__()
        self.period = period
        self.period_seconds = period_seconds
        self.start = period * period_seconds
        self.end = self.start + period_seconds
        self.sealed = False

    def add_edge(
        self, src: NodeId, rel: RelationKind, dst: NodeId, rec: TransactionRecord
    ) -> None:
        if self.sealed:
            raise SealedPeriod(f"period {self.period} is sealed")
        if not isinstance(rec, TransactionRecord):
            raise InvalidRecord(f"expected a TransactionRecord, got {type(rec).__name__}")
        if not (self.start <= rec.timestamp < self.end):
            raise PeriodMismatch(
                f"timestamp {rec.timestamp} outside period {self.period} "
                f"[{self.start}, {self.end})"
            )
        if type(rel) is not RelationKind:
            rel = RelationKind(rel)
        self._edge_value(src, rel, dst)._append(rec)

    def seal(self) -> None:
        self.sealed = True

    def __repr__(self):
        state = "sealed" if self.sealed else "open"
        return f"TemporalSubgraph(period={self.period}, edges={len(self)}, {state})"


class MergedView(_EdgeSet):
    """Read-only union of several subgraphs; records are concatenated per edge."""

    def __init__(self, parts: Iterable[_EdgeSet]):
        super().__init__()
        parts = list(parts)
        periods: list[int] = []
        for part in parts:
            if isinstance(part, MergedView):
                periods.extend(part.periods)
            else:
                periods.append(part.period)
        self.periods = tuple(sorted(set(periods)))
        for part in parts:
            for key, ev in part.edges.items():
                target = self._edge_value(*key)
                for rec in ev:
                    target._append(rec)

    sealed = True


def merge_subgraphs(parts: Iterable[_EdgeSet]) -> MergedView:
    return MergedView(parts)


class GraphStore:
    """In-memory home of the resident evidence subgraphs.

    ``residency_counter`` is the high-water mark of simultaneously resident
    graphs (evidence subgraphs plus reputation states held by the engine)
    since the last :meth:`begin_cycle`; ``peak_residency`` never resets.
    """

    def __init__(self, period_seconds: int = DAY_SECONDS, max_resident: Optional[int] = None):
        if period_seconds <= 0:
            raise ValueError("period_seconds must be positive")
        self.period_seconds = period_seconds
        self.max_resident = max_resident
        self.resident: dict[int, TemporalSubgraph] = {}
        self._persisted: set[int] = set()
        self._held_states: set[int] = set()
        self._cycle_cap: Optional[int] = None
        self.residency_counter = 0
        self.peak_residency = 0

    # residency bookkeeping

    @property
    def resident_count(self) -> int:
        return len(self.resident) + len(self._held_states)

    def _check_room(self, extra: int = 1) -> None:
        n = self.resident_count + extra
        for cap in (self.max_resident, self._cycle_cap):
            if cap is not None and n > cap:
                raise ResidencyExceeded(f"{n} resident graphs exceeds cap {cap}")

    def _observe(self) -> None:
        n = self.resident_count
        self.residency_counter = max(self.residency_counter, n)
        self.peak_residency = max(self.peak_residency, n)

    def begin_cycle(self, cap: Optional[int] = None) -> None:
        """Start a new update cycle: reset the counter and optionally cap residency."""
        self._cycle_cap = cap
        self.residency_counter = 0
        self._check_room(0)
        self._observe()

    def end_cycle(self) -> None:
        self._cycle_cap = None

    def hold_state(self, period: int) -> None:
        if period in self._held_states:
            return
        self._check_room()
        self._held_states.add(period)
        self._observe()

    def release_state(self, period: int) -> None:
        self._held_states.discard(period)

    # subgraph lifecycle

    def open_period(self, period: int) -> TemporalSubgraph:
        if period in self.resident:
            return self.resident[period]
        self._check_room()
        g = self.resident[period] = TemporalSubgraph(period, self.period_seconds)
        self._observe()
        return g

    def subgraph(self, period: int) -> TemporalSubgraph:
        try:
            return self.resident[period]
        except KeyError:
            raise PeriodNotResident(f"period {period} is not resident") from None

    def add_edge(
        self,
        period: int,
        src: NodeId,
        rel: RelationKind,
        dst: NodeId,
        rec: TransactionRecord,
    ) -> None:
        g = self.resident.get(period)
        if g is None:
            raise UnknownPeriod(f"period {period} has no open subgraph")
        g.add_edge(src, rel, dst, rec)

    def seal_period(self, period: int) -> None:
        g = self.resident.get(period)
        if g is None:
            raise UnknownPeriod(f"period {period} is unknown")
        g.seal()

    def query_edges(
        self,
        period: int,
        src: Optional[NodeId] = None,
        rel: Optional[RelationKind] = None,
        dst: Optional[NodeId] = None,
    ):
        return self.subgraph(period).query(src, rel, dst)

    def merge_periods(self, periods: Iterable[int]) -> MergedView:
        return MergedView(self.subgraph(p) for p in sorted(set(periods)))

    def persist_period(self, period: int, sink) -> None:
        """Write a sealed period to ``sink`` (any object with ``save_subgraph``)."""
        g = self.subgraph(period)
        if not g.sealed:
            raise NotSealed(f"period {period} must be sealed before persisting")
        sink.save_subgraph(g)
        self._persisted.add(period)

    def is_persisted(self, period: int) -> bool:
        return period in self._persisted

    def evict_period(self, period: int) -> None:
        if period not in self.resident:
            raise UnknownPeriod(f"period {period} is not resident")
        if period not in self._persisted:
            raise NotPersisted(f"period {period} has not been persisted")
        del self.resident[period]

    def load_period(self, period: int, source) -> TemporalSubgraph:
        """Restore a period from ``source`` (any object with ``load_subgraph``)."""
        if period in self.resident:
            return self.resident[period]
        self._check_room()
        g = source.load_subgraph(period)
        g.seal()
        self.resident[period] = g
        self._persisted.add(period)
        self._observe()
        return g
