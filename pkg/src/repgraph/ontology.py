"""Event parsing, ontology edge mapping and rating projection.

Events arrive as JSON lines::

    {"kind":"payment","actor":"acct:a","target":"acct:b","ts":100,"amount":"10.0","currency":"XYZ"}

Each event becomes one or more labeled edges in its period's evidence
subgraph. Once a period is sealed, :func:`derive_ratings` projects the
evidence into direct rater -> ratee ratings:

* a vote on a post rates the post's author(s);
* a comment rates the author(s) of the post it replies to;
* a payment to an account rates that account, weighted by amount.

Other relations are stored for audit only.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import NamedTuple, Optional

from .errors import NotSealed, ParseError, UnknownCurrency, ValidationError
from .params import EngineParams, financial_weight
from .temporal_graph import (
    EntityKind,
    NodeId,
    Polarity,
    RelationKind,
    TemporalSubgraph,
    EXACT,
    TransactionRecord,
    parse_node,
    to_decimal,
)

A = EntityKind.ACCOUNT
R = RelationKind


class EventKind(enum.IntEnum):
    VOTE = 1
    COMMENT = 2
    POST = 3
    PAYMENT = 4
    FOLLOW = 5
    CREATE = 6
    CALL = 7
    MENTION = 8
    PROVIDE = 9
    RELATE = 10

    @property
    def label(self) -> str:
        return self.name.lower()


# kind -> (allowed target kinds, required parent kind or None)
COMPATIBILITY: dict[EventKind, tuple[frozenset, Optional[EntityKind]]] = {
    EventKind.VOTE: (frozenset({EntityKind.POST}), None),
    EventKind.COMMENT: (frozenset({EntityKind.POST}), EntityKind.POST),
    EventKind.POST: (frozenset({EntityKind.POST}), None),
    EventKind.PAYMENT: (
        frozenset({A, EntityKind.PRODUCT, EntityKind.SMART_CONTRACT}),
        None,
    ),
    EventKind.FOLLOW: (frozenset({A}), None),
    EventKind.CREATE: (frozenset({EntityKind.SMART_CONTRACT}), None),
    EventKind.CALL: (frozenset({EntityKind.SMART_CONTRACT}), None),
    EventKind.MENTION: (frozenset({A}), None),
    EventKind.PROVIDE: (frozenset({EntityKind.PRODUCT}), None),
    EventKind.RELATE: (frozenset({EntityKind.POST, EntityKind.PRODUCT}), EntityKind.TAG),
}

# single-edge kinds: actor -> target
_DIRECT = {
    EventKind.VOTE: R.VOTES,
    EventKind.POST: R.AUTHORS,
    EventKind.PAYMENT: R.PAYS,
    EventKind.FOLLOW: R.FOLLOWS,
    EventKind.CREATE: R.CREATES,
    EventKind.CALL: R.CALLS,
    EventKind.MENTION: R.MENTIONS,
    EventKind.PROVIDE: R.PROVIDES,
}


@dataclass(frozen=True, slots=True)
class Event:
    kind: EventKind
    actor: NodeId
    target: NodeId
    timestamp: int
    parent: Optional[NodeId] = None
    amount: Optional[Decimal] = None
    currency: Optional[str] = None
    rating: Optional[Decimal] = None
    polarity: Optional[Polarity] = None

    def __post_init__(self):
        allowed, parent_kind = COMPATIBILITY[self.kind]
        if self.actor.kind is not A:
            raise ValidationError(f"{self.kind.label}: actor must be an account, got {self.actor}")
        if self.target.kind not in allowed:
            raise ValidationError(f"{self.kind.label}: incompatible target {self.target}")
        if parent_kind is not None:
            if self.parent is None:
                raise ValidationError(f"{self.kind.label}: parent is required")
            if self.parent.kind is not parent_kind:
                raise ValidationError(f"{self.kind.label}: incompatible parent {self.parent}")
        elif self.parent is not None:
            raise ValidationError(f"{self.kind.label}: takes no parent")
        if self.kind is EventKind.PAYMENT and (self.amount is None or self.currency is None):
            raise ValidationError("payment: amount and currency are required")
        if self.amount is not None:
            if self.amount < 0:
                raise ValidationError(f"negative amount {self.amount}")
            if self.currency is None:
                raise ValidationError("amount given without currency")
        if self.kind is EventKind.VOTE and self.polarity is None:
            raise ValidationError("vote: polarity is required")
        if self.kind is not EventKind.VOTE and self.polarity is not None:
            raise ValidationError(f"{self.kind.label}: polarity only applies to votes")
        if self.rating is not None and not (0 <= self.rating <= 1):
            raise ValidationError(f"rating {self.rating} outside [0, 1]")


_KINDS_BY_LABEL = {k.label: k for k in EventKind}
_decode = json.JSONDecoder().decode
_POLARITIES = {p.value: p for p in Polarity}


def _node(obj: dict, name: str, required: bool = True) -> Optional[NodeId]:
    raw = obj.get(name)
    if raw is None:
        if required:
            raise ValidationError(f"missing field {name!r}")
        return None
    if not isinstance(raw, str):
        raise ValidationError(f"{name} must be a string")
    try:
        return parse_node(raw)
    except ValueError as exc:
        raise ValidationError(f"{name}: {exc}") from None


def _decimal(obj: dict, name: str) -> Optional[Decimal]:
    raw = obj.get(name)
    if raw is None:
        return None
    try:
        return to_decimal(raw)
    except (InvalidOperation, ValueError):
        raise ValidationError(f"{name} is not a decimal: {raw!r}") from None


def parse_event_line(line: str, params: Optional[EngineParams] = None) -> Event:
    """Parse and validate one JSON event line.

    Unknown fields are ignored. When ``params`` is given the currency must be
    in its currency table.
    """
    try:
        obj = _decode(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ParseError("event must be a JSON object")

    kind = _KINDS_BY_LABEL.get(obj.get("kind"))
    if kind is None:
        raise ValidationError(f"unknown or missing event kind {obj.get('kind')!r}")
    ts = obj.get("ts")
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise ValidationError(f"ts must be an integer, got {ts!r}")
    polarity = obj.get("polarity")
    if polarity is not None:
        try:
            polarity = _POLARITIES[polarity]
        except (KeyError, TypeError):
            raise ValidationError(f"bad polarity {polarity!r}") from None
    currency = obj.get("currency")
    if currency is not None:
        if not isinstance(currency, str) or not currency:
            raise ValidationError(f"bad currency {currency!r}")
        if params is not None and currency not in params.currency_table:
            raise UnknownCurrency(f"unknown currency {currency!r}")

    return Event(
        kind=kind,
        actor=_node(obj, "actor"),
        target=_node(obj, "target"),
        timestamp=ts,
        parent=_node(obj, "parent", required=False),
        amount=_decimal(obj, "amount"),
        currency=currency,
        rating=_decimal(obj, "rating"),
        polarity=polarity,
    )


def event_to_dict(ev: Event) -> dict:
    """Inverse of :func:`parse_event_line`, minus absent optionals."""
    out = {"kind": ev.kind.label, "actor": str(ev.actor), "target": str(ev.target)}
    if ev.parent is not None:
        out["parent"] = str(ev.parent)
    out["ts"] = ev.timestamp
    if ev.amount is not None:
        out["amount"] = format(ev.amount, "f")
    if ev.currency is not None:
        out["currency"] = ev.currency
    if ev.rating is not None:
        out["rating"] = format(ev.rating, "f")
    if ev.polarity is not None:
        out["polarity"] = ev.polarity.value
    return out


def event_to_edges(
    ev: Event, params: Optional[EngineParams] = None
) -> list[tuple[NodeId, RelationKind, NodeId, TransactionRecord]]:
    """Map an event to ontology edges.

    Amounts are converted into base units with ``params.currency_table``;
    without params they are taken as already in base units.
    """
    amount = ev.amount
    if amount is not None and params is not None:
        try:
            amount = EXACT.multiply(amount, params.currency_table[ev.currency])
        except KeyError:
            raise UnknownCurrency(f"unknown currency {ev.currency!r}") from None
    rec = TransactionRecord(
        timestamp=ev.timestamp,
        amount=amount,
        currency=ev.currency,
        rating=ev.rating,
        polarity=ev.polarity,
    )
    if ev.kind is EventKind.COMMENT:
        return [
            (ev.actor, R.AUTHORS, ev.target, rec),
            (ev.target, R.RELATES, ev.parent, TransactionRecord(ev.timestamp)),
        ]
    if ev.kind is EventKind.RELATE:
        return [(ev.target, R.RELATES, ev.parent, rec)]
    return [(ev.actor, _DIRECT[ev.kind], ev.target, rec)]


class DerivedRating(NamedTuple):
    rater: NodeId
    ratee: NodeId
    quality: float
    weight: float
    source_kind: EventKind

    def sort_key(self):
        return (self.rater, self.ratee, self.source_kind)


@dataclass
class Derivation:
    ratings: list[DerivedRating]
    self_pair_count: int = 0
    dangling_count: int = 0


def derive(evidence, params: EngineParams) -> Derivation:
    """Project a sealed evidence subgraph into direct ratings, with tallies."""
    if not getattr(evidence, "sealed", False):
        raise NotSealed("ratings are derived from sealed evidence only")
    out: list[DerivedRating] = []
    append = out.append
    self_pairs = 0
    dangling = 0
    sources = evidence.sources
    q_up, q_down, q_comment = params.q_vote_up, params.q_vote_down, params.q_comment
    weights: dict = {}

    for src, rel, dst, ev in evidence.iter_edges():
        if rel is R.VOTES:
            authors = sources(dst, R.AUTHORS)
            if not authors:
                dangling += len(ev)
                continue
            for rec in ev:
                q = q_up if rec.polarity is Polarity.UP else q_down
                for author in authors:
                    if author == src:
                        self_pairs += 1
                    else:
                        append(DerivedRating(src, author, q, 1.0, EventKind.VOTE))
        elif rel is R.RELATES and dst.kind is EntityKind.POST:
            # reply edge comment -> parent post
            commenters = sources(src, R.AUTHORS)
            parent_authors = sources(dst, R.AUTHORS)
            if not commenters or not parent_authors:
                dangling += len(ev)
                continue
            for _ in ev:
                for commenter in commenters:
                    for author in parent_authors:
                        if author == commenter:
                            self_pairs += 1
                        else:
                            append(DerivedRating(commenter, author, q_comment, 1.0,
                                                 EventKind.COMMENT))
        elif rel is R.PAYS and dst.kind is A:
            if src == dst:
                self_pairs += len(ev)
                continue
            for rec in ev:
                q = float(rec.rating) if rec.rating is not None else params.q_payment
                amount = rec.amount or 0
                w = weights.get(amount)
                if w is None:
                    w = weights[amount] = financial_weight(amount, params)
                append(DerivedRating(src, dst, q, w, EventKind.PAYMENT))

    out.sort(key=DerivedRating.sort_key)
    return Derivation(out, self_pairs, dangling)


def tally(evidence) -> tuple[int, int]:
    """``(self_pair_count, dangling_count)`` of :func:`derive`, without the ratings."""
    self_pairs = dangling = 0
    by_dst = evidence._by_dst
    for (src, rel, dst), ev in evidence.edges.items():
        if rel is R.VOTES:
            authors = by_dst.get((dst, R.AUTHORS))
            if not authors:
                dangling += len(ev)
            else:
                self_pairs += len(ev) * authors.count(src)
        elif rel is R.RELATES and dst.kind is EntityKind.POST:
            commenters = by_dst.get((src, R.AUTHORS))
            parent_authors = by_dst.get((dst, R.AUTHORS))
            if not commenters or not parent_authors:
                dangling += len(ev)
            else:
                self_pairs += len(ev) * sum(parent_authors.count(c) for c in commenters)
        elif rel is R.PAYS and dst.kind is A and src == dst:
            self_pairs += len(ev)
    return self_pairs, dangling


def derive_ratings(evidence: TemporalSubgraph, params: EngineParams) -> list[DerivedRating]:
    return derive(evidence, params).ratings

