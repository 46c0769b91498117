"""Synthetic cohort streams and evaluation of reputation dynamics.

Cohort members receive Poisson-distributed endorsements (upvotes on a post
they wrote that day, or payments) from a fixed pool of raters while inside
their active window, and nothing afterwards. Comparing a cohort endorsed
throughout against one whose endorsements stop shows whether reputation
persists for the former and decays for the latter.
"""
from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np

from .errors import InvalidConfig, MissingPeriods, UnlabeledAccount
from .ontology import Event, EventKind, event_to_dict
from .params import DEFAULT_CURRENCY, iter_kv
from .temporal_graph import DAY_SECONDS, EntityKind, NodeId, Polarity


@dataclass(frozen=True)
class CohortSpec:
    name: str
    size: int
    inbound_rate: float
    payment_amount_range: tuple[float, float] = (1.0, 100.0)
    # inclusive period interval
    active_window: tuple[int, int] = (0, 0)
    payment_fraction: float = 0.5


@dataclass(frozen=True)
class SimConfig:
    seed: int
    n_periods: int
    cohorts: tuple[CohortSpec, ...]
    rater_pool_size: int = 50
    currency: str = DEFAULT_CURRENCY
    period_seconds: int = DAY_SECONDS

    def validate(self) -> None:
        if self.n_periods <= 0:
            raise InvalidConfig("n_periods must be positive")
        if self.rater_pool_size <= 0:
            raise InvalidConfig("rater_pool_size must be positive")
        if not self.cohorts:
            raise InvalidConfig("at least one cohort is required")
        names = set()
        for c in self.cohorts:
            if not c.name or c.name in names:
                raise InvalidConfig(f"cohort names must be unique and non-empty: {c.name!r}")
            names.add(c.name)
            if c.size <= 0:
                raise InvalidConfig(f"cohort {c.name}: size must be positive")
            if c.inbound_rate < 0:
                raise InvalidConfig(f"cohort {c.name}: inbound_rate must be >= 0")
            lo, hi = c.payment_amount_range
            if lo < 0 or hi < lo:
                raise InvalidConfig(f"cohort {c.name}: bad payment_amount_range")
            a, b = c.active_window
            if not (0 <= a <= b < self.n_periods):
                raise InvalidConfig(
                    f"cohort {c.name}: active_window must lie within [0, {self.n_periods})"
                )
            if not (0 <= c.payment_fraction <= 1):
                raise InvalidConfig(f"cohort {c.name}: payment_fraction must be in [0, 1]")

    def members(self, cohort: CohortSpec) -> list[NodeId]:
        return [NodeId.account(f"{cohort.name}{i:03d}") for i in range(cohort.size)]

    def raters(self) -> list[NodeId]:
        return [NodeId.account(f"rater{i:04d}") for i in range(self.rater_pool_size)]

    def labels(self) -> dict[str, str]:
        return {str(m): c.name for c in self.cohorts for m in self.members(c)}

    @classmethod
    def from_text(cls, text: str) -> "SimConfig":
        top: dict[str, str] = {}
        sections: list[dict[str, str]] = []
        current = top
        for lineno, key, value in iter_kv(text):
            if key.startswith("["):
                if key != "[cohort]":
                    raise InvalidConfig(f"line {lineno}: unknown section {key}")
                current = {}
                sections.append(current)
            else:
                current[key] = value
        try:
            cohorts = tuple(_cohort(s) for s in sections)
            cfg = cls(
                seed=int(top.pop("seed", "0")),
                n_periods=int(top.pop("n_periods")),
                cohorts=cohorts,
                rater_pool_size=int(top.pop("rater_pool_size", "50")),
                currency=top.pop("currency", DEFAULT_CURRENCY),
                period_seconds=int(top.pop("period_seconds", str(DAY_SECONDS))),
            )
        except KeyError as exc:
            raise InvalidConfig(f"missing key {exc.args[0]}") from None
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from None
        if top:
            raise InvalidConfig(f"unknown keys: {', '.join(sorted(top))}")
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SimConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _pair(text: str, conv) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated values, got {text!r}")
    return conv(parts[0]), conv(parts[1])


def _cohort(s: dict[str, str]) -> CohortSpec:
    s = dict(s)
    spec = CohortSpec(
        name=s.pop("name"),
        size=int(s.pop("size")),
        inbound_rate=float(s.pop("inbound_rate")),
        payment_amount_range=_pair(s.pop("payment_amount_range", "1, 100"), float),
        active_window=_pair(s.pop("active_window"), int),
        payment_fraction=float(s.pop("payment_fraction", "0.5")),
    )
    if s:
        raise ValueError(f"unknown cohort keys: {', '.join(sorted(s))}")
    return spec


def generate_events(cfg: SimConfig) -> list[str]:
    """Event lines for ``cfg``, sorted by timestamp; identical for equal seeds."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    raters = cfg.raters()
    rows: list[tuple[int, str]] = []

    def emit(ev: Event):
        rows.append((ev.timestamp, json.dumps(event_to_dict(ev), separators=(",", ":"))))

    span = cfg.period_seconds
    for p in range(cfg.n_periods):
        start = p * span
        for cohort in cfg.cohorts:
            first, last = cohort.active_window
            if not first <= p <= last:
                continue
            lo, hi = cohort.payment_amount_range
            for member in cfg.members(cohort):
                n = int(rng.poisson(cohort.inbound_rate))
                if n == 0:
                    continue
                post = NodeId(EntityKind.POST, f"{member.id}-{p}")
                t_post = start + int(rng.integers(0, span // 2))
                emit(Event(EventKind.POST, member, post, t_post))
                for _ in range(n):
                    rater = raters[int(rng.integers(len(raters)))]
                    ts = int(rng.integers(t_post, start + span))
                    if rng.random() < cohort.payment_fraction:
                        amount = Decimal(str(round(float(rng.uniform(lo, hi)), 2)))
                        emit(Event(EventKind.PAYMENT, rater, member, ts,
                                   amount=amount, currency=cfg.currency))
                    else:
                        emit(Event(EventKind.VOTE, rater, post, ts, polarity=Polarity.UP))
    rows.sort()
    return [line for _, line in rows]


def expected_endorsements(cfg: SimConfig) -> float:
    """Mean number of vote + payment events (Poisson total rate)."""
    total = 0.0
    for c in cfg.cohorts:
        a, b = c.active_window
        total += c.size * (b - a + 1) * c.inbound_rate
    return total


@dataclass
class DynamicsReport:
    periods: list[int]
    # cohort -> per-period mean reputation, aligned with ``periods``
    means: dict[str, list[float]]
    auc: Optional[float]
    half_life: dict[str, Optional[int]] = field(default_factory=dict)

    def to_lines(self) -> list[str]:
        lines = [f"periods: {self.periods[0]}..{self.periods[-1]}" if self.periods else "periods: none"]
        lines.append("auc: " + ("none" if self.auc is None else f"{self.auc:.6f}"))
        for name in sorted(self.means):
            hl = self.half_life.get(name)
            lines.append(f"half_life.{name}: {'none' if hl is None else hl}")
        for name in sorted(self.means):
            for p, m in zip(self.periods, self.means[name]):
                lines.append(f"mean.{name}.{p}: {m:.6f}")
        return lines


def auc(positives, negatives) -> float:
    """Probability a positive outranks a negative; ties count one half."""
    if not positives or not negatives:
        raise ValueError("both groups must be non-empty")
    wins = 0.0
    for x in positives:
        for y in negatives:
            if x > y:
                wins += 1.0
            elif x == y:
                wins += 0.5
    return wins / (len(positives) * len(negatives))


def half_life(series, stop: Optional[int] = None) -> Optional[int]:
    """Periods after ``stop`` until the series first drops below half its peak.

    ``stop`` is an index into ``series``; by default it is where the final
    decline begins (the last index whose value rose over its predecessor).
    Returns None if the series never drops that far.
    """
    if not series:
        return None
    peak = max(series)
    if peak <= 0:
        return None
    if stop is None:
        stop = 0
        for i in range(1, len(series)):
            if series[i] > series[i - 1]:
                stop = i
    for k, v in enumerate(series[stop + 1:], 1):
        if v < peak / 2:
            return k
    return None


def read_labels(text: str) -> dict[str, str]:
    labels = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 2 or not cols[0] or not cols[1]:
            raise InvalidConfig(f"labels line {lineno}: expected account<TAB>cohort")
        labels[cols[0]] = cols[1]
    return labels


def format_labels(labels: Mapping[str, str]) -> str:
    return "".join(f"{a}\t{c}\n" for a, c in sorted(labels.items()))


def evaluate_dynamics(
    dynamics_csv: str,
    labels: Mapping[str, str],
    positive: str = "whale",
    negative: str = "blacklist",
    stops: Optional[Mapping[str, int]] = None,
) -> DynamicsReport:
    """Per-cohort means, final-period AUC of ``positive`` over ``negative``,
    and per-cohort decay half-lives.

    ``stops`` optionally maps a cohort to the period its endorsements ended.
    """
    table: dict[str, dict[int, float]] = defaultdict(dict)
    reader = csv.DictReader(io.StringIO(dynamics_csv))
    if reader.fieldnames != ["period", "account", "reputation"]:
        raise InvalidConfig("dynamics CSV must have header period,account,reputation")
    for row in reader:
        acct = row["account"]
        if acct not in labels:
            raise UnlabeledAccount(f"account {acct} has no cohort label")
        table[acct][int(row["period"])] = float(row["reputation"])

    all_periods = sorted({p for series in table.values() for p in series})
    if all_periods:
        expected = list(range(all_periods[0], all_periods[-1] + 1))
        if all_periods != expected:
            raise MissingPeriods("dynamics CSV skips periods")
        for acct, series in table.items():
            if len(series) != len(expected):
                raise MissingPeriods(f"account {acct} lacks some periods")

    cohorts: dict[str, list[str]] = defaultdict(list)
    for acct in table:
        cohorts[labels[acct]].append(acct)
    means = {
        name: [sum(table[a][p] for a in accts) / len(accts) for p in all_periods]
        for name, accts in cohorts.items()
    }
    score = None
    if all_periods and positive in cohorts and negative in cohorts:
        last = all_periods[-1]
        score = auc(
            [table[a][last] for a in cohorts[positive]],
            [table[a][last] for a in cohorts[negative]],
        )
    return DynamicsReport(
        periods=all_periods,
        means=means,
        auc=score,
        half_life={
            name: half_life(series, _stop_index(all_periods, (stops or {}).get(name)))
            for name, series in means.items()
        },
    )


def _stop_index(periods: list[int], stop: Optional[int]) -> Optional[int]:
    if stop is None or not periods:
        return None
    return min(max(stop - periods[0], 0), len(periods) - 1)
