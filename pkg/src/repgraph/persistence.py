"""Canonical text files for evidence subgraphs and reputation states.

Layout under a data root::

    evidence/<day_index>.tsv   one row per transaction record, with header
    state/<day_index>.tsv      account<TAB>value, 12 decimals, no header

Both formats are canonical: equal content always yields identical bytes,
and loading then saving a file reproduces it exactly.
"""
from __future__ import annotations

import csv
import io
import math
import os
import shutil
import tempfile
from decimal import InvalidOperation
from pathlib import Path
from typing import Iterable, Optional, Union

from .engine import STATE_DIGITS, ReputationState
from .errors import CorruptFile, InvalidRecord, MissingState, NotSealed, UnknownPeriod
from .temporal_graph import (
    DAY_SECONDS,
    EntityKind,
    NodeId,
    Polarity,
    RelationKind,
    TemporalSubgraph,
    TransactionRecord,
    parse_node,
)

EVIDENCE_HEADER = "src\trel\tdst\tts\tamount\tcurrency\trating\tpolarity"
EVIDENCE, STATE = "evidence", "state"
_POLARITIES = {p.value: p for p in Polarity}


def format_value(value: float) -> str:
    return f"{value:.{STATE_DIGITS}f}"


def _opt(value) -> str:
    return "" if value is None else str(value)


def _dec(value) -> str:
    # format "f" never switches to exponent notation
    return "" if value is None else format(value, "f")


def dump_subgraph(g) -> str:
    lines = [EVIDENCE_HEADER]
    for src, rel, dst, ev in g.iter_edges():
        prefix = f"{src}\t{rel.label}\t{dst}\t"
        for rec in ev:
            polarity = rec.polarity.value if rec.polarity is not None else ""
            lines.append(
                f"{prefix}{rec.timestamp}\t{_dec(rec.amount)}\t{_opt(rec.currency)}"
                f"\t{_dec(rec.rating)}\t{polarity}"
            )
    return "\n".join(lines) + "\n"


def parse_subgraph(
    text: str, period: int, period_seconds: int = DAY_SECONDS, name: str = "<evidence>"
) -> TemporalSubgraph:
    lines = text.split("\n")
    if not lines or lines[0] != EVIDENCE_HEADER:
        raise CorruptFile(f"{name}: missing or wrong header")
    if lines[-1] != "":
        raise CorruptFile(f"{name}: missing final newline")
    g = TemporalSubgraph(period, period_seconds)
    lo, hi = g.start, g.end
    for lineno, line in enumerate(lines[1:-1], 2):
        cols = line.split("\t")
        if len(cols) != 8:
            raise CorruptFile(f"{name}:{lineno}: expected 8 columns, got {len(cols)}")
        src, rel, dst, ts, amount, currency, rating, polarity = cols
        try:
            ts = int(ts)
            if not lo <= ts < hi:
                raise ValueError(f"timestamp {ts} outside period {period}")
            rec = TransactionRecord(
                timestamp=ts,
                amount=amount or None,
                currency=currency or None,
                rating=rating or None,
                polarity=_POLARITIES[polarity] if polarity else None,
            )
            # range already checked above; skip the per-record checks of add_edge
            g._edge_value(parse_node(src), RelationKind.from_label(rel), parse_node(dst))._append(rec)
        except (ValueError, KeyError, InvalidOperation, InvalidRecord) as exc:
            raise CorruptFile(f"{name}:{lineno}: {exc}") from None
    g.seal()
    return g


def dump_state(state: ReputationState) -> str:
    rows = sorted(state.values.items(), key=lambda kv: kv[0].sort_key)
    return "".join(f"{acct}\t{format_value(v)}\n" for acct, v in rows)


def parse_state(text: str, period: int, name: str = "<state>") -> ReputationState:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        cols = line.split("\t")
        if len(cols) != 2:
            raise CorruptFile(f"{name}:{lineno}: expected 2 columns")
        try:
            acct = parse_node(cols[0])
            value = float(cols[1])
        except ValueError as exc:
            raise CorruptFile(f"{name}:{lineno}: {exc}") from None
        if acct.kind is not EntityKind.ACCOUNT:
            raise CorruptFile(f"{name}:{lineno}: {acct} is not an account")
        if math.isnan(value) or not (0.0 <= value <= 1.0):
            raise CorruptFile(f"{name}:{lineno}: value {cols[1]} outside [0, 1]")
        values[acct] = value
    return ReputationState(period, values)


class _Root:
    """Period-file storage; subclasses provide raw text reads and writes."""

    period_seconds = DAY_SECONDS

    def _read(self, kind: str, period: int) -> Optional[str]:
        raise NotImplementedError

    def _write(self, kind: str, period: int, text: str) -> None:
        raise NotImplementedError

    def _periods(self, kind: str) -> list[int]:
        raise NotImplementedError

    def _name(self, kind: str, period: int) -> str:
        return f"{kind}/{period}.tsv"

    def save_subgraph(self, g: TemporalSubgraph) -> None:
        if not g.sealed:
            raise NotSealed(f"period {g.period} must be sealed before saving")
        self._write(EVIDENCE, g.period, dump_subgraph(g))

    def load_subgraph(self, period: int) -> TemporalSubgraph:
        text = self._read(EVIDENCE, period)
        if text is None:
            raise UnknownPeriod(f"no evidence saved for period {period}")
        return parse_subgraph(text, period, self.period_seconds, self._name(EVIDENCE, period))

    def has_subgraph(self, period: int) -> bool:
        return period in self._periods(EVIDENCE)

    def evidence_periods(self) -> list[int]:
        return self._periods(EVIDENCE)

    def save_state(self, state: ReputationState) -> None:
        self._write(STATE, state.period, dump_state(state))

    def load_state(self, period: int) -> ReputationState:
        text = self._read(STATE, period)
        if text is None:
            raise MissingState(f"no state saved for period {period}")
        return parse_state(text, period, self._name(STATE, period))

    def has_state(self, period: int) -> bool:
        return period in self._periods(STATE)

    def state_periods(self) -> list[int]:
        return self._periods(STATE)

    def raw_text(self, kind: str, period: int) -> Optional[str]:
        return self._read(kind, period)

    def stage(self) -> "_Root":
        """A scratch root whose evidence files :meth:`commit` moves in here."""
        raise NotImplementedError

    def commit(self, staged: "_Root") -> None:
        raise NotImplementedError

    def discard(self, staged: "_Root") -> None:
        pass


class DataRoot(_Root):
    """Period files under a directory; writes are atomic (temp file + rename)."""

    def __init__(self, path: Union[str, Path], period_seconds: int = DAY_SECONDS):
        self.path = Path(path)
        self.period_seconds = period_seconds

    def file(self, kind: str, period: int) -> Path:
        return self.path / kind / f"{period}.tsv"

    def _read(self, kind, period):
        try:
            return self.file(kind, period).read_bytes().decode("utf-8")
        except FileNotFoundError:
            return None

    def _write(self, kind, period, text):
        target = self.file(kind, period)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{period}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(text.encode("utf-8"))
            os.replace(tmp, target)
        except BaseException:
            os.unlink(tmp)
            raise

    def _periods(self, kind):
        d = self.path / kind
        if not d.is_dir():
            return []
        out = []
        for p in d.glob("*.tsv"):
            try:
                out.append(int(p.stem))
            except ValueError:
                continue
        return sorted(out)

    def has_subgraph(self, period):
        return self.file(EVIDENCE, period).is_file()

    def has_state(self, period):
        return self.file(STATE, period).is_file()

    def stage(self) -> "DataRoot":
        self.path.mkdir(parents=True, exist_ok=True)
        return DataRoot(tempfile.mkdtemp(prefix=".staging-", dir=self.path), self.period_seconds)

    def commit(self, staged: "DataRoot") -> None:
        (self.path / EVIDENCE).mkdir(parents=True, exist_ok=True)
        for p in staged.evidence_periods():
            os.replace(staged.file(EVIDENCE, p), self.file(EVIDENCE, p))
        self.discard(staged)

    def discard(self, staged: "DataRoot") -> None:
        shutil.rmtree(staged.path, ignore_errors=True)

    def __repr__(self):
        return f"DataRoot({str(self.path)!r})"


class MemoryRoot(_Root):
    """Same interface as :class:`DataRoot`, holding the file texts in memory."""

    def __init__(self, period_seconds: int = DAY_SECONDS):
        self.period_seconds = period_seconds
        self.files: dict[tuple[str, int], str] = {}

    def _read(self, kind, period):
        return self.files.get((kind, period))

    def _write(self, kind, period, text):
        self.files[(kind, period)] = text

    def _periods(self, kind):
        return sorted(p for k, p in self.files if k == kind)

    def has_subgraph(self, period):
        return (EVIDENCE, period) in self.files

    def has_state(self, period):
        return (STATE, period) in self.files

    def stage(self) -> "MemoryRoot":
        return MemoryRoot(self.period_seconds)

    def commit(self, staged: "MemoryRoot") -> None:
        self.files.update(staged.files)


def export_dynamics(
    root: _Root,
    accounts: Iterable[Union[str, NodeId]],
    start: int,
    end: int,
    default: float = 0.5,
) -> str:
    """Plot-ready CSV ``period,account,reputation`` over ``[start, end]``."""
    nodes = {a if isinstance(a, NodeId) else parse_node(a) for a in accounts}
    ordered = sorted(nodes, key=lambda n: n.sort_key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["period", "account", "reputation"])
    for p in range(start, end + 1):
        values = root.load_state(p).values
        for acct in ordered:
            writer.writerow([p, str(acct), format_value(values.get(acct, default))])
    return buf.getvalue()
