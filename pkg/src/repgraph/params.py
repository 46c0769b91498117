"""Engine parameters and the ``key = value`` file format they are read from."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterator, Union

from .errors import InvalidConfig, NegativeAmount

DEFAULT_CURRENCY = "BASE"


def _default_currencies() -> dict[str, Decimal]:
    return {DEFAULT_CURRENCY: Decimal(1)}


@dataclass(frozen=True)
class EngineParams:
    alpha: float = 0.2
    default_reputation: float = 0.5
    log_base: float = 10.0
    q_vote_up: float = 1.0
    q_vote_down: float = 0.0
    q_comment: float = 0.5
    q_payment: float = 1.0
    period_seconds: int = 86400
    # currency code -> multiplier into base units
    currency_table: dict[str, Decimal] = field(default_factory=_default_currencies)

    def __post_init__(self):
        if not (0 < self.alpha <= 1):
            raise InvalidConfig(f"alpha must be in (0, 1], got {self.alpha}")
        if not (0 <= self.default_reputation <= 1):
            raise InvalidConfig("default_reputation must be in [0, 1]")
        if self.log_base <= 1:
            raise InvalidConfig("log_base must be greater than 1")
        for name in ("q_vote_up", "q_vote_down", "q_comment", "q_payment"):
            if not (0 <= getattr(self, name) <= 1):
                raise InvalidConfig(f"{name} must be in [0, 1]")
        if self.period_seconds <= 0:
            raise InvalidConfig("period_seconds must be positive")
        for code, mult in self.currency_table.items():
            if mult < 0:
                raise InvalidConfig(f"negative multiplier for currency {code}")

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "EngineParams":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_text(cls, text: str) -> "EngineParams":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for lineno, key, value in iter_kv(text):
            if key not in known:
                raise InvalidConfig(f"line {lineno}: unknown parameter {key!r}")
            try:
                if key == "currency_table":
                    kwargs[key] = parse_currency_table(value)
                elif key == "period_seconds":
                    kwargs[key] = int(value)
                else:
                    kwargs[key] = float(value)
            except (ValueError, InvalidOperation):
                raise InvalidConfig(f"line {lineno}: bad value for {key}: {value!r}") from None
        return cls(**kwargs)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "currency_table":
                value = ", ".join(f"{k}:{v}" for k, v in sorted(value.items()))
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


def parse_currency_table(text: str) -> dict[str, Decimal]:
    """``XYZ:1, ABC:0.25`` -> {"XYZ": Decimal("1"), "ABC": Decimal("0.25")}"""
    table = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        code, sep, mult = item.partition(":")
        if not sep or not code.strip():
            raise ValueError(f"bad currency entry {item!r}")
        table[code.strip()] = Decimal(mult.strip())
    return table


def iter_kv(text: str) -> Iterator[tuple[int, str, str]]:
    """Yield (line number, key, value) from ``key = value`` lines.

    Blank lines and ``#`` comments are skipped. Lines of the form ``[name]``
    are yielded as ``(lineno, "[name]", "")`` so callers can handle sections.
    """
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            yield lineno, line, ""
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidConfig(f"line {lineno}: expected 'key = value', got {raw!r}")
        yield lineno, key.strip(), value.strip()


def financial_weight(amount, params: EngineParams = EngineParams()) -> float:
    """Logarithmic weight of a base-currency amount: log(1 + amount)."""
    if amount < 0:
        raise NegativeAmount(f"negative amount {amount}")
    x = 1.0 + float(amount)
    if params.log_base == 10.0:
        return math.log10(x)
    return math.log(x, params.log_base)
