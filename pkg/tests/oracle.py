"""Naive reference computation straight from event dicts.

Deliberately shares nothing with the package: no graph store, no rating
projection, no engine functions. Used to cross-check the real pipeline.
"""
from __future__ import annotations

import math
from collections import defaultdict
from decimal import Decimal

DAY = 86400


def naive_ratings(events, q_up=1.0, q_down=0.0, q_comment=0.5, q_payment=1.0, currencies=None):
    """Per-day list of (rater, ratee, quality, weight, kind) plus tallies."""
    currencies = currencies or {"BASE": Decimal(1)}
    by_day = defaultdict(list)
    for ev in events:
        by_day[ev["ts"] // DAY].append(ev)
    out = {}
    for day, evs in by_day.items():
        authors = defaultdict(set)
        for ev in evs:
            if ev["kind"] in ("post", "comment"):
                authors[ev["target"]].add(ev["actor"])
        ratings, dangling, selfs = [], 0, 0

        def add(rater, ratee, q, w, kind):
            nonlocal selfs
            if rater == ratee:
                selfs += 1
            else:
                ratings.append((rater, ratee, q, w, kind))

        for ev in evs:
            k = ev["kind"]
            if k == "vote":
                if not authors[ev["target"]]:
                    dangling += 1
                for a in authors[ev["target"]]:
                    add(ev["actor"], a, q_up if ev["polarity"] == "up" else q_down, 1.0, "vote")
            elif k == "comment":
                if not authors[ev["parent"]]:
                    dangling += 1
                for a in authors[ev["parent"]]:
                    add(ev["actor"], a, q_comment, 1.0, "comment")
            elif k == "payment" and ev["target"].startswith("acct:"):
                amount = Decimal(ev["amount"]) * currencies[ev["currency"]]
                q = float(ev["rating"]) if "rating" in ev else q_payment
                add(ev["actor"], ev["target"], q, math.log10(1 + float(amount)), "payment")
        out[day] = (ratings, dangling, selfs)
    return out


def naive_states(events, first, last, alpha=0.2, default=0.5, **kw):
    """List of (day, {account: value}) for every day in [first, last]."""
    per_day = naive_ratings(events, **kw)
    state: dict[str, float] = {}
    history = []
    for day in range(first, last + 1):
        ratings = per_day.get(day, ([], 0, 0))[0]
        terms = defaultdict(list)
        for rater, ratee, q, w, _ in ratings:
            terms[ratee].append(state.get(rater, default) * q * w)
        raw = {k: math.fsum(v) for k, v in terms.items()}
        top = max(raw.values(), default=0.0)
        new = {}
        for acct in set(state) | set(raw):
            if acct in raw:
                d = raw[acct] / top if top > 0 else 0.0
                new[acct] = (1 - alpha) * state.get(acct, default) + alpha * d
            else:
                new[acct] = (1 - alpha) * state[acct]
        state = {k: min(1.0, max(0.0, round(v, 12))) for k, v in new.items()}
        history.append((day, dict(state)))
    return history
