import json

import pytest

from repgraph.errors import SealedPeriod, StateGap, UnorderedInput, ValidationError
from repgraph.persistence import DataRoot, MemoryRoot
from repgraph.pipeline import ingest, update

DAY = 86400


def line(kind, actor, target, ts, **kw):
    return json.dumps({"kind": kind, "actor": actor, "target": target, "ts": ts, **kw})


def follow(ts, a="acct:a", b="acct:b"):
    return line("follow", a, b, ts)


def test_order_within_a_period_is_free():
    a, b = MemoryRoot(), MemoryRoot()
    evs = [follow(10), follow(5, "acct:b", "acct:a"), follow(DAY + 3)]
    ingest(evs, a)
    ingest([evs[1], evs[0], evs[2]], b)
    assert a.files == b.files


def test_period_regression_is_rejected_and_nothing_written(tmp_path):
    root = DataRoot(tmp_path)
    with pytest.raises(UnorderedInput, match="<input>:3"):
        ingest([follow(0), follow(2 * DAY), follow(DAY)], root)
    assert root.evidence_periods() == []
    assert [p.name for p in tmp_path.iterdir()] == []


def test_bad_line_discards_staged_periods(tmp_path):
    root = DataRoot(tmp_path)
    with pytest.raises(ValidationError, match="x.jsonl:3"):
        ingest([follow(0), follow(DAY), '{"kind":"follow"}'], root, name="x.jsonl")
    assert root.evidence_periods() == []
    assert list(tmp_path.iterdir()) == []


def test_gaps_are_filled_across_old_and_new_evidence():
    root = MemoryRoot()
    ingest([follow(0)], root)
    summaries = ingest([follow(3 * DAY + 1)], root)
    assert [s.period for s in summaries] == [1, 2, 3]
    assert [s.events for s in summaries] == [0, 0, 1]
    assert root.evidence_periods() == [0, 1, 2, 3]
    assert root.load_subgraph(2).record_count == 0


def test_earlier_evidence_can_be_prepended():
    root = MemoryRoot()
    ingest([follow(5 * DAY)], root)
    ingest([follow(2 * DAY)], root)
    assert root.evidence_periods() == [2, 3, 4, 5]


def test_sealed_period_rejected():
    root = MemoryRoot()
    ingest([follow(0)], root)
    with pytest.raises(SealedPeriod, match="period 0"):
        ingest([follow(7)], root)
    assert root.evidence_periods() == [0]


def test_ingest_holds_one_subgraph_at_a_time():
    # max_resident=1 inside ingest raises if a second graph were opened
    root = MemoryRoot()
    ingest([follow(p * DAY) for p in range(30)], root)
    assert root.evidence_periods() == list(range(30))


def test_update_resume_and_gap():
    root = MemoryRoot()
    ingest([follow(p * DAY) for p in range(4)], root)
    assert [s.period for s in update(root, end=1)] == [0, 1]
    assert [s.period for s in update(root)] == [2, 3]
    assert update(root) == []
    with pytest.raises(StateGap):
        update(_without_state(root, 1), start=2)


def _without_state(root, period):
    copy = MemoryRoot()
    copy.files = {k: v for k, v in root.files.items() if k != ("state", period)}
    return copy
