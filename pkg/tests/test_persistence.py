import random
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repgraph.engine import ReputationState, replay_range
from repgraph.errors import CorruptFile, MissingState, NotSealed, UnknownPeriod
from repgraph.params import EngineParams
from repgraph.persistence import (
    EVIDENCE_HEADER,
    DataRoot,
    MemoryRoot,
    dump_state,
    dump_subgraph,
    export_dynamics,
    parse_state,
    parse_subgraph,
)
from repgraph.pipeline import ingest, update
from repgraph.temporal_graph import (
    GraphStore,
    NodeId,
    Polarity,
    RelationKind,
    TemporalSubgraph,
    TransactionRecord,
)

from conftest import FUZZ_CURRENCIES, acct
from streams import random_events, to_lines

nodes = st.sampled_from(["acct:a", "acct:b", "acct:zz", "post:a", "post:p1", "prod:x", "tag:t", "sc:k"]).map(NodeId.parse)
records = st.builds(
    TransactionRecord,
    timestamp=st.integers(86400, 2 * 86400 - 1),
    amount=st.none() | st.decimals(min_value=0, max_value=10**9, places=6, allow_nan=False),
    currency=st.none() | st.sampled_from(["BASE", "XYZ"]),
    rating=st.none() | st.decimals(min_value=0, max_value=1, places=3, allow_nan=False),
    polarity=st.none() | st.sampled_from(list(Polarity)),
)
edges = st.lists(st.tuples(nodes, st.sampled_from(list(RelationKind)), nodes, records), max_size=30)


def build(edge_list, period=1):
    g = TemporalSubgraph(period)
    for e in edge_list:
        g.add_edge(*e)
    g.seal()
    return g


@given(edges)
def test_subgraph_round_trip(edge_list):
    text = dump_subgraph(build(edge_list))
    again = parse_subgraph(text, 1)
    assert again.sealed
    assert dump_subgraph(again) == text
    assert again.edges == build(edge_list).edges


@given(edges, st.randoms(use_true_random=False))
def test_canonical_regardless_of_insertion_order(edge_list, rnd):
    # distinct timestamps so that record order is fully determined
    edge_list = [(s, r, d, TransactionRecord(86400 + i, rec.amount, rec.currency, rec.rating, rec.polarity))
                 for i, (s, r, d, rec) in enumerate(edge_list)]
    shuffled = list(edge_list)
    rnd.shuffle(shuffled)
    assert dump_subgraph(build(edge_list)) == dump_subgraph(build(shuffled))


def test_empty_subgraph_is_header_only():
    text = dump_subgraph(build([]))
    assert text == EVIDENCE_HEADER + "\n"
    assert len(parse_subgraph(text, 1)) == 0


def test_row_format():
    g = build([(acct("a"), RelationKind.PAYS, acct("b"), TransactionRecord(86401, Decimal("10.50"), "XYZ", Decimal("0.5")))])
    assert dump_subgraph(g).splitlines()[1] == "acct:a\tPays\tacct:b\t86401\t10.5\tXYZ\t0.5\t"


def test_tiny_amounts_never_use_exponent_notation():
    g = build([(acct("a"), RelationKind.PAYS, acct("b"), TransactionRecord(86401, Decimal("1E-9"), "XYZ"))])
    assert "\t0.000000001\t" in dump_subgraph(g)


@pytest.mark.parametrize(
    "row",
    [
        "acct:a\tPays\tacct:b\t86401\t-1\tXYZ\t\t",
        "acct:a\tPays\tacct:b\t86401\t1\tXYZ\t1.5\t",
        "acct:a\tPays\tacct:b\t5\t1\tXYZ\t\t",
        "acct:a\tLoves\tacct:b\t86401\t\t\t\t",
        "acct:a\tPays\tnobody\t86401\t\t\t\t",
        "acct:a\tPays\tacct:b\t86401\t1\tXYZ\t\tmaybe",
        "acct:a\tPays\tacct:b\t86401\t1\tXYZ",
    ],
)
def test_corrupt_rows(row):
    with pytest.raises(CorruptFile):
        parse_subgraph(f"{EVIDENCE_HEADER}\n{row}\n", 1)


def test_corrupt_header():
    with pytest.raises(CorruptFile):
        parse_subgraph("src\trel\n", 1)


def test_save_requires_sealed():
    with pytest.raises(NotSealed):
        MemoryRoot().save_subgraph(TemporalSubgraph(0))


def test_state_format():
    assert dump_state(ReputationState(0, {acct("b"): 0.6})) == "acct:b\t0.600000000000\n"


def test_state_range_check():
    with pytest.raises(CorruptFile):
        parse_state("acct:b\t1.5\n", 0)
    with pytest.raises(CorruptFile):
        parse_state("acct:b\tnan\n", 0)
    with pytest.raises(CorruptFile):
        parse_state("post:b\t0.5\n", 0)


@given(st.dictionaries(st.sampled_from(["a", "b", "c", "d", "e1", "x y"]).map(acct),
                       st.floats(0, 1).map(lambda v: round(v, 12))))
def test_state_round_trip(values):
    state = ReputationState(3, values)
    text = dump_state(state)
    again = parse_state(text, 3)
    assert again == state
    assert dump_state(again) == text


def test_data_root_layout_and_atomicity(tmp_path):
    root = DataRoot(tmp_path)
    root.save_subgraph(build([], period=4))
    root.save_state(ReputationState(4, {acct("a"): 0.25}))
    assert (tmp_path / "evidence" / "4.tsv").read_text() == EVIDENCE_HEADER + "\n"
    assert (tmp_path / "state" / "4.tsv").read_text() == "acct:a\t0.250000000000\n"
    assert root.evidence_periods() == [4] and root.state_periods() == [4]
    assert not list(tmp_path.rglob("*.tmp"))
    with pytest.raises(UnknownPeriod):
        root.load_subgraph(5)
    with pytest.raises(MissingState):
        root.load_state(5)


def test_export_dynamics():
    root = MemoryRoot()
    root.save_state(ReputationState(0, {acct("a"): 0.5}))
    root.save_state(ReputationState(1, {acct("a"): 0.4}))
    csv = export_dynamics(root, ["acct:a", "acct:new"], 0, 1)
    assert csv.splitlines() == [
        "period,account,reputation",
        "0,acct:a,0.500000000000",
        "0,acct:new,0.500000000000",
        "1,acct:a,0.400000000000",
        "1,acct:new,0.500000000000",
    ]
    assert export_dynamics(root, ["acct:a"], 0, 1).count("\n") == 3
    assert export_dynamics(root, ["acct:a"], 1, 0) == "period,account,reputation\n"
    with pytest.raises(MissingState):
        export_dynamics(root, ["acct:a"], 0, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_replay_over_persisted_evidence_reproduces_persisted_states(seed):
    params = EngineParams(currency_table=FUZZ_CURRENCIES)
    events = random_events(random.Random(seed), n_events=100)
    if not events:
        return
    root = MemoryRoot()
    ingest(to_lines(events), root, params)
    ps = root.evidence_periods()
    update(root, params)
    persisted = [root.raw_text("state", p) for p in ps]
    replayed = [dump_state(s) for s in replay_range(GraphStore(), ps[0], ps[-1], params, source=root)]
    assert replayed == persisted
