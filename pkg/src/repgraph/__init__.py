"""Incremental reputation computation over a period-partitioned temporal graph."""
from .engine import (
    ReputationState,
    blend,
    differential,
    get_reputation,
    normalize,
    replay_range,
    iter_updates,
    run_updates,
    update_period,
)
from .ontology import (
    DerivedRating,
    Event,
    EventKind,
    derive,
    derive_ratings,
    event_to_edges,
    parse_event_line,
)
from .params import EngineParams, financial_weight
from .persistence import DataRoot, MemoryRoot, export_dynamics
from .temporal_graph import (
    EdgeValue,
    EntityKind,
    GraphStore,
    NodeId,
    Polarity,
    RelationKind,
    TemporalSubgraph,
    TransactionRecord,
    period_of,
)

__version__ = "0.1.0"
