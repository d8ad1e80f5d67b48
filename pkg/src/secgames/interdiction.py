"""Protect-then-attack network interdiction by exhaustive bilevel search.

The defender protects up to ``k_D`` edges, then the attacker removes up to
``k_A`` unprotected edges to maximize disruption of an s-t metric. Disruption
is the residual shortest-path length (disconnection counts as a sentinel
above every finite length) or the negated residual max flow, so the inner
problem is always a maximization.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Sequence

import networkx as nx

from secgames.errors import InvalidInputError, UnsupportedSizeError

Metric = Literal["shortestPathLength", "maxFlowValue"]
MAX_ENUMERATION = 10_000_000
ORIENTATION = {
    "shortestPathLength": "attacker maximizes residual s-t distance; disconnection ranks above any finite distance",
    "maxFlowValue": "attacker minimizes residual s-t max flow (disruption = -flow)",
}


@dataclass(frozen=True)
class Edge:
    u: str
    v: str
    weight: float = 1.0
    capacity: float = 1.0


@dataclass(frozen=True)
class NetworkInstance:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    source: str
    sink: str
    metric: Metric = "shortestPathLength"
    attacker_budget: int = 0
    defender_budget: int = 0

    def __post_init__(self) -> None:
        nodes = tuple(self.nodes)
        edges = tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges)
        if len(set(nodes)) != len(nodes):
            raise InvalidInputError("node labels must be distinct")
        known = set(nodes)
        for name in ("source", "sink"):
            if getattr(self, name) not in known:
                raise InvalidInputError(f"{name} {getattr(self, name)!r} is not a node")
        if self.source == self.sink:
            raise InvalidInputError("source and sink must differ")
        for e in edges:
            if e.u not in known or e.v not in known:
                raise InvalidInputError(f"edge ({e.u!r}, {e.v!r}) uses an unknown node")
            for attr in ("weight", "capacity"):
                x = getattr(e, attr)
                if not math.isfinite(x) or x < 0:
                    raise InvalidInputError(f"edge ({e.u!r}, {e.v!r}) has invalid {attr} {x!r}")
        if self.metric not in ORIENTATION:
            raise InvalidInputError(f"unknown metric {self.metric!r}")
        for name in ("attacker_budget", "defender_budget"):
            k = getattr(self, name)
            if int(k) != k or not 0 <= k <= len(edges):
                raise InvalidInputError(f"{name} must be an integer in [0, {len(edges)}], got {k!r}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def undirected(cls, nodes: Sequence[str], edges: Iterable[Edge | tuple], source: str, sink: str, **kwargs) -> NetworkInstance:
        """Expand every undirected edge into two opposite arcs (u, v) then (v, u)."""
        arcs = []
        for e in edges:
            e = e if isinstance(e, Edge) else Edge(*e)
            arcs += [e, Edge(e.v, e.u, e.weight, e.capacity)]
        return cls(tuple(nodes), tuple(arcs), source, sink, **kwargs)

    @property
    def sentinel(self) -> float:
        """Stand-in for an infinite distance: longer than any simple path."""
        return math.fsum(e.weight for e in self.edges) + 1.0

    def _graph(self, removed: frozenset[int]) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        for i, e in enumerate(self.edges):
            if i in removed:
                continue
            if g.has_edge(e.u, e.v):
                data = g[e.u][e.v]
                data["weight"] = min(data["weight"], e.weight)
                data["capacity"] += e.capacity
            else:
                g.add_edge(e.u, e.v, weight=e.weight, capacity=e.capacity)
        return g


def _check_removed(instance: NetworkInstance, removed: Iterable[int]) -> frozenset[int]:
    removed = frozenset(removed)
    bad = [i for i in removed if not (isinstance(i, int) and 0 <= i < len(instance.edges))]
    if bad:
        raise InvalidInputError(f"unknown edge indices {sorted(bad, key=str)}")
    return removed


def evaluate_metric(instance: NetworkInstance, removed_edges: Iterable[int] = ()) -> float:
    """Metric on the residual graph; ``math.inf`` distance when s and t are cut apart."""
    g = instance._graph(_check_removed(instance, removed_edges))
    if instance.metric == "shortestPathLength":
        try:
            return float(nx.dijkstra_path_length(g, instance.source, instance.sink, weight="weight"))
        except nx.NetworkXNoPath:
            return math.inf
    return float(nx.maximum_flow_value(g, instance.source, instance.sink, capacity="capacity"))


def disruption(instance: NetworkInstance, removed_edges: Iterable[int] = ()) -> float:
    """Attacker's objective: distance (sentinel if cut) or negated max flow."""
    value = evaluate_metric(instance, removed_edges)
    if instance.metric == "shortestPathLength":
        return instance.sentinel if math.isinf(value) else value
    return -value


@dataclass(frozen=True)
class InterdictionSolution:
    """Defender protection set, attacker witness and the resulting metric.

    ``objective`` is the metric itself (``math.inf`` when disconnected);
    ``disruption`` is the attacker-oriented value the search optimized.
    """

    defender_set: frozenset[int]
    attacker_set: frozenset[int]
    objective: float
    disruption: float
    disconnected: bool
    metadata: Mapping[str, str] = field(default_factory=dict)


def search_size(instance: NetworkInstance) -> int:
    n = len(instance.edges)
    return math.comb(n, instance.defender_budget) * math.comb(n, instance.attacker_budget)


def _connected(instance: NetworkInstance, removed: frozenset[int]) -> bool:
    return nx.has_path(instance._graph(removed), instance.source, instance.sink)


def solve_minmax_interdiction(instance: NetworkInstance) -> InterdictionSolution:
    """Exact min over protection sets of the attacker's best removal.

    Both metrics are monotone in the removed set, so the defender protects
    exactly ``k_D`` edges and the attacker removes exactly
    ``min(k_A, unprotected)``. Sets are visited in lexicographic order and an
    incumbent is only replaced by a strictly better one. A defender candidate
    is abandoned once some attack reaches the incumbent's value.
    """
    size = search_size(instance)
    if size > MAX_ENUMERATION:
        raise UnsupportedSizeError(
            f"C(|E|,k_D)*C(|E|,k_A) = {size} exceeds {MAX_ENUMERATION}", MAX_ENUMERATION, size
        )
    n = len(instance.edges)
    ceiling = instance.sentinel if instance.metric == "shortestPathLength" else 0.0
    best: tuple[float, frozenset[int], frozenset[int]] | None = None
    for protect in itertools.combinations(range(n), instance.defender_budget):
        protected = frozenset(protect)
        free = [i for i in range(n) if i not in protected]
        k = min(instance.attacker_budget, len(free))
        inner: tuple[float, frozenset[int]] | None = None
        for attack in itertools.combinations(free, k):
            value = disruption(instance, attack)
            if inner is None or value > inner[0]:
                inner = (value, frozenset(attack))
            if value >= ceiling or (best is not None and value >= best[0]):
                break  # attacker cannot do better, or this protection cannot win
        if best is None or inner[0] < best[0]:
            best = (inner[0], protected, inner[1])
    value, defender, attacker = best
    objective = evaluate_metric(instance, attacker)
    metadata = {
        "metric": instance.metric,
        "orientation": ORIENTATION[instance.metric],
        "protection": "protected edges cannot be removed",
    }
    return InterdictionSolution(defender, attacker, objective, value, not _connected(instance, attacker), metadata)
