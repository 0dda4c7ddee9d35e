"""Shortest-path routing and per-tick movement along the walkway graph.

Routing is A* with a Euclidean heuristic, admissible because every edge is at
least as long as the straight line between its endpoints (a map invariant).
Tie-breaking is deterministic: among equal-f frontier entries the smallest
(g-cost, node id) pops first, and an enqueued node is only re-pushed on a
strict g improvement. Route length accumulates left-to-right in node order so
repeated runs agree bit-for-bit.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from collections import OrderedDict
from dataclasses import dataclass

from .errors import RouteError
from .geometry import Coord
from .worldmap import WalkwayGraph, WorldMap

ROUTE_CACHE_CAPACITY = 65536


@dataclass(frozen=True)
class Route:
    node_seq: tuple[int, ...]
    length: float
    cum: tuple[float, ...]  # cumulative length at each node, cum[0] == 0
    origin_unit: int
    destination_unit: int


def _astar(graph: WalkwayGraph, start: int, goal: int) -> tuple[tuple[int, ...], float, tuple[float, ...]]:
    nodes = graph.nodes
    if start == goal:
        return ((start,), 0.0, (0.0,))
    gx, gy = nodes[goal]
    h0 = math.hypot(nodes[start][0] - gx, nodes[start][1] - gy)
    # Heap entries: (f, g, node). Parents tracked separately.
    heap = [(h0, 0.0, start)]
    g_cost: dict[int, float] = {start: 0.0}
    parent: dict[int, int] = {}
    closed: set[int] = set()
    adj = graph.adj
    while heap:
        f, g, u = heapq.heappop(heap)
        if u in closed:
            continue
        if u == goal:
            seq = [u]
            while u != start:
                u = parent[u]
                seq.append(u)
            seq.reverse()
            # Length accumulates left-to-right over actual edge weights (edge
            # weight may exceed the straight-line node distance on test graphs).
            length = 0.0
            cum = [0.0]
            prev = seq[0]
            for b in seq[1:]:
                w = next(w for v, w in adj[prev] if v == b)
                length += w
                cum.append(length)
                prev = b
            return (tuple(seq), length, tuple(cum))
        closed.add(u)
        for v, w in adj[u]:
            if v in closed:
                continue
            ng = g + w
            known = g_cost.get(v)
            if known is not None and known <= ng:
                continue
            g_cost[v] = ng
            parent[v] = u
            vx, vy = nodes[v]
            heapq.heappush(heap, (ng + math.hypot(vx - gx, vy - gy), ng, v))
    raise RouteError(f"no path from node {start} to node {goal}")


class RouteCache:
    """FIFO memo of (from_node, to_node) -> path core, bounded capacity."""

    def __init__(self, capacity: int = ROUTE_CACHE_CAPACITY):
        self.capacity = capacity
        self._store: OrderedDict[tuple[int, int], tuple] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def lookup(self, graph: WalkwayGraph, from_node: int, to_node: int) -> tuple:
        key = (from_node, to_node)
        core = self._store.get(key)
        if core is not None:
            self.hits += 1
            return core
        self.misses += 1
        core = _astar(graph, from_node, to_node)
        if len(self._store) >= self.capacity:
            self._store.popitem(last=False)
        self._store[key] = core
        return core


def plan_route(
    graph: WalkwayGraph,
    from_node: int,
    to_node: int,
    origin_unit: int = -1,
    destination_unit: int = -1,
    cache: RouteCache | None = None,
) -> Route:
    """Minimum-length path between two nodes (single-node route when equal)."""
    if cache is not None:
        seq, length, cum = cache.lookup(graph, from_node, to_node)
    else:
        seq, length, cum = _astar(graph, from_node, to_node)
    return Route(node_seq=seq, length=length, cum=cum, origin_unit=origin_unit, destination_unit=destination_unit)


def begin_travel(agent, world: WorldMap, dest_unit: int, cache: RouteCache | None = None) -> bool:
    """Put an AtUnit agent on a route to ``dest_unit``.

    Returns True when the agent arrived immediately (same unit, or both units
    share an anchor node); the caller handles arrival effects either way.
    """
    if agent.unit is None:
        raise RouteError(f"agent {agent.id} is already en route")
    if dest_unit == agent.unit:
        return False  # no-op: already there and not a new arrival
    from_node = world.anchors[agent.unit]
    to_node = world.anchors[dest_unit]
    if from_node == to_node:
        agent.unit = dest_unit
        return True
    route = plan_route(world.graph, from_node, to_node, agent.unit, dest_unit, cache)
    agent.unit = None
    agent.route = route
    agent.offset = 0.0
    return False


def advance(agent, dt: float) -> bool:
    """Move an OnRoute agent by speed*dt meters; True on arrival."""
    route = agent.route
    offset = agent.offset + agent.speed * dt
    if offset >= route.length:
        agent.unit = route.destination_unit
        agent.route = None
        agent.offset = 0.0
        return True
    agent.offset = offset
    return False


def route_position(route: Route, offset: float, nodes: list[Coord]) -> Coord:
    """Point at ``offset`` meters along the route (linear on each edge)."""
    seq = route.node_seq
    if len(seq) == 1 or offset <= 0.0:
        return nodes[seq[0]]
    if offset >= route.length:
        return nodes[seq[-1]]
    cum = route.cum
    i = bisect_right(cum, offset) - 1
    if i >= len(seq) - 1:
        return nodes[seq[-1]]
    seg = cum[i + 1] - cum[i]
    t = (offset - cum[i]) / seg if seg > 0 else 0.0
    ax, ay = nodes[seq[i]]
    bx, by = nodes[seq[i + 1]]
    return (ax + t * (bx - ax), ay + t * (by - ay))


def position_of(agent, world: WorldMap) -> Coord:
    """Current map position: unit location when parked, else route interpolation."""
    if agent.unit is not None:
        return world.unit_location(agent.unit)
    return route_position(agent.route, agent.offset, world.graph.nodes)
