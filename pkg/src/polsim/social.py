"""Co-location driven social network.

Edges live on unordered agent pairs with weights in [0, 1]. Pairs co-located
at a recreation unit gain ``delta_meet`` per tick; once per simulated day all
weights decay by a factor and edges below ``prune_epsilon`` disappear.
"Friend" means weight >= ``friend_threshold``.
"""

from __future__ import annotations


class SocialGraph:
    def __init__(self) -> None:
        # Canonical store keyed (a, b) with a < b, plus a mirrored adjacency
        # for O(degree) friend queries.
        self.edges: dict[tuple[int, int], float] = {}
        self.adj: dict[int, dict[int, float]] = {}

    def __len__(self) -> int:
        return len(self.edges)

    def weight(self, a: int, b: int) -> float:
        key = (a, b) if a < b else (b, a)
        return self.edges.get(key, 0.0)

    def _set(self, a: int, b: int, w: float) -> None:
        key = (a, b) if a < b else (b, a)
        self.edges[key] = w
        self.adj.setdefault(a, {})[b] = w
        self.adj.setdefault(b, {})[a] = w

    def register_colocation(self, site_groups: dict[int, list[int]], delta_meet: float) -> None:
        """Strengthen (or create) edges for every pair within each site group."""
        if delta_meet <= 0.0:
            return
        for unit_id in sorted(site_groups):
            members = sorted(site_groups[unit_id])
            n = len(members)
            for i in range(n):
                a = members[i]
                for j in range(i + 1, n):
                    b = members[j]
                    w = self.edges.get((a, b), 0.0) + delta_meet
                    if w > 1.0:
                        w = 1.0
                    self._set(a, b, w)

    def decay(self, lambda_decay: float, prune_epsilon: float) -> None:
        """Multiply all weights by (1 - lambda_decay); drop edges below epsilon."""
        factor = 1.0 - lambda_decay
        new_edges: dict[tuple[int, int], float] = {}
        new_adj: dict[int, dict[int, float]] = {}
        for (a, b), w in self.edges.items():
            w2 = w * factor
            if w2 < prune_epsilon:
                continue
            new_edges[(a, b)] = w2
            new_adj.setdefault(a, {})[b] = w2
            new_adj.setdefault(b, {})[a] = w2
        self.edges = new_edges
        self.adj = new_adj

    def friends_of(self, agent: int, friend_threshold: float) -> list[int]:
        """Agents connected with weight >= threshold, ascending id."""
        nbrs = self.adj.get(agent)
        if not nbrs:
            return []
        return sorted(b for b, w in nbrs.items() if w >= friend_threshold)

    def meeting_hint(
        self,
        agent: int,
        agent_rec_unit: dict[int, int],
        friend_threshold: float,
    ) -> int | None:
        """Recreation unit currently hosting the most friends (ties: smallest unit id)."""
        nbrs = self.adj.get(agent)
        if not nbrs:
            return None
        counts: dict[int, int] = {}
        for b, w in nbrs.items():
            if w < friend_threshold:
                continue
            unit = agent_rec_unit.get(b)
            if unit is not None:
                counts[unit] = counts.get(unit, 0) + 1
        if not counts:
            return None
        best_unit = None
        best_count = 0
        for unit in sorted(counts):
            c = counts[unit]
            if c > best_count:
                best_count = c
                best_unit = unit
        return best_unit

    def degree_histogram(self, n_agents: int, friend_threshold: float) -> list[tuple[int, int]]:
        """(degree, count) over friend-degree for agents 0..n-1, ascending degree."""
        degrees = [0] * n_agents
        for (a, b), w in self.edges.items():
            if w >= friend_threshold:
                if a < n_agents:
                    degrees[a] += 1
                if b < n_agents:
                    degrees[b] += 1
        counts: dict[int, int] = {}
        for d in degrees:
            counts[d] = counts.get(d, 0) + 1
        return sorted(counts.items())

    def snapshot(self) -> list[tuple[int, int, float]]:
        """All edges as (a, b, weight), sorted by (a, b)."""
        return sorted((a, b, w) for (a, b), w in self.edges.items())
