"""Exact winner determination for capacitated markets.

The social optimum is a maximum-weight bipartite b-matching: source ->
agent arcs carry agent capacities, agent -> good arcs carry per-unit
values, good -> sink arcs carry supplies.  We repeatedly augment along
the most valuable residual path and stop as soon as the best path has
non-positive marginal value.  This yields an integral optimum, keeps
zero-value goods unallocated, and leaves behind a residual graph whose
node potentials price the goods (see :mod:`capauct.walrasian`).

All internal arithmetic is integer (denominators cleared up front), so
results are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import (
    Allocation,
    Instance,
    InvalidInstanceError,
    allocation_violations,
    scaled_values,
    total_value,
)


class MatchingError(RuntimeError):
    """Raised when solver state contradicts optimality (indicates a bug)."""


@dataclass(frozen=True)
class OptResult:
    """A welfare-maximizing allocation, optionally with one agent removed."""

    allocation: Allocation
    welfare: Fraction
    excluded_agent: Optional[int] = None


class _FlowNetwork:
    """Min-cost-flow network over nodes [source, agents, goods, sink].

    Arcs are stored as paired forward/backward entries; scanning them in
    insertion order (agents then goods, each by ascending index) with
    strict-improvement Bellman-Ford makes the augmenting path choice
    deterministic: lower agent index wins ties, then lower good index.
    """

    def __init__(self, instance: Instance, exclude: Optional[int]):
        n, m = instance.n_agents, instance.n_goods
        self.n, self.m = n, m
        self.source = 0
        self.sink = n + m + 1
        size = n + m + 2
        self.heads: list[int] = []
        self.caps: list[int] = []
        self.costs: list[int] = []
        self.adj: list[list[int]] = [[] for _ in range(size)]
        denom, scaled = scaled_values(instance)
        self.denom = denom
        for i in range(n):
            if i == exclude:
                continue
            self._add_arc(self.source, 1 + i, instance.agent_capacity[i], 0)
        for i in range(n):
            if i == exclude:
                continue
            cap_i = instance.agent_capacity[i]
            for j in range(m):
                w = scaled[i][j]
                if w > 0:
                    # zero-value edges are omitted so worthless goods stay unallocated
                    self._add_arc(1 + i, 1 + n + j, min(cap_i, instance.good_supply[j]), -w)
        for j in range(m):
            self._add_arc(1 + n + j, self.sink, instance.good_supply[j], 0)

    def _add_arc(self, u: int, v: int, cap: int, cost: int) -> None:
        self.adj[u].append(len(self.heads))
        self.heads.append(v)
        self.caps.append(cap)
        self.costs.append(cost)
        self.adj[v].append(len(self.heads))
        self.heads.append(u)
        self.caps.append(0)
        self.costs.append(-cost)

    def _shortest_path(self) -> Optional[list[int]]:
        """Most negative source-to-sink path in the residual graph, or None.

        Bellman-Ford over arcs in insertion order; only strict
        improvements update, so tie-breaking is deterministic.
        """
        size = len(self.adj)
        dist: list[Optional[int]] = [None] * size
        via: list[int] = [-1] * size
        dist[self.source] = 0
        for _ in range(size - 1):
            changed = False
            for a in range(0, len(self.heads), 2):
                for arc in (a, a + 1):
                    if self.caps[arc] <= 0:
                        continue
                    base = dist[self.heads[arc ^ 1]]
                    if base is None:
                        continue
                    cand = base + self.costs[arc]
                    head = self.heads[arc]
                    if dist[head] is None or cand < dist[head]:
                        dist[head] = cand
                        via[head] = arc
                        changed = True
            if not changed:
                break
        if dist[self.sink] is None or dist[self.sink] >= 0:
            return None
        path = []
        node = self.sink
        while node != self.source:
            arc = via[node]
            path.append(arc)
            node = self.heads[arc ^ 1]
        path.reverse()
        return path

    def run(self) -> None:
        while True:
            path = self._shortest_path()
            if path is None:
                return
            bottleneck = min(self.caps[arc] for arc in path)
            for arc in path:
                self.caps[arc] -= bottleneck
                self.caps[arc ^ 1] += bottleneck

    def allocation(self) -> Allocation:
        units = [[0] * self.m for _ in range(self.n)]
        for a in range(0, len(self.heads), 2):
            u, v = self.heads[a ^ 1], self.heads[a]
            if 1 <= u <= self.n and self.n < v < self.sink:
                flow = self.caps[a ^ 1]  # backward capacity equals pushed flow
                if flow:
                    units[u - 1][v - 1 - self.n] = flow
        return Allocation(tuple(tuple(row) for row in units))


def _solve(instance: Instance, exclude: Optional[int]) -> OptResult:
    net = _FlowNetwork(instance, exclude)
    net.run()
    allocation = net.allocation()
    problems = allocation_violations(instance, allocation)
    if problems:
        raise MatchingError("solver produced infeasible allocation: " + "; ".join(problems))
    return OptResult(allocation, total_value(instance, allocation), exclude)


def social_optimum(instance: Instance) -> OptResult:
    """Canonical welfare-maximizing allocation (deterministic under ties)."""
    return _solve(instance, None)


def optimum_without(instance: Instance, agent: int) -> OptResult:
    """Social optimum with one agent removed; its allocation row stays empty."""
    if not 0 <= agent < instance.n_agents:
        raise IndexError(f"agent index {agent} out of range")
    return _solve(instance, agent)


def enumeration_states(instance: Instance) -> int:
    """Upper bound on the brute-force search space: prod (n+1)^supply_j."""
    states = 1
    base = instance.n_agents + 1
    for q in instance.good_supply:
        states *= base**q
    return states


def brute_force_optimum(instance: Instance, state_limit: int = 10**7) -> OptResult:
    """Exhaustive welfare maximization; the test oracle for the flow solver.

    Enumerates, good by good, every split of each good's supply among
    the agents (plus the option of leaving units unsold), pruning only
    on exhausted agent capacity.  Completely independent of the
    augmenting-path solver.  Raises when the state bound exceeds
    ``state_limit``.
    """
    if enumeration_states(instance) > state_limit:
        raise InvalidInstanceError(
            f"instance too large for enumeration ({enumeration_states(instance)} states)"
        )
    n, m = instance.n_agents, instance.n_goods
    denom, scaled = scaled_values(instance)
    splits_cache: dict[int, list[tuple[int, ...]]] = {}

    def splits(supply: int) -> list[tuple[int, ...]]:
        # all ways of handing out at most `supply` units to n agents
        if supply in splits_cache:
            return splits_cache[supply]
        result: list[tuple[int, ...]] = [()]
        for _ in range(n):
            result = [prev + (k,) for prev in result for k in range(supply - sum(prev) + 1)]
        splits_cache[supply] = result
        return result

    best_value = 0
    best_units: list[tuple[int, ...]] = [(0,) * m for _ in range(n)]
    remaining = list(instance.agent_capacity)
    units: list[list[int]] = [[0] * m for _ in range(n)]

    def walk(good: int, value: int) -> None:
        nonlocal best_value, best_units
        if good == m:
            if value > best_value:
                best_value = value
                best_units = [tuple(row) for row in units]
            return
        for split in splits(instance.good_supply[good]):
            gained = 0
            ok = True
            for i, k in enumerate(split):
                if k > remaining[i]:
                    ok = False
                    break
                gained += k * scaled[i][good]
            if not ok:
                continue
            for i, k in enumerate(split):
                remaining[i] -= k
                units[i][good] = k
            walk(good + 1, value + gained)
            for i, k in enumerate(split):
                remaining[i] += k
                units[i][good] = 0

    walk(0, 0)
    return OptResult(Allocation(tuple(best_units)), Fraction(best_value, denom), None)


def node_potentials(
    instance: Instance, allocation: Allocation, exclude: Optional[int] = None
) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...], Fraction, Fraction]:
    """Dual potentials of an optimal allocation's residual graph.

    Shortest distances from the sink over the residual arcs the
    allocation induces (plus zero-cost source/sink arcs both ways, since
    flow value is unconstrained at a welfare optimum).  Being shortest
    distances, these are the pointwise-largest feasible potentials with
    the sink anchored at zero, which makes the derived good prices the
    buyer-optimal ones.  Unreachable nodes (all-zero-value goods nobody
    holds) get potential 0.  Returns (agent, good, source, sink)
    potentials as exact rationals; a negative residual cycle means the
    allocation is not optimal and raises MatchingError.
    """
    problems = allocation_violations(instance, allocation)
    if problems:
        raise MatchingError("; ".join(problems))
    n, m = instance.n_agents, instance.n_goods
    denom, scaled = scaled_values(instance)
    # nodes: 0 source, 1..n agents, n+1..n+m goods, n+m+1 sink
    source, sink = 0, n + m + 1
    arcs: list[tuple[int, int, int]] = [(source, sink, 0), (sink, source, 0)]
    for i in range(n):
        if i == exclude:
            continue
        held = allocation.agent_total(i)
        if held < instance.agent_capacity[i]:
            arcs.append((source, 1 + i, 0))
        if held > 0:
            arcs.append((1 + i, source, 0))
        for j in range(m):
            w = scaled[i][j]
            if w <= 0:
                continue
            flow = allocation.units[i][j]
            if flow < min(instance.agent_capacity[i], instance.good_supply[j]):
                arcs.append((1 + i, 1 + n + j, -w))
            if flow > 0:
                arcs.append((1 + n + j, 1 + i, w))
    for j in range(m):
        used = allocation.good_total(j)
        if used < instance.good_supply[j]:
            arcs.append((1 + n + j, sink, 0))
        if used > 0:
            arcs.append((sink, 1 + n + j, 0))
    size = n + m + 2
    dist: list[Optional[int]] = [None] * size
    dist[sink] = 0
    for round_no in range(size + 1):
        changed = False
        for u, v, cost in arcs:
            if dist[u] is None:
                continue
            cand = dist[u] + cost
            if dist[v] is None or cand < dist[v]:
                dist[v] = cand
                changed = True
        if not changed:
            break
        if round_no == size:
            raise MatchingError("negative residual cycle: allocation is not optimal")

    def as_rat(d: Optional[int]) -> Fraction:
        return Fraction(0) if d is None else Fraction(d, denom)

    agent_pot = tuple(as_rat(dist[1 + i]) for i in range(n))
    good_pot = tuple(as_rat(dist[1 + n + j]) for j in range(m))
    return agent_pot, good_pot, as_rat(dist[source]), as_rat(dist[sink])
