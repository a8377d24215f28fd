"""Constructive no-envy certificates for heterogeneous capacities.

Under the externality pivot, agent ``hi`` (weakly larger capacity) never
envies agent ``lo``.  The proof is constructive and everything it
builds is materialized and re-checked here:

* the directed *flow-difference graph* between the optimum ``M`` and the
  optimum-without-``hi`` ``E``, whose arcs carry the unit disagreements;
* its decomposition into simple paths and cycles;
* a normalization of ``E`` that cancels zero-value cycles and zero-value
  paths from spurious sources (possible only under ties);
* a "takeover" allocation for the market without ``lo`` in which ``hi``
  absorbs ``lo``'s bundle, whose value certifies the envy inequality.

For optimal inputs the decomposition must be cycle-free with the
excluded agent as its only source; violations raise, doubling as an
optimality test of the matching solver.

The module also hosts the driver replaying the exact inequality chain
showing that efficiency, incentive compatibility, envy-freeness and
no-positive-transfers cannot coexist once capacities differ.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Optional, Sequence

from .core import (
    Allocation,
    Instance,
    ZERO,
    allocation_violations,
    bundle_value,
    total_value,
)
from .matching import optimum_without, social_optimum
from .reports import ChainReport, ChainStep, checked_step

Vertex = tuple[str, int]  # ("agent", i) or ("good", j); tuple order sorts agents first
Arc = tuple[Vertex, Vertex]


class FlowCertError(RuntimeError):
    """A certificate invariant failed; carries the offending structure."""

    def __init__(self, message: str, structure=None):
        super().__init__(message)
        self.structure = structure


def _agent(i: int) -> Vertex:
    return ("agent", i)


def _good(j: int) -> Vertex:
    return ("good", j)


@dataclass(frozen=True)
class FlowDiffGraph:
    """Where two allocations disagree, as arcs with positive integer flow.

    An arc agent->good carries units the full optimum assigns beyond the
    reduced one; good->agent carries the reverse.  ``excess`` is net
    outflow per vertex (positive: source, negative: target).
    """

    instance: Instance
    excluded: int
    arcs: tuple[tuple[Arc, int], ...]
    excess: tuple[tuple[Vertex, int], ...]

    def arc_flow(self) -> dict[Arc, int]:
        return dict(self.arcs)

    def excess_of(self) -> dict[Vertex, int]:
        return dict(self.excess)

    def arc_value(self, arc: Arc) -> Fraction:
        (kind_u, u), (kind_v, v) = arc
        if kind_u == "agent":
            return self.instance.values[u][v]
        return -self.instance.values[v][u]


def build_flow_diff_graph(
    instance: Instance,
    allocation: Allocation,
    allocation_excl: Allocation,
    excluded: int,
) -> FlowDiffGraph:
    """Difference graph of a full optimum vs. an optimum without one agent.

    Both allocations must be feasible and the excluded agent's row in
    the reduced allocation empty; the structural bounds tying excesses
    to capacities are re-checked rather than trusted.
    """
    for name, alloc in (("allocation", allocation), ("reduced allocation", allocation_excl)):
        problems = allocation_violations(instance, alloc)
        if problems:
            raise FlowCertError(f"{name} infeasible: " + "; ".join(problems))
    if any(allocation_excl.units[excluded]):
        raise FlowCertError(f"reduced allocation assigns goods to excluded agent {excluded}")
    n, m = instance.n_agents, instance.n_goods
    arcs: dict[Arc, int] = {}
    for i in range(n):
        for j in range(m):
            diff = allocation.units[i][j] - allocation_excl.units[i][j]
            if diff > 0:
                arcs[(_agent(i), _good(j))] = diff
            elif diff < 0:
                arcs[(_good(j), _agent(i))] = -diff
    excess: dict[Vertex, int] = {}
    for i in range(n):
        chi = allocation.agent_total(i) - allocation_excl.agent_total(i)
        if chi:
            excess[_agent(i)] = chi
    for j in range(m):
        chi = sum(allocation_excl.units[i][j] - allocation.units[i][j] for i in range(n))
        if chi:
            excess[_good(j)] = chi
    if sum(excess.values()) != 0:
        raise FlowCertError("vertex excesses do not cancel")
    if any(head == _agent(excluded) for (_, head) in arcs):
        raise FlowCertError(f"arc into excluded agent {excluded}", structure=arcs)
    # Excess magnitudes must leave room inside the capacity bounds.
    for i in range(n):
        chi = excess.get(_agent(i), 0)
        held = max(allocation.agent_total(i), allocation_excl.agent_total(i))
        if held > instance.agent_capacity[i] or held < abs(chi):
            raise FlowCertError(f"agent {i} excess {chi} breaks its capacity bound")
    for j in range(m):
        chi = excess.get(_good(j), 0)
        used = max(allocation.good_total(j), allocation_excl.good_total(j))
        if used > instance.good_supply[j] or used < abs(chi):
            raise FlowCertError(f"good {j} excess {chi} breaks its supply bound")
    return FlowDiffGraph(
        instance,
        excluded,
        tuple(sorted(arcs.items())),
        tuple(sorted(excess.items())),
    )


@dataclass(frozen=True)
class FlowPiece:
    """One path or cycle of the decomposition, with its flow and value."""

    vertices: tuple[Vertex, ...]
    flow: int
    value: Fraction


@dataclass(frozen=True)
class FlowDecomposition:
    paths: tuple[FlowPiece, ...]
    cycles: tuple[FlowPiece, ...]


def _piece_value(graph: FlowDiffGraph, vertices: Sequence[Vertex]) -> Fraction:
    value = ZERO
    for u, w in zip(vertices, vertices[1:]):
        value += graph.arc_value((u, w))
    return value


def decompose(
    graph: FlowDiffGraph,
    forbid_cycles: bool = False,
    required_source: Optional[Vertex] = None,
) -> FlowDecomposition:
    """Peel the arc flows into source-to-target paths plus cycles.

    Deterministic: sources and next-hops are taken in ascending vertex
    order, so repeated runs decompose identically.  With
    ``forbid_cycles`` or ``required_source`` set, a violating structure
    raises FlowCertError instead of being returned (expected only for
    non-optimal inputs).
    """
    flow = graph.arc_flow()
    excess = graph.excess_of()
    out: dict[Vertex, list[Vertex]] = {}
    for (u, w) in flow:
        out.setdefault(u, []).append(w)
    for heads in out.values():
        heads.sort()

    def next_hop(u: Vertex) -> Optional[Vertex]:
        for w in out.get(u, ()):
            if flow.get((u, w), 0) > 0:
                return w
        return None

    def peel(vertices: list[Vertex], amount: int) -> None:
        for u, w in zip(vertices, vertices[1:]):
            flow[(u, w)] -= amount
            if flow[(u, w)] == 0:
                del flow[(u, w)]

    paths: list[FlowPiece] = []
    cycles: list[FlowPiece] = []

    def record_cycle(vertices: list[Vertex], amount: int) -> None:
        piece = FlowPiece(tuple(vertices), amount, _piece_value(graph, vertices))
        if forbid_cycles:
            raise FlowCertError(f"unexpected cycle {piece.vertices}", structure=piece)
        cycles.append(piece)

    sources = sorted(v for v, chi in excess.items() if chi > 0)
    for source in sources:
        while excess.get(source, 0) > 0:
            walk = [source]
            seen = {source: 0}
            while True:
                here = walk[-1]
                if here != source and excess.get(here, 0) < 0:
                    break  # reached a target
                hop = next_hop(here)
                if hop is None:
                    raise FlowCertError(f"flow conservation broken at {here}", structure=walk)
                if hop in seen:
                    cycle = walk[seen[hop]:] + [hop]
                    amount = min(flow[(u, w)] for u, w in zip(cycle, cycle[1:]))
                    record_cycle(cycle, amount)
                    peel(cycle, amount)
                    walk = [source]
                    seen = {source: 0}
                    continue
                walk.append(hop)
                seen[hop] = len(walk) - 1
            target = walk[-1]
            amount = min(excess[source], -excess[target])
            amount = min(amount, min(flow[(u, w)] for u, w in zip(walk, walk[1:])))
            if required_source is not None and source != required_source:
                raise FlowCertError(
                    f"path from unexpected source {source}",
                    structure=FlowPiece(tuple(walk), amount, _piece_value(graph, walk)),
                )
            peel(walk, amount)
            excess[source] -= amount
            excess[target] += amount
            paths.append(FlowPiece(tuple(walk), amount, _piece_value(graph, walk)))
    while flow:
        start = min(flow)[0]
        walk = [start]
        seen = {start: 0}
        while True:
            hop = next_hop(walk[-1])
            if hop is None:
                raise FlowCertError(f"leftover flow is not a circulation at {walk[-1]}", structure=walk)
            if hop in seen:
                cycle = walk[seen[hop]:] + [hop]
                amount = min(flow[(u, w)] for u, w in zip(cycle, cycle[1:]))
                record_cycle(cycle, amount)
                peel(cycle, amount)
                break
            walk.append(hop)
            seen[hop] = len(walk) - 1
    return FlowDecomposition(tuple(paths), tuple(cycles))


def normalize_excluded(
    instance: Instance,
    allocation: Allocation,
    allocation_excl: Allocation,
    excluded: int,
) -> Allocation:
    """Equal-welfare variant of the reduced optimum with no zero-value slack.

    Ties let the two optima disagree along cycles (or paths from sources
    other than the excluded agent) of zero net value; cancelling those
    disagreements into the reduced allocation removes them without
    touching its welfare.  Feasibility and welfare preservation are
    re-checked on every cancellation step.
    """
    target_welfare = total_value(instance, allocation_excl)
    current = allocation_excl
    while True:
        graph = build_flow_diff_graph(instance, allocation, current, excluded)
        if not graph.arcs:
            return current
        decomposition = decompose(graph)
        victim: Optional[FlowPiece] = None
        for piece in decomposition.cycles:
            if piece.value == 0:
                victim = piece
                break
        if victim is None:
            for piece in decomposition.paths:
                if piece.value == 0 and piece.vertices[0] != _agent(excluded):
                    victim = piece
                    break
        if victim is None:
            return current
        units = [list(row) for row in current.units]
        for u, w in zip(victim.vertices, victim.vertices[1:]):
            if u[0] == "agent":
                units[u[1]][w[1]] += victim.flow
            else:
                units[w[1]][u[1]] -= victim.flow
        candidate = Allocation(tuple(tuple(row) for row in units))
        problems = allocation_violations(instance, candidate)
        if problems:
            raise FlowCertError(
                "cancellation broke feasibility: " + "; ".join(problems), structure=victim
            )
        if total_value(instance, candidate) != target_welfare:
            raise FlowCertError("cancellation changed welfare", structure=victim)
        current = candidate


@dataclass(frozen=True)
class NoEnvyCertificate:
    """Witness allocation proving the envy inequality for one agent pair.

    ``value`` is the witness's welfare on the market without ``lo``;
    ``floor`` is the bound it must meet: the reduced optimum's welfare
    plus what ``hi`` gains by taking over ``lo``'s bundle.
    """

    hi: int
    lo: int
    allocation: Allocation
    value: Fraction
    floor: Fraction
    reduced_welfare: Fraction

    @property
    def holds(self) -> bool:
        return self.value >= self.floor


def build_no_envy_certificate(instance: Instance, agent_hi: int, agent_lo: int) -> NoEnvyCertificate:
    """Construct and verify the takeover allocation for a capacity-ordered pair.

    Starting from the optimum without ``hi``, agent ``hi`` absorbs
    ``lo``'s overlap with the full optimum (stage two), then the
    decomposition paths through ``lo`` are rerouted up to ``lo`` (stage
    three), leaving ``lo`` empty-handed.  The result must be feasible on
    the market without ``lo`` and worth at least the certified floor;
    any failure raises.
    """
    n = instance.n_agents
    if not (0 <= agent_hi < n and 0 <= agent_lo < n) or agent_hi == agent_lo:
        raise ValueError("need two distinct valid agent indices")
    if instance.agent_capacity[agent_hi] < instance.agent_capacity[agent_lo]:
        raise ValueError("first agent must have the weakly larger capacity")
    full = social_optimum(instance)
    reduced = optimum_without(instance, agent_hi)
    normalized = normalize_excluded(instance, full.allocation, reduced.allocation, agent_hi)
    graph = build_flow_diff_graph(instance, full.allocation, normalized, agent_hi)
    decomposition = decompose(graph, forbid_cycles=True, required_source=_agent(agent_hi))

    units = [list(row) for row in normalized.units]
    # Stage two: hi takes over the part of lo's reduced bundle that the
    # full optimum also gives lo.
    for j in range(instance.n_goods):
        overlap = min(full.allocation.units[agent_lo][j], normalized.units[agent_lo][j])
        units[agent_lo][j] = normalized.units[agent_lo][j] - overlap
        units[agent_hi][j] = overlap
    # Stage three: reroute every decomposition path through lo, up to lo.
    lo_vertex = _agent(agent_lo)
    for piece in decomposition.paths:
        if lo_vertex not in piece.vertices:
            continue
        cut = piece.vertices.index(lo_vertex) + 1
        prefix = piece.vertices[:cut]
        for u, w in zip(prefix, prefix[1:]):
            if u[0] == "agent":
                units[u[1]][w[1]] += piece.flow
            else:
                units[w[1]][u[1]] -= piece.flow
    try:
        witness = Allocation(tuple(tuple(row) for row in units))
    except Exception as exc:
        raise FlowCertError(f"takeover allocation malformed: {exc}") from exc
    if any(witness.units[agent_lo]):
        raise FlowCertError("takeover allocation still assigns goods to the low agent",
                            structure=witness)
    problems = allocation_violations(instance, witness)
    if problems:
        raise FlowCertError("takeover allocation infeasible: " + "; ".join(problems),
                            structure=witness)
    lo_bundle = full.allocation.bundle(agent_lo)
    floor = (
        reduced.welfare
        + bundle_value(instance, agent_hi, lo_bundle)
        - bundle_value(instance, agent_lo, lo_bundle)
    )
    certificate = NoEnvyCertificate(
        agent_hi,
        agent_lo,
        witness,
        total_value(instance, witness),
        floor,
        reduced.welfare,
    )
    if not certificate.holds:
        raise FlowCertError(
            f"certificate inequality failed: value {certificate.value} < floor {floor}",
            structure=certificate,
        )
    return certificate


# ---------------------------------------------------------------------------
# Two-agent shape classification and the positive-transfer chain driver
# ---------------------------------------------------------------------------

TwoAgentClass = Literal["A", "B1", "B1plus", "B2", "tie"]


def _shape_params(instance: Instance) -> tuple[int, Fraction, Fraction, Fraction, Fraction]:
    """Validate the two-effective-agent shape; returns (cap, a, b, d, e).

    Shape: heterogeneous capacities (cap, > cap), at least cap+1 unit
    goods, zero values outside the first two rows and first cap+1
    columns, and a single repeated value on columns 2..cap+1 per agent.
    """
    n, m = instance.n_agents, instance.n_goods
    if n < 2:
        raise ValueError("need at least two agents")
    for i in range(2, n):
        if any(v != 0 for v in instance.values[i]):
            raise ValueError(f"agent {i} must be a zero row in this shape")
    cap = instance.agent_capacity[0]
    if cap < 1:
        raise ValueError("first agent needs positive capacity")
    if instance.agent_capacity[1] <= cap:
        raise ValueError("second agent must have strictly larger capacity")
    if m < cap + 1:
        raise ValueError(f"need at least {cap + 1} goods")
    if any(q != 1 for q in instance.good_supply):
        raise ValueError("shape requires unit supplies")
    for i in (0, 1):
        row = instance.values[i]
        if any(row[j] != 0 for j in range(cap + 1, m)):
            raise ValueError(f"agent {i} must value goods beyond {cap + 1} at zero")
        if any(row[j] != row[1] for j in range(2, cap + 1)):
            raise ValueError(f"agent {i} must value goods 2..{cap + 1} equally")
    return cap, instance.values[0][0], instance.values[0][1], instance.values[1][0], instance.values[1][1]


def classify_two_agent(instance: Instance) -> TwoAgentClass:
    """Which optimum shape the instance falls into; exact ties are reported, never broken."""
    cap, a, b, d, e = _shape_params(instance)
    if d > a and e > b:
        return "A"
    if cap == 1:
        if a - d > max(ZERO, b - e):
            return "B1"
        if b - e > max(ZERO, a - d):
            return "B2"
    else:
        if a > d and b < e:
            return "B1"
        if a - d > b - e and b > e:
            return "B1plus"
        if b - e > max(ZERO, a - d):
            return "B2"
    return "tie"


def chain_profiles(cap: int, x: Fraction, eps: Fraction) -> tuple[Instance, Instance, Instance]:
    """The three valuation profiles driving the positive-transfer argument.

    All on capacities (cap, cap+1) with cap+1 unit goods: (a) only the
    small agent cares, (b) both care with the small agent slightly
    ahead, (c) only the large agent cares with the same row as (b).
    """
    x, eps = Fraction(x), Fraction(eps)
    if x <= 0:
        raise ValueError(f"x must be positive, got {x}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if cap < 1:
        raise ValueError(f"capacity must be at least 1, got {cap}")
    m = cap + 1
    strong = (x + 3 * eps,) + (x + eps,) * (m - 1)
    rival = (x + eps,) + (x,) * (m - 1)
    zeros = (ZERO,) * m
    caps = (cap, cap + 1)
    supplies = (1,) * m
    profile_a = Instance(caps, supplies, (strong, zeros))
    profile_b = Instance(caps, supplies, (strong, rival))
    profile_c = Instance(caps, supplies, (zeros, rival))
    return profile_a, profile_b, profile_c


def _verify_optimum(instance: Instance, agent0_goods: set[int], agent1_goods: set[int],
                    label: str) -> None:
    opt = social_optimum(instance)
    for i, goods in ((0, agent0_goods), (1, agent1_goods)):
        got = {j for j, u in enumerate(opt.allocation.units[i]) if u}
        # Goods the agent values at zero never show up in the canonical optimum.
        expected = {j for j in goods if instance.values[i][j] > 0}
        if got != expected:
            raise FlowCertError(
                f"{label}: agent {i} holds {sorted(got)}, expected {sorted(expected)}",
                structure=opt.allocation,
            )


def positive_transfer_chain(cap: int, x: Fraction, eps: Fraction) -> ChainReport:
    """Replay the exact chain forcing positive transfers on heterogeneous capacities.

    Any efficient incentive-compatible mechanism prices agent 0 through
    a pivot term h0 of the opponent row.  Envy-freeness on profiles (a)
    and (b) sandwiches h0 between its value on the zero row and the
    no-envy constants; refusing to pay agents on profile (c) then forces
    h0(zero row) >= x - cap*eps, which no fixed pivot can satisfy for
    all x.  The conclusion of the report is that lower bound.
    """
    profile_a, profile_b, profile_c = chain_profiles(cap, x, eps)
    x, eps = Fraction(x), Fraction(eps)
    warmup = cap == 1
    expected_class: TwoAgentClass = "B1" if warmup else "B1plus"
    for label, profile, want in (
        ("profile-a", profile_a, expected_class),
        ("profile-b", profile_b, expected_class),
        ("profile-c", profile_c, "A"),
    ):
        got = classify_two_agent(profile)
        if got != want:
            raise FlowCertError(f"{label} classified {got}, expected {want}")

    small_bundle = set(range(cap))
    last = {cap}
    every = set(range(cap + 1))
    _verify_optimum(profile_a, small_bundle, last, "profile-a")
    _verify_optimum(profile_b, small_bundle, last, "profile-b")
    _verify_optimum(profile_c, set(), every, "profile-c")

    steps: list[ChainStep] = []
    # Profile (a): agent 1 not envying agent 0 bounds h1(strong) - h0(0...)
    # by agent 0's edge on her own bundle.
    edge_a = bundle_value(profile_a, 0, sorted(small_bundle)) - bundle_value(
        profile_a, 1, sorted(small_bundle)
    )
    steps.append(
        checked_step("cc1" if warmup else "cc1g", edge_a, "=",
                     cap * x + (cap + 2) * eps, "no-envy-of-small-agent")
    )
    # Profile (b): agent 0 not envying agent 1 bounds h0(rival) - h1(strong)
    # by her deficit on the large agent's bundle.
    edge_b = bundle_value(profile_b, 1, sorted(last)) - bundle_value(profile_b, 0, sorted(last))
    steps.append(
        checked_step("cc2" if warmup else "cc11g", edge_b, "=", -eps, "no-envy-of-large-agent")
    )
    combined = edge_a + edge_b
    steps.append(
        checked_step("cc3" if warmup else "ccc", combined, "=",
                     cap * x + (cap + 1) * eps, "h0-gap-bound")
    )
    # Profile (c): charging agent 0 a non-negative payment needs
    # h0(rival) to cover the large agent's realized value.
    rival_total = bundle_value(profile_c, 1, sorted(every))
    steps.append(checked_step("npt1", rival_total, "=", (cap + 1) * x + eps, "npt-floor"))
    conclusion = rival_total - combined
    steps.append(checked_step("conclusion", conclusion, "=", x - cap * eps, "h0-at-zero-floor"))
    return ChainReport(tuple(steps), True, conclusion)
