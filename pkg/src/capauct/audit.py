"""Decidable property checkers over mechanism outcomes.

Everything here is exact: a reported envy pair, rationality deficit or
deviation gain is a strictly positive rational, never a tolerance call.
The demand oracle enumerates bundles outright (bounded good count), so
it is an independent witness for the price-computation code rather than
a restatement of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Optional, Sequence

from .core import (
    Allocation,
    Instance,
    MechanismOutcome,
    ZERO,
    bundle_value,
    rat_to_json,
)

#: Exhaustive demand enumeration caps out here (2^15 bundles).
MAX_DEMAND_GOODS = 15


class AuditError(ValueError):
    """Raised on inputs outside a checker's declared bounds."""


class EnvyPair(NamedTuple):
    envier: int
    envied: int
    margin: Fraction


class IRViolation(NamedTuple):
    agent: int
    deficit: Fraction


class NPTViolation(NamedTuple):
    agent: int
    payment: Fraction


class ICWitness(NamedTuple):
    agent: int
    deviation: tuple[Fraction, ...]
    gain: Fraction


@dataclass(frozen=True)
class AuditReport:
    """Per-property verdicts with witnesses; empty lists mean the property held."""

    envy_pairs: tuple[EnvyPair, ...] = ()
    ir_violations: tuple[IRViolation, ...] = ()
    npt_violations: tuple[NPTViolation, ...] = ()
    ic_witnesses: tuple[ICWitness, ...] = ()

    @property
    def ok(self) -> bool:
        return not (self.envy_pairs or self.ir_violations or self.npt_violations or self.ic_witnesses)

    def to_json(self) -> dict:
        return {
            "type": "audit",
            "ok": self.ok,
            "envy_pairs": [
                {"envier": p.envier, "envied": p.envied, "margin": rat_to_json(p.margin)}
                for p in self.envy_pairs
            ],
            "ir_violations": [
                {"agent": v.agent, "deficit": rat_to_json(v.deficit)} for v in self.ir_violations
            ],
            "npt_violations": [
                {"agent": v.agent, "payment": rat_to_json(v.payment)} for v in self.npt_violations
            ],
            "ic_witnesses": [
                {
                    "agent": w.agent,
                    "deviation": [rat_to_json(v) for v in w.deviation],
                    "gain": rat_to_json(w.gain),
                }
                for w in self.ic_witnesses
            ],
        }


def envy_pairs_from_values(
    cross_values: Sequence[Sequence[Fraction]], payments: Sequence[Fraction]
) -> list[EnvyPair]:
    """Envy pairs given cross_values[i][j] = value of j's bundle to agent i."""
    pairs = []
    n = len(payments)
    for i in range(n):
        own_utility = cross_values[i][i] - payments[i]
        for j in range(n):
            if j == i:
                continue
            swapped = cross_values[i][j] - payments[j]
            if swapped > own_utility:
                pairs.append(EnvyPair(i, j, swapped - own_utility))
    return pairs


def _cross_values(instance: Instance, allocation: Allocation) -> list[list[Fraction]]:
    bundles = [allocation.bundle(j) for j in range(instance.n_agents)]
    return [
        [bundle_value(instance, i, bundles[j]) for j in range(instance.n_agents)]
        for i in range(instance.n_agents)
    ]


def envy_check(instance: Instance, outcome: MechanismOutcome) -> list[EnvyPair]:
    """Agents who would strictly prefer another agent's bundle-and-payment.

    The envied bundle is valued with the *envier's* capacity.
    """
    return envy_pairs_from_values(_cross_values(instance, outcome.allocation), outcome.payments)


def ir_check(instance: Instance, outcome: MechanismOutcome) -> list[IRViolation]:
    """Agents with strictly negative utility under truthful play."""
    violations = []
    for i in range(instance.n_agents):
        utility = bundle_value(instance, i, outcome.allocation.bundle(i)) - outcome.payments[i]
        if utility < 0:
            violations.append(IRViolation(i, -utility))
    return violations


def npt_check(outcome: MechanismOutcome) -> list[NPTViolation]:
    """Agents the mechanism pays (strictly negative payments)."""
    return [NPTViolation(i, p) for i, p in enumerate(outcome.payments) if p < 0]


def ic_probe(
    instance: Instance,
    rule,
    agent: int,
    deviations: Sequence[Sequence[Fraction]],
) -> list[ICWitness]:
    """Search a finite set of misreports for a profitable one.

    Sound but not complete: an empty result is evidence, not proof.  The
    structural guarantee (the pivot never reads the agent's own row) is
    tested separately; this is the belt-and-braces fuzz.
    """
    from .mechanisms import vcg_outcome  # local import avoids a cycle

    truthful = vcg_outcome(instance, rule)
    truthful_utility = (
        bundle_value(instance, agent, truthful.allocation.bundle(agent)) - truthful.payments[agent]
    )
    witnesses = []
    for deviation in deviations:
        row = tuple(Fraction(v) for v in deviation)
        if len(row) != instance.n_goods or any(v < 0 for v in row):
            raise AuditError(f"bad deviation row {deviation!r}")
        values = list(instance.values)
        values[agent] = row
        reported = Instance(instance.agent_capacity, instance.good_supply, tuple(values))
        outcome = vcg_outcome(reported, rule)
        utility = (
            bundle_value(instance, agent, outcome.allocation.bundle(agent)) - outcome.payments[agent]
        )
        if utility > truthful_utility:
            witnesses.append(ICWitness(agent, row, utility - truthful_utility))
    return witnesses


# ---------------------------------------------------------------------------
# Demand oracle and gross-substitutes check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DemandSet:
    """All utility-maximizing bundles of a single agent at given prices."""

    prices: tuple[Fraction, ...]
    optimal_bundles: frozenset[frozenset[int]]
    utility: Fraction


def _scaled_ints(rows: Sequence[Sequence[Fraction]]) -> tuple[int, list[list[int]]]:
    denom = 1
    for row in rows:
        for v in row:
            denom = denom * v.denominator // math.gcd(denom, v.denominator)
    return denom, [[int(v * denom) for v in row] for row in rows]


def _enumerate_demand(
    values: Sequence[Fraction], capacity: int, prices: Sequence[Fraction]
) -> tuple[int, list[int], int]:
    """Exhaustive demand: returns (denominator, argmax bitmasks, scaled utility)."""
    m = len(values)
    if m > MAX_DEMAND_GOODS:
        raise AuditError(f"{m} goods exceed the demand enumeration bound {MAX_DEMAND_GOODS}")
    if len(prices) != m:
        raise AuditError("price vector length mismatch")
    denom, scaled = _scaled_ints([list(values), list(prices)])
    vals, prs = scaled
    by_value = sorted(range(m), key=lambda j: (-vals[j], j))
    best: Optional[int] = None
    argmax: list[int] = []
    for mask in range(1 << m):
        price_sum = 0
        worth = 0
        taken = 0
        for j in by_value:
            if mask >> j & 1:
                price_sum += prs[j]
                if taken < capacity:
                    worth += vals[j]
                    taken += 1
        utility = worth - price_sum
        if best is None or utility > best:
            best = utility
            argmax = [mask]
        elif utility == best:
            argmax.append(mask)
    assert best is not None
    return denom, argmax, best


def _mask_to_bundle(mask: int, m: int) -> frozenset[int]:
    return frozenset(j for j in range(m) if mask >> j & 1)


def demand_set(
    values: Sequence[Fraction], capacity: int, prices: Sequence[Fraction]
) -> DemandSet:
    """Every bundle maximizing value-minus-price for a capacitated agent."""
    m = len(values)
    denom, argmax, best = _enumerate_demand(values, capacity, prices)
    return DemandSet(
        tuple(Fraction(p) for p in prices),
        frozenset(_mask_to_bundle(mask, m) for mask in argmax),
        Fraction(best, denom),
    )


class GSCounterexample(NamedTuple):
    """A price raise that evicted a same-priced good from every optimal bundle."""

    prices_low: tuple[Fraction, ...]
    prices_high: tuple[Fraction, ...]
    bundle_low: frozenset[int]
    kept_goods: frozenset[int]


def _gs_over_demands(
    demand_masks: Callable[[tuple[Fraction, ...]], list[int]],
    n_goods: int,
    price_pairs: Sequence[tuple[Sequence[Fraction], Sequence[Fraction]]],
) -> Optional[GSCounterexample]:
    """Substitutes containment test over an arbitrary demand oracle."""
    for low, high in price_pairs:
        low = tuple(Fraction(p) for p in low)
        high = tuple(Fraction(p) for p in high)
        if len(low) != n_goods or len(high) != n_goods:
            raise AuditError("price vector length mismatch")
        if any(h < l for l, h in zip(low, high)):
            raise AuditError("second price vector must dominate the first componentwise")
        same_mask = 0
        for j in range(n_goods):
            if low[j] == high[j]:
                same_mask |= 1 << j
        argmax_low = demand_masks(low)
        argmax_high = demand_masks(high)
        for mask_low in argmax_low:
            kept = mask_low & same_mask
            if not any(kept & ~mask_high == 0 for mask_high in argmax_high):
                return GSCounterexample(
                    low, high, _mask_to_bundle(mask_low, n_goods), _mask_to_bundle(kept, n_goods)
                )
    return None


def gross_substitutes_check(
    values: Sequence[Fraction],
    capacity: int,
    price_pairs: Sequence[tuple[Sequence[Fraction], Sequence[Fraction]]],
) -> Optional[GSCounterexample]:
    """Verify gross substitutes on explicit price pairs; None means no violation.

    For each pair (p, q) with q >= p componentwise and each bundle
    optimal at p, some bundle optimal at q must retain every good whose
    price did not move.  Returns the first failing tuple otherwise.
    """

    def demand_masks(prices: tuple[Fraction, ...]) -> list[int]:
        _, argmax, _ = _enumerate_demand(values, capacity, prices)
        return argmax

    return _gs_over_demands(demand_masks, len(values), price_pairs)


def gross_substitutes_check_set(
    valuation: dict[frozenset[int], Fraction],
    n_goods: int,
    price_pairs: Sequence[tuple[Sequence[Fraction], Sequence[Fraction]]],
) -> Optional[GSCounterexample]:
    """Same containment test, but for an explicit set valuation.

    Exists so the checker's sensitivity can be demonstrated on
    valuations outside the capacitated family (complements fail it).
    """
    if n_goods > MAX_DEMAND_GOODS:
        raise AuditError(f"{n_goods} goods exceed the enumeration bound {MAX_DEMAND_GOODS}")

    def demand_masks(prices: tuple[Fraction, ...]) -> list[int]:
        best: Optional[Fraction] = None
        argmax: list[int] = []
        for mask in range(1 << n_goods):
            bundle = _mask_to_bundle(mask, n_goods)
            if bundle not in valuation:
                raise AuditError(f"valuation missing bundle {set(bundle)}")
            utility = valuation[bundle] - sum((prices[j] for j in bundle), ZERO)
            if best is None or utility > best:
                best, argmax = utility, [mask]
            elif utility == best:
                argmax.append(mask)
        return argmax

    return _gs_over_demands(demand_masks, n_goods, price_pairs)


# ---------------------------------------------------------------------------
# Envy-free payment feasibility (difference constraints)
# ---------------------------------------------------------------------------

#: Anchor vertex index used in negative-cycle witnesses for the bound
#: constraints (payment >= 0 / payment <= own value).
BOUND_ANCHOR = -1


@dataclass(frozen=True)
class EFPaymentResult:
    feasible: bool
    payments: Optional[tuple[Fraction, ...]] = None
    negative_cycle: Optional[tuple[int, ...]] = None
    cycle_weight: Optional[Fraction] = None


def ef_payment_feasible(
    instance: Instance,
    allocation: Allocation,
    require_ir: bool = False,
    require_npt: bool = False,
) -> EFPaymentResult:
    """Decide whether envy-free payments exist for a fixed allocation.

    Envy-freeness pins down payment differences: p_i - p_j may not
    exceed what agent i gains by holding her own bundle instead of j's.
    These are difference constraints, so feasibility is a shortest-path
    question: a witness payment vector exists exactly when the
    constraint graph has no negative cycle, and a negative cycle is
    itself the minimal certificate of impossibility.  Bound constraints
    (IR, non-negativity) run through an anchor vertex reported as
    ``BOUND_ANCHOR`` in cycle witnesses.
    """
    n = instance.n_agents
    cross = _cross_values(instance, allocation)
    anchor = n
    edges: list[tuple[int, int, Fraction]] = []
    for i in range(n):
        for j in range(n):
            if i != j:
                # p_i - p_j <= cross[i][i] - cross[i][j]
                edges.append((j, i, cross[i][i] - cross[i][j]))
    if require_ir:
        for i in range(n):
            edges.append((anchor, i, cross[i][i]))  # p_i <= own value
    if require_npt:
        for i in range(n):
            edges.append((i, anchor, ZERO))  # 0 <= p_i
    size = n + 1
    dist = [ZERO] * size  # implicit super-source: detects any negative cycle
    pred = [-1] * size
    cycle_node = -1
    for round_no in range(size + 1):
        changed = False
        for u, v, w in edges:
            cand = dist[u] + w
            if cand < dist[v]:
                dist[v] = cand
                pred[v] = u
                changed = True
                cycle_node = v
        if not changed:
            break
        if round_no == size:
            node = cycle_node
            for _ in range(size):
                node = pred[node]
            cycle = [node]
            walk = pred[node]
            while walk != node:
                cycle.append(walk)
                walk = pred[walk]
            cycle.reverse()
            weight = ZERO
            lookup = {(u, v): w for u, v, w in edges}
            for k, v in enumerate(cycle):
                u = cycle[k - 1]
                weight += lookup[(u, v)]
            witness = tuple(BOUND_ANCHOR if v == anchor else v for v in cycle)
            return EFPaymentResult(False, negative_cycle=witness, cycle_weight=weight)
    shift = dist[anchor]
    payments = tuple(dist[i] - shift for i in range(n))
    return EFPaymentResult(True, payments=payments)
