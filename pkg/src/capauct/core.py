"""Exact-rational domain types for capacitated allocation markets.

Everything downstream (winner determination, payment rules, property
audits) works on the types defined here.  All numeric quantities are
`fractions.Fraction`, so every comparison, tie and margin is decidable
exactly; there is no floating-point mode.

Agents and goods are identified by 0-based index only.  An agent with
capacity ``c`` values a bundle at the sum of its ``c`` best units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

#: The exact rational scalar type used throughout the package.  Fraction
#: already guarantees the canonical form (reduced, positive denominator).
Rat = Fraction

ZERO = Fraction(0)


class InvalidInstanceError(ValueError):
    """Raised when an instance document or constructor argument is malformed."""


def _as_rat(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise InvalidInstanceError(f"expected an integer or Fraction, got {type(x).__name__}")


@dataclass(frozen=True)
class Instance:
    """A market: agent capacities, good supplies and a per-unit value matrix.

    ``values[i][j]`` is agent ``i``'s value for one unit of good ``j``.
    Capacities bound how many units an agent may receive in total;
    supplies bound how many units of each good exist.
    """

    agent_capacity: tuple[int, ...]
    good_supply: tuple[int, ...]
    values: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "agent_capacity", tuple(int(c) for c in self.agent_capacity))
        object.__setattr__(self, "good_supply", tuple(int(q) for q in self.good_supply))
        object.__setattr__(
            self, "values", tuple(tuple(_as_rat(v) for v in row) for row in self.values)
        )
        problems = validate(self)
        if problems:
            raise InvalidInstanceError("; ".join(problems))

    @property
    def n_agents(self) -> int:
        return len(self.agent_capacity)

    @property
    def n_goods(self) -> int:
        return len(self.good_supply)

    def value(self, agent: int, good: int) -> Fraction:
        return self.values[agent][good]


def validate(instance: Instance) -> list[str]:
    """Return a list of invariant violations (empty when the instance is valid)."""
    problems = []
    n, m = len(instance.agent_capacity), len(instance.good_supply)
    for i, c in enumerate(instance.agent_capacity):
        if c < 0:
            problems.append(f"agent {i} has negative capacity {c}")
    for j, q in enumerate(instance.good_supply):
        if q <= 0:
            problems.append(f"good {j} has non-positive supply {q}")
    if len(instance.values) != n:
        problems.append(f"value matrix has {len(instance.values)} rows, expected {n}")
    for i, row in enumerate(instance.values):
        if len(row) != m:
            problems.append(f"value row {i} has {len(row)} entries, expected {m}")
        for j, v in enumerate(row):
            if v < 0:
                problems.append(f"value[{i}][{j}] = {v} is negative")
    return problems


@dataclass(frozen=True)
class Allocation:
    """An integral assignment of good units to agents.

    ``units[i][j]`` is the number of units of good ``j`` held by agent
    ``i``.  Feasibility against an instance (capacities and supplies) is
    checked by :func:`allocation_violations`, not by the type itself.
    """

    units: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(tuple(int(u) for u in row) for row in self.units))
        for row in self.units:
            for u in row:
                if u < 0:
                    raise InvalidInstanceError(f"negative unit count {u} in allocation")

    @staticmethod
    def empty(n_agents: int, n_goods: int) -> "Allocation":
        return Allocation(tuple((0,) * n_goods for _ in range(n_agents)))

    def bundle(self, agent: int) -> tuple[int, ...]:
        """The agent's bundle as a multiset of good indices (one entry per unit)."""
        row = self.units[agent]
        return tuple(j for j, u in enumerate(row) for _ in range(u))

    def agent_total(self, agent: int) -> int:
        return sum(self.units[agent])

    def good_total(self, good: int) -> int:
        return sum(row[good] for row in self.units)


def allocation_violations(instance: Instance, allocation: Allocation) -> list[str]:
    """Check an allocation against capacities and supplies; empty list = feasible."""
    problems = []
    if len(allocation.units) != instance.n_agents:
        return [f"allocation has {len(allocation.units)} rows, expected {instance.n_agents}"]
    for i, row in enumerate(allocation.units):
        if len(row) != instance.n_goods:
            return [f"allocation row {i} has {len(row)} entries, expected {instance.n_goods}"]
        if sum(row) > instance.agent_capacity[i]:
            problems.append(f"agent {i} holds {sum(row)} units, capacity {instance.agent_capacity[i]}")
    for j in range(instance.n_goods):
        total = allocation.good_total(j)
        if total > instance.good_supply[j]:
            problems.append(f"good {j} allocated {total} units, supply {instance.good_supply[j]}")
    return problems


@dataclass(frozen=True)
class MechanismOutcome:
    """Allocation plus payments, with the pivot values kept for audit replay."""

    allocation: Allocation
    payments: tuple[Fraction, ...]
    pivot_rule_id: str
    pivot_values: tuple[Fraction, ...]


def bundle_value(instance: Instance, agent: int, bundle: Iterable[int]) -> Fraction:
    """Value of a multiset of good indices to an agent, capped at her capacity.

    The bundle is additive up to the agent's capacity: the value equals
    the sum of the capacity-many largest unit values in the bundle.
    Raises on unknown indices or a bundle exceeding good supplies.
    """
    if not 0 <= agent < instance.n_agents:
        raise IndexError(f"unknown agent index {agent}")
    counts = [0] * instance.n_goods
    unit_values = []
    for g in bundle:
        if not 0 <= g < instance.n_goods:
            raise IndexError(f"unknown good index {g}")
        counts[g] += 1
        if counts[g] > instance.good_supply[g]:
            raise InvalidInstanceError(f"bundle uses {counts[g]} units of good {g}, supply {instance.good_supply[g]}")
        unit_values.append(instance.values[agent][g])
    unit_values.sort(reverse=True)
    cap = instance.agent_capacity[agent]
    return sum(unit_values[:cap], ZERO)


def total_value(instance: Instance, allocation: Allocation) -> Fraction:
    """Welfare of an allocation: the unit-weighted sum of values.

    Allocations are capacity-feasible by contract, so the linear sum
    equals the sum of capacitated bundle values.
    """
    total = ZERO
    for i, row in enumerate(allocation.units):
        vrow = instance.values[i]
        for j, u in enumerate(row):
            if u:
                total += u * vrow[j]
    return total


def top_indices(values: Sequence[Fraction], count: int) -> tuple[int, ...]:
    """Indices of the ``count`` largest entries, ties going to smaller indices.

    Returned sorted ascending.  Raises if ``count`` exceeds the vector length.
    """
    if count > len(values):
        raise ValueError(f"cannot take top {count} of {len(values)} entries")
    order = sorted(range(len(values)), key=lambda k: (-values[k], k))
    return tuple(sorted(order[:count]))


# ---------------------------------------------------------------------------
# JSON instance format
#
#   {"agents": [{"capacity": int}, ...],
#    "goods":  [{"supply": int}, ...],
#    "values": [[{"num": int, "den": int} | int, ...], ...]}
#
# Bare integers are shorthand for den = 1.  This format is the contract
# shared by the CLI and the fixture files.
# ---------------------------------------------------------------------------


def rat_from_json(obj) -> Fraction:
    if isinstance(obj, bool):
        raise InvalidInstanceError("booleans are not rationals")
    if isinstance(obj, int):
        return Fraction(obj)
    if isinstance(obj, dict):
        try:
            num, den = obj["num"], obj["den"]
        except KeyError as exc:
            raise InvalidInstanceError(f"rational object missing key {exc}")
        if not isinstance(num, int) or not isinstance(den, int) or isinstance(num, bool) or isinstance(den, bool):
            raise InvalidInstanceError(f"rational parts must be integers, got {obj!r}")
        if den == 0:
            raise InvalidInstanceError("rational with denominator 0")
        return Fraction(num, den)
    raise InvalidInstanceError(f"cannot parse rational from {obj!r}")


def rat_to_json(x: Fraction) -> dict:
    return {"num": x.numerator, "den": x.denominator}


def load(data: bytes | str) -> Instance:
    """Parse an instance document; raises InvalidInstanceError on any defect."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise InvalidInstanceError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidInstanceError("top-level document must be an object")
    for key in ("agents", "goods", "values"):
        if key not in doc:
            raise InvalidInstanceError(f"missing key {key!r}")
        if not isinstance(doc[key], list):
            raise InvalidInstanceError(f"{key!r} must be an array")
    try:
        capacities = tuple(entry["capacity"] for entry in doc["agents"])
        supplies = tuple(entry["supply"] for entry in doc["goods"])
    except (TypeError, KeyError) as exc:
        raise InvalidInstanceError(f"malformed agent/good entry: {exc}") from exc
    for c in capacities:
        if not isinstance(c, int) or isinstance(c, bool):
            raise InvalidInstanceError(f"capacity {c!r} is not an integer")
    for q in supplies:
        if not isinstance(q, int) or isinstance(q, bool):
            raise InvalidInstanceError(f"supply {q!r} is not an integer")
    values = tuple(tuple(rat_from_json(v) for v in row) for row in doc["values"])
    return Instance(capacities, supplies, values)


def save(instance: Instance) -> bytes:
    """Serialize an instance canonically; ``load(save(x)) == x``."""
    doc = {
        "agents": [{"capacity": c} for c in instance.agent_capacity],
        "goods": [{"supply": q} for q in instance.good_supply],
        "values": [[rat_to_json(v) for v in row] for row in instance.values],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def scaled_values(instance: Instance) -> tuple[int, list[list[int]]]:
    """Clear denominators: returns (D, M) with M[i][j] = values[i][j] * D, exactly.

    Integer arithmetic on the scaled matrix is much faster than Fraction
    arithmetic and loses nothing; solvers divide by D on the way out.
    """
    denom = 1
    for row in instance.values:
        for v in row:
            denom = denom * v.denominator // math.gcd(denom, v.denominator)
    scaled = [[int(v * denom) for v in row] for row in instance.values]
    return denom, scaled
