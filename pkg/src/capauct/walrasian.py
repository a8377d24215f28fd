"""Walrasian item prices for capacitated markets, with verification.

Capacitated valuations are gross substitutes, so item prices supporting
the optimal allocation always exist.  We read candidate prices off the
matching solver's dual potentials (good-side potentials shifted so that
goods with unsold units price at zero) and then *verify* the
equilibrium with the exhaustive demand oracle before returning it: each
agent's bundle must be demand-optimal at the prices, and every unsold
unit must belong to a zero-priced good.  A verification failure is a
solver bug, not a market condition, and raises.

Also here: the driver that replays, with exact rationals, the argument
that no incentive-compatible mechanism can quote Walrasian prices once
agents can want several goods.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

from .audit import MAX_DEMAND_GOODS, AuditError, _enumerate_demand
from .core import Allocation, Instance, ZERO, bundle_value, rat_to_json
from .matching import node_potentials, social_optimum
from .reports import ChainReport, checked_step


class WalrasianError(RuntimeError):
    """Raised when a computed price vector fails its own verification."""


class DemandEvidence(NamedTuple):
    """Proof that one agent's bundle is demand-optimal at the prices."""

    agent: int
    own_utility: Fraction
    best_utility: Fraction


class WalrasianViolation(NamedTuple):
    kind: str  # "demand" | "clearing" | "negative_price"
    agent: Optional[int]
    good: Optional[int]
    detail: str

    def to_json(self) -> dict:
        return {"type": "walrasian_violation", "kind": self.kind, "agent": self.agent,
                "good": self.good, "detail": self.detail}


@dataclass(frozen=True)
class EquilibriumCertificate:
    """Prices plus allocation, with per-agent demand evidence attached.

    Instances of this type are only ever built after verification, so
    holding one means the equilibrium conditions were checked, not
    assumed.
    """

    prices: tuple[Fraction, ...]
    allocation: Allocation
    per_agent: tuple[DemandEvidence, ...]
    welfare: Fraction

    def to_json(self) -> dict:
        return {
            "type": "walrasian",
            "prices": [rat_to_json(p) for p in self.prices],
            "allocation": [list(row) for row in self.allocation.units],
            "welfare": rat_to_json(self.welfare),
            "verified": True,
        }


def _expand_units(instance: Instance) -> list[int]:
    """Unit-level view of the goods: one entry per unit, value = its good."""
    return [j for j in range(instance.n_goods) for _ in range(instance.good_supply[j])]


def _demand_evidence(
    instance: Instance, prices: Sequence[Fraction], allocation: Allocation
) -> list[WalrasianViolation | DemandEvidence]:
    """Per-agent demand check via exhaustive enumeration over good units.

    Multi-unit goods are expanded into identical unit items (each priced
    at the good's price), which reduces the multiset demand question to
    the set question the oracle answers.
    """
    unit_goods = _expand_units(instance)
    if len(unit_goods) > MAX_DEMAND_GOODS:
        raise AuditError(
            f"{len(unit_goods)} good units exceed the demand enumeration bound {MAX_DEMAND_GOODS}"
        )
    results: list[WalrasianViolation | DemandEvidence] = []
    for i in range(instance.n_agents):
        unit_values = [instance.values[i][j] for j in unit_goods]
        unit_prices = [prices[j] for j in unit_goods]
        denom, _, best_scaled = _enumerate_demand(unit_values, instance.agent_capacity[i], unit_prices)
        best = Fraction(best_scaled, denom)
        own = bundle_value(instance, i, allocation.bundle(i)) - sum(
            (allocation.units[i][j] * prices[j] for j in range(instance.n_goods)), ZERO
        )
        if own != best:
            results.append(
                WalrasianViolation(
                    "demand", i, None,
                    f"agent {i} gets utility {own} but demands utility {best}",
                )
            )
        else:
            results.append(DemandEvidence(i, own, best))
    return results


def verify_walrasian(
    instance: Instance, prices: Sequence[Fraction], allocation: Allocation
) -> list[WalrasianViolation]:
    """All equilibrium violations for (prices, allocation); empty list = ok."""
    prices = tuple(Fraction(p) for p in prices)
    if len(prices) != instance.n_goods:
        raise AuditError("price vector length mismatch")
    violations = []
    for j, p in enumerate(prices):
        if p < 0:
            violations.append(
                WalrasianViolation("negative_price", None, j, f"good {j} priced {p}")
            )
    for j in range(instance.n_goods):
        if allocation.good_total(j) < instance.good_supply[j] and prices[j] != 0:
            violations.append(
                WalrasianViolation(
                    "clearing", None, j,
                    f"good {j} has unsold units but price {prices[j]} != 0",
                )
            )
    for entry in _demand_evidence(instance, prices, allocation):
        if isinstance(entry, WalrasianViolation):
            violations.append(entry)
    return violations


def compute_walrasian_prices(instance: Instance) -> EquilibriumCertificate:
    """Equilibrium prices from the matching duals, verified before return."""
    opt = social_optimum(instance)
    _, good_pot, _, sink_pot = node_potentials(instance, opt.allocation)
    prices = tuple(max(ZERO, sink_pot - good_pot[j]) for j in range(instance.n_goods))
    violations = verify_walrasian(instance, prices, opt.allocation)
    if violations:
        raise WalrasianError(
            "computed prices failed verification: " + "; ".join(v.detail for v in violations)
        )
    evidence = tuple(
        e for e in _demand_evidence(instance, prices, opt.allocation) if isinstance(e, DemandEvidence)
    )
    return EquilibriumCertificate(prices, opt.allocation, evidence, opt.welfare)


# ---------------------------------------------------------------------------
# Replication driver: incentive-compatible Walrasian pricing is impossible
# once capacities reach two.
# ---------------------------------------------------------------------------


def chain_instances(eps: Fraction) -> tuple[Instance, Instance]:
    """The adversarial pair of 2-agent, 3-good, capacity-2 markets.

    The second market changes only agent 0's row, which pins agent 0's
    payment through the pivot term while the equilibrium prices of the
    first market force that term high.
    """
    one = Fraction(1)
    row_2 = (one - eps / 2, one, one + eps)
    v = Instance((2, 2), (1, 1, 1), ((one + eps, one + eps, one - eps), row_2))
    v_prime = Instance((2, 2), (1, 1, 1), ((one - eps, ZERO, ZERO), row_2))
    return v, v_prime


def _expect_allocation(instance: Instance, expected: Allocation, label: str) -> Fraction:
    opt = social_optimum(instance)
    if opt.allocation != expected:
        raise WalrasianError(f"{label}: solver optimum {opt.allocation.units} "
                             f"differs from expected {expected.units}")
    return opt.welfare


def no_ic_walrasian_chain(eps: Fraction) -> ChainReport:
    """Replay the impossibility argument for IC Walrasian pricing, exactly.

    For the first market, any Walrasian prices must make agent 1 (who
    has spare capacity) decline goods a and b, which bounds the prices
    below and hence bounds agent 0's pivot term from below.  Carrying
    that bound into the second market forces agent 0 to pay more than
    her value for the single good she wins: a negative-utility
    contradiction whose exact margin is eps/2.  Every inequality is
    checked as it is emitted; the report's conclusion is the margin.
    """
    eps = Fraction(eps)
    if not ZERO < eps < 1:
        raise ValueError(f"eps must lie strictly between 0 and 1, got {eps}")
    v, v_prime = chain_instances(eps)
    one = Fraction(1)

    opt_v = Allocation(((1, 1, 0), (0, 0, 1)))
    welfare_v = _expect_allocation(v, opt_v, "first market")
    opt_vp = Allocation(((1, 0, 0), (0, 1, 1)))
    welfare_vp = _expect_allocation(v_prime, opt_vp, "second market")

    steps = [
        checked_step("optimum", welfare_v, "=", 3 + 3 * eps, "split-ab-c"),
        checked_step("optimum-prime", welfare_vp, "=", Fraction(3), "split-a-bc"),
    ]
    # Agent 1 keeps spare capacity under the first optimum, so equilibrium
    # prices must price her out of goods a and b entirely.
    price_a_floor = v.values[1][0]
    price_b_floor = v.values[1][1]
    steps.append(checked_step("price-a-floor", price_a_floor, "=", one - eps / 2, "pa"))
    steps.append(checked_step("price-b-floor", price_b_floor, "=", one, "pb"))

    # Agent 0 pays the two item prices; as a pivot payment that equals
    # h_0(row 1) minus agent 1's realized value, bounding h_0 from below.
    other_value_v = bundle_value(v, 1, opt_v.bundle(1))
    h0_floor = price_a_floor + price_b_floor + other_value_v
    steps.append(checked_step("pivot-floor", h0_floor, "=", 3 + eps / 2, "h1-bound"))

    # Same pivot term in the second market (agent 1's row is unchanged),
    # so agent 0's payment there is bounded below as well.
    other_value_vp = bundle_value(v_prime, 1, opt_vp.bundle(1))
    steps.append(checked_step("other-value-prime", other_value_vp, "=", 2 + eps, "v2-bc"))
    payment_floor = h0_floor - other_value_vp
    steps.append(checked_step("payment-floor", payment_floor, "=", one - eps / 2, "p1-bound"))

    # Contradiction: the bound exceeds agent 0's value for her bundle.
    own_value = bundle_value(v_prime, 0, opt_vp.bundle(0))
    steps.append(checked_step("rationality-contradiction", payment_floor, ">", own_value, "ir"))
    margin = payment_floor - own_value
    steps.append(checked_step("margin", margin, "=", eps / 2, "eps-half"))
    return ChainReport(tuple(steps), True, margin)
