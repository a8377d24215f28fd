from fractions import Fraction

import pytest

from capauct import (
    Allocation,
    Instance,
    compute_walrasian_prices,
    no_ic_walrasian_chain,
    social_optimum,
    verify_walrasian,
)
from capauct.generators import random_sized_instance, rng_for
from capauct.walrasian import chain_instances

F = Fraction


def test_example1_equilibrium_prices(example1):
    certificate = compute_walrasian_prices(example1)
    assert certificate.prices == (F(1), F(1))
    assert certificate.allocation.units == ((1, 0), (0, 1))
    for evidence in certificate.per_agent:
        assert evidence.own_utility == evidence.best_utility


def test_single_agent_with_slack_capacity_gets_zero_prices():
    inst = Instance((3,), (1, 1, 1), ((F(2), F(1), F(0)),))
    certificate = compute_walrasian_prices(inst)
    assert certificate.prices == (F(0), F(0), F(0))
    assert certificate.allocation.units == ((1, 1, 0),)


def test_first_adversarial_market_prices_are_bounded_below():
    instance, _ = chain_instances(F(1, 5))
    certificate = compute_walrasian_prices(instance)
    assert certificate.prices[0] >= F(9, 10)
    assert certificate.prices[1] >= F(1)
    assert verify_walrasian(instance, certificate.prices, certificate.allocation) == []


def test_verify_walrasian_rejects_wrong_prices(example1):
    opt = social_optimum(example1)
    violations = verify_walrasian(example1, (F(0), F(0)), opt.allocation)
    kinds = {v.kind for v in violations}
    assert "demand" in kinds  # agent 1 would demand both goods at zero prices
    assert verify_walrasian(example1, (F(1), F(1)), opt.allocation) == []


def test_verify_walrasian_flags_unsold_priced_good():
    inst = Instance((1,), (1, 1), ((F(2), F(0)),))
    opt = social_optimum(inst)
    bad = verify_walrasian(inst, (F(1), F(1)), opt.allocation)
    assert any(v.kind == "clearing" and v.good == 1 for v in bad)


def test_verify_walrasian_empty_market():
    inst = Instance((), (), ())
    assert verify_walrasian(inst, (), Allocation.empty(0, 0)) == []


def test_certificates_verify_on_random_instances():
    for k in range(150):
        rng = rng_for(73, k)
        inst = random_sized_instance(rng)
        certificate = compute_walrasian_prices(inst)
        assert verify_walrasian(inst, certificate.prices, certificate.allocation) == [], f"seed {k}"


def test_price_plus_surplus_accounting_on_unit_supplies():
    # allocated prices plus agent surpluses add back up to the optimal welfare
    for k in range(120):
        rng = rng_for(79, k)
        inst = random_sized_instance(rng, supply_max=1)
        certificate = compute_walrasian_prices(inst)
        price_side = sum(
            (certificate.prices[j] for j in range(inst.n_goods)
             if certificate.allocation.good_total(j)),
            F(0),
        )
        surplus_side = sum((e.own_utility for e in certificate.per_agent), F(0))
        assert price_side + surplus_side == certificate.welfare, f"seed {k}"


def test_chain_margin_is_half_eps():
    for eps in (F(1, 5), F(1, 2), F(3, 7)):
        report = no_ic_walrasian_chain(eps)
        assert report.verdict
        assert report.conclusion == eps / 2
    report = no_ic_walrasian_chain(F(1, 5))
    assert [s.label for s in report.steps][-2:] == ["rationality-contradiction", "margin"]
    floors = {s.label: s.lhs for s in report.steps}
    assert floors["pivot-floor"] == F(31, 10)
    assert floors["payment-floor"] == F(9, 10)


@pytest.mark.parametrize("eps", [F(0), F(1), F(-1, 2), F(7, 5)])
def test_chain_rejects_out_of_range_eps(eps):
    with pytest.raises(ValueError):
        no_ic_walrasian_chain(eps)
