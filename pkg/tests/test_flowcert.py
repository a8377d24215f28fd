from fractions import Fraction

import pytest

from capauct import (
    Allocation,
    Instance,
    brute_force_optimum,
    build_flow_diff_graph,
    build_no_envy_certificate,
    classify_two_agent,
    decompose,
    normalize_excluded,
    optimum_without,
    positive_transfer_chain,
    social_optimum,
    total_value,
)
from capauct.flowcert import FlowCertError, chain_profiles
from capauct.generators import random_sized_instance, rng_for

F = Fraction


def two_agent_fixture():
    return Instance((1, 1), (1, 1), ((F(2), F(0)), (F(1), F(2))))


def test_flow_diff_graph_single_arc():
    inst = two_agent_fixture()
    full = social_optimum(inst)
    reduced = optimum_without(inst, 0)
    assert full.allocation.units == ((1, 0), (0, 1))
    assert reduced.allocation.units == ((0, 0), (0, 1))
    graph = build_flow_diff_graph(inst, full.allocation, reduced.allocation, 0)
    assert graph.arc_flow() == {(("agent", 0), ("good", 0)): 1}
    assert graph.excess_of() == {("agent", 0): 1, ("good", 0): -1}


def test_flow_diff_graph_empty_when_allocations_agree():
    inst = Instance((1, 2), (1, 1), ((F(0), F(0)), (F(1), F(2))))
    full = social_optimum(inst)
    reduced = optimum_without(inst, 0)
    graph = build_flow_diff_graph(inst, full.allocation, reduced.allocation, 0)
    assert graph.arcs == ()
    assert graph.excess == ()
    assert decompose(graph) .paths == ()


def test_flow_diff_graph_rejects_nonempty_excluded_row(example1):
    full = social_optimum(example1)
    with pytest.raises(FlowCertError):
        build_flow_diff_graph(example1, full.allocation, full.allocation, 0)


def test_excess_bounds_on_heterogeneous_fixture():
    # excesses must fit inside the capacity slack on both allocation sides
    rng = rng_for(107, 0)
    from capauct.generators import random_instance

    inst = random_instance(rng, 3, 3, cap_choices=(2, 1), supply_max=1)
    inst = Instance((2, 1, 1), inst.good_supply, inst.values)
    full = social_optimum(inst)
    reduced = optimum_without(inst, 0)
    graph = build_flow_diff_graph(inst, full.allocation, reduced.allocation, 0)
    excess = graph.excess_of()
    assert sum(excess.values()) == 0
    for i in range(3):
        chi = excess.get(("agent", i), 0)
        if chi > 0:
            assert reduced.allocation.agent_total(i) + chi == full.allocation.agent_total(i)
            assert full.allocation.agent_total(i) <= inst.agent_capacity[i]
        elif chi < 0:
            assert full.allocation.agent_total(i) - chi == reduced.allocation.agent_total(i)
            assert reduced.allocation.agent_total(i) <= inst.agent_capacity[i]
    for j in range(3):
        chi = excess.get(("good", j), 0)
        if chi > 0:
            assert full.allocation.good_total(j) + chi == reduced.allocation.good_total(j)
            assert reduced.allocation.good_total(j) <= inst.good_supply[j]
        elif chi < 0:
            assert reduced.allocation.good_total(j) - chi == full.allocation.good_total(j)
            assert full.allocation.good_total(j) <= inst.good_supply[j]


def test_decompose_single_path():
    inst = two_agent_fixture()
    graph = build_flow_diff_graph(
        inst, social_optimum(inst).allocation, optimum_without(inst, 0).allocation, 0
    )
    decomposition = decompose(graph)
    assert decomposition.cycles == ()
    (path,) = decomposition.paths
    assert path.vertices == (("agent", 0), ("good", 0))
    assert path.flow == 1
    assert path.value == F(2)


def test_decomposition_reconstructs_arc_flows_and_welfare_gap():
    for k in range(250):
        rng = rng_for(83, k)
        inst = random_sized_instance(rng)
        excluded = rng.randrange(inst.n_agents)
        full = social_optimum(inst)
        reduced = optimum_without(inst, excluded)
        normalized = normalize_excluded(inst, full.allocation, reduced.allocation, excluded)
        graph = build_flow_diff_graph(inst, full.allocation, normalized, excluded)
        decomposition = decompose(graph)
        rebuilt: dict = {}
        gap = F(0)
        for piece in decomposition.paths + decomposition.cycles:
            gap += piece.flow * piece.value
            for arc in zip(piece.vertices, piece.vertices[1:]):
                rebuilt[arc] = rebuilt.get(arc, 0) + piece.flow
        assert rebuilt == graph.arc_flow(), f"seed {k}"
        assert gap == full.welfare - total_value(inst, normalized), f"seed {k}"


def test_normalized_decomposition_is_acyclic_with_unique_source():
    for k in range(250):
        rng = rng_for(89, k)
        inst = random_sized_instance(rng)
        excluded = rng.randrange(inst.n_agents)
        full = social_optimum(inst)
        reduced = optimum_without(inst, excluded)
        normalized = normalize_excluded(inst, full.allocation, reduced.allocation, excluded)
        graph = build_flow_diff_graph(inst, full.allocation, normalized, excluded)
        decomposition = decompose(
            graph, forbid_cycles=True, required_source=("agent", excluded)
        )
        assert decomposition.cycles == ()
        for path in decomposition.paths:
            assert path.vertices[0] == ("agent", excluded), f"seed {k}"
            source_excess = graph.excess_of()[path.vertices[0]]
            target_excess = graph.excess_of()[path.vertices[-1]]
            assert path.flow <= min(source_excess, -target_excess), f"seed {k}"


def test_normalize_keeps_welfare_and_feasibility():
    for k in range(250):
        rng = rng_for(97, k)
        inst = random_sized_instance(rng)
        excluded = rng.randrange(inst.n_agents)
        full = social_optimum(inst)
        reduced = optimum_without(inst, excluded)
        normalized = normalize_excluded(inst, full.allocation, reduced.allocation, excluded)
        assert total_value(inst, normalized) == reduced.welfare, f"seed {k}"


def test_normalize_removes_a_handmade_zero_value_cycle():
    # two identical agents, two identical goods: swapping the match is a
    # zero-value disagreement cycle between the two optima
    inst = Instance((1, 1, 1), (1, 1, 1),
                    ((F(3), F(0), F(0)),
                     (F(0), F(2), F(2)),
                     (F(0), F(2), F(2))))
    full = social_optimum(inst)
    # hand-build a reduced optimum that swaps agents 1 and 2 on goods 1, 2
    swapped = [list(row) for row in full.allocation.units]
    swapped[0] = [0, 0, 0]
    swapped[1], swapped[2] = list(full.allocation.units[2]), list(full.allocation.units[1])
    swapped[1][0] = swapped[2][0] = 0
    reduced = Allocation(tuple(tuple(r) for r in swapped))
    assert total_value(inst, reduced) == optimum_without(inst, 0).welfare
    graph = build_flow_diff_graph(inst, full.allocation, reduced, 0)
    assert len(graph.arcs) > 1
    normalized = normalize_excluded(inst, full.allocation, reduced, 0)
    assert total_value(inst, normalized) == total_value(inst, reduced)
    cleaned = build_flow_diff_graph(inst, full.allocation, normalized, 0)
    assert len(cleaned.arcs) < len(graph.arcs)
    decomposition = decompose(cleaned, forbid_cycles=True, required_source=("agent", 0))
    assert decomposition.cycles == ()


def test_normalize_returns_already_clean_input_unchanged():
    inst = two_agent_fixture()
    full = social_optimum(inst)
    reduced = optimum_without(inst, 0)
    assert normalize_excluded(inst, full.allocation, reduced.allocation, 0) == reduced.allocation


def test_certificate_on_example1(example1):
    certificate = build_no_envy_certificate(example1, 1, 0)
    assert certificate.holds
    assert certificate.value >= certificate.floor
    assert all(u == 0 for u in certificate.allocation.units[0])
    assert brute_force_optimum(example1).welfare >= certificate.value


def test_certificate_trivial_when_low_agent_wins_nothing():
    inst = Instance((2, 1), (1, 1), ((F(3), F(2)), (F(0), F(0))))
    certificate = build_no_envy_certificate(inst, 0, 1)
    reduced = optimum_without(inst, 0)
    assert certificate.allocation == reduced.allocation
    assert certificate.value == reduced.welfare
    assert certificate.floor == reduced.welfare


def test_certificate_requires_capacity_order(example1):
    with pytest.raises(ValueError):
        build_no_envy_certificate(example1, 0, 1)  # capacity 1 < capacity 2


def test_certificate_chain_against_oracle():
    # welfare(optimum without lo) >= witness value >= certified floor
    for k in range(200):
        rng = rng_for(101, k)
        inst = random_sized_instance(rng)
        caps = inst.agent_capacity
        for hi in range(inst.n_agents):
            for lo in range(inst.n_agents):
                if hi == lo or caps[hi] < caps[lo]:
                    continue
                certificate = build_no_envy_certificate(inst, hi, lo)
                assert certificate.holds, f"seed {k} pair {(hi, lo)}"
                without_lo = optimum_without(inst, lo).welfare
                assert without_lo >= certificate.value, f"seed {k} pair {(hi, lo)}"


def test_certificate_middle_value_against_brute_force():
    for k in range(60):
        rng = rng_for(103, k)
        inst = random_sized_instance(rng, max_agents=3, max_goods=4)
        caps = inst.agent_capacity
        for hi in range(inst.n_agents):
            for lo in range(inst.n_agents):
                if hi == lo or caps[hi] < caps[lo]:
                    continue
                certificate = build_no_envy_certificate(inst, hi, lo)
                values = [
                    row if i != lo else tuple(F(0) for _ in row)
                    for i, row in enumerate(inst.values)
                ]
                muted = Instance(caps, inst.good_supply, tuple(values))
                assert brute_force_optimum(muted).welfare >= certificate.value, f"seed {k}"


def test_classify_two_agent_profiles():
    profile_a, profile_b, profile_c = chain_profiles(1, F(1), F(1, 10))
    assert classify_two_agent(profile_a) == "B1"
    assert classify_two_agent(profile_b) == "B1"
    assert classify_two_agent(profile_c) == "A"
    general_a, general_b, general_c = chain_profiles(3, F(2), F(1, 10))
    assert classify_two_agent(general_a) == "B1plus"
    assert classify_two_agent(general_b) == "B1plus"
    assert classify_two_agent(general_c) == "A"


def test_classify_reports_exact_ties():
    tie = Instance((1, 2), (1, 1), ((F(1), F(0)), (F(1), F(0))))
    assert classify_two_agent(tie) == "tie"


def test_classify_general_b1_and_b2():
    b1 = Instance((2, 3), (1, 1, 1), ((F(5), F(1), F(1)), (F(2), F(3), F(3))))
    assert classify_two_agent(b1) == "B1"
    b2 = Instance((2, 3), (1, 1, 1), ((F(1), F(5), F(5)), (F(2), F(3), F(3))))
    assert classify_two_agent(b2) == "B2"


def test_classify_accepts_example1_as_warmup_shape(example1):
    assert classify_two_agent(example1) == "B1"


def test_classify_rejects_shape_violations():
    homo = Instance((2, 2), (1, 1, 1), ((F(1), F(1), F(1)), (F(1), F(1), F(1))))
    with pytest.raises(ValueError):
        classify_two_agent(homo)  # capacities must differ
    ragged = Instance((2, 3), (1, 1, 1), ((F(5), F(1), F(2)), (F(2), F(3), F(3))))
    with pytest.raises(ValueError):
        classify_two_agent(ragged)  # trailing goods must share one value
    short = Instance((2, 3), (1, 1), ((F(5), F(1)), (F(2), F(3))))
    with pytest.raises(ValueError):
        classify_two_agent(short)  # needs capacity + 1 goods


def test_positive_transfer_chain_warmup():
    report = positive_transfer_chain(1, F(1), F(1, 10))
    assert report.verdict
    assert report.conclusion == F(9, 10)
    labels = [s.label for s in report.steps]
    assert labels == ["cc1", "cc2", "cc3", "npt1", "conclusion"]


def test_positive_transfer_chain_general():
    report = positive_transfer_chain(3, F(2), F(1, 10))
    assert report.conclusion == F(17, 10)
    labels = [s.label for s in report.steps]
    assert labels == ["cc1g", "cc11g", "ccc", "npt1", "conclusion"]


def test_positive_transfer_bound_grows_linearly_in_x():
    eps = F(1, 10)
    bounds = [positive_transfer_chain(2, x, eps).conclusion for x in (F(1), F(2), F(3))]
    assert bounds[1] - bounds[0] == F(1)
    assert bounds[2] - bounds[1] == F(1)


@pytest.mark.parametrize("cap,x,eps", [(1, F(0), F(1, 10)), (1, F(-1), F(1, 10)),
                                       (1, F(1), F(0)), (0, F(1), F(1, 10))])
def test_positive_transfer_chain_rejects_bad_parameters(cap, x, eps):
    with pytest.raises(ValueError):
        positive_transfer_chain(cap, x, eps)
