from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bea_mcn.game import (
    M_DELTA,
    Coalition,
    CoalitionStructure,
    FeasibleCoalitionCatalog,
    InfeasibleError,
    Kind,
    PartitionFunction,
    Ring,
    UnreachableError,
    check_negative_externality,
    enumerate_feasible_cs,
    enumerate_mergences,
    five_node_catalog,
    inter_bea_value,
    template_catalog,
    three_node_catalog,
)
from oracles import feasible_partitions, shares_by_hand
from reference_data import PF3, PF5_PRINTED

I, M, O = Ring.INNER, Ring.MIDDLE, Ring.OUTER


def test_kinds_follow_ring_templates():
    rings = [I, M, O]
    assert Coalition.of([0], rings).kind is Kind.SC
    assert Coalition.of([0, 1], rings).kind is Kind.CI
    assert Coalition.of([1, 2], rings).kind is Kind.CII
    assert Coalition.of([0, 2], rings).kind is Kind.CIII
    assert Coalition.of([2, 1, 0], rings).kind is Kind.CIV
    assert Coalition.of([2, 1, 0], rings).chain == (0, 1, 2)


@pytest.mark.parametrize("rings", [(I, I), (M, M), (O, O), (I, I, M)])
def test_non_template_coalitions_rejected(rings):
    with pytest.raises(InfeasibleError):
        Coalition.of(range(len(rings)), rings)


def test_size_four_rejected():
    with pytest.raises(InfeasibleError):
        Coalition.of(range(4), [I, M, O, I])


def test_counts_three_and_five_nodes():
    pf3 = PartitionFunction.from_catalog(three_node_catalog())
    pf5 = PartitionFunction.from_catalog(five_node_catalog())
    assert (len(pf3.structures), len(pf3.values)) == (5, 10)
    assert (len(pf5.structures), len(pf5.values)) == (10, 35)


def test_enumeration_matches_brute_force_partitions():
    for cat in (three_node_catalog(), five_node_catalog(), template_catalog([I, M, O, I, M, O])):
        ours = {str(cs) for cs in enumerate_feasible_cs(cat)}
        brute = {str(CoalitionStructure(tuple(p))) for p in feasible_partitions(cat, range(cat.n))}
        assert ours == brute


def test_enumeration_is_sorted_and_unique():
    out = enumerate_feasible_cs(five_node_catalog())
    keys = [tuple(c.members for c in cs) for cs in out]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)


def test_restricted_enumeration_has_only_residual_nodes():
    cat = five_node_catalog()
    assert [str(cs) for cs in enumerate_feasible_cs(cat, [3, 4])] == ["4|5", "45"]


def test_three_node_shares():
    cat = three_node_catalog()
    for text, shares in PF3.items():
        cs = cat.parse(text)
        assert tuple(inter_bea_value(cs)[c] for c in cs) == shares


def test_five_node_shares():
    cat = five_node_catalog()
    for (a, b), shares in PF5_PRINTED.items():
        cs = cat.parse(f"{a}|{b}")
        assert tuple(inter_bea_value(cs)[c] for c in cs) == shares


def test_weight_rule_by_hand():
    cat = template_catalog([I, M, O, I, M, O, M])
    for cs in enumerate_feasible_cs(cat)[::7]:
        got = [inter_bea_value(cs)[c] for c in cs]
        assert got == shares_by_hand(cat.rings, [c.members for c in cs])


def test_single_node_game():
    cat = FeasibleCoalitionCatalog((I,), frozenset())
    (cs,) = enumerate_feasible_cs(cat)
    assert inter_bea_value(cs) == {cs.coalitions[0]: 1}


def test_all_outer_is_unreachable():
    cat = template_catalog([O, O])
    with pytest.raises(UnreachableError):
        inter_bea_value(cat.parse("1|2"))


def test_parse_and_structure_errors():
    cat = three_node_catalog()
    assert str(cat.parse("1,2|3")) == "12|3"
    with pytest.raises(InfeasibleError):
        cat.structure([[0, 1]])
    with pytest.raises(InfeasibleError):
        CoalitionStructure((Coalition.of([0, 1], cat.rings), Coalition.of([1], cat.rings)))
    grouped = five_node_catalog()
    assert not grouped.is_feasible([0, 4])


def test_mergences_of_all_singletons_five_nodes():
    cat = five_node_catalog()
    merged = sorted(str(cs) for _, cs in enumerate_mergences(cat.parse("1|2|3|4|5"), cat))
    assert merged == sorted(["1|2|3|45", "1|23|4|5", "12|3|4|5", "123|4|5", "13|2|4|5"])


@pytest.mark.parametrize("before,after,kind,delta", [
    ("1|2|3|4|5", "12|3|4|5", Kind.CI, 1),
    ("1|2|3|4|5", "1|23|4|5", Kind.CII, 2),
    ("1|2|3|4|5", "13|2|4|5", Kind.CIII, 2),
    ("1|2|3|4|5", "123|4|5", Kind.CIV, 5),
])
def test_externality_report(before, after, kind, delta):
    cat = five_node_catalog()
    rep = check_negative_externality(cat.parse(before), (kind, cat.parse(after)))
    assert rep.m_delta == delta == M_DELTA[kind]
    assert rep.strict and not rep.degenerate


def test_ci_merge_at_m_two_is_degenerate():
    cat = template_catalog([I, M, O])
    rep = check_negative_externality(cat.parse("1|2|3"), (Kind.CI, cat.parse("12|3")))
    assert rep.merged_gain == 0 and rep.degenerate


def test_externality_needs_three_nodes():
    cat = template_catalog([I, M])
    with pytest.raises(ValueError):
        check_negative_externality(cat.parse("1|2"), (Kind.CI, cat.parse("12")))


@st.composite
def catalogs(draw):
    n = draw(st.integers(4, 8))
    rings = draw(st.lists(st.sampled_from(list(Ring)), min_size=n, max_size=n))
    if sum(r != O for r in rings) < 3:
        rings[:3] = [I, M, I]
    full = template_catalog(rings)
    keep = frozenset(c for c in sorted(full.feasible, key=lambda c: c.members)
                     if c.size == 1 or draw(st.booleans()))
    return FeasibleCoalitionCatalog(tuple(rings), keep)


@settings(max_examples=200, deadline=None)
@given(catalogs(), st.randoms(use_true_random=False))
def test_mergences_are_strictly_profitable_and_harmful(cat, rnd):
    structures = enumerate_feasible_cs(cat)
    for cs in rnd.sample(structures, min(len(structures), 25)):
        for kind, after in enumerate_mergences(cs, cat):
            rep = check_negative_externality(cs, (kind, after))
            assert rep.strict, (cs, after, rep)
            assert rep.m_delta == M_DELTA[kind]


def test_partition_function_shares_sum_to_one():
    pf = PartitionFunction.from_catalog(five_node_catalog())
    for cs in pf.structures:
        assert sum(pf[(c, cs)] for c in cs) == Fraction(1)
