import math
from fractions import Fraction

import numpy as np
import pytest

from bea_mcn.allocation import payoff_vector
from bea_mcn.game import Kind, Ring
from bea_mcn.simulator import (
    RING_WIDTH_DELTAS,
    Scenario,
    SimConfig,
    connectivity,
    evaluate,
    form_coalitions,
    node_efficiency,
    place_nodes,
    realize,
    ring_labels,
    relative_efficiency,
    run_monte_carlo,
    run_sweep,
    service_area_values,
)
from reference_data import RING_WIDTHS, SERVICE_AREAS

CFG = SimConfig()


def _scenario(points, config=CFG):
    radius = np.array([r for r, _ in points], dtype=float)
    angle = np.array([a for _, a in points], dtype=float)
    return Scenario(radius, angle, ring_labels(radius, config), [(i,) for i in range(len(points))])


def test_defaults():
    assert CFG.ring_widths_m == pytest.approx((500 / 6,) * 3)
    assert CFG.service_area_diameter_m == pytest.approx(183.333, abs=1e-3)
    assert CFG.power_model.reference_distance == pytest.approx(500 / 3)
    assert CFG.power_model.exponent == 4


@pytest.mark.parametrize("kw", [{"realizations": 0}, {"ring_widths_m": (100, 100, 100)},
                                {"service_area_diameter_m": 0}, {"rho": 1.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_ring_fractions_match_area_ratios():
    counts = np.zeros(3)
    total = 0
    for k in range(50):
        sc = place_nodes(CFG, np.random.default_rng([7, k]))
        counts += np.bincount([int(r) for r in sc.rings], minlength=3)
        total += sc.n
        assert np.all(sc.radius <= CFG.cell_radius_m)
    for got, p in zip(counts, (1 / 9, 3 / 9, 5 / 9)):
        assert abs(got - total * p) <= 3 * math.sqrt(total * p * (1 - p))


@pytest.mark.parametrize("delta", RING_WIDTH_DELTAS)
def test_ring_width_variants(delta):
    cfg = CFG.with_ring_width_delta(delta)
    assert cfg.ring_widths_m == pytest.approx(RING_WIDTHS[delta], abs=1e-4)


def test_ring_width_delta_out_of_range():
    with pytest.raises(ValueError):
        CFG.with_ring_width_delta(Fraction(1, 5))


def test_service_area_grid():
    assert service_area_values(CFG) == pytest.approx(SERVICE_AREAS, abs=0.05)


def test_zero_nodes():
    cfg = SimConfig(node_count=0, realizations=1)
    sc = form_coalitions(place_nodes(cfg, np.random.default_rng(0)), cfg)
    assert sc.n == 0 and sc.chains == [] and connectivity(sc) == 0.0
    assert evaluate(sc, cfg).counts == {"N1": 0, "N2": 0, "N3": 0}


def test_collinear_chain_forms_civ():
    sc = form_coalitions(_scenario([(83, 0), (166, 0), (249, 0)]), CFG)
    assert sc.chains == [(0, 1, 2)]
    assert sc.kind_of(2) is Kind.CIV


def test_isolated_outer_stays_alone():
    sc = form_coalitions(_scenario([(80, 0), (240, math.pi)]), CFG)
    assert sc.chains == [(0,), (1,)]
    assert sc.reachable() == [True, False]


def test_relay_takes_one_source():
    sc = form_coalitions(_scenario([(160, 0), (240, 0.05), (240, -0.1)]), CFG)
    paired = [c for c in sc.chains if len(c) == 2]
    assert len(paired) == 1 and paired[0][0] == 0
    assert connectivity(sc) == pytest.approx(2 / 3)


def test_inner_never_takes_outer_directly():
    # 86 m apart, inside the service disk, but inner + outer is the omitted template
    sc2 = form_coalitions(_scenario([(82, 0), (168, 0)]), CFG)
    assert sc2.rings == [Ring.INNER, Ring.OUTER] and sc2.chains == [(0,), (1,)]


def test_singleton_middle_at_reference_distance():
    sc = _scenario([(500 / 3, 0)])
    eff, zero = node_efficiency(sc, CFG)
    assert eff[0] == pytest.approx(1.0) and zero == []


def test_relative_efficiency_of_singleton_is_one():
    sc = form_coalitions(_scenario([(60, 0), (150, 0), (240, 0), (120, 2.5)]), CFG)
    rel, _ = relative_efficiency(sc, sc.singletons(), CFG)
    assert sc.kind_of(3) is Kind.SC
    assert rel["M-SC"] == pytest.approx(1.0)


def _check_invariants(sc, cfg):
    assert sorted(i for c in sc.chains for i in c) == list(range(sc.n))
    xy = sc.xy
    for chain in sc.chains:
        kinds = tuple(sc.rings[i] for i in chain)
        assert kinds in {(Ring.INNER,), (Ring.MIDDLE,), (Ring.OUTER,), (Ring.INNER, Ring.MIDDLE),
                         (Ring.MIDDLE, Ring.OUTER), (Ring.INNER, Ring.MIDDLE, Ring.OUTER)}
        for a, b in zip(chain, chain[1:]):
            assert np.hypot(*(xy[a] - xy[b])) <= cfg.service_radius_m + 1e-9
    m = evaluate(sc, cfg)
    n_active = sum(sc.reachable())
    assert m.counts["N1"] + 2 * m.counts["N2"] + 3 * m.counts["N3"] == n_active
    helped = sum(1 for c in sc.chains for i in c if sc.rings[i] == Ring.OUTER and len(c) > 1)
    assert m.cooperative_gain == pytest.approx(helped / sc.n)
    assert sum(payoff_vector(sc.structure()).values()) == 1


@pytest.mark.parametrize("idx", range(10))
def test_formation_invariants(idx):
    rng = np.random.default_rng([3, idx])
    cfg = SimConfig(node_count=40 + 5 * idx)
    _check_invariants(form_coalitions(place_nodes(cfg, rng), cfg, rng), cfg)


def test_realization_is_reproducible():
    a, b = realize(CFG, 4), realize(CFG, 4)
    assert a.flat() == b.flat()


def test_parallel_matches_serial():
    cfg = SimConfig(realizations=6, seed=11)
    assert run_monte_carlo(cfg, workers=1).row() == run_monte_carlo(cfg, workers=3).row()


def test_sweep_errors_and_empty():
    assert run_sweep(CFG, "node_count", []) == []
    with pytest.raises(ValueError, match="-5"):
        run_sweep(CFG, "node_count", [10, -5])
    with pytest.raises(ValueError, match="axis"):
        run_sweep(CFG, "density", [1])


def test_node_count_sweep_rows():
    rows = run_sweep(SimConfig(realizations=3), "node_count", [20, 30])
    assert [v for v, _ in rows] == [20, 30]
    assert all(agg.config.node_count == v for v, agg in rows)


def test_wider_inner_ring_connects_more():
    rows = run_sweep(SimConfig(realizations=20), "ring_width_delta", RING_WIDTH_DELTAS)
    conn = [agg.mean["connectivity_coop"] for _, agg in rows]
    assert all(a > b for a, b in zip(conn, conn[1:]))
