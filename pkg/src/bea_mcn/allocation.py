"""Intra-BEA: splitting a coalition's channel share along its relay chain.

Shares go 4:2:1 from the head relay to the source in a triple and 2:1 in a
pair. Each node also transmits everything queued behind it, which gives the
total-traffic vector.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Dict

from .game import Coalition, CoalitionStructure, UnreachableError, inter_bea_value

#: Relative shares, head of chain first.
INTRA_RATIOS = {1: (1,), 2: (2, 1), 3: (4, 2, 1)}

AllocationVector = Dict[int, Fraction]
TrafficVector = Dict[int, Fraction]


def intra_bea_split(coalition: Coalition, group_share: Rational) -> dict[int, Fraction]:
    if not coalition.reachable:
        raise UnreachableError(f"coalition {coalition} cannot reach the BS")
    ratios = INTRA_RATIOS[coalition.size]
    total = sum(ratios)
    return {i: group_share * Fraction(r, total) for i, r in zip(coalition.chain, ratios)}


def _chain_traffic(coalition: Coalition, phi: dict[int, Fraction]) -> dict[int, Fraction]:
    chain = coalition.chain
    return {i: sum((phi[j] for j in chain[k:]), Fraction(0)) for k, i in enumerate(chain)}


def payoff_vector(cs: CoalitionStructure) -> AllocationVector:
    phi: AllocationVector = {}
    for c, share in inter_bea_value(cs).items():
        if c.reachable:
            phi.update(intra_bea_split(c, share))
        else:
            phi.update({i: Fraction(0) for i in c.members})
    return dict(sorted(phi.items()))


def traffic_vector(cs: CoalitionStructure) -> TrafficVector:
    phi = payoff_vector(cs)
    t: TrafficVector = {}
    for c in cs.coalitions:
        t.update(_chain_traffic(c, phi))
    return dict(sorted(t.items()))
