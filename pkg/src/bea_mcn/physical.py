"""Ring geometry, the normalised power law, energy cost and node utility."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Sequence

from .allocation import payoff_vector, traffic_vector
from .game import CoalitionStructure, FeasibleCoalitionCatalog, Ring, enumerate_feasible_cs


@dataclass(frozen=True)
class RingGeometry:
    r_bs: Real = Fraction(1)
    widths: tuple[Real, Real, Real] = (Fraction(1, 3), Fraction(1, 3), Fraction(1, 3))
    path_loss_a: int = 2

    def __post_init__(self):
        if len(self.widths) != 3 or any(w <= 0 for w in self.widths):
            raise ValueError(f"need three positive ring widths, got {self.widths}")
        if abs(sum(self.widths) - self.r_bs) > 1e-9 * max(1, abs(self.r_bs)):
            raise ValueError(f"ring widths {self.widths} do not add up to r_bs={self.r_bs}")

    @classmethod
    def equal(cls, r_bs: Real = Fraction(1), path_loss_a: int = 2) -> "RingGeometry":
        w = r_bs / 3 if not isinstance(r_bs, int) else Fraction(r_bs, 3)
        return cls(r_bs, (w, w, w), path_loss_a)

    @property
    def boundaries(self) -> tuple[Real, Real, Real]:
        wi, wm, wo = self.widths
        return (wi, wi + wm, wi + wm + wo)

    def boundary_radius(self, ring: Ring) -> Real:
        """Outer boundary of ``ring``; analytic nodes sit exactly there."""
        return self.boundaries[int(ring)]

    def ring_of(self, radius: float) -> Ring:
        b_inner, b_middle, _ = self.boundaries
        if radius <= b_inner:
            return Ring.INNER
        if radius <= b_middle:
            return Ring.MIDDLE
        return Ring.OUTER


@dataclass(frozen=True)
class PowerModel:
    """Per-subchannel transmit power normalised to 1 at ``reference_distance``."""

    reference_distance: Real
    exponent: int = 4

    @classmethod
    def for_geometry(cls, geometry: RingGeometry) -> "PowerModel":
        return cls(geometry.r_bs * 2 / 3 if not isinstance(geometry.r_bs, int) else Fraction(2 * geometry.r_bs, 3),
                   2 * geometry.path_loss_a)

    def power(self, distance: Real) -> Real:
        if distance <= 0:
            raise ValueError("transmit distance must be positive")
        return (distance / self.reference_distance) ** self.exponent


@dataclass(frozen=True)
class UtilitySpec:
    rho: Real = Fraction(1, 2)

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")


def solve_rho(utility: Real, payoff: Real, cost: Real) -> Real:
    """The payoff weight that makes ``rho*payoff - (1-rho)*cost`` equal ``utility``."""
    return (utility + cost) / (payoff + cost)


def required_power(tx_radius: Real, rx_radius: Real, geometry: RingGeometry | None = None,
                   model: PowerModel | None = None) -> Real:
    """Power for a radial hop between two collinear nodes (the BS is radius 0)."""
    model = model or PowerModel.for_geometry(geometry or RingGeometry())
    return model.power(abs(tx_radius - rx_radius))


def power_vector(cs: CoalitionStructure, rings: Sequence[Ring], geometry: RingGeometry | None = None,
                 model: PowerModel | None = None) -> dict[int, Real]:
    geometry = geometry or RingGeometry()
    model = model or PowerModel.for_geometry(geometry)
    p = {}
    for c in cs.coalitions:
        for i in c.members:
            if not c.reachable:
                p[i] = 0 * model.reference_distance
                continue
            up = c.upstream_of(i)
            rx = 0 * geometry.r_bs if up is None else geometry.boundary_radius(rings[up])
            p[i] = required_power(geometry.boundary_radius(rings[i]), rx, geometry, model)
    return dict(sorted(p.items()))


def cost_vector(cs: CoalitionStructure, rings: Sequence[Ring], geometry: RingGeometry | None = None,
                model: PowerModel | None = None) -> dict[int, Real]:
    p = power_vector(cs, rings, geometry, model)
    t = traffic_vector(cs)
    return {i: p[i] * t[i] for i in p}


def utility_vector(cs: CoalitionStructure, rings: Sequence[Ring], spec: UtilitySpec = UtilitySpec(),
                   geometry: RingGeometry | None = None, model: PowerModel | None = None) -> dict[int, Real]:
    """``rho * payoff - (1 - rho) * power * traffic`` for every node."""
    phi = payoff_vector(cs)
    cost = cost_vector(cs, rings, geometry, model)
    rho = spec.rho
    return {i: rho * phi[i] - (1 - rho) * cost[i] for i in phi}


def utility_table(catalog: FeasibleCoalitionCatalog, spec: UtilitySpec = UtilitySpec(),
                  geometry: RingGeometry | None = None) -> dict[CoalitionStructure, dict[int, Real]]:
    return {cs: utility_vector(cs, catalog.rings, spec, geometry) for cs in enumerate_feasible_cs(catalog)}
