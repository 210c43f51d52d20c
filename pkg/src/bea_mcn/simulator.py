"""Monte Carlo over random cells: placement, distributed coalition formation, metrics.

Formation runs in two phases under the realization's RNG:

1. every Outer node, in random order, attaches to the nearest free Middle
   relay whose service disk contains it;
2. every Middle node, in random order, attaches to the nearest free Inner
   relay whose service disk contains it. A Middle node that already relays
   for an Outer node turns its pair into a three-hop chain.

A relay accepts one source. Inner relays never take Outer sources directly.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .allocation import payoff_vector, traffic_vector
from .game import Coalition, CoalitionStructure, Kind, Ring
from .physical import PowerModel

log = logging.getLogger(__name__)

SERVICE_AREA_RATIOS = (Fraction(2), Fraction(21, 10), Fraction(11, 5), Fraction(12, 5), Fraction(3))
RING_WIDTH_DELTAS = (Fraction(-1, 16), Fraction(-1, 32), Fraction(0), Fraction(1, 32), Fraction(1, 16))
NODE_COUNTS = (40, 60, 80)
SWEEP_AXES = ("node_count", "service_area", "ring_width_delta")

CLASSES = ("I", "M", "O", "I-SC", "I-CI", "I-CIV", "M-SC", "M-CI", "M-CII", "M-CIV", "O-CII", "O-CIV", "All")


@dataclass(frozen=True)
class SimConfig:
    cell_diameter_m: float = 500.0
    ring_widths_m: tuple[float, float, float] | None = None  # inner, middle, outer; D/6 each by default
    service_area_diameter_m: float | None = None  # 1.1 D / 3 by default
    noise_dbw: float = -133.0  # recorded only; hop range comes from the service area
    path_loss_exponent: float = 2.0
    snr_threshold_db: float = 10.0  # recorded only
    node_count: int = 60
    realizations: int = 50
    rho: float = 0.5
    seed: int = 0

    def __post_init__(self):
        d = float(self.cell_diameter_m)
        if d <= 0:
            raise ValueError(f"cell_diameter_m must be positive, got {d}")
        widths = self.ring_widths_m or (d / 6, d / 6, d / 6)
        widths = tuple(float(w) for w in widths)
        if len(widths) != 3 or any(w <= 0 for w in widths):
            raise ValueError(f"ring widths must be three positive lengths, got {widths}")
        if not math.isclose(sum(widths), d / 2, rel_tol=0, abs_tol=1e-3):
            raise ValueError(f"ring widths {widths} must add up to the cell radius {d / 2}")
        object.__setattr__(self, "ring_widths_m", widths)
        sa = self.service_area_diameter_m
        sa = 1.1 * d / 3 if sa is None else float(sa)
        if sa <= 0:
            raise ValueError(f"service_area_diameter_m must be positive, got {sa}")
        object.__setattr__(self, "service_area_diameter_m", sa)
        if self.node_count < 0:
            raise ValueError(f"node_count must be >= 0, got {self.node_count}")
        if self.realizations < 1:
            raise ValueError(f"realizations must be >= 1, got {self.realizations}")
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be positive")

    @property
    def cell_radius_m(self) -> float:
        return self.cell_diameter_m / 2

    @property
    def boundaries(self) -> tuple[float, float, float]:
        wi, wm, wo = self.ring_widths_m
        return (wi, wi + wm, wi + wm + wo)

    @property
    def service_radius_m(self) -> float:
        return self.service_area_diameter_m / 2

    @property
    def power_model(self) -> PowerModel:
        return PowerModel(2 * self.cell_radius_m / 3, 2 * self.path_loss_exponent)

    def with_ring_width_delta(self, delta) -> "SimConfig":
        """Widen the inner ring by ``-delta * D`` and narrow the outer ring by the same amount."""
        d = self.cell_diameter_m
        shift = float(delta) * d
        widths = (d / 6 - shift, d / 6, d / 6 + shift)
        if any(w <= 0 for w in widths):
            raise ValueError(f"ring_width_delta {delta} leaves a ring with non-positive width")
        return replace(self, ring_widths_m=widths)


@dataclass
class Scenario:
    radius: np.ndarray
    angle: np.ndarray
    rings: list[Ring]
    # chains head first; every node sits in exactly one (singletons included)
    chains: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.rings)

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack((self.radius * np.cos(self.angle), self.radius * np.sin(self.angle)))

    def distance(self, i: int, j: int) -> float:
        xy = self.xy
        return float(np.hypot(*(xy[i] - xy[j])))

    def structure(self) -> CoalitionStructure:
        chains = self.chains or [(i,) for i in range(self.n)]
        return CoalitionStructure(tuple(Coalition.of(c, self.rings) for c in chains))

    def kind_of(self, i: int) -> Kind:
        return self.structure().coalition_of(i).kind

    def reachable(self) -> list[bool]:
        ok = [False] * self.n
        for chain in self.chains or [(i,) for i in range(self.n)]:
            hit = any(self.rings[i] != Ring.OUTER for i in chain)
            for i in chain:
                ok[i] = hit
        return ok

    def singletons(self) -> "Scenario":
        """Same placement, nobody cooperating."""
        return Scenario(self.radius, self.angle, self.rings, [(i,) for i in range(self.n)])


def ring_labels(radius: np.ndarray, config: SimConfig) -> list[Ring]:
    b_inner, b_middle, _ = config.boundaries
    return [Ring.INNER if r <= b_inner else Ring.MIDDLE if r <= b_middle else Ring.OUTER for r in radius]


def place_nodes(config: SimConfig, rng: np.random.Generator) -> Scenario:
    n = config.node_count
    radius = config.cell_radius_m * np.sqrt(rng.random(n))
    angle = rng.uniform(0.0, 2 * math.pi, n)
    rings = ring_labels(radius, config)
    return Scenario(radius, angle, rings, [(i,) for i in range(n)])


def _attach(sources: Sequence[int], relays: Sequence[int], dist: np.ndarray, reach: float,
            busy: set[int]) -> dict[int, int]:
    """Source -> relay picks; nearest free relay in range, ties to the lower id."""
    picks = {}
    for s in sources:
        best = None
        for r in relays:
            if r in busy or dist[s, r] > reach:
                continue
            if best is None or (dist[s, r], r) < (dist[s, best], best):
                best = r
        if best is not None:
            picks[s] = best
            busy.add(best)
    return picks


def form_coalitions(scenario: Scenario, config: SimConfig, rng: np.random.Generator | None = None) -> Scenario:
    """Run both formation phases; without ``rng`` sources apply in id order."""
    n = scenario.n
    xy = scenario.xy
    dist = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1]) if n else np.zeros((0, 0))
    by_ring = {ring: [i for i in range(n) if scenario.rings[i] == ring] for ring in Ring}

    def order(ids):
        return list(ids) if rng is None else [ids[k] for k in rng.permutation(len(ids))]

    reach = config.service_radius_m
    outer_pick = _attach(order(by_ring[Ring.OUTER]), by_ring[Ring.MIDDLE], dist, reach, set())
    middle_pick = _attach(order(by_ring[Ring.MIDDLE]), by_ring[Ring.INNER], dist, reach, set())

    below = {relay: src for src, relay in outer_pick.items()}
    below.update({relay: src for src, relay in middle_pick.items()})
    placed: set[int] = set()
    chains = []
    for head in [i for i in range(n) if i not in outer_pick and i not in middle_pick]:
        chain = [head]
        while chain[-1] in below:
            chain.append(below[chain[-1]])
        placed.update(chain)
        chains.append(tuple(chain))
    assert len(placed) == n
    return Scenario(scenario.radius, scenario.angle, scenario.rings, sorted(chains, key=min))


def connectivity(scenario: Scenario) -> float:
    if scenario.n == 0:
        return 0.0
    return sum(scenario.reachable()) / scenario.n


def _node_terms(scenario: Scenario, config: SimConfig) -> dict[int, tuple[float, float]]:
    """(payoff, cost) of every node that can reach the BS."""
    cs = scenario.structure()
    if cs.m == 0:
        return {}
    phi = payoff_vector(cs)
    t = traffic_vector(cs)
    model = config.power_model
    xy = scenario.xy
    out = {}
    for c in cs.coalitions:
        if not c.reachable:
            continue
        for k, i in enumerate(c.chain):
            hop = scenario.radius[i] if k == 0 else float(np.hypot(*(xy[i] - xy[c.chain[k - 1]])))
            p = model.power(hop) if hop > 0 else 0.0
            out[i] = (float(phi[i]), float(p * t[i]))
    return out


def _label(scenario: Scenario, i: int, kind: Kind) -> list[str]:
    ring = scenario.rings[i].short
    return [ring, f"{ring}-{kind.value}", "All"]


def node_efficiency(scenario: Scenario, config: SimConfig) -> tuple[dict[int, float], list[int]]:
    """Payoff over energy cost per node, plus the active nodes left out for zero cost."""
    eff, zero = {}, []
    for i, (phi, cost) in _node_terms(scenario, config).items():
        if cost > 0:
            eff[i] = phi / cost
        else:
            zero.append(i)
    return eff, zero


def class_means(scenario: Scenario, per_node: dict[int, float]) -> dict[str, float]:
    cs = scenario.structure()
    buckets: dict[str, list[float]] = {}
    for i, x in per_node.items():
        for name in _label(scenario, i, cs.coalition_of(i).kind):
            buckets.setdefault(name, []).append(x)
    return {name: float(np.mean(v)) for name, v in buckets.items()}


def relative_efficiency(mcn: Scenario, sh: Scenario, config: SimConfig) -> tuple[dict[str, float], float]:
    """Per-class mean of MCN/SH efficiency ratios, and the All-Avg ratio of means."""
    e_mcn, _ = node_efficiency(mcn, config)
    e_sh, _ = node_efficiency(sh, config)
    ratios = {i: e_mcn[i] / e_sh[i] for i in e_mcn if i in e_sh}
    all_avg = float(np.mean(list(e_mcn.values())) / np.mean(list(e_sh.values()))) if e_mcn and e_sh else math.nan
    return class_means(mcn, ratios), all_avg


@dataclass
class RunMetrics:
    """Metrics of one realization."""

    connectivity_coop: float
    connectivity_noncoop: float
    counts: dict[str, int]
    efficiency: dict[str, float]
    relative_efficiency: dict[str, float]
    all_avg: float
    zero_cost_nodes: int

    @property
    def cooperative_gain(self) -> float:
        return self.connectivity_coop - self.connectivity_noncoop

    def flat(self) -> dict[str, float]:
        row = {
            "connectivity_coop": self.connectivity_coop,
            "connectivity_noncoop": self.connectivity_noncoop,
            "cooperative_gain": self.cooperative_gain,
            "relative_efficiency_All-Avg": self.all_avg,
            "zero_cost_nodes": float(self.zero_cost_nodes),
        }
        row.update({k: float(v) for k, v in self.counts.items()})
        row.update({f"efficiency_{k}": v for k, v in self.efficiency.items()})
        row.update({f"relative_efficiency_{k}": v for k, v in self.relative_efficiency.items()})
        return row


def evaluate(scenario: Scenario, config: SimConfig) -> RunMetrics:
    sh = scenario.singletons()
    sizes = [len(c) for c, ok in zip(scenario.chains, _chain_reach(scenario)) if ok]
    counts = {f"N{s}": sizes.count(s) for s in (1, 2, 3)}
    eff, zero = node_efficiency(scenario, config)
    rel, all_avg = relative_efficiency(scenario, sh, config)
    return RunMetrics(connectivity(scenario), connectivity(sh), counts, class_means(scenario, eff), rel, all_avg, len(zero))


def _chain_reach(scenario: Scenario) -> list[bool]:
    return [any(scenario.rings[i] != Ring.OUTER for i in c) for c in scenario.chains]


def realize(config: SimConfig, index: int) -> RunMetrics:
    """One realization on its own RNG stream, keyed by (seed, index)."""
    rng = np.random.default_rng([config.seed, index])
    scenario = form_coalitions(place_nodes(config, rng), config, rng)
    return evaluate(scenario, config)


@dataclass
class Aggregate:
    """Mean and standard error of every metric over realizations."""

    config: SimConfig
    mean: dict[str, float]
    stderr: dict[str, float]
    samples: dict[str, int]

    def row(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for key in self.mean:
            out[key] = self.mean[key]
            out[f"{key}_se"] = self.stderr[key]
        return out


def aggregate(config: SimConfig, runs: Sequence[RunMetrics]) -> Aggregate:
    values: dict[str, list[float]] = {}
    for run in runs:
        for key, x in run.flat().items():
            if not math.isnan(x):
                values.setdefault(key, []).append(x)
    keys = sorted(values, key=metric_order)
    mean = {k: float(np.mean(values[k])) for k in keys}
    stderr = {k: float(np.std(values[k], ddof=1) / math.sqrt(len(values[k]))) if len(values[k]) > 1 else 0.0 for k in keys}
    return Aggregate(config, mean, stderr, {k: len(values[k]) for k in keys})


def metric_order(key: str):
    head = ("connectivity_coop", "connectivity_noncoop", "cooperative_gain", "N1", "N2", "N3", "zero_cost_nodes")
    if key in head:
        return (0, head.index(key), "")
    group, _, cls = key.rpartition("_")
    rank = CLASSES.index(cls) if cls in CLASSES else len(CLASSES)
    return (1 if group == "efficiency" else 2, rank, key)


def run_monte_carlo(config: SimConfig, workers: int = 1) -> Aggregate:
    """Aggregate ``config.realizations`` realizations; identical output for any ``workers``."""
    indices = range(config.realizations)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(realize, [config] * len(indices), indices))
    else:
        runs = [realize(config, k) for k in indices]
    log.debug("finished %d realizations for %s", len(runs), config)
    return aggregate(config, runs)


def sweep_configs(config: SimConfig, axis: str, values: Iterable) -> list[SimConfig]:
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")
    out = []
    for v in values:
        try:
            if axis == "node_count":
                if int(v) != v or v < 0:
                    raise ValueError("node count must be a non-negative integer")
                out.append(replace(config, node_count=int(v)))
            elif axis == "service_area":
                out.append(replace(config, service_area_diameter_m=float(v)))
            else:
                out.append(config.with_ring_width_delta(v))
        except ValueError as exc:
            raise ValueError(f"invalid {axis} value {v!r}: {exc}") from None
    return out


def run_sweep(config: SimConfig, axis: str, values: Iterable, workers: int = 1) -> list[tuple[object, Aggregate]]:
    """One aggregate per sweep value.

    ``service_area`` values are diameters in metres; ``ring_width_delta``
    values are fractions of the cell diameter.
    """
    values = list(values)
    return [(v, run_monte_carlo(c, workers)) for v, c in zip(values, sweep_configs(config, axis, values))]


def service_area_values(config: SimConfig, ratios: Sequence = SERVICE_AREA_RATIOS) -> list[float]:
    """Service-area diameters as multiples of a default ring width (D/6)."""
    return [float(r) * config.cell_diameter_m / 6 for r in ratios]
