"""Which coalition structures survive under the BEA allocation.

Structures with a single non-trivial coalition get the internal and external
stability tests. Multi-agreement structures go through the inductive core:
a deviating coalition is answered by the residual nodes, who are assumed to
pick an outcome from their own (recursively defined) core whenever that core
is non-empty, and anything feasible otherwise.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from numbers import Real
from typing import Iterable, Mapping

from .game import Coalition, CoalitionStructure, FeasibleCoalitionCatalog, enumerate_feasible_cs

Utilities = Mapping[CoalitionStructure, Mapping[int, Real]]


@dataclass(frozen=True)
class Deviation:
    kind: str  # "exit", "join", "joint-exit"
    nodes: tuple[int, ...]
    target: CoalitionStructure
    deltas: dict[int, Real]

    @property
    def improves(self) -> bool:
        return all(d > 0 for d in self.deltas.values())


@dataclass
class StabilityVerdict:
    cs: CoalitionStructure
    internally_stable: bool | None = None
    outsider_wants_to_join: bool | None = None
    # all outsiders strictly gain by joining (the inequality exactly as printed)
    externally_stable_literal: bool | None = None
    # no outsider strictly gains by joining (cartel-stability convention)
    externally_stable: bool | None = None
    blocking_deviations: list[Deviation] = field(default_factory=list)
    considered: list[Deviation] = field(default_factory=list)


def _agreement(cs: CoalitionStructure) -> Coalition | None:
    nontrivial = cs.nontrivial
    if len(nontrivial) > 1:
        raise ValueError(f"[{cs}] has {len(nontrivial)} agreements; use inductive_core")
    return nontrivial[0] if nontrivial else None


def _structure_with(catalog: FeasibleCoalitionCatalog, group: Iterable[int]) -> CoalitionStructure:
    """``[group | everyone else alone]``; an infeasible group breaks into singletons."""
    group = sorted(group)
    blocks = [group] if group and catalog.is_feasible(group) else [[i] for i in group]
    blocks += [[i] for i in range(catalog.n) if i not in group]
    return catalog.structure(blocks)


def _deviation(kind, nodes, target, cs, utilities) -> Deviation:
    return Deviation(kind, tuple(nodes), target, {i: utilities[target][i] - utilities[cs][i] for i in nodes})


def internal_stability(cs: CoalitionStructure, utilities: Utilities, catalog: FeasibleCoalitionCatalog) -> StabilityVerdict:
    """No member of the agreement strictly gains by leaving it alone."""
    c = _agreement(cs)
    verdict = StabilityVerdict(cs, internally_stable=True)
    if c is None:
        return verdict
    for i in c.members:
        rest = [j for j in c.members if j != i]
        target = _structure_with(catalog, rest)
        dev = _deviation("exit", [i], target, cs, utilities)
        verdict.considered.append(dev)
        if dev.improves:
            verdict.internally_stable = False
            verdict.blocking_deviations.append(dev)
    return verdict


def external_stability(cs: CoalitionStructure, utilities: Utilities, catalog: FeasibleCoalitionCatalog) -> StabilityVerdict:
    """Which lone nodes would strictly gain by joining the agreement.

    Only joins that keep the coalition feasible are considered.
    """
    c = _agreement(cs)
    verdict = StabilityVerdict(cs)
    members = c.members if c else ()
    joins = []
    for i in sorted(cs.nodes - set(members)):
        if c is None:
            continue
        group = sorted((*members, i))
        if not catalog.is_feasible(group):
            continue
        joins.append(_deviation("join", [i], _structure_with(catalog, group), cs, utilities))
    verdict.considered = joins
    verdict.blocking_deviations = [d for d in joins if d.improves]
    verdict.outsider_wants_to_join = bool(verdict.blocking_deviations)
    verdict.externally_stable = not verdict.outsider_wants_to_join
    verdict.externally_stable_literal = bool(joins) and all(d.improves for d in joins)
    return verdict


def joint_exit_deviations(cs: CoalitionStructure, utilities: Utilities, catalog: FeasibleCoalitionCatalog) -> list[Deviation]:
    """Feasible sub-groups of the agreement whose members all gain by splitting off together."""
    c = _agreement(cs)
    if c is None:
        return []
    out = []
    for size in range(2, c.size):
        for group in itertools.combinations(c.members, size):
            if not catalog.is_feasible(group):
                continue
            dev = _deviation("joint-exit", group, _structure_with(catalog, group), cs, utilities)
            if dev.improves:
                out.append(dev)
    return out


def single_agreement_verdict(cs: CoalitionStructure, utilities: Utilities, catalog: FeasibleCoalitionCatalog) -> StabilityVerdict:
    inner = internal_stability(cs, utilities, catalog)
    outer = external_stability(cs, utilities, catalog)
    outer.internally_stable = inner.internally_stable
    outer.blocking_deviations = inner.blocking_deviations + outer.blocking_deviations
    outer.considered = inner.considered + outer.considered
    return outer


@dataclass(frozen=True)
class Certificate:
    """Why a structure is not in the core: who deviates and how the rest respond."""

    deviation: Coalition
    response: CoalitionStructure | None  # residual nodes' structure (None if nobody is left)
    outcome: CoalitionStructure
    deltas: dict[int, Real]


@dataclass
class CoreResult:
    core_members: list[tuple[CoalitionStructure, dict[int, Real]]]
    dominance_certificates: dict[CoalitionStructure, Certificate]

    @property
    def structures(self) -> list[CoalitionStructure]:
        return [cs for cs, _ in self.core_members]


class _InductiveCore:
    def __init__(self, catalog: FeasibleCoalitionCatalog, utilities: Utilities, transferable: bool):
        self.catalog = catalog
        self.utilities = utilities
        self.transferable = transferable
        self._cores: dict[tuple, tuple[list, dict]] = {}
        self._structures: dict[frozenset[int], list[CoalitionStructure]] = {}

    def structures(self, nodes: frozenset[int]) -> list[CoalitionStructure]:
        if nodes not in self._structures:
            self._structures[nodes] = enumerate_feasible_cs(self.catalog, nodes)
        return self._structures[nodes]

    def full(self, outside: tuple[Coalition, ...], part: CoalitionStructure | None) -> CoalitionStructure:
        return CoalitionStructure(outside + (part.coalitions if part else ()))

    def gains(self, group: Iterable[int], new: Mapping[int, Real], old: Mapping[int, Real]) -> bool:
        group = list(group)
        if self.transferable:
            return sum(new[i] for i in group) > sum(old[i] for i in group)
        return all(new[i] > old[i] for i in group)

    def core(self, residual: frozenset[int], outside: tuple[Coalition, ...], depth: int = 0):
        if depth > self.catalog.n:
            raise RecursionError("inductive core recursion deeper than the node count")
        key = (residual, frozenset(outside))
        if key in self._cores:
            return self._cores[key]
        members, certs = [], {}
        deviators = self.catalog.restricted_to(residual)
        for part in self.structures(residual):
            x = self.utilities[self.full(outside, part)]
            cert = self._dominate(residual, outside, x, deviators, depth)
            if cert is None:
                members.append(part)
            else:
                certs[part] = cert
        self._cores[key] = (members, certs)
        return members, certs

    def assumption(self, residual: frozenset[int], outside: tuple[Coalition, ...], depth: int) -> list:
        if not residual:
            return [None]
        members, _ = self.core(residual, outside, depth + 1)
        return members or self.structures(residual)

    def _dominate(self, residual, outside, x, deviators, depth) -> Certificate | None:
        for c in deviators:
            rest = residual - frozenset(c.members)
            after = outside + (c,)
            for response in self.assumption(rest, after, depth):
                outcome = self.full(after, response)
                y = self.utilities[outcome]
                if self.gains(c.members, y, x):
                    return Certificate(c, response, outcome, {i: y[i] - x[i] for i in c.members})
        return None


def inductive_core(catalog: FeasibleCoalitionCatalog, utilities: Utilities, transferable: bool = True) -> CoreResult:
    """Undominated structures of the whole game.

    With ``transferable`` (the default) a deviating coalition may share its
    joint utility freely, so it dominates when that total strictly rises.
    Without it every deviator must strictly gain at the BEA utilities.
    """
    solver = _InductiveCore(catalog, utilities, transferable)
    members, certs = solver.core(catalog.nodes, ())
    return CoreResult([(cs, dict(utilities[cs])) for cs in members], certs)


def residual_response(catalog: FeasibleCoalitionCatalog, utilities: Utilities, deviation: Coalition,
                      transferable: bool = True) -> list[CoalitionStructure]:
    """Core of the residual game once ``deviation`` has formed (empty if that core is empty)."""
    solver = _InductiveCore(catalog, utilities, transferable)
    rest = catalog.nodes - frozenset(deviation.members)
    members, _ = solver.core(rest, (deviation,))
    return members
