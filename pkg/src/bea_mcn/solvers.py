"""Fair-division predictions for the relaying game.

The value used here is built in two steps.

1. Externality-free worth. ``w(S)`` is what ``S`` can secure when every node
   outside it stays alone: the best total Inter-BEA share over feasible
   structures in which ``S`` is a union of blocks and all outsiders are
   singletons.
2. Two-level Shapley split (Owen value). The a priori unions are the connected
   groups of the feasibility graph (nodes that can ever share a coalition).
   With a single group this is just the Shapley value of ``w``.

This construction gives (11/24, 11/24, 1/12) on the three-node game and
(0.25403, 0.25403, 0.08082, 0.20556, 0.20556) on the five-node game. The
textbook partition-function formula (``classical_myerson_value``) gives
(3/8, 3/8, 1/4) on three nodes. On the restricted five-node lattice it is not
efficient at all, because no structure has a single block. Zero-extending
that lattice to all 52 partitions does not help either. Both readings are
kept so they can be compared.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from numbers import Rational
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .game import Coalition, CoalitionStructure, FeasibleCoalitionCatalog, Ring

EC = tuple[Coalition, CoalitionStructure]
ValueVector = dict[int, Fraction | float]


class SingularSystemError(ArithmeticError):
    def __init__(self, lam):
        super().__init__(f"compensated value system is singular at lambda={lam}")
        self.lam = lam


def _check_ecs(ecs: Iterable[EC], v: Mapping[EC, Fraction]) -> list[EC]:
    ecs = list(ecs)
    missing = [ec for ec in ecs if ec not in v]
    if missing:
        c, cs = missing[0]
        raise KeyError(f"partition function has no value for ({c}, [{cs}]) and {len(missing) - 1} more")
    if not ecs:
        raise ValueError("empty set of embedded coalitions")
    return ecs


def _structures(ecs: list[EC]) -> list[CoalitionStructure]:
    return list(dict.fromkeys(cs for _, cs in ecs))


def a_priori_unions(structures: Iterable[CoalitionStructure]) -> list[frozenset[int]]:
    """Connected groups of nodes that appear together in some coalition."""
    structures = list(structures)
    parent = {i: i for cs in structures for i in cs.nodes}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for cs in structures:
        for c in cs.nontrivial:
            root = find(c.members[0])
            for j in c.members[1:]:
                parent[find(j)] = root
    groups: dict[int, set[int]] = {}
    for i in parent:
        groups.setdefault(find(i), set()).add(i)
    return sorted((frozenset(g) for g in groups.values()), key=min)


@dataclass
class _FreeWorth:
    """Externality-free worth of every subset, with the structure that attains it."""

    value: dict[frozenset[int], Fraction] = field(default_factory=dict)
    best: dict[frozenset[int], CoalitionStructure] = field(default_factory=dict)

    @classmethod
    def build(cls, ecs: list[EC], v: Mapping[EC, Fraction]) -> "_FreeWorth":
        out = cls()
        nodes = frozenset().union(*(cs.nodes for cs in _structures(ecs)))
        ranking: dict[frozenset[int], tuple] = {}
        for cs in _structures(ecs):
            inside = [c for c in cs.coalitions if c.size > 1]
            # S = nodes of the non-trivial blocks plus any subset of the singletons
            core = frozenset(i for c in inside for i in c.members)
            singles = sorted(nodes - core)
            total_inside = sum((v[(c, cs)] for c in inside), Fraction(0))
            for k in range(len(singles) + 1):
                for extra in itertools.combinations(singles, k):
                    s = core | frozenset(extra)
                    worth = total_inside + sum(v[(cs.coalition_of(i), cs)] for i in extra)
                    # ties go to the coarsest split of S (fewest blocks inside S)
                    rank = (worth, -(len(inside) + k))
                    if s not in ranking or rank > ranking[s]:
                        ranking[s] = rank
                        out.value[s] = worth
                        out.best[s] = cs
        out.value[frozenset()] = Fraction(0)
        return out

    def __call__(self, s: frozenset[int]) -> Fraction:
        try:
            return self.value[s]
        except KeyError:
            raise ValueError(f"no feasible structure isolates {sorted(s)}") from None


def _owen_terms(unions: Sequence[frozenset[int]]) -> Iterator[tuple[int, frozenset[int], Fraction]]:
    """Yield ``(i, S_without_i, weight)`` for every marginal contribution of the Owen value."""
    m = len(unions)
    for k, union in enumerate(unions):
        others = [u for j, u in enumerate(unions) if j != k]
        u = len(union)
        for i in sorted(union):
            rest = sorted(union - {i})
            for h in range(m):
                wh = Fraction(factorial(h) * factorial(m - h - 1), factorial(m))
                for picked in itertools.combinations(others, h):
                    q = frozenset().union(*picked)
                    for t in range(u):
                        wt = Fraction(factorial(t) * factorial(u - t - 1), factorial(u))
                        for tt in itertools.combinations(rest, t):
                            yield i, q | frozenset(tt), wh * wt


def myerson_value(ecs: Iterable[EC], v: Mapping[EC, Fraction]) -> ValueVector:
    """Predicted fair payoff of each node (exact rationals)."""
    ecs = _check_ecs(ecs, v)
    structures = _structures(ecs)
    w = _FreeWorth.build(ecs, v)
    unions = a_priori_unions(structures)
    phi = {i: Fraction(0) for u in unions for i in u}
    for i, s, weight in _owen_terms(unions):
        phi[i] += weight * (w(s | {i}) - w(s))
    return dict(sorted(phi.items()))


def classical_myerson_value(ecs: Iterable[EC], v: Mapping[EC, Fraction]) -> ValueVector:
    """Textbook partition-function value summed over the given embedded coalitions.

    Only efficient when the ECs cover the full partition lattice of the nodes.
    """
    ecs = _check_ecs(ecs, v)
    nodes = sorted(frozenset().union(*(cs.nodes for _, cs in ecs)))
    n = len(nodes)
    phi = {i: Fraction(0) for i in nodes}
    for c, cs in ecs:
        q = len(cs)
        sign = (-1) ** (q - 1) * factorial(q - 1)
        for i in nodes:
            if q == 1:
                weight = Fraction(1, n)
            else:
                others = [t for t in cs.coalitions if t != c and i not in t.members]
                weight = Fraction(1, n) - sum((Fraction(1, (q - 1) * (n - t.size)) for t in others), Fraction(0))
            phi[i] += sign * weight * v[(c, cs)]
    return phi


@dataclass(frozen=True)
class CompensationSpec:
    """Relay compensation weight ``lam`` and the relays-for indicator.

    ``indicator[(i, j)]`` is +1 when i relays for j, -1 when j relays for i.
    Pairs absent from the map are 0.
    """

    lam: float | Fraction
    indicator: Mapping[tuple[int, int], int]

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"compensation weight must be >= 0, got {self.lam}")
        for (i, j), s in self.indicator.items():
            if s not in (-1, 0, 1) or self.indicator.get((j, i), 0) != -s:
                raise ValueError(f"indicator not antisymmetric at ({i}, {j})")

    @classmethod
    def from_catalog(cls, catalog: FeasibleCoalitionCatalog, lam) -> "CompensationSpec":
        ind = {}
        for c in catalog.feasible:
            for i, j in itertools.permutations(c.members, 2):
                if c.relays_for(i, j):
                    ind[(i, j)], ind[(j, i)] = 1, -1
        return cls(lam, ind)

    def net_flow(self, i: int, block: Coalition) -> dict[int, int]:
        """Coefficients of phi_j in i's compensation inside ``block``.

        i collects from each node it relays for; a node being relayed pays its
        own share once per relay above it.
        """
        coeffs: dict[int, int] = {}
        for j in block.members:
            s = self.indicator.get((i, j), 0)
            if s > 0:
                coeffs[j] = coeffs.get(j, 0) + 1
            elif s < 0:
                coeffs[i] = coeffs.get(i, 0) - 1
        return coeffs


def _solve_exact(a: list[list[Fraction]], b: list[Fraction], lam) -> list[Fraction]:
    n = len(b)
    rows = [list(r) + [x] for r, x in zip(a, b)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if pivot is None:
            raise SingularSystemError(lam)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        p = rows[col][col]
        rows[col] = [x / p for x in rows[col]]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[col])]
    return [rows[r][n] for r in range(n)]


def compensated_myerson_value(ecs: Iterable[EC], v: Mapping[EC, Fraction], spec: CompensationSpec) -> ValueVector:
    """Value with relay-cost compensation.

    Each node's compensation appears inside the worths it contributes to, so
    the values solve ``(I - lam K) phi = phi_0``, where ``phi_0`` is the
    uncompensated value. An exact rational ``lam`` gives exact rationals.
    Otherwise the system is solved in floating point.
    """
    ecs = _check_ecs(ecs, v)
    structures = _structures(ecs)
    w = _FreeWorth.build(ecs, v)
    unions = a_priori_unions(structures)
    nodes = sorted(i for u in unions for i in u)
    index = {i: k for k, i in enumerate(nodes)}
    n = len(nodes)
    base = [Fraction(0)] * n
    kmat = [[Fraction(0)] * n for _ in range(n)]
    for i, s, weight in _owen_terms(unions):
        with_i = s | {i}
        base[index[i]] += weight * (w(with_i) - w(s))
        block = w.best[with_i].coalition_of(i)
        for j, c in spec.net_flow(i, block).items():
            kmat[index[i]][index[j]] += weight * c

    lam = spec.lam
    if isinstance(lam, Rational):
        a = [[Fraction(int(r == c)) - lam * kmat[r][c] for c in range(n)] for r in range(n)]
        phi = _solve_exact(a, base, lam)
        return dict(zip(nodes, phi))
    a = np.eye(n) - float(lam) * np.array(kmat, dtype=float)
    b = np.array(base, dtype=float)
    if not np.isfinite(np.linalg.cond(a)) or np.linalg.cond(a) > 1e12:
        raise SingularSystemError(lam)
    phi = np.linalg.solve(a, b)
    return {i: float(x) for i, x in zip(nodes, phi)}


def cmv_closed_form_3(lam) -> tuple:
    """Closed-form compensated value of the three-node game."""
    if lam < 0:
        raise ValueError(f"compensation weight must be >= 0, got {lam}")
    one = Fraction(1) if isinstance(lam, Rational) else 1.0
    phi3 = one / (12 * (1 + lam))
    phi2 = (11 + 12 * lam) * one / (12 * (1 + lam) * (2 + lam))
    return (1 - phi2 - phi3, phi2, phi3)


def lambda_sweep(solve: Callable[[float], ValueVector], start: float, stop: float, step: float) -> list[tuple[float, ValueVector]]:
    count = int(round((stop - start) / step)) + 1
    return [(start + k * step, solve(start + k * step)) for k in range(count)]
