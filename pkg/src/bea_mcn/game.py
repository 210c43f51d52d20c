"""Nodes, rings, feasible coalitions and the Inter-BEA partition function.

Node ids are dense integers ``0..n-1``. Anything printed for humans uses the
1-based ``MS`` labels, so CS ``[12|3]`` means nodes 0 and 1 together and node 2
alone.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence


class Ring(IntEnum):
    """Ring label; the integer value is the hop depth from the BS."""

    INNER = 0
    MIDDLE = 1
    OUTER = 2

    @property
    def short(self) -> str:
        return "IMO"[self]


class Kind(str, Enum):
    SC = "SC"
    CI = "CI"  # inner + middle
    CII = "CII"  # middle + outer
    CIII = "CIII"  # inner + outer
    CIV = "CIV"  # inner + middle + outer


_KIND_BY_RINGS = {
    (Ring.INNER, Ring.MIDDLE): Kind.CI,
    (Ring.MIDDLE, Ring.OUTER): Kind.CII,
    (Ring.INNER, Ring.OUTER): Kind.CIII,
    (Ring.INNER, Ring.MIDDLE, Ring.OUTER): Kind.CIV,
}

#: Inter-BEA weight of a reachable coalition of each size: 2**s - 1.
LAMBDA = {1: 1, 2: 3, 3: 7}


class InfeasibleError(ValueError):
    """Raised for coalitions or structures outside the feasible catalog."""


class UnreachableError(ValueError):
    """Raised when no coalition of a structure can reach the BS."""


def kind_of(rings: Sequence[Ring]) -> Kind:
    if len(rings) == 1:
        return Kind.SC
    key = tuple(sorted(rings))
    try:
        return _KIND_BY_RINGS[key]
    except KeyError:
        names = "+".join(r.name.lower() for r in key)
        raise InfeasibleError(f"no relaying template for ring combination {names}") from None


def node_label(i: int) -> str:
    return str(i + 1)


@dataclass(frozen=True)
class Coalition:
    """A set of nodes relaying as one chain.

    ``members`` is sorted by id and is the identity of the coalition.
    ``chain`` lists the same nodes head first (nearest the BS), so
    ``chain[k]`` forwards for everything in ``chain[k + 1:]``.
    """

    members: tuple[int, ...]
    kind: Kind = field(compare=False)
    chain: tuple[int, ...] = field(compare=False)
    reachable: bool = field(compare=False)

    @classmethod
    def of(cls, members: Iterable[int], rings: Sequence[Ring]) -> "Coalition":
        ms = tuple(sorted(set(members)))
        if not 1 <= len(ms) <= 3:
            raise InfeasibleError(f"coalition size must be 1..3, got {len(ms)}")
        kind = kind_of([rings[i] for i in ms])
        chain = tuple(sorted(ms, key=lambda i: (rings[i], i)))
        reachable = any(rings[i] != Ring.OUTER for i in ms)
        return cls(ms, kind, chain, reachable)

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def weight(self) -> int:
        """Inter-BEA weight; zero for a coalition that cannot reach the BS."""
        return LAMBDA[self.size] if self.reachable else 0

    def upstream_of(self, i: int) -> int | None:
        """The node ``i`` transmits to, or ``None`` when ``i`` talks to the BS."""
        k = self.chain.index(i)
        return self.chain[k - 1] if k else None

    def relays_for(self, i: int, j: int) -> bool:
        """True iff ``i`` forwards traffic of ``j`` (``i`` is nearer the BS)."""
        return i in self.members and j in self.members and self.chain.index(i) < self.chain.index(j)

    def __contains__(self, i: object) -> bool:
        return i in self.members

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __str__(self) -> str:
        return _join_labels(self.members)


def _join_labels(ids: Iterable[int]) -> str:
    labels = [node_label(i) for i in ids]
    sep = "" if all(len(s) == 1 for s in labels) else ","
    return sep.join(labels)


@dataclass(frozen=True)
class CoalitionStructure:
    """A partition of the node set into coalitions, ordered by smallest member."""

    coalitions: tuple[Coalition, ...]

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.coalitions, key=lambda c: c.members[0]))
        seen: set[int] = set()
        for c in ordered:
            if seen & set(c.members):
                raise InfeasibleError(f"coalitions overlap in {self}")
            seen |= set(c.members)
        object.__setattr__(self, "coalitions", ordered)

    @property
    def nodes(self) -> frozenset[int]:
        return frozenset(i for c in self.coalitions for i in c.members)

    def coalition_of(self, i: int) -> Coalition:
        for c in self.coalitions:
            if i in c.members:
                return c
        raise KeyError(i)

    @property
    def nontrivial(self) -> tuple[Coalition, ...]:
        return tuple(c for c in self.coalitions if c.size > 1)

    @property
    def m(self) -> int:
        """Total Inter-BEA weight (the allotting unit is ``1/m``)."""
        return sum(c.weight for c in self.coalitions)

    def __iter__(self) -> Iterator[Coalition]:
        return iter(self.coalitions)

    def __len__(self) -> int:
        return len(self.coalitions)

    def __str__(self) -> str:
        return "|".join(str(c) for c in self.coalitions)

    def __repr__(self) -> str:
        return f"CS[{self}]"


@dataclass(frozen=True)
class FeasibleCoalitionCatalog:
    """Ring labels of every node plus the coalitions topology allows.

    All singletons are always feasible.
    """

    rings: tuple[Ring, ...]
    feasible: frozenset[Coalition]

    def __post_init__(self) -> None:
        singles = {Coalition.of([i], self.rings) for i in range(len(self.rings))}
        object.__setattr__(self, "feasible", frozenset(self.feasible) | singles)
        for c in self.feasible:
            if max(c.members) >= len(self.rings):
                raise InfeasibleError(f"coalition {c} references unknown node")

    @property
    def n(self) -> int:
        return len(self.rings)

    @property
    def nodes(self) -> frozenset[int]:
        return frozenset(range(self.n))

    def coalition(self, members: Iterable[int]) -> Coalition:
        c = Coalition.of(members, self.rings)
        if c not in self.feasible:
            raise InfeasibleError(f"coalition {c} is not in the catalog")
        return c

    def is_feasible(self, members: Iterable[int]) -> bool:
        try:
            self.coalition(members)
        except InfeasibleError:
            return False
        return True

    def structure(self, blocks: Iterable[Iterable[int]]) -> CoalitionStructure:
        cs = CoalitionStructure(tuple(self.coalition(b) for b in blocks))
        if cs.nodes != self.nodes:
            raise InfeasibleError(f"{cs} does not cover all {self.n} nodes")
        return cs

    def parse(self, text: str) -> CoalitionStructure:
        """Build a CS from 1-based notation such as ``"12|3"`` or ``"1,2|3"``.

        Nodes not mentioned become singletons, so ``"123"`` on the five-node
        catalog means ``[123|4|5]``.
        """
        blocks = []
        for part in text.replace(" ", "").split("|"):
            if not part:
                continue
            labels = part.split(",") if "," in part else list(part)
            blocks.append([int(s) - 1 for s in labels])
        named = {i for b in blocks for i in b}
        blocks += [[i] for i in range(self.n) if i not in named]
        return self.structure(blocks)

    def restricted_to(self, nodes: Iterable[int]) -> list[Coalition]:
        ns = frozenset(nodes)
        return sorted((c for c in self.feasible if set(c.members) <= ns), key=lambda c: c.members)


def template_catalog(rings: Sequence[Ring], groups: Sequence[Iterable[int]] | None = None) -> FeasibleCoalitionCatalog:
    """Catalog holding every CI-CIV template coalition.

    With ``groups`` only coalitions inside one group are feasible; this is how
    the analytic five-node layout forbids pairing across the two radial lines.
    """
    rings = tuple(Ring(r) for r in rings)
    pools = [sorted(g) for g in groups] if groups is not None else [list(range(len(rings)))]
    feasible = set()
    for pool in pools:
        for size in (2, 3):
            for combo in itertools.combinations(pool, size):
                try:
                    feasible.add(Coalition.of(combo, rings))
                except InfeasibleError:
                    pass
    return FeasibleCoalitionCatalog(rings, frozenset(feasible))


def three_node_catalog() -> FeasibleCoalitionCatalog:
    """MS1-MS3 on the inner, middle and outer ring boundaries."""
    return template_catalog([Ring.INNER, Ring.MIDDLE, Ring.OUTER])


def five_node_catalog() -> FeasibleCoalitionCatalog:
    """MS1-MS3 as in the three-node case plus MS4 (inner) and MS5 (middle)."""
    rings = [Ring.INNER, Ring.MIDDLE, Ring.OUTER, Ring.INNER, Ring.MIDDLE]
    return template_catalog(rings, groups=[(0, 1, 2), (3, 4)])


def analytic_catalog(n: int) -> FeasibleCoalitionCatalog:
    if n == 3:
        return three_node_catalog()
    if n == 5:
        return five_node_catalog()
    raise ValueError(f"analytic layouts exist for n=3 and n=5, not n={n}")


def _sort_key(cs: CoalitionStructure) -> tuple:
    return tuple(c.members for c in cs.coalitions)


def _partitions(nodes: list[int], catalog: FeasibleCoalitionCatalog) -> Iterator[list[Coalition]]:
    if not nodes:
        yield []
        return
    first, rest = nodes[0], nodes[1:]
    for c in catalog.feasible:
        if c.members[0] == first and set(c.members[1:]) <= set(rest):
            remaining = [i for i in rest if i not in c.members]
            for tail in _partitions(remaining, catalog):
                yield [c, *tail]


def enumerate_feasible_cs(catalog: FeasibleCoalitionCatalog, nodes: Iterable[int] | None = None) -> list[CoalitionStructure]:
    """All set-partitions of ``nodes`` built from catalog coalitions.

    Sorted lexicographically by their sorted member lists.
    """
    ns = sorted(catalog.nodes if nodes is None else set(nodes))
    out = [CoalitionStructure(tuple(p)) for p in _partitions(ns, catalog)]
    return sorted(out, key=_sort_key)


def inter_bea_value(cs: CoalitionStructure) -> dict[Coalition, Fraction]:
    """Share of the normalised channel pool each coalition of ``cs`` receives."""
    m = cs.m
    if m == 0:
        raise UnreachableError(f"no coalition of {cs} can reach the BS")
    return {c: Fraction(c.weight, m) for c in cs.coalitions}


@dataclass(frozen=True)
class PartitionFunction:
    """Inter-BEA value of every feasible embedded coalition of a catalog."""

    catalog: FeasibleCoalitionCatalog
    values: Mapping[tuple[Coalition, CoalitionStructure], Fraction]

    @classmethod
    def from_catalog(cls, catalog: FeasibleCoalitionCatalog) -> "PartitionFunction":
        values = {}
        for cs in enumerate_feasible_cs(catalog):
            for c, share in inter_bea_value(cs).items():
                values[(c, cs)] = share
        return cls(catalog, values)

    def __getitem__(self, ec: tuple[Coalition, CoalitionStructure]) -> Fraction:
        return self.values[ec]

    def __contains__(self, ec: object) -> bool:
        return ec in self.values

    def embedded_coalitions(self) -> list[tuple[Coalition, CoalitionStructure]]:
        return list(self.values)

    @property
    def structures(self) -> list[CoalitionStructure]:
        return sorted({cs for _, cs in self.values}, key=_sort_key)


def embedded_coalitions(structures: Iterable[CoalitionStructure]) -> list[tuple[Coalition, CoalitionStructure]]:
    return [(c, cs) for cs in structures for c in cs.coalitions]


def enumerate_mergences(cs: CoalitionStructure, catalog: FeasibleCoalitionCatalog) -> list[tuple[Kind, CoalitionStructure]]:
    """Every way two or three singletons of ``cs`` can merge into a feasible DC or TC."""
    singles = sorted(c.members[0] for c in cs.coalitions if c.size == 1)
    kept = [c for c in cs.coalitions if c.size > 1]
    out = []
    for size in (2, 3):
        for combo in itertools.combinations(singles, size):
            if not catalog.is_feasible(combo):
                continue
            merged = catalog.coalition(combo)
            rest = [catalog.coalition([i]) for i in singles if i not in combo]
            out.append((merged.kind, CoalitionStructure(tuple(kept + rest + [merged]))))
    return out


#: Change in the allotting denominator m caused by each mergence type.
M_DELTA = {Kind.CI: 1, Kind.CII: 2, Kind.CIII: 2, Kind.CIV: 5}


@dataclass(frozen=True)
class ExternalityReport:
    kind: Kind
    merged: Coalition
    merged_gain: Fraction
    residual_deltas: dict[Coalition, Fraction]
    m_before: int
    m_after: int

    @property
    def m_delta(self) -> int:
        return self.m_after - self.m_before

    @property
    def strict(self) -> bool:
        """Gain for the merging group and a loss for every reachable bystander."""
        return self.merged_gain > 0 and all(
            d < 0 for c, d in self.residual_deltas.items() if c.reachable
        )

    @property
    def degenerate(self) -> bool:
        """The boundary case (e.g. m = 2 before a CI merge) where the gain is zero."""
        return self.merged_gain <= 0


def check_negative_externality(cs: CoalitionStructure, mergence: tuple[Kind, CoalitionStructure]) -> ExternalityReport:
    kind, after = mergence
    if len(cs.nodes) <= 2:
        raise ValueError("negative externality needs more than two nodes")
    before_shares = inter_bea_value(cs)
    after_shares = inter_bea_value(after)
    new = [c for c in after.coalitions if c not in before_shares]
    if len(new) != 1 or new[0].kind != kind:
        raise ValueError(f"{after} is not a single {kind.value} mergence of {cs}")
    merged = new[0]
    involved = [c for c in cs.coalitions if set(c.members) <= set(merged.members)]
    gain = after_shares[merged] - sum(before_shares[c] for c in involved)
    residual = {c: after_shares[c] - before_shares[c] for c in cs.coalitions if c not in involved}
    return ExternalityReport(kind, merged, gain, residual, cs.m, after.m)
