"""Finite task lattices built from sets of elementary actions.

A task is a set of elementary actions.  The lattice is the closure of the
task sets under union (join) and intersection (meet), plus the empty set
(bottom) and the union of everything (top).  Order is set inclusion.
Elements are represented internally as bitmasks over the action universe,
which makes join/meet/leq single integer operations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence


class LatticeError(Exception):
    pass


class ForeignElement(LatticeError):
    """Element does not belong to this lattice."""


class NonUniqueNegation(LatticeError):
    def __init__(self, element: "LatticeElement", candidates: Sequence["LatticeElement"]):
        self.element = element
        self.candidates = list(candidates)
        names = ", ".join(c.label for c in candidates)
        super().__init__(f"negation of {element.label} is not unique; maximal candidates: {names}")


@dataclass(frozen=True)
class TaskSpec:
    """A named task given extensionally by its elementary actions."""

    name: str
    actions: frozenset[str]

    def __post_init__(self):
        if not self.name:
            raise LatticeError("task name must be non-empty")
        if not self.actions:
            raise LatticeError(f"task {self.name!r} has an empty action set")


@dataclass(frozen=True)
class LatticeElement:
    """One lattice element: a set of actions with a stable id.

    Identity is the action set; two elements with equal action sets are the
    same element.  `name` is set for generators and for composites the
    scenario chooses to name.
    """

    id: int
    actions: frozenset[str]
    mask: int = field(repr=False, compare=False)
    name: Optional[str] = field(default=None, compare=False)

    @property
    def label(self) -> str:
        if self.name is not None:
            return self.name
        return "{" + ",".join(sorted(self.actions)) + "}"


class TaskLattice:
    """Closure of the generator action sets under union and intersection.

    Immutable after construction; every query is pure.
    """

    def __init__(self, tasks: Sequence[TaskSpec], names: Optional[Mapping[str, Iterable[str]]] = None):
        if not tasks:
            raise LatticeError("at least one task is required")
        seen = set()
        for t in tasks:
            if t.name in seen:
                raise LatticeError(f"duplicate task name {t.name!r}")
            seen.add(t.name)

        self.generators = tuple(tasks)
        self.actions: tuple[str, ...] = tuple(sorted({a for t in tasks for a in t.actions}))
        self._bit = {a: 1 << i for i, a in enumerate(self.actions)}

        gen_masks = [self._mask_of(t.actions) for t in tasks]
        masks = self._close(gen_masks)

        # deterministic ids: lexicographic order of sorted action lists
        ordered = sorted(masks, key=self._sort_key)
        name_by_mask: dict[int, str] = {}
        for t in tasks:
            name_by_mask[self._mask_of(t.actions)] = t.name
        for name, acts in (names or {}).items():
            m = self._mask_of(acts)
            if m not in masks:
                raise LatticeError(f"named element {name!r} is not in the lattice closure")
            existing = name_by_mask.get(m)
            if existing is not None and existing != name:
                raise LatticeError(f"element already named {existing!r}, cannot rename to {name!r}")
            name_by_mask[m] = name

        self.elements: tuple[LatticeElement, ...] = tuple(
            LatticeElement(
                id=i,
                actions=frozenset(a for a in self.actions if m & self._bit[a]),
                mask=m,
                name=name_by_mask.get(m),
            )
            for i, m in enumerate(ordered)
        )
        self._by_mask = {e.mask: e for e in self.elements}
        self._by_name = {e.name: e for e in self.elements if e.name is not None}
        self.bottom = self._by_mask[0]
        self.top = self._by_mask[max(masks)]
        self._covers = self._cover_edges()
        self.join_irreducibles = tuple(
            e for e in self.elements
            if sum(1 for (lo, hi) in self._covers if hi == e.id) == 1
        )
        self._decomp_cache: dict[int, tuple[LatticeElement, ...]] = {}

    # -- construction helpers -------------------------------------------------

    def _mask_of(self, actions: Iterable[str]) -> int:
        m = 0
        for a in actions:
            if a not in self._bit:
                raise LatticeError(f"unknown action {a!r}")
            m |= self._bit[a]
        return m

    def _sort_key(self, mask: int):
        return tuple(sorted(a for a in self.actions if mask & self._bit[a]))

    @staticmethod
    def _close(gen_masks: Sequence[int]) -> set[int]:
        full = 0
        for g in gen_masks:
            full |= g
        elems = {0, full, *gen_masks}
        frontier = list(elems)
        while frontier:
            m = frontier.pop()
            for other in list(elems):
                for x in (m | other, m & other):
                    if x not in elems:
                        elems.add(x)
                        frontier.append(x)
        return elems

    def _cover_edges(self) -> tuple[tuple[int, int], ...]:
        """(lower_id, upper_id) pairs of the cover relation (Hasse edges)."""
        edges = []
        for lo in self.elements:
            for hi in self.elements:
                if lo is hi or not self._leq_mask(lo.mask, hi.mask):
                    continue
                if any(
                    z is not lo and z is not hi
                    and self._leq_mask(lo.mask, z.mask) and self._leq_mask(z.mask, hi.mask)
                    for z in self.elements
                ):
                    continue
                edges.append((lo.id, hi.id))
        return tuple(sorted(edges))

    @staticmethod
    def _leq_mask(a: int, b: int) -> bool:
        return a & b == a

    # -- queries ---------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def _check(self, *elems: LatticeElement) -> None:
        for e in elems:
            if self._by_mask.get(e.mask) is not e:
                raise ForeignElement(f"{e.label} is not an element of this lattice")

    def by_name(self, name: str) -> LatticeElement:
        try:
            return self._by_name[name]
        except KeyError:
            raise LatticeError(f"no element named {name!r}") from None

    def by_id(self, ident: int) -> LatticeElement:
        try:
            return self.elements[ident]
        except IndexError:
            raise LatticeError(f"no element with id {ident}") from None

    def from_actions(self, actions: Iterable[str]) -> LatticeElement:
        m = self._mask_of(actions)
        if m not in self._by_mask:
            raise LatticeError("action set is not a lattice element")
        return self._by_mask[m]

    def leq(self, a: LatticeElement, b: LatticeElement) -> bool:
        self._check(a, b)
        return self._leq_mask(a.mask, b.mask)

    def lt(self, a: LatticeElement, b: LatticeElement) -> bool:
        return a is not b and self.leq(a, b)

    def join(self, a: LatticeElement, b: LatticeElement) -> LatticeElement:
        self._check(a, b)
        return self._by_mask[a.mask | b.mask]

    def meet(self, a: LatticeElement, b: LatticeElement) -> LatticeElement:
        self._check(a, b)
        return self._by_mask[a.mask & b.mask]

    def join_all(self, elems: Iterable[LatticeElement]) -> LatticeElement:
        m = 0
        for e in elems:
            self._check(e)
            m |= e.mask
        return self._by_mask[m]

    def meet_all(self, elems: Iterable[LatticeElement]) -> LatticeElement:
        m = self.top.mask
        for e in elems:
            self._check(e)
            m &= e.mask
        return self._by_mask[m]

    def covers(self) -> tuple[tuple[int, int], ...]:
        return self._covers

    def canonical_decomposition(self, x: LatticeElement) -> tuple[LatticeElement, ...]:
        """Maximal join-irreducibles below x; an antichain whose join is x.

        The bottom decomposes to the empty antichain.
        """
        self._check(x)
        cached = self._decomp_cache.get(x.id)
        if cached is not None:
            return cached
        below = [q for q in self.join_irreducibles if self._leq_mask(q.mask, x.mask)]
        maximal = tuple(
            q for q in below
            if not any(q is not r and self._leq_mask(q.mask, r.mask) for r in below)
        )
        self._decomp_cache[x.id] = maximal
        return maximal

    def negation(self, x: LatticeElement) -> LatticeElement:
        """Greatest element disjoint from x (meet equals bottom)."""
        self._check(x)
        disjoint = [z for z in self.elements if z.mask & x.mask == 0]
        maximal = [z for z in disjoint
                   if not any(z is not w and self._leq_mask(z.mask, w.mask) for w in disjoint)]
        if len(maximal) != 1:
            raise NonUniqueNegation(x, maximal)
        return maximal[0]

    # -- export ------------------------------------------------------------------

    def to_dot(self) -> str:
        lines = ["digraph lattice {", "  rankdir=BT;", "  node [shape=box];"]
        for e in self.elements:
            lines.append(f'  n{e.id} [label="{e.label}"];')
        for lo, hi in self._covers:
            lines.append(f"  n{lo} -> n{hi};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "actions": list(self.actions),
            "elements": [
                {"id": e.id, "actions": sorted(e.actions), **({"name": e.name} if e.name else {})}
                for e in self.elements
            ],
            "bottom": self.bottom.id,
            "top": self.top.id,
            "generators": [t.name for t in self.generators],
            "joinIrreducibles": [e.id for e in self.join_irreducibles],
            "covers": [list(c) for c in self._covers],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n"


def build_lattice(tasks: Sequence[TaskSpec], names: Optional[Mapping[str, Iterable[str]]] = None) -> TaskLattice:
    """Build the task lattice generated by the given tasks."""
    return TaskLattice(tasks, names)
