"""Linear-logic phase structure over a task lattice.

A phase structure picks the element "false" (bottom fact) and a duality
assignment.  Facts are the elements equal to their double dual; they split
into two mutually dual classes, open (below the multiplicative unit) and
closed (above the bottom fact).  Non-facts model pending tasks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .lattice import LatticeElement, TaskLattice


class PhaseError(Exception):
    pass


class InvalidDuality(PhaseError):
    """Duality assignment violates a named law."""

    def __init__(self, law: str, detail: str = ""):
        self.law = law
        super().__init__(f"invalid duality: {law}" + (f" ({detail})" if detail else ""))


class NoConsistentStructure(PhaseError):
    pass


class NonFactInput(PhaseError):
    pass


@dataclass(frozen=True)
class PhaseStructure:
    lattice: TaskLattice
    bottom_fact: LatticeElement
    unit_fact: LatticeElement
    dual_map: Mapping[int, int]             # element id -> element id
    facts: frozenset[int]
    non_facts: frozenset[int]
    open_facts: frozenset[int]
    closed_facts: frozenset[int]

    def dual(self, x: LatticeElement) -> LatticeElement:
        return self.lattice.by_id(self.dual_map[x.id])

    def fact_closure(self, x: LatticeElement) -> LatticeElement:
        """Least fact extension of x: the double dual."""
        return self.dual(self.dual(x))

    def is_fact(self, x: LatticeElement) -> bool:
        return x.id in self.facts

    def is_open(self, x: LatticeElement) -> bool:
        return x.id in self.open_facts

    def is_closed(self, x: LatticeElement) -> bool:
        return x.id in self.closed_facts

    def of_course(self, x: LatticeElement) -> LatticeElement:
        """! : greatest open fact below x (the bottom always qualifies)."""
        lat = self.lattice
        best = lat.bottom
        for i in self.open_facts:
            z = lat.by_id(i)
            if lat.leq(z, x) and lat.leq(best, z):
                best = z
        return best

    def why_not(self, x: LatticeElement) -> LatticeElement:
        """? : least closed fact containing x (the top always qualifies)."""
        lat = self.lattice
        best = lat.top
        for i in self.closed_facts:
            z = lat.by_id(i)
            if lat.leq(x, z) and lat.leq(z, best):
                best = z
        return best

    def validity(self, fact: LatticeElement) -> str:
        """'valid' above the unit, 'false' below the bottom fact, else 'indeterminate'."""
        if fact.id not in self.facts:
            raise NonFactInput(f"{fact.label} is not a fact")
        if self.lattice.leq(self.unit_fact, fact):
            return "valid"
        if self.lattice.leq(fact, self.bottom_fact):
            return "false"
        return "indeterminate"

    def to_json(self) -> dict:
        return {
            "bottom": self.bottom_fact.id,
            "unit": self.unit_fact.id,
            "dual": {str(k): v for k, v in sorted(self.dual_map.items())},
            "open": sorted(self.open_facts),
            "closed": sorted(self.closed_facts),
            "nonFacts": sorted(self.non_facts),
        }


@dataclass(frozen=True)
class BottomCandidate:
    bottom: LatticeElement
    unit: LatticeElement
    duality: Mapping[int, int]
    non_fact_count: int


def classify(lattice: TaskLattice, bottom: LatticeElement, duality: Mapping[int, int]) -> PhaseStructure:
    """Validate a duality assignment and build the phase structure.

    Raises InvalidDuality naming the violated law.
    """
    lat = lattice
    ids = {e.id for e in lat.elements}
    if set(duality) != ids:
        raise InvalidDuality("totality", "dual must be assigned for every element")
    if any(v not in ids for v in duality.values()):
        raise InvalidDuality("totality", "dual image outside the lattice")

    def d(i: int) -> int:
        return duality[i]

    facts = {i for i in ids if d(d(i)) == i}
    image = set(duality.values())
    if image != facts:
        raise InvalidDuality("fact-image", "facts must be exactly the image of the dual map")
    for i in ids:
        if d(i) not in facts:
            raise InvalidDuality("dual-is-fact", lat.by_id(i).label)
        if d(d(d(i))) != d(i):
            raise InvalidDuality("triple-dual", lat.by_id(i).label)
        # condition 1: every element lies below its double dual
        if not lat.leq(lat.by_id(i), lat.by_id(d(d(i)))):
            raise InvalidDuality("double-dual-extension", lat.by_id(i).label)

    felems = [lat.by_id(i) for i in sorted(facts)]
    for f, g in itertools.combinations(felems, 2):
        if lat.leq(f, g):
            if not lat.leq(lat.by_id(d(g.id)), lat.by_id(d(f.id))):
                raise InvalidDuality("antitone", f"{f.label} <= {g.label}")

    for a in lat.elements:
        for b in lat.elements:
            j = lat.join(a, b)
            m = lat.meet(lat.by_id(d(a.id)), lat.by_id(d(b.id)))
            if d(j.id) != m.id:
                raise InvalidDuality("de-morgan", f"dual({a.label} v {b.label})")

    unit = lat.by_id(d(bottom.id))
    if d(lat.top.id) != lat.bottom.id or d(lat.bottom.id) != lat.top.id:
        raise InvalidDuality("top-bottom", "dual(top) must be 0 and dual(0) must be top")

    if bottom is lat.bottom:
        # classical degenerate case: the unit is the top and the two
        # classes coincide with the whole fact set
        open_ids = closed_ids = frozenset(facts)
    else:
        open_ids = frozenset(i for i in facts if lat.leq(lat.by_id(i), unit))
        closed_ids = frozenset(i for i in facts if lat.leq(bottom, lat.by_id(i)))
        if open_ids & closed_ids:
            raise InvalidDuality("class-overlap", "open and closed facts intersect")
        if open_ids | closed_ids != facts:
            raise InvalidDuality("class-cover", "every fact must be open or closed")
        if {d(i) for i in open_ids} != set(closed_ids):
            raise InvalidDuality("class-duality", "open and closed classes must be mutually dual")
        for i in closed_ids:
            for j in closed_ids:
                m = lat.meet(lat.by_id(i), lat.by_id(j))
                if m.id not in closed_ids:
                    raise InvalidDuality("closed-meet", f"{lat.by_id(i).label} & {lat.by_id(j).label}")

    return PhaseStructure(
        lattice=lat,
        bottom_fact=bottom,
        unit_fact=unit,
        dual_map=dict(duality),
        facts=frozenset(facts),
        non_facts=frozenset(ids - facts),
        open_facts=open_ids,
        closed_facts=closed_ids,
    )


def _antitone_images(lat: TaskLattice, op_jis: Sequence[LatticeElement],
                     codomain: Sequence[LatticeElement]):
    """All antitone injective assignments of the open join-irreducibles."""
    for img in itertools.product(codomain, repeat=len(op_jis)):
        if len({e.id for e in img}) != len(op_jis):
            continue
        phi = dict(zip((q.id for q in op_jis), img))
        ok = True
        for q1 in op_jis:
            for q2 in op_jis:
                if q1 is q2:
                    continue
                if lat.leq(q1, q2) and not lat.leq(phi[q2.id], phi[q1.id]):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            yield phi


def _complete_non_facts(lat: TaskLattice, dual: dict[int, int], non_facts: Sequence[LatticeElement]):
    """Backtracking assignment of duals for non-facts.

    Candidates for x are facts f with x below dual(f) (the double-dual
    extension law); the join De Morgan law is checked incrementally.
    """
    facts = sorted(dual)

    def consistent(assign: dict[int, int]) -> bool:
        for i in assign:
            a = lat.by_id(i)
            for j in assign:
                jn = lat.join(a, lat.by_id(j))
                if jn.id in assign:
                    m = lat.meet(lat.by_id(assign[i]), lat.by_id(assign[j]))
                    if assign[jn.id] != m.id:
                        return False
        return True

    def rec(k: int, assign: dict[int, int]):
        if k == len(non_facts):
            if consistent(assign):
                yield dict(assign)
            return
        x = non_facts[k]
        for f in facts:
            if not lat.leq(x, lat.by_id(dual[f])):
                continue
            assign[x.id] = f
            if consistent(assign):
                yield from rec(k + 1, assign)
            del assign[x.id]

    yield from rec(0, dict(dual))


def propose_bottom(lattice: TaskLattice, max_candidates: int = 64) -> list[BottomCandidate]:
    """Enumerate bottom-fact choices with consistent dualities.

    Candidates are ranked ascending by non-fact count; ties are all
    reported.  The open class is taken to be the full down-interval of the
    unit (the maximal choice, which also minimises non-facts).
    """
    lat = lattice
    results: list[BottomCandidate] = []
    n = len(lat)

    # classical degenerate candidate: bottom fact = 0, all elements facts,
    # requires an antitone De Morgan involution of the whole lattice
    atoms = [e for e in lat.elements
             if sum(1 for lo, hi in lat.covers() if hi == e.id and lo == lat.bottom.id) == 1
             and sum(1 for lo, hi in lat.covers() if hi == e.id) == 1]
    coatoms = [e for e in lat.elements if any(hi == lat.top.id and lo == e.id for lo, hi in lat.covers())]
    if len(atoms) == len(coatoms):
        jis = list(lat.join_irreducibles)
        for phi in _antitone_images(lat, jis, list(lat.elements)):
            full = _extend_by_meets(lat, phi, list(lat.elements))
            if full is None or len(set(full.values())) != n:
                continue
            if any(full.get(full[i]) != i for i in full):
                continue
            try:
                ps = classify(lat, lat.bottom, full)
            except PhaseError:
                continue
            results.append(BottomCandidate(lat.bottom, ps.unit_fact, full, 0))
            break  # one classical structure is enough for ranking

    for bottom in lat.elements:
        if bottom is lat.bottom:
            continue
        for unit in lat.elements:
            if lat.leq(bottom, unit):
                continue  # the classes would overlap
            op = [e for e in lat.elements if lat.leq(e, unit)]
            cl_interval = [e for e in lat.elements if lat.leq(bottom, e)]
            if len(cl_interval) < len(op):
                continue
            op_jis = [q for q in lat.join_irreducibles if lat.leq(q, unit)]
            op_ids = {e.id for e in op}
            for phi in _antitone_images(lat, op_jis, cl_interval):
                full = _extend_by_meets(lat, phi, op)
                if full is None:
                    continue
                if full[unit.id] != bottom.id or len(set(full.values())) != len(op):
                    continue
                if set(full.values()) & op_ids:
                    continue
                dual = dict(full)
                for i, j in full.items():
                    dual[j] = i
                fact_elems = set(dual)
                nf = [e for e in lat.elements if e.id not in fact_elems]
                for complete in _complete_non_facts(lat, dual, nf):
                    try:
                        classify(lat, bottom, complete)
                    except PhaseError:
                        continue
                    results.append(BottomCandidate(bottom, unit, complete, len(nf)))
                    break  # report one completed assignment per (bottom, unit, phi)

    if not results:
        raise NoConsistentStructure("no bottom choice admits mutually dual open/closed classes")
    results.sort(key=lambda c: (c.non_fact_count, c.bottom.id, c.unit.id,
                                tuple(sorted(c.duality.items()))))
    return results[:max_candidates]


def _extend_by_meets(lat: TaskLattice, phi_ji: Mapping[int, int],
                     domain: Sequence[LatticeElement]) -> Optional[dict[int, int]]:
    """Extend a join-irreducible assignment to the domain by image meets.

    phi(x) = meet of phi(q) over join-irreducibles q below x; phi(0) = top.
    The extension satisfies the join De Morgan law by construction.
    """
    full: dict[int, int] = {}
    for x in domain:
        m = lat.top
        for q in lat.join_irreducibles:
            if lat.leq(q, x):
                if q.id not in phi_ji:
                    return None
                m = lat.meet(m, lat.by_id(phi_ji[q.id]))
        full[x.id] = m.id
    return full
