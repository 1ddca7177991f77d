"""Admissible multiplication tables for the phase structure.

The multiplication is commutative and defined by its values on unordered
pairs of join-irreducibles; products of composite elements expand through
canonical decomposition and distributivity over join.  The required
operation laws translate into constraints over those pair products:

  * self-implication   -- X . dual(X) lands below the bottom fact,
  * unit law           -- multiplying by the unit fact changes nothing,
  * witness invariance -- elements sharing a dual multiply alike under dual,
  * negation law       -- X . B has dual neg(X) whenever dual(B) = 0,
  * closed cone        -- products of closed facts never drop strictly
                          below the bottom fact,
  * open cone          -- fact closures of open-fact products stay open.

Solving is finite-domain propagation followed by depth-first enumeration;
the admissible table keeps every full solution so that downstream
evaluation can respect cross-pair coupling.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .lattice import LatticeElement, TaskLattice
from .phase import PhaseStructure

PairKey = tuple[int, int]   # (id, id) with id_a <= id_b, both join-irreducible


class SolverError(Exception):
    pass


class MissingNegation(SolverError):
    pass


class Inconsistent(SolverError):
    def __init__(self, conflict: Sequence["Constraint"]):
        self.conflict = list(conflict)
        labels = "; ".join(c.label for c in self.conflict)
        super().__init__(f"constraint system is unsatisfiable; conflicting subset: {labels}")


@dataclass(frozen=True)
class Expr:
    """A join of unknown pair products and a fixed element part."""

    terms: tuple[PairKey, ...]
    fixed: int = 0      # mask

    def evaluate(self, assign: Mapping[PairKey, int]) -> int:
        m = self.fixed
        for t in self.terms:
            m |= assign[t]
        return m


@dataclass(frozen=True)
class Constraint:
    kind: str                      # le | eq | dual_is | dual_eq | not_below | closure_open
    lhs: Expr
    rhs_mask: int = 0              # for le/eq/not_below
    target_id: int = -1            # for dual_is: required dual (element id)
    rhs_expr: Optional[Expr] = None  # for dual_eq
    label: str = ""

    def pairs(self) -> set[PairKey]:
        s = set(self.lhs.terms)
        if self.rhs_expr is not None:
            s |= set(self.rhs_expr.terms)
        return s


@dataclass
class ConstraintSet:
    constraints: list[Constraint]
    pairs: tuple[PairKey, ...]
    strict_unit: bool

    def __iter__(self):
        return iter(self.constraints)

    def __len__(self):
        return len(self.constraints)


@dataclass
class AdmissibleTable:
    """Per-pair product value sets plus the full solutions that witness them."""

    lattice: TaskLattice
    pairs: tuple[PairKey, ...]
    solutions: list[tuple[int, ...]]              # masks, aligned with pairs
    per_pair: dict[PairKey, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.per_pair:
            self.per_pair = {
                p: tuple(sorted({s[i] for s in self.solutions}))
                for i, p in enumerate(self.pairs)
            }
        self._index = {p: i for i, p in enumerate(self.pairs)}
        self._proj_cache: dict[tuple[int, ...], tuple[tuple[int, ...], ...]] = {}

    @property
    def solution_count(self) -> int:
        return len(self.solutions)

    def pair_index(self, p: PairKey) -> int:
        return self._index[p]

    def values(self, p: PairKey) -> tuple[int, ...]:
        return self.per_pair[p]

    def unique_projections(self, pair_keys: Sequence[PairKey]) -> tuple[tuple[int, ...], ...]:
        """Distinct restrictions of the stored solutions to the given pairs."""
        idx = tuple(self._index[p] for p in pair_keys)
        cached = self._proj_cache.get(idx)
        if cached is None:
            cached = tuple({tuple(s[i] for i in idx) for s in self.solutions})
            self._proj_cache[idx] = cached
        return cached

    def assignment(self, k: int) -> dict[PairKey, int]:
        return dict(zip(self.pairs, self.solutions[k]))

    def to_json(self) -> dict:
        by_mask = {e.mask: e.id for e in self.lattice.elements}
        return {
            "pairs": [
                {"a": a, "b": b, "values": [by_mask[m] for m in self.per_pair[(a, b)]]}
                for (a, b) in self.pairs
            ],
            "solutionCount": self.solution_count,
        }

    @classmethod
    def from_json(cls, doc: dict, lattice: TaskLattice) -> "AdmissibleTable":
        """Load a pinned table; entries must be determinate (one value per pair)."""
        pairs = []
        values = []
        for row in doc["pairs"]:
            a, b = sorted((row["a"], row["b"]))
            vals = row["values"]
            if len(vals) != 1:
                raise SolverError("pinned tables must give exactly one value per pair")
            pairs.append((a, b))
            values.append(lattice.by_id(vals[0]).mask)
        order = sorted(range(len(pairs)), key=lambda i: pairs[i])
        pairs = tuple(pairs[i] for i in order)
        sol = tuple(values[i] for i in order)
        ji = {e.id for e in lattice.join_irreducibles}
        want = tuple(sorted((min(a, b), max(a, b))
                            for a, b in itertools.combinations_with_replacement(sorted(ji), 2)))
        if pairs != want:
            raise SolverError("pinned table must cover every join-irreducible pair exactly once")
        return cls(lattice=lattice, pairs=pairs, solutions=[sol])


def _product_mask(lat: TaskLattice, x: LatticeElement, y: LatticeElement,
                  assign: Mapping[PairKey, int]) -> int:
    m = 0
    for q in lat.canonical_decomposition(x):
        for r in lat.canonical_decomposition(y):
            key = (q.id, r.id) if q.id <= r.id else (r.id, q.id)
            m |= assign[key]
    return m


def _expr_of(lat: TaskLattice, x: LatticeElement, y: LatticeElement) -> Expr:
    terms = set()
    for q in lat.canonical_decomposition(x):
        for r in lat.canonical_decomposition(y):
            terms.add((q.id, r.id) if q.id <= r.id else (r.id, q.id))
    return Expr(terms=tuple(sorted(terms)))


def generate_constraints(ps: PhaseStructure, strict_unit: bool = True) -> ConstraintSet:
    """Emit the constraint system for the pair-product unknowns."""
    lat = ps.lattice
    ji_ids = sorted(e.id for e in lat.join_irreducibles)
    pairs = tuple((a, b) for a, b in itertools.combinations_with_replacement(ji_ids, 2))
    cs: list[Constraint] = []

    facts = [lat.by_id(i) for i in sorted(ps.facts)]
    unit = ps.unit_fact
    bot = ps.bottom_fact

    # self-implication: X . dual(X) <= bottom fact
    for x in facts:
        cs.append(Constraint("le", _expr_of(lat, x, ps.dual(x)), rhs_mask=bot.mask,
                             label=f"self-implication[{x.label}]"))

    # unit law: I . Y = Y (strict) or dual(I . Y) = dual(Y) (relaxed)
    for y in lat.elements:
        e = _expr_of(lat, unit, y)
        if strict_unit:
            cs.append(Constraint("eq", e, rhs_mask=y.mask, label=f"unit[{y.label}]"))
        else:
            cs.append(Constraint("dual_is", e, target_id=ps.dual_map[y.id],
                                 label=f"unit-relaxed[{y.label}]"))

    # witness invariance: dual(X . B) = dual(X . C) whenever dual(B) = dual(C)
    by_dual: dict[int, list[LatticeElement]] = {}
    for el in lat.elements:
        by_dual.setdefault(ps.dual_map[el.id], []).append(el)
    for cls in by_dual.values():
        if len(cls) < 2:
            continue
        base = cls[0]
        for x in lat.elements:
            for other in cls[1:]:
                cs.append(Constraint("dual_eq", _expr_of(lat, x, base),
                                     rhs_expr=_expr_of(lat, x, other),
                                     label=f"witness[{x.label}:{base.label}~{other.label}]"))

    # negation law: dual(X . B) = neg(X) for facts X and every B with dual(B) = 0
    zeros = [el for el in lat.elements if ps.dual_map[el.id] == lat.bottom.id]
    for x in facts:
        try:
            nx = lat.negation(x)
        except Exception as exc:
            raise MissingNegation(f"negation undefined for {x.label}: {exc}") from exc
        for b in zeros:
            cs.append(Constraint("dual_is", _expr_of(lat, x, b), target_id=nx.id,
                                 label=f"negation[{x.label}.{b.label}]"))

    # closed cone: products of closed facts never fall strictly below the bottom fact
    closed = [lat.by_id(i) for i in sorted(ps.closed_facts)]
    for c1, c2 in itertools.combinations_with_replacement(closed, 2):
        cs.append(Constraint("not_below", _expr_of(lat, c1, c2), rhs_mask=bot.mask,
                             label=f"closed-cone[{c1.label}.{c2.label}]"))

    # open cone: fact closures of open-fact products stay open
    open_ = [lat.by_id(i) for i in sorted(ps.open_facts)]
    for g1, g2 in itertools.combinations_with_replacement(open_, 2):
        cs.append(Constraint("closure_open", _expr_of(lat, g1, g2),
                             label=f"open-cone[{g1.label}.{g2.label}]"))

    return ConstraintSet(constraints=cs, pairs=pairs, strict_unit=strict_unit)


def _check_constraint(c: Constraint, assign: Mapping[PairKey, int], ps: PhaseStructure,
                      mask_to_id: Mapping[int, int]) -> bool:
    v = c.lhs.evaluate(assign)
    if c.kind == "le":
        return v & c.rhs_mask == v
    if c.kind == "eq":
        return v == c.rhs_mask
    if c.kind == "dual_is":
        return ps.dual_map[mask_to_id[v]] == c.target_id
    if c.kind == "dual_eq":
        w = c.rhs_expr.evaluate(assign)
        return ps.dual_map[mask_to_id[v]] == ps.dual_map[mask_to_id[w]]
    if c.kind == "not_below":
        return not (v != c.rhs_mask and v & c.rhs_mask == v)
    if c.kind == "closure_open":
        i = mask_to_id[v]
        return ps.dual_map[ps.dual_map[i]] in ps.open_facts
    raise SolverError(f"unknown constraint kind {c.kind}")


def _propagate(cs: ConstraintSet, ps: PhaseStructure,
               domains: dict[PairKey, list[int]],
               mask_to_id: Mapping[int, int]) -> bool:
    """Prune domains; sound (never removes a value in some solution)."""
    lat = ps.lattice
    preimage: dict[int, list[int]] = {}
    for el in lat.elements:
        preimage.setdefault(ps.dual_map[el.id], []).append(el.mask)

    changed = True
    while changed:
        changed = False
        for c in cs:
            if c.kind in ("le", "eq"):
                if c.lhs.fixed & c.rhs_mask != c.lhs.fixed:
                    return False
                for p in c.lhs.terms:
                    kept = [v for v in domains[p] if v & c.rhs_mask == v]
                    if len(kept) != len(domains[p]):
                        domains[p] = kept
                        changed = True
                    if not kept:
                        return False
                if c.kind == "eq":
                    # every term is <= rhs now; the union of all remaining
                    # choices must still be able to cover rhs
                    cover = c.lhs.fixed
                    for p in c.lhs.terms:
                        for v in domains[p]:
                            cover |= v
                    if cover != c.rhs_mask:
                        return False
            elif c.kind == "dual_is":
                targets = preimage.get(c.target_id, [])
                if not targets:
                    return False
                for p in c.lhs.terms:
                    others = c.lhs.fixed
                    for q in c.lhs.terms:
                        if q != p:
                            for v in domains[q]:
                                others |= v
                    kept = [v for v in domains[p]
                            if any(v & t == v and t & (v | others) == t for t in targets)]
                    if len(kept) != len(domains[p]):
                        domains[p] = kept
                        changed = True
                    if not kept:
                        return False
            # dual_eq / not_below / closure_open are cheap to defer to search
    return True


def solve(cs: ConstraintSet, ps: PhaseStructure) -> AdmissibleTable:
    """All multiplication tables satisfying the constraint system.

    Finite-domain propagation narrows per-pair domains, then a depth-first
    enumeration (unknowns by ascending domain size, values by ascending
    lattice rank) collects every full solution.
    """
    lat = ps.lattice
    mask_to_id = {e.mask: e.id for e in lat.elements}
    all_masks = sorted((e.mask for e in lat.elements),
                       key=lambda m: (bin(m).count("1"), m))
    domains: dict[PairKey, list[int]] = {p: list(all_masks) for p in cs.pairs}

    feasible = _propagate(cs, ps, domains, mask_to_id)
    if not feasible:
        raise Inconsistent(_minimize_conflict(cs, ps))

    order = sorted(cs.pairs, key=lambda p: (len(domains[p]), p))
    pos = {p: i for i, p in enumerate(order)}
    # constraints grouped by the search depth at which they become checkable
    by_depth: list[list[Constraint]] = [[] for _ in order]
    for c in cs:
        sup = c.pairs()
        if not sup:
            # constant constraint
            if not _check_constraint(c, {}, ps, mask_to_id):
                raise Inconsistent([c])
            continue
        by_depth[max(pos[p] for p in sup)].append(c)

    solutions: list[tuple[int, ...]] = []
    assign: dict[PairKey, int] = {}

    def dfs(depth: int):
        if depth == len(order):
            solutions.append(tuple(assign[p] for p in cs.pairs))
            return
        p = order[depth]
        for v in domains[p]:
            assign[p] = v
            if all(_check_constraint(c, assign, ps, mask_to_id) for c in by_depth[depth]):
                dfs(depth + 1)
        del assign[p]

    dfs(0)
    if not solutions:
        raise Inconsistent(_minimize_conflict(cs, ps))
    solutions.sort()
    return AdmissibleTable(lattice=lat, pairs=cs.pairs, solutions=solutions)


def _satisfiable(constraints: list[Constraint], cs: ConstraintSet, ps: PhaseStructure) -> bool:
    sub = ConstraintSet(constraints=constraints, pairs=cs.pairs, strict_unit=cs.strict_unit)
    try:
        solve(sub, ps)
        return True
    except Inconsistent:
        return False


def _minimize_conflict(cs: ConstraintSet, ps: PhaseStructure) -> list[Constraint]:
    """Greedy constraint-removal minimisation (small, not guaranteed minimum)."""
    core = list(cs.constraints)
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1:]
        if trial and not _satisfiable(trial, cs, ps):
            core = trial
        else:
            i += 1
        if len(core) <= 1:
            break
    return core


@dataclass
class TableReport:
    """Law-check report for one full multiplication assignment."""

    enforced_violations: list[str]
    reported: list[str]

    @property
    def passed(self) -> bool:
        return not self.enforced_violations

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "violations": list(self.enforced_violations),
            "reported": list(self.reported),
        }


def _decomposition_preserved(lat: TaskLattice, a: LatticeElement, b: LatticeElement) -> bool:
    """True when no maximal join-irreducible of a or b is lost in a v b."""
    j = lat.join(a, b)
    dj = set(lat.canonical_decomposition(j))
    return set(lat.canonical_decomposition(a)) | set(lat.canonical_decomposition(b)) <= dj


def verify_table(assign: Mapping[PairKey, int], ps: PhaseStructure) -> TableReport:
    """Re-check one full assignment against every law.

    Enforced: the generated constraint families, the residual-duality
    agreement (per fact, scanned over the opposite class), and the
    implication distribution over additive conjunction on meet pairs whose
    decompositions survive the join.  Reported only: associativity and the
    unrestricted distribution law, which the admissible tables are not
    required to satisfy.
    """
    lat = ps.lattice
    mask_to_id = {e.mask: e.id for e in lat.elements}
    violations: list[str] = []
    reported: list[str] = []

    cs = generate_constraints(ps, strict_unit=True)
    for c in cs:
        if not _check_constraint(c, assign, ps, mask_to_id):
            violations.append(c.label)

    def prod(x: LatticeElement, y: LatticeElement) -> int:
        return _product_mask(lat, x, y, assign)

    def dual_of_mask(m: int) -> LatticeElement:
        return lat.by_id(ps.dual_map[mask_to_id[m]])

    # residual duality agreement: the dual of a fact is the greatest member
    # of the opposite class annihilating it into the bottom fact
    for i in sorted(ps.facts):
        x = lat.by_id(i)
        scan = ps.open_facts if i in ps.closed_facts else ps.closed_facts
        if ps.bottom_fact is lat.bottom:
            scan = ps.facts
        best = 0
        for j in scan:
            z = lat.by_id(j)
            if prod(x, z) & ps.bottom_fact.mask == prod(x, z):
                best |= z.mask
        if best != ps.dual(x).mask:
            violations.append(f"residual-duality[{x.label}]")

    # implication distribution over &, on decomposition-preserving meets
    facts = [lat.by_id(i) for i in sorted(ps.facts)]
    for b, c in itertools.combinations_with_replacement(facts, 2):
        db, dc = ps.dual(b), ps.dual(c)
        preserved = _decomposition_preserved(lat, db, dc)
        for x in lat.elements:
            lhs = dual_of_mask(prod(x, ps.dual(lat.meet(b, c))))
            rhs = lat.meet(dual_of_mask(prod(x, db)), dual_of_mask(prod(x, dc)))
            if lhs is not rhs:
                msg = f"distribution[{x.label}:{b.label}&{c.label}]"
                if preserved:
                    violations.append(msg)
                else:
                    reported.append(msg)

    # associativity of the derived product (reported, never enforced)
    for a, b, c in itertools.product(lat.elements, repeat=3):
        left = _product_mask(lat, lat.by_id(mask_to_id[prod(a, b)]), c, assign)
        right = _product_mask(lat, a, lat.by_id(mask_to_id[prod(b, c)]), assign)
        if left != right:
            reported.append(f"associativity[{a.label},{b.label},{c.label}]")

    return TableReport(enforced_violations=violations, reported=reported)
