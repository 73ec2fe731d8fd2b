"""Budgeted dynamic asymptotic dimension for group actions and finite groupoids."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping

import networkx as nx

from .covers import (
    BudgetedDimensionQuery,
    TaggedCover,
    atom_colouring,
    bfs_order,
    coarse_witness,
    solve_coarse,
    solve_families,
    validate_families,
)
from .errors import InvalidSpecError
from .groupoids import (
    FiniteGroupoid,
    GroupAction,
    LengthFunction,
    build_pair_groupoid,
    build_transformation_groupoid,
    closure,
)
from .spaces import FiniteMetricSpace, Length, entourage

UNBOUNDED = float("inf")


@dataclass(frozen=True)
class DadQuery:
    K: frozenset
    B: Length | float = UNBOUNDED
    m_max: int = 8
    orbit_condition: bool = False

    def __post_init__(self):
        if self.B < 0 or self.m_max < 0:
            raise InvalidSpecError("B and m_max must be non-negative")


@dataclass(frozen=True)
class DadResult:
    value: int | None
    cover: tuple  # tuple of frozensets (unit or point sets); empty when infeasible

    def __iter__(self):
        return iter((self.value, self.cover))


# --- group actions ------------------------------------------------------------------------


@dataclass(frozen=True)
class StayIn:
    elements: frozenset
    exceeded: bool  # an accumulated product left a partial model


def _check_E(action: GroupAction, E: Iterable) -> frozenset:
    E = frozenset(E)
    grp = action.group
    if grp.identity not in E:
        raise InvalidSpecError("E must contain the identity")
    if any(grp.inverse[g] not in E for g in E):
        raise InvalidSpecError("E must be symmetric")
    if not E <= set(grp.elements):
        raise InvalidSpecError("E must consist of group elements")
    return E


def stay_in_set(
    action: GroupAction,
    U: Iterable[Hashable],
    E: Iterable,
    length_budget: Length | float | None = None,
) -> StayIn:
    """All products γ_k⋯γ_1 (γ_j in E) along which some x in U never leaves U.

    BFS over (current point, accumulated element). With ``length_budget`` the search
    stops at the first element longer than the budget.
    """
    E = _check_E(action, E)
    U = frozenset(U)
    grp = action.group
    e = grp.identity
    seen = {(x, e) for x in U}
    found = {e} if U else set()
    queue = deque(seen)
    while queue:
        x, g = queue.popleft()
        for eta in E:
            y = action(eta, x)
            if y not in U:
                continue
            h = grp.mul(eta, g)
            if h is None:
                return StayIn(frozenset(found), True)
            if (y, h) in seen:
                continue
            seen.add((y, h))
            found.add(h)
            if length_budget is not None and grp.length[h] > length_budget:
                return StayIn(frozenset(found), False)
            queue.append((y, h))
    return StayIn(frozenset(found), False)


def dad_action(
    action: GroupAction, E: Iterable, B: Length | float, m_max: int
) -> DadResult:
    """Smallest m with a cover U_0..U_m of X whose stay-in sets have word length <= B."""
    E = _check_E(action, E)
    X = action.X
    grp = action.group

    def good(cls: frozenset) -> bool:
        res = stay_in_set(action, (X[i] for i in cls), E, B)
        return not res.exceeded and all(grp.length[g] <= B for g in res.elements)

    res = atom_colouring(len(X), good, m_max)
    if res is None:
        return DadResult(None, ())
    return DadResult(res[0], tuple(frozenset(X[i] for i in c) for c in res[1]))


# --- groupoids ----------------------------------------------------------------------------


def partial_orbit(G: FiniteGroupoid, K: Iterable, x) -> frozenset:
    """s(K ∩ r^-1(x))."""
    K = K if isinstance(K, frozenset) else frozenset(K)
    return frozenset(G.src[g] for g in G.by_rng.get(x, ()) if g in K)


def orbit_atoms(G: FiniteGroupoid, K: frozenset) -> list[frozenset]:
    """Inclusion-maximal partial orbits, plus singletons for units in none of them."""
    units = G.unit_list
    orbits = {partial_orbit(G, K, x) for x in units}
    orbits.discard(frozenset())
    maximal = [o for o in orbits if not any(o < p for p in orbits)]
    covered = frozenset().union(*maximal) if maximal else frozenset()
    maximal += [frozenset([u]) for u in units if u not in covered]
    pos = {u: i for i, u in enumerate(units)}
    maximal.sort(key=lambda o: sorted(pos[u] for u in o))
    return maximal


def subgroupoid_within_budget(
    G: FiniteGroupoid, ell: LengthFunction, K: frozenset, U: frozenset, B: Length | float
) -> bool:
    S = [g for g in K if G.src[g] in U and G.rng[g] in U]
    _, ok = closure(G, S, ell, B)
    return ok


def dad_groupoid(G: FiniteGroupoid, ell: LengthFunction, q: DadQuery) -> DadResult:
    """Smallest m with a cover U_0..U_m of the units whose K-generated subgroupoids have length <= B.

    With the orbit condition every partial orbit s(K ∩ r^-1(x)) must lie in one U_i;
    the search then colours maximal partial orbits, so the sets may overlap.
    """
    K = frozenset(q.K)
    if not K <= set(G.arrows):
        raise InvalidSpecError("K must consist of arrows of G")
    units = G.unit_list
    if q.orbit_condition:
        atoms = orbit_atoms(G, K)
    else:
        atoms = [frozenset([u]) for u in units]

    def union(cls):
        return frozenset().union(*(atoms[i] for i in cls))

    def good(cls: frozenset) -> bool:
        return subgroupoid_within_budget(G, ell, K, union(cls), q.B)

    res = atom_colouring(len(atoms), good, q.m_max)
    if res is None:
        return DadResult(None, ())
    return DadResult(res[0], tuple(union(c) for c in res[1]))


def threshold_generators(G: FiniteGroupoid, ell: LengthFunction, R: Length) -> frozenset:
    """K = {g : ℓ(g) < R}."""
    return ell.below(G, R, strict=True)


# --- cross-checks -------------------------------------------------------------------------


@dataclass
class CrosscheckReport:
    name: str
    values: dict
    passed: bool
    witnesses: dict = field(default_factory=dict)
    problems: list = field(default_factory=list)

    def summary(self) -> str:
        vals = " = ".join("inf" if v is None else str(v) for v in self.values.values())
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {vals} [{status}]"


def crosscheck_action(action: GroupAction, R: Length, B: Length | float, m_max: int) -> CrosscheckReport:
    """dad of the action and of its transformation groupoid at matched (R, B)."""
    grp = action.group
    E = frozenset(g for g in grp.elements if grp.length[g] < R)
    a = dad_action(action, E, B, m_max)
    G, ell = build_transformation_groupoid(action)
    g = dad_groupoid(G, ell, DadQuery(threshold_generators(G, ell, R), B, m_max))
    return CrosscheckReport(
        "action",
        {"action": a.value, "groupoid": g.value},
        a.value == g.value,
        {"action": a.cover, "groupoid": g.cover},
    )


def crosscheck_pair(space: FiniteMetricSpace, R: Length, D: Length, m_max: int) -> CrosscheckReport:
    """Pair-groupoid dad, coarse solver and families solver at K = E_R arrows, B = D.

    Also converts each witness into the other shape and validates it: the dad cover's
    pieces (components under E_R) must form R-disjoint diameter-<=D families, and the
    unions of the families must be a valid dad cover.
    """
    G, ell = build_pair_groupoid(space)
    K = frozenset(g for g in G.arrows if ell(g) <= R)
    dg = dad_groupoid(G, ell, DadQuery(K, D, m_max))
    ER, ED = entourage(space, R), entourage(space, D)
    co = solve_coarse(space, ER, ED, m_max)
    fa, fam_cover = solve_families(space, BudgetedDimensionQuery(R, D, m_max))
    problems: list[str] = []

    graph = nx.Graph()
    graph.add_nodes_from(space.points)
    graph.add_edges_from((x, y) for x, y in ER.pairs if x != y)
    if dg.value is not None:
        fams = []
        for U in dg.cover:
            pts = [u[0] for u in U]
            fams.append([frozenset(c) for c in nx.connected_components(graph.subgraph(pts))])
        problems += ["dad->families: " + p for p in validate_families(space, TaggedCover.of(fams), R, D)]
    if fam_cover is not None:
        for i, fam in enumerate(fam_cover.families):
            U = frozenset((x, x) for s in fam for x in s)
            if not subgroupoid_within_budget(G, ell, K, U, D):
                problems.append(f"families->dad: union of family {i} generates an arrow longer than {D}")
    co_cover = coarse_witness(space, ER, ED, m_max)
    if co_cover is not None:
        problems += ["coarse witness: " + p for p in validate_families(space, co_cover, R, D)]

    values = {"dad": dg.value, "coarse": co, "families": fa}
    passed = dg.value == co == fa and not problems
    return CrosscheckReport(
        "pair", values, passed, {"dad": dg.cover, "families": fam_cover, "coarse": co_cover}, problems
    )


# --- (E, ε)-equivariance ------------------------------------------------------------------


@dataclass(frozen=True)
class ProbMeasure:
    weights: Mapping

    def validate(self, tol: float = 1e-12) -> None:
        vals = list(self.weights.values())
        if any(v < 0 for v in vals):
            raise InvalidSpecError("negative weight")
        total = sum(vals)
        exact = all(isinstance(v, (int, Fraction)) for v in vals)
        if (exact and total != 1) or (not exact and abs(total - 1) > tol):
            raise InvalidSpecError(f"weights sum to {total}, not 1")

    def push(self, g, vertex_action: Mapping) -> "ProbMeasure":
        out: dict = {}
        for v, w in self.weights.items():
            gv = vertex_action[(g, v)]
            out[gv] = out.get(gv, 0) + w
        return ProbMeasure(out)


def l1(a: ProbMeasure, b: ProbMeasure):
    keys = set(a.weights) | set(b.weights)
    return sum(abs(a.weights.get(k, 0) - b.weights.get(k, 0)) for k in keys)


def equivariance_defect(
    action: GroupAction,
    f: Mapping,
    vertex_action: Mapping,
    E: Iterable,
):
    """max over g in E and x in X of ||f(gx) - g·f(x)||_1; f is (E, ε)-equivariant iff this is < ε."""
    measures = {x: m if isinstance(m, ProbMeasure) else ProbMeasure(dict(m)) for x, m in f.items()}
    for m in measures.values():
        m.validate()
    worst = 0
    for g in E:
        for x in action.X:
            worst = max(worst, l1(measures[action(g, x)], measures[x].push(g, vertex_action)))
    return worst
