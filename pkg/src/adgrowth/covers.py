"""Covers, their statistics, and budgeted solvers for the four dimension definitions.

Every exact solver returns ``None`` for an infeasible query. Solvers work on
point indices internally and translate back to point ids at the boundary.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import networkx as nx
from networkx.utils import UnionFind

from .errors import InvalidSpecError, PreconditionError, SolverCapError
from .spaces import Entourage, FiniteMetricSpace, Length, from_jsonable, to_jsonable

DEFAULT_SOLVER_CAP = 16
INF = float("inf")


# --- data ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class TaggedCover:
    """Families of point sets; the union of all sets is the covered region."""

    families: tuple  # tuple[tuple[frozenset, ...], ...]

    @classmethod
    def of(cls, families: Iterable[Iterable[Iterable[Hashable]]]) -> "TaggedCover":
        return cls(tuple(tuple(frozenset(s) for s in fam) for fam in families))

    @classmethod
    def flat(cls, sets: Iterable[Iterable[Hashable]]) -> "TaggedCover":
        return cls.of([sets])

    @property
    def sets(self) -> list:
        return [s for fam in self.families for s in fam]

    def union(self) -> frozenset:
        return frozenset().union(*self.sets) if self.sets else frozenset()

    def canonical(self, space: FiniteMetricSpace) -> "TaggedCover":
        """Sort sets and families by point index so equal covers compare equal."""
        key = lambda s: sorted(space.index(p) for p in s)  # noqa: E731
        fams = [tuple(sorted(fam, key=key)) for fam in self.families]
        fams.sort(key=lambda fam: [key(s) for s in fam])
        return TaggedCover(tuple(fams))


@dataclass(frozen=True)
class CoverStats:
    lebesgue: Length | float
    multiplicity: int
    max_diameter: Length
    r_multiplicity: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BudgetedDimensionQuery:
    R: Length
    D: Length
    m_max: int = 8

    def __post_init__(self):
        if self.R < 0 or self.D < 0 or self.m_max < 0:
            raise InvalidSpecError("R, D and m_max must be non-negative")


# --- helpers ------------------------------------------------------------------------------


def _check_subsets(space: FiniteMetricSpace, sets: Iterable[Iterable[Hashable]]) -> list[frozenset]:
    out = []
    for s in sets:
        fs = frozenset(s)
        if not fs:
            raise InvalidSpecError("cover sets must be non-empty")
        for p in fs:
            if p not in space._index:
                raise InvalidSpecError(f"{p!r} is not a point of the space")
        out.append(fs)
    return out


def _ids(space: FiniteMetricSpace, idx: Iterable[int]) -> frozenset:
    return frozenset(space.points[i] for i in idx)


def _cap(space: FiniteMetricSpace, cap: int) -> None:
    if len(space) > cap:
        raise SolverCapError(f"exact solver cap is {cap} points, space has {len(space)}")


def threshold_graph(space: FiniteMetricSpace, t: Length) -> nx.Graph:
    """Graph on point indices with an edge wherever d <= t."""
    n = len(space)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from((i, j) for i in range(n) for j in range(i + 1, n) if space.dist[i][j] <= t)
    return g


def maximal_cliques(space: FiniteMetricSpace, t: Length) -> list[frozenset]:
    """Maximal index subsets of diameter <= t, in canonical order."""
    cl = [frozenset(c) for c in nx.find_cliques(threshold_graph(space, t))]
    cl.sort(key=lambda c: sorted(c))
    return cl


def _diam_idx(space: FiniteMetricSpace, idx: Iterable[int]) -> Length:
    idx = list(idx)
    return max((space.dist[i][j] for i in idx for j in idx), default=0)


def _set_dist_idx(space: FiniteMetricSpace, a: Iterable[int], b: Iterable[int]) -> Length:
    return min(space.dist[i][j] for i in a for j in b)


# --- statistics ---------------------------------------------------------------------------


def lebesgue_number(space: FiniteMetricSpace, sets: Sequence[frozenset]) -> Length | float:
    """Largest distance value t with every subset of diameter <= t inside some set.

    ``inf`` when every subset (the whole space) fits. Subsets of diameter <= t fit iff
    the maximal ones do, so only maximal cliques of the threshold graph are examined.
    """
    idx_sets = [frozenset(space.index(p) for p in s) for s in sets]
    if any(len(s) == len(space) for s in idx_sets):
        return INF
    best: Length = 0
    for t in space.distance_values():
        if all(any(c <= s for s in idx_sets) for c in maximal_cliques(space, t)):
            best = t
        else:
            break
    return best


def multiplicity(space: FiniteMetricSpace, sets: Sequence[frozenset]) -> int:
    return max(sum(1 for s in sets if p in s) for p in space.points)


def r_multiplicity(space: FiniteMetricSpace, sets: Sequence[frozenset], R: Length) -> int:
    """Largest number of sets meeting a closed ball B(x, R)."""
    return max(sum(1 for s in sets if s & space.ball(p, R)) for p in space.points)


def cover_stats(space: FiniteMetricSpace, cover, radii: Iterable[Length] = ()) -> CoverStats:
    sets = cover.sets if isinstance(cover, TaggedCover) else list(cover)
    sets = _check_subsets(space, sets)
    if not sets:
        raise InvalidSpecError("cover is empty")
    return CoverStats(
        lebesgue=lebesgue_number(space, sets),
        multiplicity=multiplicity(space, sets),
        max_diameter=max(space.diameter(s) for s in sets),
        r_multiplicity={R: r_multiplicity(space, sets, R) for R in radii},
    )


def validate_families(
    space: FiniteMetricSpace,
    cover: TaggedCover,
    R: Length,
    D: Length | None = None,
    target: Iterable[Hashable] | None = None,
) -> list[str]:
    """Every violation of R-disjointness, diameter budget and coverage, as messages."""
    problems = []
    for k, fam in enumerate(cover.families):
        for a, b in itertools.combinations(fam, 2):
            if space.set_distance(a, b) <= R:
                problems.append(f"family {k}: sets at distance <= {R}")
        for s in fam:
            if not s:
                problems.append(f"family {k}: empty set")
            elif D is not None and space.diameter(s) > D:
                problems.append(f"family {k}: set of diameter {space.diameter(s)} > {D}")
    want = frozenset(space.points if target is None else target)
    missing = want - cover.union()
    if missing:
        problems.append(f"uncovered points: {sorted(map(repr, missing))}")
    return problems


# --- generic colouring search -------------------------------------------------------------


def atom_colouring(
    n_atoms: int,
    good: Callable[[frozenset], bool],
    m_max: int,
    order: Sequence[int] | None = None,
) -> tuple[int, list[frozenset]] | None:
    """Smallest m <= m_max with atoms split into at most m+1 classes, each ``good``.

    ``good`` receives a frozenset of atom indices and must be hereditary (closed
    under subsets), which justifies pruning partial classes. Colours are introduced
    in order, so colourings differing by a permutation of colours are visited once.
    """
    if n_atoms == 0:
        return 0, []
    memo: dict[frozenset, bool] = {}

    def ok(cls: frozenset) -> bool:
        v = memo.get(cls)
        if v is None:
            v = memo[cls] = bool(good(cls))
        return v

    if not all(ok(frozenset([a])) for a in range(n_atoms)):
        return None
    seq = list(range(n_atoms)) if order is None else list(order)

    # with one class per atom every class is a singleton, so larger m adds nothing
    for m in range(min(m_max, n_atoms - 1) + 1):
        classes: list[frozenset] = []

        def place(pos: int) -> bool:
            if pos == len(seq):
                return True
            a = seq[pos]
            for c in range(len(classes)):
                cand = classes[c] | {a}
                if ok(cand):
                    prev = classes[c]
                    classes[c] = cand
                    if place(pos + 1):
                        return True
                    classes[c] = prev
            if len(classes) <= m:
                classes.append(frozenset([a]))
                if place(pos + 1):
                    return True
                classes.pop()
            return False

        if place(0):
            return m, list(classes)
    return None


def bfs_order(space: FiniteMetricSpace) -> list[int]:
    """Points ordered by BFS in the nearest-neighbour graph so conflicts surface early."""
    n = len(space)
    seen: list[int] = []
    marked = [False] * n
    for root in range(n):
        if marked[root]:
            continue
        marked[root] = True
        queue = [root]
        while queue:
            u = queue.pop(0)
            seen.append(u)
            for v in sorted(range(n), key=lambda v: (space.dist[u][v], v)):
                if not marked[v]:
                    marked[v] = True
                    queue.append(v)
    return seen


# --- solvers ------------------------------------------------------------------------------


def _next_value(space: FiniteMetricSpace, R: Length) -> Length | None:
    for v in space.distance_values():
        if v > R:
            return v
    return None


def solve_ad(
    space: FiniteMetricSpace, q: BudgetedDimensionQuery, cap: int = DEFAULT_SOLVER_CAP
) -> int | None:
    """Smallest n admitting a cover with diameter <= D, Lebesgue number > R, multiplicity <= n+1.

    Lebesgue number > R means every maximal subset of diameter <= R+ (the next distance
    value above R) sits in a cover set; each set may be shrunk to a union of such
    cliques, so covers are searched as groupings of cliques.
    """
    _cap(space, cap)
    nxt = _next_value(space, q.R)
    if nxt is None:
        # only a set containing the whole space pushes the Lebesgue number past R
        return 0 if space.diameter() <= q.D else None
    cliques = maximal_cliques(space, nxt)
    if any(_diam_idx(space, c) > q.D for c in cliques):
        return None
    n_pts = len(space)

    for n in range(q.m_max + 1):
        groups: list[frozenset] = []
        counts = [0] * n_pts

        def place(k: int) -> bool:
            if k == len(cliques):
                return True
            c = cliques[k]
            for gi in range(len(groups)):
                g = groups[gi]
                if c <= g:
                    if place(k + 1):
                        return True
                    continue
                new = c - g
                if any(counts[p] + 1 > n + 1 for p in new):
                    continue
                merged = g | c
                if _diam_idx(space, merged) > q.D:
                    continue
                for p in new:
                    counts[p] += 1
                groups[gi] = merged
                if place(k + 1):
                    return True
                groups[gi] = g
                for p in new:
                    counts[p] -= 1
            if all(counts[p] + 1 <= n + 1 for p in c):
                for p in c:
                    counts[p] += 1
                groups.append(c)
                if place(k + 1):
                    return True
                groups.pop()
                for p in c:
                    counts[p] -= 1
            return False

        if place(0):
            return n
    return None


def solve_rmult(
    space: FiniteMetricSpace, q: BudgetedDimensionQuery, cap: int = DEFAULT_SOLVER_CAP
) -> int | None:
    """Smallest n admitting a cover with diameter <= D whose R-multiplicity is <= n+1.

    Shrinking sets never raises diameters or ball counts, so partitions suffice.
    """
    _cap(space, cap)
    n_pts = len(space)
    near = [[i for i in range(n_pts) if space.dist[i][j] <= q.R] for j in range(n_pts)]
    order = bfs_order(space)

    for n in range(q.m_max + 1):
        blocks: list[list[int]] = []
        # meet[x][b] = how many points of block b lie in B(x, R)
        meet = [dict() for _ in range(n_pts)]
        width = [0] * n_pts

        def add(p: int, b: int) -> None:
            for x in near[p]:
                c = meet[x].get(b, 0)
                if c == 0:
                    width[x] += 1
                meet[x][b] = c + 1

        def remove(p: int, b: int) -> None:
            for x in near[p]:
                c = meet[x][b] - 1
                if c == 0:
                    width[x] -= 1
                    del meet[x][b]
                else:
                    meet[x][b] = c

        def fits(p: int, b: int) -> bool:
            return all(width[x] + (0 if b in meet[x] else 1) <= n + 1 for x in near[p])

        def place(pos: int) -> bool:
            if pos == n_pts:
                return True
            p = order[pos]
            for b in range(len(blocks)):
                if all(space.dist[p][o] <= q.D for o in blocks[b]) and fits(p, b):
                    blocks[b].append(p)
                    add(p, b)
                    if place(pos + 1):
                        return True
                    remove(p, b)
                    blocks[b].pop()
            b = len(blocks)
            if fits(p, b):
                blocks.append([p])
                add(p, b)
                if place(pos + 1):
                    return True
                remove(p, b)
                blocks.pop()
            return False

        if place(0):
            return n
    return None


def solve_families(
    space: FiniteMetricSpace, q: BudgetedDimensionQuery, cap: int = DEFAULT_SOLVER_CAP
) -> tuple[int | None, TaggedCover | None]:
    """Smallest n with n+1 R-disjoint families of diameter-<=D sets covering the space.

    Assignment search over (set, family tag): each point joins an open set or opens a
    new one under some tag; tags are introduced in order.
    """
    _cap(space, cap)
    n_pts = len(space)
    order = bfs_order(space)
    dist = space.dist

    for n in range(q.m_max + 1):
        members: list[list[int]] = []
        tags: list[int] = []

        def clash(p: int, tag: int, own: int) -> bool:
            for s, t in enumerate(tags):
                if t == tag and s != own and any(dist[p][o] <= q.R for o in members[s]):
                    return True
            return False

        def place(pos: int) -> bool:
            if pos == n_pts:
                return True
            p = order[pos]
            for s in range(len(members)):
                if all(dist[p][o] <= q.D for o in members[s]) and not clash(p, tags[s], s):
                    members[s].append(p)
                    if place(pos + 1):
                        return True
                    members[s].pop()
            top = max(tags, default=-1)
            for t in range(min(top + 1, n) + 1):
                if not clash(p, t, -1):
                    members.append([p])
                    tags.append(t)
                    if place(pos + 1):
                        return True
                    members.pop()
                    tags.pop()
            return False

        if place(0):
            fams: list[list[frozenset]] = [[] for _ in range(max(tags) + 1)]
            for s, t in zip(members, tags):
                fams[t].append(_ids(space, s))
            return n, TaggedCover.of(fams).canonical(space)
    return None, None


def solve_coarse(
    space: FiniteMetricSpace,
    E: Entourage,
    F_budget: Entourage,
    m_max: int,
    cap: int = DEFAULT_SOLVER_CAP,
) -> int | None:
    """Smallest m with an (m+1)-family cover whose families are E-separated and sets F-bounded.

    Colours points; each colour class is split into its components under E and E^-1,
    which are then the sets of that family. A class is admissible when every component
    C satisfies C x C inside F.
    """
    _cap(space, cap)
    if E.space != space or F_budget.space != space:
        raise InvalidSpecError("entourages must live on the given space")
    pts = space.points
    n = len(pts)
    adj = [[j for j in range(n) if j != i and ((pts[i], pts[j]) in E.pairs or (pts[j], pts[i]) in E.pairs)] for i in range(n)]
    F = F_budget.pairs

    def good(cls: frozenset) -> bool:
        uf = UnionFind(cls)
        for i in cls:
            for j in adj[i]:
                if j in cls:
                    uf.union(i, j)
        for comp in uf.to_sets():
            for i in comp:
                for j in comp:
                    if (pts[i], pts[j]) not in F:
                        return False
        return True

    res = atom_colouring(n, good, m_max, order=bfs_order(space))
    return None if res is None else res[0]


def coarse_witness(
    space: FiniteMetricSpace, E: Entourage, F_budget: Entourage, m_max: int, cap: int = DEFAULT_SOLVER_CAP
) -> TaggedCover | None:
    """Witness families for :func:`solve_coarse` (components of each colour class)."""
    _cap(space, cap)
    pts = space.points
    n = len(pts)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from((space.index(a), space.index(b)) for a, b in E.pairs if a != b)

    def comps(cls):
        return [frozenset(c) for c in nx.connected_components(g.subgraph(cls))]

    def good(cls):
        return all((pts[i], pts[j]) in F_budget.pairs for c in comps(cls) for i in c for j in c)

    res = atom_colouring(n, good, m_max, order=bfs_order(space))
    if res is None:
        return None
    return TaggedCover.of([[_ids(space, c) for c in comps(cls)] for cls in res[1]]).canonical(space)


# --- constructive transforms --------------------------------------------------------------


def irreducible_subcover(space: FiniteMetricSpace, sets: Sequence[frozenset]) -> list[frozenset]:
    """Drop sets, in order, whenever the rest still covers the same points."""
    keep = list(dict.fromkeys(sets))
    target = frozenset().union(*keep)
    i = 0
    while i < len(keep):
        rest = keep[:i] + keep[i + 1 :]
        if rest and frozenset().union(*rest) == target:
            keep = rest
        else:
            i += 1
    return keep


@dataclass
class BoxAllocation:
    cover: TaggedCover
    seeds: list
    irreducible: list
    stuck: list  # points that no box would accept


def box_allocate(
    space: FiniteMetricSpace,
    cover: Iterable[Iterable[Hashable]],
    R: Length,
    n: int | None = None,
    strict: bool = True,
) -> TaggedCover | BoxAllocation:
    """Turn a flat cover with R-multiplicity <= n+1 into n+1 R-disjoint families.

    First an irreducible subcover is kept. Boxes are then seeded with the sets meeting
    a ball B(x, R) that meets n+1 sets (or the most sets available). Every remaining
    set U is split into pieces, piece l holding the points of U not yet placed that
    are farther than R from everything already in box l.

    Points that no box accepts are reported in ``stuck``; with ``strict`` the call
    raises instead of returning a partial cover.
    """
    sets = _check_subsets(space, cover)
    if not sets:
        raise InvalidSpecError("cover is empty")
    m = r_multiplicity(space, sets, R)
    if n is None:
        n = m - 1
    if m > n + 1:
        raise PreconditionError(f"R-multiplicity {m} exceeds n+1 = {n + 1}")

    U = irreducible_subcover(space, sets)
    # the first ball meeting the most sets fixes the seeds
    best_x, best = None, -1
    for x in space.points:
        c = sum(1 for s in U if s & space.ball(x, R))
        if c > best:
            best_x, best = x, c
    ball = space.ball(best_x, R)
    seeds = [s for s in U if s & ball][: n + 1]
    boxes: list[list[frozenset]] = [[s] for s in seeds] + [[] for _ in range(n + 1 - len(seeds))]

    stuck: list = []
    for Uk in U:
        if any(Uk is s for s in seeds):
            continue
        remaining = set(Uk)
        for l in range(n + 1):
            piece = frozenset(x for x in remaining if all(space.set_distance([x], B) > R for B in boxes[l]))
            if piece:
                boxes[l].append(piece)
                remaining -= piece
        stuck.extend(sorted(remaining, key=space.index))

    out = TaggedCover.of([b for b in boxes])
    if strict:
        if stuck:
            raise PreconditionError(f"box allocation left points unplaced: {stuck!r}")
        return out
    return BoxAllocation(out, seeds, U, stuck)


def check_box_allocation(
    space: FiniteMetricSpace, cover: Sequence[Iterable[Hashable]], out: TaggedCover, R: Length
) -> list[str]:
    """Validity oracle: R-disjoint families, same coverage, every piece inside an input set."""
    sets = [frozenset(s) for s in cover]
    problems = validate_families(space, out, R, None, frozenset().union(*sets))
    for piece in out.sets:
        if not any(piece <= s for s in sets):
            problems.append(f"piece {sorted(map(repr, piece))} is inside no input set")
    return problems


def greedy_families(space: FiniteMetricSpace, R: Length, D: Length) -> tuple[int, TaggedCover]:
    """Upper bound for :func:`solve_families` by clustering then greedy colouring."""
    n = len(space)
    unassigned = list(range(n))
    cells: list[list[int]] = []
    while unassigned:
        seed = unassigned[0]
        cell = [seed]
        for p in sorted(unassigned[1:], key=lambda p: (space.dist[seed][p], p)):
            if all(space.dist[p][o] <= D for o in cell):
                cell.append(p)
        cells.append(cell)
        taken = set(cell)
        unassigned = [p for p in unassigned if p not in taken]
    conflict = nx.Graph()
    conflict.add_nodes_from(range(len(cells)))
    for a, b in itertools.combinations(range(len(cells)), 2):
        if _set_dist_idx(space, cells[a], cells[b]) <= R:
            conflict.add_edge(a, b)
    colour = nx.greedy_color(conflict, strategy="largest_first")
    k = max(colour.values()) + 1
    fams: list[list[frozenset]] = [[] for _ in range(k)]
    for c, col in colour.items():
        fams[col].append(_ids(space, cells[c]))
    return k - 1, TaggedCover.of(fams).canonical(space)


# --- JSON ---------------------------------------------------------------------------------


def cover_to_dict(space: FiniteMetricSpace, cover: TaggedCover) -> dict:
    key = space.index
    return {
        "families": [
            [[to_jsonable(p) for p in sorted(s, key=key)] for s in fam] for fam in cover.families
        ]
    }


def cover_from_dict(data: dict) -> TaggedCover:
    try:
        fams = data["families"]
    except (KeyError, TypeError) as exc:
        raise InvalidSpecError(f"malformed cover document: {exc}") from None
    return TaggedCover.of([[[from_jsonable(p) for p in s] for s in fam] for fam in fams])


def dump_cover(space: FiniteMetricSpace, cover: TaggedCover) -> str:
    return json.dumps(cover_to_dict(space, cover))


def load_cover(text: str) -> TaggedCover:
    return cover_from_dict(json.loads(text))
