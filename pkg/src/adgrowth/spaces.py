"""Finite metric spaces, generators, and entourages of the metric coarse structure."""

from __future__ import annotations

import itertools
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Sequence

from .errors import InvalidSpecError, ResourceCapError

Length = int | Fraction

DEFAULT_POINT_CAP = 4096


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A finite point set with an exact, validated distance matrix.

    Points are addressed by opaque hashable ids; every solver works on the
    index order of ``points`` so results are deterministic.
    """

    points: tuple
    dist: tuple
    name: str = ""
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.points)})
        if len(self._index) != len(self.points):
            raise InvalidSpecError("duplicate point ids")
        self.validate()

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteMetricSpace):
            return NotImplemented
        return self.points == other.points and self.dist == other.dist

    def __hash__(self) -> int:
        return hash((self.points, self.dist))

    def index(self, p: Hashable) -> int:
        try:
            return self._index[p]
        except KeyError:
            raise KeyError(f"{p!r} is not a point of this space") from None

    def d(self, p: Hashable, q: Hashable) -> Length:
        return self.dist[self._index[p]][self._index[q]]

    def diameter(self, subset: Iterable[Hashable] | None = None) -> Length:
        idx = range(len(self)) if subset is None else [self._index[p] for p in subset]
        idx = list(idx)
        return max((self.dist[i][j] for i in idx for j in idx), default=0)

    def set_distance(self, a: Iterable[Hashable], b: Iterable[Hashable]) -> Length:
        ia = [self._index[p] for p in a]
        ib = [self._index[p] for p in b]
        return min(self.dist[i][j] for i in ia for j in ib)

    def ball(self, p: Hashable, r: Length) -> frozenset:
        i = self._index[p]
        return frozenset(q for j, q in enumerate(self.points) if self.dist[i][j] <= r)

    def distance_values(self) -> list:
        return sorted({v for row in self.dist for v in row})

    def validate(self) -> None:
        n = len(self.points)
        if n == 0:
            raise InvalidSpecError("a metric space needs at least one point")
        if len(self.dist) != n or any(len(row) != n for row in self.dist):
            raise InvalidSpecError("distance matrix shape does not match point count")
        for i in range(n):
            for j in range(n):
                v = self.dist[i][j]
                if not isinstance(v, (int, Fraction)) or isinstance(v, bool):
                    raise InvalidSpecError(f"distance ({i},{j}) is not an exact rational: {v!r}")
                if v < 0:
                    raise InvalidSpecError(f"negative distance at ({i},{j})")
                if (v == 0) != (i == j):
                    raise InvalidSpecError(f"d(x,y)=0 must hold exactly on the diagonal, fails at ({i},{j})")
                if v != self.dist[j][i]:
                    raise InvalidSpecError(f"asymmetric distance at ({i},{j})")
        for i, j, k in itertools.product(range(n), repeat=3):
            if self.dist[i][k] > self.dist[i][j] + self.dist[j][k]:
                raise InvalidSpecError(f"triangle inequality fails for ({i},{j},{k})")


def _exact(v: Any) -> Length:
    if isinstance(v, bool):
        raise InvalidSpecError(f"not a distance: {v!r}")
    if isinstance(v, int):
        return v
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else v
    if isinstance(v, float):
        v = Fraction(str(v))
    elif isinstance(v, str):
        v = Fraction(v)
    else:
        raise InvalidSpecError(f"not a distance: {v!r}")
    return v.numerator if v.denominator == 1 else v


def from_matrix(points: Sequence, dist: Sequence[Sequence], name: str = "") -> FiniteMetricSpace:
    return FiniteMetricSpace(
        tuple(points), tuple(tuple(_exact(v) for v in row) for row in dist), name=name
    )


def graph_metric(points: Sequence, edges: Iterable[tuple], name: str = "") -> FiniteMetricSpace:
    """Shortest-path metric of an unweighted connected graph (BFS from every vertex)."""
    pts = list(points)
    index = {p: i for i, p in enumerate(pts)}
    adj: list[list[int]] = [[] for _ in pts]
    for a, b in edges:
        ia, ib = index[a], index[b]
        if ia != ib:
            adj[ia].append(ib)
            adj[ib].append(ia)
    n = len(pts)
    dist = []
    for s in range(n):
        row = [-1] * n
        row[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if row[v] < 0:
                    row[v] = row[u] + 1
                    queue.append(v)
        if min(row) < 0:
            raise InvalidSpecError("graph is not connected")
        dist.append(tuple(row))
    return FiniteMetricSpace(tuple(pts), tuple(dist), name=name)


def _check_cap(size: int, cap: int, what: str) -> None:
    if size > cap:
        raise ResourceCapError(f"{what} has {size} points, cap is {cap}")


def path(n: int, cap: int = DEFAULT_POINT_CAP) -> FiniteMetricSpace:
    if n < 1:
        raise InvalidSpecError("path needs n >= 1")
    _check_cap(n, cap, "path")
    return FiniteMetricSpace(
        tuple(range(n)), tuple(tuple(abs(i - j) for j in range(n)) for i in range(n)), name=f"path({n})"
    )


def cycle(n: int, cap: int = DEFAULT_POINT_CAP) -> FiniteMetricSpace:
    if n < 1:
        raise InvalidSpecError("cycle needs n >= 1")
    _check_cap(n, cap, "cycle")
    rows = tuple(tuple(min(abs(i - j), n - abs(i - j)) for j in range(n)) for i in range(n))
    return FiniteMetricSpace(tuple(range(n)), rows, name=f"cycle({n})")


def grid(dims: Sequence[int], cap: int = DEFAULT_POINT_CAP) -> FiniteMetricSpace:
    if not dims or any(k < 1 for k in dims):
        raise InvalidSpecError("grid dims must be positive")
    _check_cap(math.prod(dims), cap, "grid")
    pts = tuple(itertools.product(*(range(k) for k in dims)))
    rows = tuple(tuple(sum(abs(a - b) for a, b in zip(p, q)) for q in pts) for p in pts)
    return FiniteMetricSpace(pts, rows, name="grid(" + "x".join(map(str, dims)) + ")")


def dirsum(weights: Sequence[int], radius: int, cap: int = DEFAULT_POINT_CAP) -> FiniteMetricSpace:
    """Ball of the given radius around 0 in the weighted direct sum of copies of Z.

    Coordinate n is an integer multiple of ``weights[n]``; the metric is
    ``sum_n weights[n] * |a_n - b_n|`` on the multipliers.
    """
    w = list(weights)
    if not w or any(not isinstance(x, int) or x < 1 for x in w):
        raise InvalidSpecError("weights must be positive integers")
    if any(b <= a for a, b in zip(w, w[1:])):
        raise InvalidSpecError("weights must be strictly increasing")
    if radius < 0:
        raise InvalidSpecError("radius must be non-negative")

    def norm(t):
        return sum(wi * abs(ti) for wi, ti in zip(w, t))

    ranges = [range(-(radius // wi), radius // wi + 1) for wi in w]
    pts = []
    for t in itertools.product(*ranges):
        if norm(t) <= radius:
            pts.append(t)
            if len(pts) > cap:
                raise ResourceCapError(f"dirsum ball exceeds the point cap {cap}")
    pts.sort(key=lambda t: (norm(t), t))
    rows = tuple(
        tuple(sum(wi * abs(a - b) for wi, a, b in zip(w, p, q)) for q in pts) for p in pts
    )
    return FiniteMetricSpace(tuple(pts), rows, name=f"dirsum({','.join(map(str, w))};{radius})")


# --- groups given by generators, used for Cayley balls -------------------------------------


@dataclass(frozen=True)
class GroupSpec:
    """A (possibly infinite) group presented by a multiplication rule and generators.

    ``generators`` must be closed under inverses; word length is measured in them.
    """

    name: str
    identity: Hashable
    generators: tuple
    mul: Callable[[Any, Any], Any]
    inv: Callable[[Any], Any]

    def check(self, sample: Sequence, rng: random.Random | None = None, trials: int = 200) -> None:
        rng = rng or random.Random(0)
        pool = list(sample) or [self.identity]
        for g in self.generators:
            if self.inv(g) not in self.generators:
                raise InvalidSpecError(f"{self.name}: generator set not closed under inverses")
        for _ in range(trials):
            a, b, c = (rng.choice(pool) for _ in range(3))
            if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)):
                raise InvalidSpecError(f"{self.name}: non-associative sample {a!r},{b!r},{c!r}")
        for a in pool[:50]:
            if self.mul(a, self.identity) != a or self.mul(self.identity, a) != a:
                raise InvalidSpecError(f"{self.name}: identity law fails at {a!r}")
            if self.mul(a, self.inv(a)) != self.identity:
                raise InvalidSpecError(f"{self.name}: inverse law fails at {a!r}")


def cyclic_group(n: int) -> GroupSpec:
    if n < 1:
        raise InvalidSpecError("cyclic group order must be >= 1")
    gens = tuple(sorted({1 % n, (-1) % n} - ({0} if n > 1 else set()))) or (0,)
    return GroupSpec(f"Z/{n}", 0, gens, lambda a, b: (a + b) % n, lambda a: (-a) % n)


def free_abelian_group(rank: int) -> GroupSpec:
    gens = []
    for i in range(rank):
        for s in (1, -1):
            gens.append(tuple(s if j == i else 0 for j in range(rank)))
    return GroupSpec(
        f"Z^{rank}",
        (0,) * rank,
        tuple(gens),
        lambda a, b: tuple(x + y for x, y in zip(a, b)),
        lambda a: tuple(-x for x in a),
    )


def free_group(rank: int) -> GroupSpec:
    """Free group on ``rank`` letters; elements are reduced words of signed letters (1-based)."""

    def reduce(word):
        out: list[int] = []
        for x in word:
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
        return tuple(out)

    gens = tuple((s * (i + 1),) for i in range(rank) for s in (1, -1))
    return GroupSpec(
        f"F{rank}",
        (),
        gens,
        lambda a, b: reduce(a + b),
        lambda a: tuple(-x for x in reversed(a)),
    )


def dihedral_group(n: int) -> GroupSpec:
    """Dihedral group of order 2n as pairs (r, f): x -> f ? -x + r : x + r, generated by rotation and a flip."""

    def mul(a, b):
        ra, fa = a
        rb, fb = b
        return ((ra + (-rb if fa else rb)) % n, fa ^ fb)

    def inv(a):
        r, f = a
        return (r, 1) if f else ((-r) % n, 0)

    gens = sorted({(1 % n, 0), ((-1) % n, 0), (0, 1)} - {(0, 0)})
    return GroupSpec(f"D{n}", (0, 0), tuple(gens), mul, inv)


GROUPS: dict[str, Callable[[int], GroupSpec]] = {
    "cyclic": cyclic_group,
    "zk": free_abelian_group,
    "free": free_group,
    "dihedral": dihedral_group,
}


def word_lengths(group: GroupSpec, radius: int, cap: int) -> dict:
    """BFS in the Cayley graph: element -> word length, for all elements of length <= radius."""
    lengths = {group.identity: 0}
    frontier = [group.identity]
    for r in range(1, radius + 1):
        nxt = []
        for g in frontier:
            for s in group.generators:
                h = group.mul(g, s)
                if h not in lengths:
                    lengths[h] = r
                    nxt.append(h)
                    if len(lengths) > cap:
                        raise ResourceCapError(f"{group.name} ball of radius {radius} exceeds cap {cap}")
        frontier = nxt
    return lengths


def cayley_ball(group: GroupSpec, radius: int, cap: int = DEFAULT_POINT_CAP) -> FiniteMetricSpace:
    """Ball of the given radius around the identity with the restricted word metric."""
    if radius < 0:
        raise InvalidSpecError("radius must be non-negative")
    ball = word_lengths(group, radius, cap)
    group.check(list(ball))
    # d(a, b) = |a^-1 b| needs word lengths up to 2 * radius
    big = word_lengths(group, 2 * radius, max(cap, 1) * 64)
    pts = sorted(ball, key=lambda g: (ball[g], repr(g)))
    rows = tuple(tuple(big[group.mul(group.inv(a), b)] for b in pts) for a in pts)
    return FiniteMetricSpace(tuple(pts), rows, name=f"ball({group.name};{radius})")


def random_connected_graph(n: int, extra_edges: int, rng: random.Random) -> FiniteMetricSpace:
    """Random spanning tree plus ``extra_edges`` random chords, with the graph metric."""
    edges = [(i, rng.randrange(i)) for i in range(1, n)]
    for _ in range(extra_edges):
        a, b = rng.randrange(n), rng.randrange(n)
        if a != b:
            edges.append((a, b))
    return graph_metric(range(n), edges, name=f"random({n})")


def gen_space(kind: str, cap: int = DEFAULT_POINT_CAP, **params) -> FiniteMetricSpace:
    """Dispatch to a generator by name: path, cycle, grid, cayley_ball, dirsum."""
    if kind == "path":
        sp = path(params["n"], cap)
    elif kind == "cycle":
        sp = cycle(params["n"], cap)
    elif kind == "grid":
        sp = grid(params["dims"], cap)
    elif kind == "cayley_ball":
        group = params["group"]
        if isinstance(group, str):
            gname, _, arg = group.partition(":")
            if gname not in GROUPS:
                raise InvalidSpecError(f"unknown group {group!r}")
            group = GROUPS[gname](int(arg or 1))
        sp = cayley_ball(group, params["radius"], cap=cap)
    elif kind == "dirsum":
        sp = dirsum(params["weights"], params["radius"], cap=cap)
    else:
        raise InvalidSpecError(f"unknown space kind {kind!r}")
    if len(sp) > cap:
        raise ResourceCapError(f"{sp.name} has {len(sp)} points, cap is {cap}")
    return sp


# --- entourages ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Entourage:
    """A set of ordered point pairs over a fixed space."""

    space: FiniteMetricSpace
    pairs: frozenset

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    def __le__(self, other: "Entourage") -> bool:
        _same_space(self, other)
        return self.pairs <= other.pairs

    def __len__(self) -> int:
        return len(self.pairs)


def _same_space(e: Entourage, f: Entourage) -> None:
    if e.space != f.space:
        raise InvalidSpecError("entourages live on different spaces")


def entourage(space: FiniteMetricSpace, R: Length, closed: bool = True) -> Entourage:
    if R < 0:
        raise InvalidSpecError("R must be non-negative")
    pts = space.points
    pairs = frozenset(
        (pts[i], pts[j])
        for i in range(len(pts))
        for j in range(len(pts))
        if (space.dist[i][j] <= R if closed else space.dist[i][j] < R)
    )
    return Entourage(space, pairs)


def diagonal(space: FiniteMetricSpace) -> Entourage:
    return Entourage(space, frozenset((p, p) for p in space.points))


def full_square(space: FiniteMetricSpace) -> Entourage:
    return Entourage(space, frozenset(itertools.product(space.points, repeat=2)))


def entourage_compose(e: Entourage, f: Entourage) -> Entourage:
    """E o F = {(x, y) : exists z with (x, z) in E and (z, y) in F}."""
    _same_space(e, f)
    out_f: dict = {}
    for z, y in f.pairs:
        out_f.setdefault(z, []).append(y)
    pairs = frozenset((x, y) for x, z in e.pairs for y in out_f.get(z, ()))
    return Entourage(e.space, pairs)


def entourage_invert(e: Entourage) -> Entourage:
    return Entourage(e.space, frozenset((y, x) for x, y in e.pairs))


# --- JSON -----------------------------------------------------------------------------------


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return obj.numerator if obj.denominator == 1 else f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (tuple, list)):
        return [to_jsonable(x) for x in obj]
    return obj


def from_jsonable(obj: Any) -> Any:
    """Lists become tuples recursively so ids are hashable again."""
    if isinstance(obj, list):
        return tuple(from_jsonable(x) for x in obj)
    return obj


def space_to_dict(space: FiniteMetricSpace) -> dict:
    return {
        "points": [to_jsonable(p) for p in space.points],
        "dist": [[to_jsonable(v) for v in row] for row in space.dist],
    }


def space_from_dict(data: dict) -> FiniteMetricSpace:
    try:
        points = [from_jsonable(p) for p in data["points"]]
        dist = data["dist"]
    except (KeyError, TypeError) as exc:
        raise InvalidSpecError(f"malformed space document: {exc}") from None
    return from_matrix(points, dist, name=data.get("name", ""))


def dump_space(space: FiniteMetricSpace) -> str:
    return json.dumps(space_to_dict(space))


def load_space(text: str) -> FiniteMetricSpace:
    return space_from_dict(json.loads(text))
