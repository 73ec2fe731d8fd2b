"""Finite groupoids with length functions, group actions, and the standard builders."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping

from .errors import InvalidSpecError, PreconditionError, ResourceCapError
from .spaces import (
    DEFAULT_POINT_CAP,
    FiniteMetricSpace,
    GroupSpec,
    Length,
    _exact,
    from_jsonable,
    to_jsonable,
    word_lengths,
)

ALEXANDROV_POINT = "∞"


@dataclass(frozen=True, eq=False)
class FiniteGroupoid:
    """Arrows with source, range, inverse and a composition table.

    ``comp[(g, h)]`` is g∘h, meaningful when src(g) == rng(h). A composable pair
    missing from the table is an undefined product (partial models of infinite groups).
    """

    arrows: tuple
    units: frozenset
    src: Mapping
    rng: Mapping
    comp: Mapping
    inv: Mapping
    by_src: dict = field(init=False, repr=False)
    by_rng: dict = field(init=False, repr=False)

    def __post_init__(self):
        bs: dict = {u: [] for u in self.units}
        br: dict = {u: [] for u in self.units}
        for g in self.arrows:
            bs.setdefault(self.src[g], []).append(g)
            br.setdefault(self.rng[g], []).append(g)
        object.__setattr__(self, "by_src", {u: tuple(v) for u, v in bs.items()})
        object.__setattr__(self, "by_rng", {u: tuple(v) for u, v in br.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteGroupoid):
            return NotImplemented
        return (
            set(self.arrows) == set(other.arrows)
            and self.units == other.units
            and dict(self.src) == dict(other.src)
            and dict(self.rng) == dict(other.rng)
            and dict(self.comp) == dict(other.comp)
            and dict(self.inv) == dict(other.inv)
        )

    __hash__ = None  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self.arrows)

    @property
    def unit_list(self) -> list:
        """Units in arrow order, the canonical ordering used by solvers."""
        return [g for g in self.arrows if g in self.units]

    def composable(self, g, h) -> bool:
        return self.src[g] == self.rng[h]

    def mul(self, g, h):
        """g∘h, or None when undefined in a partial model."""
        if self.src[g] != self.rng[h]:
            raise PreconditionError(f"{g!r} and {h!r} are not composable")
        return self.comp.get((g, h))

    @property
    def is_total(self) -> bool:
        return all((g, h) in self.comp for g in self.arrows for h in self.by_rng[self.src[g]])

    def validate(self) -> list[str]:
        """Groupoid axioms by full enumeration; returns the list of violations."""
        errs = []
        arrows = set(self.arrows)
        if len(arrows) != len(self.arrows):
            errs.append("duplicate arrow ids")
        if not self.units <= arrows:
            errs.append("units must be arrows")
        for u in self.units:
            if self.src[u] != u or self.rng[u] != u or self.inv[u] != u:
                errs.append(f"unit {u!r} is not its own source, range and inverse")
        for g in self.arrows:
            if self.src[g] not in self.units or self.rng[g] not in self.units:
                errs.append(f"{g!r}: source or range is not a unit")
                continue
            gi = self.inv[g]
            if self.inv.get(gi) != g:
                errs.append(f"inv(inv({g!r})) != {g!r}")
            if self.src[gi] != self.rng[g] or self.rng[gi] != self.src[g]:
                errs.append(f"inverse of {g!r} has wrong endpoints")
            if self.comp.get((g, gi), self.rng[g]) != self.rng[g]:
                errs.append(f"{g!r}∘inv != range unit")
            if self.comp.get((gi, g), self.src[g]) != self.src[g]:
                errs.append(f"inv∘{g!r} != source unit")
            if self.comp.get((g, self.src[g]), g) != g or self.comp.get((self.rng[g], g), g) != g:
                errs.append(f"units do not act as identities on {g!r}")
        for (g, h), k in self.comp.items():
            if self.src[g] != self.rng[h]:
                errs.append(f"composition defined on non-composable pair ({g!r},{h!r})")
            elif self.src[k] != self.src[h] or self.rng[k] != self.rng[g]:
                errs.append(f"({g!r})∘({h!r}) has wrong endpoints")
        for (g, h), gh in self.comp.items():
            for k in self.by_rng.get(self.src[h], ()):
                hk = self.comp.get((h, k))
                if hk is None:
                    continue
                left = self.comp.get((gh, k))
                right = self.comp.get((g, hk))
                if left is not None and right is not None and left != right:
                    errs.append(f"associativity fails on ({g!r},{h!r},{k!r})")
        return errs

    def check(self) -> "FiniteGroupoid":
        errs = self.validate()
        if errs:
            raise InvalidSpecError("invalid groupoid: " + "; ".join(errs[:5]))
        return self


@dataclass(frozen=True)
class LengthFunction:
    values: Mapping

    def __call__(self, g) -> Length:
        return self.values[g]

    def validate(self, G: FiniteGroupoid) -> list[str]:
        errs = []
        for g in G.arrows:
            v = self.values.get(g)
            if v is None or v < 0:
                errs.append(f"length of {g!r} missing or negative")
                continue
            if (v == 0) != (g in G.units):
                errs.append(f"length of {g!r} is zero iff unit fails")
            if self.values.get(G.inv[g]) != v:
                errs.append(f"length not symmetric at {g!r}")
        for (g, h), k in G.comp.items():
            if self.values[k] > self.values[g] + self.values[h]:
                errs.append(f"subadditivity fails at ({g!r},{h!r})")
        return errs

    def below(self, G: FiniteGroupoid, R: Length, strict: bool = True) -> frozenset:
        """Arrows with length < R (or <= R)."""
        return frozenset(g for g in G.arrows if (self.values[g] < R if strict else self.values[g] <= R))


# --- groups and actions -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """Elements with a multiplication table; ``None`` entries are products outside a ball."""

    elements: tuple
    table: Mapping
    identity: Hashable
    inverse: Mapping
    length: Mapping
    name: str = ""

    def mul(self, a, b):
        return self.table.get((a, b))

    @property
    def is_total(self) -> bool:
        return all(self.table.get((a, b)) is not None for a in self.elements for b in self.elements)

    @classmethod
    def from_spec(cls, spec: GroupSpec, radius: int | None = None, cap: int = DEFAULT_POINT_CAP) -> "FiniteGroup":
        """Whole finite group (radius None) or the ball of the given word-length radius."""
        if radius is None:
            lengths = {spec.identity: 0}
            frontier = [spec.identity]
            r = 0
            while frontier:
                r += 1
                nxt = []
                for g in frontier:
                    for s in spec.generators:
                        h = spec.mul(g, s)
                        if h not in lengths:
                            lengths[h] = r
                            nxt.append(h)
                            if len(lengths) > cap:
                                raise ResourceCapError(f"{spec.name} has more than {cap} elements")
                frontier = nxt
        else:
            lengths = word_lengths(spec, radius, cap)
        elems = tuple(sorted(lengths, key=lambda g: (lengths[g], repr(g))))
        table = {}
        for a in elems:
            for b in elems:
                c = spec.mul(a, b)
                table[(a, b)] = c if c in lengths else None
        inverse = {a: spec.inv(a) for a in elems}
        name = spec.name if radius is None else f"ball({spec.name};{radius})"
        return cls(elems, table, spec.identity, inverse, dict(lengths), name)

    def validate(self) -> list[str]:
        errs = []
        e = self.identity
        for a in self.elements:
            if self.mul(a, e) != a or self.mul(e, a) != a:
                errs.append(f"identity law fails at {a!r}")
            if self.inverse.get(a) not in self.length or self.mul(a, self.inverse[a]) != e:
                errs.append(f"inverse law fails at {a!r}")
            if (self.length[a] == 0) != (a == e):
                errs.append(f"length zero iff identity fails at {a!r}")
            if self.length[self.inverse[a]] != self.length[a]:
                errs.append(f"length not symmetric at {a!r}")
        for a in self.elements:
            for b in self.elements:
                ab = self.mul(a, b)
                if ab is None:
                    continue
                if self.length[ab] > self.length[a] + self.length[b]:
                    errs.append(f"length not subadditive at ({a!r},{b!r})")
                for c in self.elements:
                    bc = self.mul(b, c)
                    if bc is None:
                        continue
                    l, r = self.mul(ab, c), self.mul(a, bc)
                    if l is not None and r is not None and l != r:
                        errs.append(f"associativity fails at ({a!r},{b!r},{c!r})")
        return errs


@dataclass(frozen=True, eq=False)
class GroupAction:
    group: FiniteGroup
    X: tuple
    act: Mapping  # (γ, x) -> γx

    def __call__(self, g, x):
        return self.act[(g, x)]

    def validate(self) -> list[str]:
        errs = []
        Xs = set(self.X)
        for g in self.group.elements:
            for x in self.X:
                if self.act.get((g, x)) not in Xs:
                    errs.append(f"action undefined or leaves X at ({g!r},{x!r})")
        if errs:
            return errs
        for x in self.X:
            if self.act[(self.group.identity, x)] != x:
                errs.append(f"identity moves {x!r}")
        for a in self.group.elements:
            for b in self.group.elements:
                ab = self.group.mul(a, b)
                if ab is None:
                    continue
                for x in self.X:
                    if self.act[(ab, x)] != self.act[(a, self.act[(b, x)])]:
                        errs.append(f"compatibility fails at ({a!r},{b!r},{x!r})")
        return errs

    def check(self) -> "GroupAction":
        errs = self.validate()
        if errs:
            raise InvalidSpecError("invalid action: " + "; ".join(errs[:5]))
        return self


def regular_action(group: FiniteGroup) -> GroupAction:
    """Left multiplication of a finite group on itself."""
    act = {(a, b): group.mul(a, b) for a in group.elements for b in group.elements}
    return GroupAction(group, group.elements, act).check()


def trivial_action(group: FiniteGroup, X: Iterable[Hashable]) -> GroupAction:
    X = tuple(X)
    return GroupAction(group, X, {(g, x): x for g in group.elements for x in X}).check()


def rotation_action(n: int, m: int | None = None) -> GroupAction:
    """Z/n acting on Z/m (m divides n) by rotation; m defaults to n."""
    from .spaces import cyclic_group

    m = n if m is None else m
    if m < 1 or n % m:
        raise InvalidSpecError("rotation_action needs m dividing n")
    G = FiniteGroup.from_spec(cyclic_group(n))
    act = {(g, x): (g + x) % m for g in G.elements for x in range(m)}
    return GroupAction(G, tuple(range(m)), act).check()


def dihedral_action(n: int) -> GroupAction:
    """The dihedral group of order 2n on the vertices of an n-gon."""
    from .spaces import dihedral_group

    G = FiniteGroup.from_spec(dihedral_group(n))
    act = {((r, f), x): ((-x if f else x) + r) % n for (r, f) in G.elements for x in range(n)}
    return GroupAction(G, tuple(range(n)), act).check()


def direct_product(a: GroupSpec, b: GroupSpec) -> GroupSpec:
    ea, eb = a.identity, b.identity
    gens = tuple((s, eb) for s in a.generators) + tuple((ea, s) for s in b.generators)
    return GroupSpec(
        f"{a.name}x{b.name}",
        (ea, eb),
        gens,
        lambda x, y: (a.mul(x[0], y[0]), b.mul(x[1], y[1])),
        lambda x: (a.inv(x[0]), b.inv(x[1])),
    )


# --- builders -----------------------------------------------------------------------------


def build_pair_groupoid(space: FiniteMetricSpace) -> tuple[FiniteGroupoid, LengthFunction]:
    """X × X with r(x,y)=x, s(x,y)=y and length d(x,y); the unit over x is (x, x)."""
    pts = space.points
    arrows = tuple((x, y) for x in pts for y in pts)
    units = frozenset((x, x) for x in pts)
    src = {(x, y): (y, y) for x, y in arrows}
    rng = {(x, y): (x, x) for x, y in arrows}
    inv = {(x, y): (y, x) for x, y in arrows}
    comp = {((x, y), (y, z)): (x, z) for x in pts for y in pts for z in pts}
    G = FiniteGroupoid(arrows, units, src, rng, comp, inv)
    ell = LengthFunction({(x, y): space.d(x, y) for x, y in arrows})
    return G, ell


def build_transformation_groupoid(action: GroupAction) -> tuple[FiniteGroupoid, LengthFunction]:
    """Arrows (γx, γ, x); the unit over x is (x, e, x); length is the word length of γ."""
    action.check()
    grp = action.group
    e = grp.identity
    arrows = tuple((action(g, x), g, x) for g in grp.elements for x in action.X)
    units = frozenset((x, e, x) for x in action.X)
    src = {a: (a[2], e, a[2]) for a in arrows}
    rng = {a: (a[0], e, a[0]) for a in arrows}
    inv = {(y, g, x): (x, grp.inverse[g], y) for y, g, x in arrows}
    by_rng: dict = {}
    for a in arrows:
        by_rng.setdefault(a[0], []).append(a)
    comp = {}
    for a in arrows:  # a = (h y, h, y) composed after b = (y, g, x)
        y = a[2]
        for b in by_rng[y]:
            hg = grp.mul(a[1], b[1])
            if hg is not None:
                comp[(a, b)] = (a[0], hg, b[2])
    G = FiniteGroupoid(arrows, units, src, rng, comp, inv)
    ell = LengthFunction({a: grp.length[a[1]] for a in arrows})
    return G, ell


def units_only(points: Iterable[Hashable]) -> tuple[FiniteGroupoid, LengthFunction]:
    pts = tuple(points)
    idm = {p: p for p in pts}
    G = FiniteGroupoid(pts, frozenset(pts), idm, idm, {(p, p): p for p in pts}, idm)
    return G, LengthFunction({p: 0 for p in pts})


def alexandrov(G: FiniteGroupoid) -> FiniteGroupoid:
    """Add one isolated unit; no new compositions besides its own identity."""
    inf = ALEXANDROV_POINT
    if inf in G.units or inf in set(G.arrows):
        raise InvalidSpecError("groupoid already has an Alexandrov point")
    return FiniteGroupoid(
        G.arrows + (inf,),
        G.units | {inf},
        {**G.src, inf: inf},
        {**G.rng, inf: inf},
        {**G.comp, (inf, inf): inf},
        {**G.inv, inf: inf},
    )


def alexandrov_length(ell: LengthFunction) -> LengthFunction:
    return LengthFunction({**ell.values, ALEXANDROV_POINT: 0})


def restrict(G: FiniteGroupoid, arrows: Iterable) -> FiniteGroupoid:
    """The subgroupoid on a set of arrows closed under composition and inverse."""
    A = frozenset(arrows)
    order = tuple(g for g in G.arrows if g in A)
    return FiniteGroupoid(
        order,
        frozenset(g for g in order if g in G.units),
        {g: G.src[g] for g in order},
        {g: G.rng[g] for g in order},
        {(g, h): k for (g, h), k in G.comp.items() if g in A and h in A},
        {g: G.inv[g] for g in order},
    )


# --- closure operations -------------------------------------------------------------------


class UndefinedProduct(PreconditionError):
    """A product left the partial model while closing under composition."""


def closure(
    G: FiniteGroupoid,
    S: Iterable,
    length: LengthFunction | None = None,
    budget: Length | None = None,
) -> tuple[frozenset, bool]:
    """Subgroupoid generated by S, with an optional early exit.

    Returns (arrows, within_budget). ``within_budget`` is False as soon as an arrow
    longer than ``budget`` or an undefined product is met; the arrow set is then partial.
    """
    S = frozenset(S)
    if not S:
        return frozenset(), True
    gens = S | {G.inv[g] for g in S}
    out = set(gens) | {G.src[g] for g in S} | {G.rng[g] for g in S}
    if length is not None and budget is not None:
        if any(length(g) > budget for g in out):
            return frozenset(out), False
    gens_by_src: dict = {}
    for s in gens:
        gens_by_src.setdefault(G.src[s], []).append(s)
    queue = deque(out)
    while queue:
        t = queue.popleft()
        for s in gens_by_src.get(G.rng[t], ()):
            st = G.comp.get((s, t))
            if st is None:
                return frozenset(out), False
            if st not in out:
                if length is not None and budget is not None and length(st) > budget:
                    out.add(st)
                    return frozenset(out), False
                out.add(st)
                queue.append(st)
    return frozenset(out), True


def generate_subgroupoid(G: FiniteGroupoid, S: Iterable) -> frozenset:
    """Smallest arrow set containing S and its end units, closed under inverse and composition."""
    arrows, ok = closure(G, S)
    if not ok:
        raise UndefinedProduct("a product of generators is undefined in this partial model")
    return arrows


def arrow_product_set(G: FiniteGroupoid, A: Iterable, B: Iterable) -> frozenset:
    """{ab : a in A, b in B, s(a) = r(b)}; undefined products are skipped."""
    B_by_rng: dict = {}
    for b in B:
        B_by_rng.setdefault(G.rng[b], []).append(b)
    out = set()
    for a in A:
        for b in B_by_rng.get(G.src[a], ()):
            ab = G.comp.get((a, b))
            if ab is not None:
                out.add(ab)
    return frozenset(out)


def power(G: FiniteGroupoid, A: Iterable, n: int) -> frozenset:
    """A^n, all composable products of n arrows of A; A^0 is the unit space."""
    if n < 0:
        raise InvalidSpecError("power needs n >= 0")
    A = frozenset(A)
    if n == 0:
        return G.units
    # when A holds the end units of its arrows the powers increase, so a repeat is a fixpoint
    monotone = all(G.src[g] in A and G.rng[g] in A for g in A)
    out = A
    for _ in range(n - 1):
        nxt = arrow_product_set(G, A, out)
        if monotone and nxt == out:
            break
        out = nxt
    return out


def s_fiber(G: FiniteGroupoid, x) -> tuple:
    if x not in G.units:
        raise InvalidSpecError(f"{x!r} is not a unit")
    return G.by_src.get(x, ())


def r_fiber(G: FiniteGroupoid, x) -> tuple:
    if x not in G.units:
        raise InvalidSpecError(f"{x!r} is not a unit")
    return G.by_rng.get(x, ())


# --- JSON ---------------------------------------------------------------------------------


def groupoid_to_dict(G: FiniteGroupoid, ell: LengthFunction | None = None) -> dict:
    idx = {g: i for i, g in enumerate(G.arrows)}
    doc = {
        "arrows": [to_jsonable(g) for g in G.arrows],
        "units": sorted(idx[u] for u in G.units),
        "src": [idx[G.src[g]] for g in G.arrows],
        "rng": [idx[G.rng[g]] for g in G.arrows],
        "inv": [idx[G.inv[g]] for g in G.arrows],
        "comp": sorted([idx[g], idx[h], idx[k]] for (g, h), k in G.comp.items()),
    }
    if ell is not None:
        doc["length"] = [to_jsonable(ell(g)) for g in G.arrows]
    return doc


def groupoid_from_dict(doc: dict) -> tuple[FiniteGroupoid, LengthFunction | None]:
    try:
        arrows = tuple(from_jsonable(a) for a in doc["arrows"])
        at = lambda i: arrows[i]  # noqa: E731
        G = FiniteGroupoid(
            arrows,
            frozenset(at(i) for i in doc["units"]),
            {g: at(i) for g, i in zip(arrows, doc["src"])},
            {g: at(i) for g, i in zip(arrows, doc["rng"])},
            {(at(i), at(j)): at(k) for i, j, k in doc["comp"]},
            {g: at(i) for g, i in zip(arrows, doc["inv"])},
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise InvalidSpecError(f"malformed groupoid document: {exc}") from None
    ell = None
    if "length" in doc:
        ell = LengthFunction({g: _exact(v) for g, v in zip(arrows, doc["length"])})
    return G.check(), ell


def dump_groupoid(G: FiniteGroupoid, ell: LengthFunction | None = None) -> str:
    return json.dumps(groupoid_to_dict(G, ell))


def load_groupoid(text: str) -> tuple[FiniteGroupoid, LengthFunction | None]:
    return groupoid_from_dict(json.loads(text))


def as_fraction(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)
