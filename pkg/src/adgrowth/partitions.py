"""Nested unit families and the partitions of unity built from them.

The p-power variant keeps exact rational ψ values and exact weights φ^p; the
normalised φ themselves are floats. The flat variant is exact throughout.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Sequence

from .errors import AdGrowthError, InvalidSpecError, PreconditionError, VerificationError
from .groupoids import FiniteGroupoid, LengthFunction, closure
from .growth import DimensionCurve
from .spaces import Length, to_jsonable


class ParameterError(AdGrowthError):
    """No admissible N was found for the requested parameters."""


# --- exact helpers ------------------------------------------------------------------------


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


def iroot_floor(n: int, k: int) -> int:
    """Largest r with r**k <= n."""
    if n < 0 or k < 1:
        raise ValueError("iroot_floor needs n >= 0, k >= 1")
    if n < 2:
        return n
    r = int(round(n ** (1.0 / k))) if n.bit_length() < 1000 else 1 << (n.bit_length() // k + 1)
    # Newton from above, then correct
    r = max(r, 1)
    while r**k > n:
        r = ((k - 1) * r + n // r ** (k - 1)) // k
    while (r + 1) ** k <= n:
        r += 1
    return r


def power_round(x, alpha, rounding: str = "ceil") -> int:
    """⌈x^α⌉ or ⌊x^α⌋ exactly, for rational x >= 0 and rational α."""
    x, a = as_fraction(x), as_fraction(alpha)
    if x < 0:
        raise ValueError("x must be non-negative")
    num, den = a.numerator, a.denominator
    if num < 0:
        raise ValueError("alpha must be non-negative")
    # x^α = (x^num)^(1/den); for x = P/Q, floor is the largest k with k^den * Q^num <= P^num
    P, Q = x.numerator**num, x.denominator**num
    k = iroot_floor(P // Q, den)
    while (k + 1) ** den * Q <= P:
        k += 1
    while k > 0 and k**den * Q > P:
        k -= 1
    exact = k**den * Q == P
    if rounding == "floor":
        return k
    if rounding == "ceil":
        return k if exact else k + 1
    raise InvalidSpecError(f"unknown rounding {rounding!r}")


def growth_inequality_holds(F: int, p: int, N: int, eps) -> bool:
    """Exact test of (2p(F+1) + 2p(F+1)^(1/p+1)) / N < ε."""
    eps = as_fraction(eps)
    a = F + 1
    rest = eps * N - 2 * p * a  # need 2p a^((p+1)/p) < rest
    if rest <= 0:
        return False
    return (2 * p) ** p * a ** (p + 1) < rest**p


def growth_inequality_lhs(F: int, p: int, N: int) -> float:
    a = F + 1
    return (2 * p * a + 2 * p * a ** (1 / p + 1)) / N


# --- parameters ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Parameters:
    p: int
    c: float | None
    N: int
    F: int  # f(N R + 1), the number of indices minus one
    lhs: float
    mode: str


def p_for(alpha: float) -> int:
    a = as_fraction(alpha)
    if not 0 < a < 1:
        raise InvalidSpecError("alpha must lie in (0, 1)")
    return math.floor(a / (1 - a)) + 1


def c_lower_bound(alpha: float, R, eps: float, p: int | None = None) -> float:
    """The lower bound on c from the explicit two-term maximum (natural logarithms)."""
    p = p_for(alpha) if p is None else p
    lr = math.log(float(R) + 1)
    t1 = (alpha * (p + 1) * math.log(2) - p * math.log(eps / (4 * p))) / ((p - alpha * (p + 1)) * lr)
    t2 = (alpha * math.log(2) - math.log(eps / (8 * p))) / ((1 - alpha) * lr)
    return max(t1, t2)


def _as_callable(f) -> Callable:
    if isinstance(f, DimensionCurve):
        table = f.as_dict()

        def ev(x):
            if x not in table:
                raise PreconditionError(f"curve is not sampled at {x}")
            v = table[x]
            if v is None:
                raise PreconditionError(f"curve is infeasible at {x}")
            return v

        return ev
    return f


def choose_parameters(
    alpha: float,
    R: Length,
    eps: float,
    f: Callable | DimensionCurve | None = None,
    rounding: str = "ceil",
    margin: float = 1e-9,
    search_cap: int = 10**6,
    p: int | None = None,
) -> Parameters:
    """p from α, then N with the growth inequality holding strictly.

    With ``f`` omitted the growth function is x ↦ x^α rounded per ``rounding`` and N
    comes from the explicit c bound; otherwise N is the least value up to
    ``search_cap`` that works. The returned N is always checked exactly.
    """
    if eps <= 0:
        raise InvalidSpecError("eps must be positive")
    if R <= 0:
        raise InvalidSpecError("R must be positive")
    p = p_for(alpha) if p is None else p
    Rf = as_fraction(R)
    if f is None:
        c = c_lower_bound(float(alpha), float(R), float(eps), p) * (1 + margin) + margin
        N = math.ceil((float(R) + 1) ** c)
        F = power_round(N * Rf + 1, alpha, rounding)
        if not growth_inequality_holds(F, p, N, eps):
            raise ParameterError(
                f"formula N={N} (c={c:.6g}) violates the inequality: lhs={growth_inequality_lhs(F, p, N):.6g} >= {eps}"
            )
        return Parameters(p, c, N, F, growth_inequality_lhs(F, p, N), f"formula-{rounding}")
    fn = _as_callable(f)
    for N in range(1, search_cap + 1):
        F = int(fn(N * Rf + 1 if (N * Rf + 1).denominator != 1 else int(N * Rf + 1)))
        if growth_inequality_holds(F, p, N, eps):
            return Parameters(p, None, N, F, growth_inequality_lhs(F, p, N), "search")
    raise ParameterError(f"no N <= {search_cap} satisfies the inequality")


# --- nested families ----------------------------------------------------------------------


def _check_generators(G: FiniteGroupoid, K: frozenset) -> None:
    if not K <= set(G.arrows):
        raise InvalidSpecError("K must consist of arrows of G")
    if any(G.inv[g] not in K for g in K):
        raise PreconditionError("K must be symmetric")
    if not G.units <= K:
        raise PreconditionError("K must contain every unit")


def _k_graph(G: FiniteGroupoid, K: frozenset) -> dict:
    """Unit adjacency: x -> s(g) for g in K with r(g) = x."""
    adj: dict = {u: set() for u in G.units}
    for g in K:
        adj[G.rng[g]].add(G.src[g])
    return adj


def _distance_outside(adj: dict, V: frozenset, units: Iterable) -> dict:
    """Graph distance from each unit to the nearest unit outside V (None if unreachable)."""
    dist: dict = {}
    queue: deque = deque()
    for u in units:
        if u not in V:
            dist[u] = 0
            queue.append(u)
    while queue:  # K is symmetric, so BFS from the outside measures the same distances
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


@dataclass
class NestedFamilies:
    """Chains U_i^(0) ⊆ … ⊆ U_i^(N), stored as first levels M_i(x).

    ``first[i][x]`` is the least n with x in U_i^(n); units outside V_i are absent.
    """

    N: int
    K: frozenset
    units: tuple
    base: tuple  # V_i
    first: list
    report: dict = field(default_factory=dict)

    def level(self, i: int, n: int) -> frozenset:
        return frozenset(x for x, m in self.first[i].items() if m <= n)

    @property
    def size(self) -> int:
        return len(self.base)


def nested_families(
    G: FiniteGroupoid,
    ell: LengthFunction,
    K: Iterable,
    N: int,
    base_cover: Sequence[Iterable[Hashable]],
    B: Length | float | None = None,
) -> NestedFamilies:
    """U_i^(n) = {x in V_i : s(K^(N-n) ∩ r^-1(x)) ⊆ V_i}, then verify the chain properties.

    Raises VerificationError when the base cover fails to produce a covering first level
    or any other property breaks.
    """
    K = frozenset(K)
    _check_generators(G, K)
    if N < 1:
        raise InvalidSpecError("N must be >= 1")
    units = tuple(G.unit_list)
    base = tuple(frozenset(V) for V in base_cover)
    if not base:
        raise InvalidSpecError("base cover is empty")
    for V in base:
        if not V <= G.units:
            raise InvalidSpecError("base cover sets must consist of units")
    adj = _k_graph(G, K)
    first = []
    for V in base:
        d = _distance_outside(adj, V, units)
        first.append({x: (0 if x not in d else max(0, N - d[x] + 1)) for x in units if x in V})
    nf = NestedFamilies(N, K, units, base, first)
    nf.report = verify_nested(G, ell, nf, B)
    if not nf.report["passed"]:
        raise VerificationError("nested families fail: " + "; ".join(nf.report["failures"][:5]), nf.report)
    return nf


def verify_nested(G: FiniteGroupoid, ell: LengthFunction, nf: NestedFamilies, B=None) -> dict:
    failures = []
    uncovered = [x for x in nf.units if not any(f.get(x) == 0 for f in nf.first)]
    if uncovered:
        failures.append(f"(1) first levels miss units {uncovered[:5]!r}")
    for i, f in enumerate(nf.first):
        if any(not (0 <= m <= nf.N) for m in f.values()):
            failures.append(f"(2) index {i}: level outside 0..N")
    # (3): r(g) in U^(n) implies s(g) in U^(n+1) for n < N, i.e. M(s) <= M(r) + 1
    for i, f in enumerate(nf.first):
        for g in nf.K:
            mr = f.get(G.rng[g])
            if mr is None or mr >= nf.N:
                continue
            ms = f.get(G.src[g])
            if ms is None or ms > mr + 1:
                failures.append(f"(3) index {i}: arrow {g!r} escapes the next level")
                break
    if B is not None:
        for i, V in enumerate(nf.base):
            S = [g for g in nf.K if G.src[g] in V and G.rng[g] in V]
            if not closure(G, S, ell, B)[1]:
                failures.append(f"(4) index {i}: generated subgroupoid exceeds length {B}")
    return {"passed": not failures, "failures": failures}


# --- partitions of unity ------------------------------------------------------------------


@dataclass
class PartitionOfUnity:
    p: int
    mode: str  # "p-power" | "flat"
    N: int
    units: tuple
    supports: tuple
    psi: list  # exact Fractions
    phi: list  # floats (p-power) or Fractions (flat)
    weights: list  # exact φ^p (p-power) or φ (flat)

    def value(self, i: int, x) -> float:
        return self.phi[i].get(x, 0)


def build_pou(nf: NestedFamilies, p: int = 1, mode: str = "p-power") -> PartitionOfUnity:
    """ψ_i = (N - M_i)/N from indicator Urysohn functions, then normalise."""
    if mode not in ("p-power", "flat"):
        raise InvalidSpecError(f"unknown mode {mode!r}")
    if p < 1:
        raise InvalidSpecError("p must be >= 1")
    N = nf.N
    psi = [{x: Fraction(N - m, N) for x, m in f.items() if m < N} for f in nf.first]
    phi: list = [dict() for _ in psi]
    weights: list = [dict() for _ in psi]
    for x in nf.units:
        vals = [ps.get(x, Fraction(0)) for ps in psi]
        if mode == "flat":
            total = sum(vals)
            if total == 0:
                raise VerificationError(f"ψ vanishes at {x!r}; the first levels do not cover it")
            for i, v in enumerate(vals):
                if v:
                    phi[i][x] = weights[i][x] = v / total
        else:
            total = sum(v**p for v in vals)
            if total == 0:
                raise VerificationError(f"ψ vanishes at {x!r}; the first levels do not cover it")
            root = float(total) ** (1.0 / p)
            for i, v in enumerate(vals):
                if v:
                    phi[i][x] = float(v) / root
                    weights[i][x] = v**p / total
    return PartitionOfUnity(p, mode, N, nf.units, nf.base, psi, phi, weights)


@dataclass
class PouReport:
    passed: bool
    eps: float
    max_psi_diff: Fraction
    psi_bound: Fraction
    max_defect: float  # p·Σ|Δφ| (p-power) or max per-index |Δφ| (flat)
    max_norm_error: float
    max_index_diff: float
    index_bound: float | None
    failures: list

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "eps": self.eps,
            "max_psi_diff": str(self.max_psi_diff),
            "psi_bound": str(self.psi_bound),
            "max_defect": self.max_defect,
            "max_norm_error": self.max_norm_error,
            "max_index_diff": self.max_index_diff,
            "index_bound": self.index_bound,
            "failures": self.failures,
        }


def verify_pou(
    G: FiniteGroupoid,
    ell: LengthFunction,
    K: Iterable,
    pou: PartitionOfUnity,
    eps: float,
    norm_tol: float = 1e-9,
) -> PouReport:
    """Check the ψ step bound, the variation bound, normalisation and supports over every g in K."""
    K = frozenset(K)
    failures: list[str] = []
    N = pou.N
    psi_bound = Fraction(2, N)
    zero = Fraction(0)
    max_psi = zero
    max_defect = 0.0
    max_index = 0.0
    n_idx = len(pou.psi)
    index_bound = (2 + 2 * n_idx ** (1 / pou.p)) / N if pou.mode == "p-power" else None
    eps_exact = as_fraction(eps)

    for g in sorted(K, key=repr):
        r, s = G.rng[g], G.src[g]
        total = 0.0
        for i in range(n_idx):
            dpsi = abs(pou.psi[i].get(r, zero) - pou.psi[i].get(s, zero))
            max_psi = max(max_psi, dpsi)
            dphi = abs(pou.phi[i].get(r, 0) - pou.phi[i].get(s, 0))
            max_index = max(max_index, float(dphi))
            total += float(dphi)
            if pou.mode == "flat" and not dphi < eps_exact:
                failures.append(f"flat variation {float(dphi):.3g} >= {eps} at {g!r}, index {i}")
        if pou.mode == "p-power":
            max_defect = max(max_defect, pou.p * total)
        else:
            max_defect = max_index
    if max_psi > psi_bound:
        failures.append(f"ψ step {max_psi} exceeds 2/N = {psi_bound}")
    if pou.mode == "p-power" and not max_defect < eps:
        failures.append(f"p·Σ|Δφ| reaches {max_defect:.6g} >= {eps}")
    if index_bound is not None and max_index > index_bound * (1 + 1e-12):
        failures.append(f"per-index variation {max_index:.3g} exceeds {index_bound:.3g}")

    max_norm = 0.0
    ends = {G.rng[g] for g in K} | {G.src[g] for g in K}
    for x in pou.units:
        if pou.mode == "p-power":
            err = abs(sum(ph.get(x, 0.0) ** pou.p for ph in pou.phi) - 1)
            exact = sum(w.get(x, zero) for w in pou.weights)
            if exact != 1:
                failures.append(f"exact Σφ^p = {exact} at {x!r}")
        else:
            tot = sum(ph.get(x, zero) for ph in pou.phi)
            err = float(abs(tot - 1)) if x in ends else float(max(tot - 1, 0))
            if (x in ends and tot != 1) or tot > 1:
                failures.append(f"flat sum {tot} at {x!r}")
        max_norm = max(max_norm, err)
    if max_norm > norm_tol:
        failures.append(f"normalisation error {max_norm:.3g} > {norm_tol}")
    for i, ph in enumerate(pou.phi):
        outside = [x for x, v in ph.items() if v and x not in pou.supports[i]]
        if outside:
            failures.append(f"φ_{i} is non-zero outside its support at {outside[0]!r}")
    return PouReport(
        not failures, eps, max_psi, psi_bound, max_defect, max_norm, max_index, index_bound, failures
    )


def pou_to_dict(pou: PartitionOfUnity) -> dict:
    return {
        "p": pou.p,
        "mode": pou.mode,
        "N": str(pou.N),
        "indices": [
            {
                "support": [to_jsonable(x) for x in pou.units if x in pou.supports[i]],
                "phi": [[to_jsonable(x), to_jsonable(v) if isinstance(v, Fraction) else v] for x, v in sorted(
                    pou.phi[i].items(), key=lambda kv: pou.units.index(kv[0]))],
            }
            for i in range(len(pou.phi))
        ],
    }


def dump_pou(pou: PartitionOfUnity) -> str:
    return json.dumps(pou_to_dict(pou))
