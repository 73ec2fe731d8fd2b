"""Amenability witnesses: the three-condition checker, exact fiber witnesses, and assembly pipelines.

Fibers are source fibers: 𝒢_x = {g : s(g) = x}, which is what makes gk composable
for g in 𝒢_{r(k)}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .dynamics import UNBOUNDED, DadQuery, dad_groupoid
from .errors import AdGrowthError, InvalidSpecError, StageError
from .groupoids import (
    FiniteGroupoid,
    LengthFunction,
    generate_subgroupoid,
    power,
    restrict,
    s_fiber,
)
from .partitions import (
    PartitionOfUnity,
    as_fraction,
    build_pou,
    choose_parameters,
    nested_families,
    verify_pou,
)
from .spaces import Length, to_jsonable

FIBER_CONVENTION = "source fibers: G_x = {g : s(g) = x}"


@dataclass
class AmenabilityReport:
    passed: bool
    eps: object
    max_fiber_sum: object  # condition (1) needs this <= 1
    max_mass_defect: object  # condition (2): max |1 - fiber sum at r(k)|
    max_translation_defect: object  # condition (3): max Σ|μ(g) - μ(gk)|
    failures: list
    convention: str = FIBER_CONVENTION

    @property
    def slacks(self) -> tuple:
        return (self.max_mass_defect, self.max_translation_defect)

    def as_dict(self) -> dict:
        f = lambda v: to_jsonable(v) if isinstance(v, Fraction) else v  # noqa: E731
        return {
            "passed": self.passed,
            "convention": self.convention,
            "eps": f(self.eps),
            "max_fiber_sum": f(self.max_fiber_sum),
            "max_mass_defect": f(self.max_mass_defect),
            "max_translation_defect": f(self.max_translation_defect),
            "failures": self.failures,
        }


@dataclass
class AmenabilityWitness:
    mu: dict
    provenance: str  # exact-fiber | assembled-finite-dad | assembled-growth | user
    report: AmenabilityReport | None = None

    @property
    def support(self) -> frozenset:
        return frozenset(g for g, v in self.mu.items() if v)

    def __call__(self, g):
        return self.mu.get(g, 0)


def check_amenability(
    G: FiniteGroupoid,
    mu: Mapping | AmenabilityWitness,
    K: Iterable,
    eps,
    tol=0,
) -> AmenabilityReport:
    """Fiber sums at most 1, near 1 over r(K), and near invariance under right translation by K.

    Arithmetic follows the inputs: Fractions stay exact. The strict inequalities fail
    closed, so a defect exactly equal to ε is a failure.
    """
    if isinstance(mu, AmenabilityWitness):
        mu = mu.mu
    K = frozenset(K)
    if not K <= set(G.arrows):
        raise InvalidSpecError("K must consist of arrows of G")
    for g, v in mu.items():
        if not 0 <= v <= 1:
            raise InvalidSpecError(f"μ({g!r}) = {v} lies outside [0, 1]")
    failures = []
    fiber_sum = {x: sum((mu.get(g, 0) for g in s_fiber(G, x)), Fraction(0)) for x in G.units}
    max_sum = max(fiber_sum.values(), default=Fraction(0))
    if max_sum > 1 + tol:
        failures.append(f"(1) a fiber sum reaches {max_sum}")
    mass = Fraction(0)
    trans = Fraction(0)
    for k in sorted(K, key=repr):
        x = G.rng[k]
        d2 = abs(1 - fiber_sum[x])
        mass = max(mass, d2)
        d3 = Fraction(0)
        for g in s_fiber(G, x):
            gk = G.comp.get((g, k))
            if gk is None:
                failures.append(f"(3) product {g!r}·{k!r} is undefined")
                continue
            d3 += abs(mu.get(g, 0) - mu.get(gk, 0))
        trans = max(trans, d3)
    if not mass < eps:
        failures.append(f"(2) mass defect {mass} is not < {eps}")
    if not trans < eps:
        failures.append(f"(3) translation defect {trans} is not < {eps}")
    return AmenabilityReport(not failures, eps, max_sum, mass, trans, failures)


def exact_witness(H: FiniteGroupoid) -> AmenabilityWitness:
    """μ(g) = 1/|H_{s(g)}|: uniform on each source fiber, exactly invariant."""
    sizes = {x: len(s_fiber(H, x)) for x in H.units}
    return AmenabilityWitness({g: Fraction(1, sizes[H.src[g]]) for g in H.arrows}, "exact-fiber")


def assemble_witness(
    G: FiniteGroupoid,
    ell: LengthFunction,
    K: Iterable,
    cover: Sequence[Iterable],
    pou: PartitionOfUnity,
    subwitnesses: Sequence[AmenabilityWitness],
    mode: str,
) -> AmenabilityWitness:
    """μ(g) = Σ_i w_i(s(g)) μ_i(g), with w_i = φ_i (flat, finite-dad mode) or φ_i^p (p-power, growth mode)."""
    expected = {"finite-dad": "flat", "growth": "p-power"}
    if mode not in expected:
        raise InvalidSpecError(f"unknown assembly mode {mode!r}")
    if pou.mode != expected[mode]:
        raise InvalidSpecError(f"mode {mode} needs a {expected[mode]} partition, got {pou.mode}")
    cover = [frozenset(U) for U in cover]
    if len(cover) != len(subwitnesses) or len(cover) != len(pou.weights):
        raise InvalidSpecError("cover, partition and sub-witnesses must have matching lengths")
    K = frozenset(K)
    for i, (U, w) in enumerate(zip(cover, subwitnesses)):
        Gi = generate_subgroupoid(G, [k for k in K if G.src[k] in U and G.rng[k] in U])
        outside = [g for g in w.support if g not in Gi]
        if outside:
            raise InvalidSpecError(f"sub-witness {i} is supported outside its subgroupoid at {outside[0]!r}")
    mu: dict = {}
    for g in G.arrows:
        x = G.src[g]
        v = sum((pou.weights[i].get(x, 0) * w(g) for i, w in enumerate(subwitnesses)), Fraction(0))
        mu[g] = v
    return AmenabilityWitness(mu, f"assembled-{mode}")


# --- pipeline -----------------------------------------------------------------------------


@dataclass
class PipelineResult:
    witness: AmenabilityWitness
    report: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.report.get("passed"))


def finite_mode_N(d: int, eps) -> int:
    """Layers for the flat partition: per-index variation is at most (2d+4)/N, so N > (2d+4)(d+2)/ε."""
    eps_i = as_fraction(eps) / (d + 2)
    return int((2 * d + 4) / eps_i) + 1


@dataclass
class PartitionStage:
    K: frozenset
    nested: object
    pou: PartitionOfUnity
    report: dict


def _stage(name, fn):
    try:
        return fn()
    except StageError:
        raise
    except AdGrowthError as exc:
        raise StageError(name, str(exc)) from exc


def pipeline_partition(
    G: FiniteGroupoid,
    ell: LengthFunction,
    R: Length,
    eps,
    alpha: float | None = None,
    m_max: int | None = None,
    B: Length | float = UNBOUNDED,
) -> PartitionStage:
    """Parameters, base cover at K^(N+1) with the orbit condition, nested families, verified partition.

    With ``alpha`` the p-power route runs at ε/2; without it the flat route runs with
    d = m_max (default 4) and per-index budget ε/(d+2).
    """
    eps_f = as_fraction(eps)
    if eps_f <= 0 or R <= 0:
        raise InvalidSpecError("eps and R must be positive")
    report: dict = {"mode": "growth" if alpha is not None else "finite-dad", "convention": FIBER_CONVENTION}
    K = ell.below(G, R, strict=True)
    if alpha is not None:
        params = _stage("parameters", lambda: choose_parameters(alpha, R, eps_f / 2))
        p, N = params.p, params.N
        ceiling = params.F if m_max is None else min(params.F, m_max)
        pou_eps = eps_f / 2
        report["parameters"] = {"p": p, "c": params.c, "N": str(N), "f(NR+1)": str(params.F)}
        pou_mode = "p-power"
    else:
        d = 4 if m_max is None else m_max
        p, N = 1, finite_mode_N(d, eps_f)
        ceiling = d
        pou_eps = eps_f / (d + 2)
        report["parameters"] = {"d": d, "N": N, "eps_index": str(pou_eps)}
        pou_mode = "flat"

    K_big = _stage("enlarge", lambda: power(G, K, N + 1))
    dad = _stage("dad", lambda: dad_groupoid(G, ell, DadQuery(K_big, B, ceiling, orbit_condition=True)))
    if dad.value is None:
        raise StageError("dad", f"no cover with at most {ceiling + 1} sets meets the budget B={B}")
    report["dad"] = {"value": dad.value, "cover_sizes": [len(U) for U in dad.cover]}
    budget = None if B == UNBOUNDED else B
    nf = _stage("nested", lambda: nested_families(G, ell, K, N, dad.cover, budget))
    pou = _stage("pou", lambda: build_pou(nf, p, pou_mode))
    pou_rep = verify_pou(G, ell, K, pou, float(pou_eps))
    report["pou"] = pou_rep.as_dict()
    if not pou_rep.passed:
        raise StageError("pou", "; ".join(pou_rep.failures[:3]))
    return PartitionStage(K, nf, pou, report)


def amenability_pipeline(
    G: FiniteGroupoid,
    ell: LengthFunction,
    R: Length,
    eps,
    alpha: float | None = None,
    m_max: int | None = None,
    B: Length | float = UNBOUNDED,
) -> PipelineResult:
    """End-to-end witness for K = {ℓ < R}: partition stage, exact sub-witnesses, assembly, check at ε."""
    part = pipeline_partition(G, ell, R, eps, alpha, m_max, B)
    K, nf, pou, report = part.K, part.nested, part.pou, part.report
    subs = []
    for U in nf.base:
        Gi = generate_subgroupoid(G, [k for k in K if G.src[k] in U and G.rng[k] in U])
        subs.append(exact_witness(restrict(G, Gi)))
    witness = _stage("assemble", lambda: assemble_witness(G, ell, K, nf.base, pou, subs, report["mode"]))
    check = check_amenability(G, witness, K, as_fraction(eps))
    witness.report = check
    report["amenability"] = check.as_dict()
    report["passed"] = check.passed
    return PipelineResult(witness, report)


def witness_to_dict(G: FiniteGroupoid, w: AmenabilityWitness, extra: dict | None = None) -> dict:
    doc = {
        "mu": [[to_jsonable(g), to_jsonable(w.mu.get(g, 0))] for g in G.arrows],
        "provenance": w.provenance,
        "report": w.report.as_dict() if w.report else {},
    }
    if extra:
        doc["pipeline"] = extra
    return doc


def dump_witness(G: FiniteGroupoid, w: AmenabilityWitness, extra: dict | None = None) -> str:
    return json.dumps(witness_to_dict(G, w, extra), default=str)
