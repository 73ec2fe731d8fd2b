"""End-to-end acceptance criteria; each test prints one PASS/FAIL line."""

import random
from fractions import Fraction

import pytest

from adgrowth.amenability import amenability_pipeline, check_amenability, exact_witness, pipeline_partition
from adgrowth.covers import (
    BudgetedDimensionQuery,
    box_allocate,
    check_box_allocation,
    r_multiplicity,
    solve_ad,
    solve_coarse,
    solve_families,
    solve_rmult,
)
from adgrowth.dynamics import crosscheck_action, crosscheck_pair, dad_action
from adgrowth.growth import DimensionCurve, equiv, preceq_witness
from adgrowth.groupoids import (
    FiniteGroup,
    build_pair_groupoid,
    build_transformation_groupoid,
    dihedral_action,
    direct_product,
    regular_action,
    rotation_action,
    trivial_action,
    units_only,
)
from adgrowth.partitions import ParameterError, choose_parameters, growth_inequality_holds, growth_inequality_lhs
from adgrowth.spaces import (
    cayley_ball,
    cycle,
    cyclic_group,
    dihedral_group,
    dirsum,
    entourage,
    free_abelian_group,
    free_group,
    grid,
    path,
    random_connected_graph,
)

pytestmark = pytest.mark.acceptance
Q = BudgetedDimensionQuery


def test_criterion_1_definition_equivalence(criterion):
    c = criterion(1, 120)
    spaces = [path(n) for n in range(1, 11)] + [cycle(n) for n in range(3, 11)]
    for sp in spaces:
        for R in (1, 2):
            for D in (1, 2, 3):
                fam = solve_families(sp, Q(R, D))[0]
                co = solve_coarse(sp, entourage(sp, R), entourage(sp, D), 8)
                c.check(co == fam, f"{sp.name} R={R} D={D}: coarse {co} != families {fam}")
                rm = solve_rmult(sp, Q(R, D))
                fam2 = solve_families(sp, Q(2 * R, D))[0]
                if None not in (fam, rm, fam2):
                    c.check(fam <= rm <= fam2, f"{sp.name} R={R} D={D}: chain {fam} <= {rm} <= {fam2} broken")
    c.finish()


def test_criterion_2_box_allocation(criterion):
    c = criterion(2, 60)
    rng = random.Random(20240611)
    for trial in range(100):
        n = rng.randint(2, 30)
        sp = random_connected_graph(n, rng.randint(0, n), rng)
        pts = list(sp.points)
        R = rng.choice([1, 2])
        cover = [frozenset(rng.sample(pts, rng.randint(1, min(6, n)))) for _ in range(rng.randint(1, 10))]
        covered = frozenset().union(*cover)
        cover += [frozenset([p]) for p in pts if p not in covered and rng.random() < 0.5]
        try:
            out = box_allocate(sp, cover, R)
        except Exception as exc:  # any failure is a violation here
            c.check(False, f"trial {trial}: {type(exc).__name__}: {exc}")
            continue
        problems = check_box_allocation(sp, cover, out, R)
        c.check(not problems, f"trial {trial}: {problems[:2]}")
        c.check(len(out.families) == r_multiplicity(sp, cover, R), f"trial {trial}: family count")
    c.finish()


def test_criterion_3_action_equals_groupoid(criterion):
    c = criterion(3, 60)
    z12 = rotation_action(12)
    E = frozenset({11, 0, 1})
    c.check(dad_action(z12, E, 3, 8).value == 1, "Z/12 at B=3 is not 1")
    trivial = trivial_action(FiniteGroup.from_spec(cyclic_group(1)), range(5))
    c.check(dad_action(trivial, {0}, 0, 8).value == 0, "trivial action is not 0")
    klein = FiniteGroup.from_spec(direct_product(cyclic_group(2), cyclic_group(2)))
    actions = {
        "Z/12 rotation": z12,
        "trivial": trivial,
        "Klein regular": regular_action(klein),
        "D4 on square": dihedral_action(4),
        "Z/6 on Z/3": rotation_action(6, 3),
        "Z/8 regular": regular_action(FiniteGroup.from_spec(cyclic_group(8))),
        "D3 regular": regular_action(FiniteGroup.from_spec(dihedral_group(3))),
    }
    for name, act in actions.items():
        for R in (1, 2, 3):
            for B in (0, 1, 2, 3, 4, 6):
                rep = crosscheck_action(act, R, B, 8)
                c.check(rep.passed, f"{name} R={R} B={B}: {rep.summary()}")
    c.finish()


def spaces_up_to_12():
    out = [path(n) for n in range(1, 13)] + [cycle(n) for n in range(3, 13)]
    out += [grid(d) for d in ([2, 2], [2, 3], [2, 4], [2, 5], [2, 6], [3, 3], [3, 4], [2, 2, 2])]
    out += [
        cayley_ball(free_abelian_group(2), 1),
        cayley_ball(free_group(2), 1),
        cayley_ball(dihedral_group(4), 4),
        cayley_ball(cyclic_group(10), 5),
        dirsum([1, 2], 2),
        dirsum([1, 2, 3], 2),
    ]
    rng = random.Random(416)
    out += [random_connected_graph(rng.randint(6, 12), rng.randint(0, 6), rng) for _ in range(6)]
    assert all(len(s) <= 12 for s in out)
    return out


def test_criterion_4_pair_groupoid_equality(criterion):
    c = criterion(4, 300)
    for sp in spaces_up_to_12():
        for R in (1, 2, 3):
            for D in (1, 2, 3, 4):
                rep = crosscheck_pair(sp, R, D, 8)
                c.check(rep.passed, f"{sp.name} R={R} D={D}: {rep.summary()} {rep.problems[:1]}")
    c.finish()


def pipeline_instances():
    yield "path(8) pair", build_pair_groupoid(path(8))
    yield "cycle(12) pair", build_pair_groupoid(cycle(12))
    yield "Z/12 transformation", build_transformation_groupoid(rotation_action(12))


EPS = Fraction(1, 2)
R = 2


def test_criterion_5_partition_of_unity(criterion):
    c = criterion(5, 120)
    for name, (G, ell) in pipeline_instances():
        part = pipeline_partition(G, ell, R, EPS, alpha=0.5)
        pou = part.pou
        K = part.K
        norm = max(abs(sum(ph.get(x, 0.0) ** pou.p for ph in pou.phi) - 1) for x in pou.units)
        c.check(norm <= 1e-9, f"{name}: normalisation error {norm}")
        bound = Fraction(2, pou.N)
        for g in K:
            r, s = G.rng[g], G.src[g]
            for i, psi in enumerate(pou.psi):
                d = abs(psi.get(r, Fraction(0)) - psi.get(s, Fraction(0)))
                c.check(d <= bound, f"{name}: ψ_{i} step {d} > 2/N at {g!r}")
            total = pou.p * sum(abs(ph.get(r, 0.0) - ph.get(s, 0.0)) for ph in pou.phi)
            c.check(total < EPS, f"{name}: p·Σ|Δφ| = {total} at {g!r}")
    c.finish()


def test_criterion_6_growth_constant(criterion):
    c = criterion(6, 10)
    for alpha in (0.3, 0.5, 0.7):
        for R_ in (1, 2, 4):
            for eps in (0.5, 0.1):
                try:
                    par = choose_parameters(alpha, R_, eps)
                except ParameterError as exc:
                    c.check(False, f"(α={alpha}, R={R_}, ε={eps}): {exc}")
                    continue
                c.check(
                    growth_inequality_holds(par.F, par.p, par.N, eps),
                    f"(α={alpha}, R={R_}, ε={eps}): lhs {growth_inequality_lhs(par.F, par.p, par.N)}",
                )
    c.finish()


def amenability_corpus():
    yield "units", units_only(range(3))[0]
    yield "pair path(5)", build_pair_groupoid(path(5))[0]
    yield "pair cycle(7)", build_pair_groupoid(cycle(7))[0]
    yield "pair grid 2x3", build_pair_groupoid(grid([2, 3]))[0]
    for name, (G, _) in pipeline_instances():
        yield name, G
    yield "Z/3 regular", build_transformation_groupoid(regular_action(FiniteGroup.from_spec(cyclic_group(3))))[0]
    yield "D4 on square", build_transformation_groupoid(dihedral_action(4))[0]
    yield "Z/6 on Z/3", build_transformation_groupoid(rotation_action(6, 3))[0]


def test_criterion_7_amenability(criterion):
    c = criterion(7, 120)
    for name, G in amenability_corpus():
        rep = check_amenability(G, exact_witness(G), G.arrows, Fraction(1, 10**12))
        c.check(rep.passed and rep.slacks == (0, 0), f"{name}: exact witness slacks {rep.slacks}")
        c.check(rep.max_fiber_sum == 1, f"{name}: fiber sum {rep.max_fiber_sum}")
    for name, (G, ell) in pipeline_instances():
        for alpha in (0.5, None):
            res = amenability_pipeline(G, ell, R, EPS, alpha=alpha)
            mode = "growth" if alpha else "finite-dad"
            c.check(res.passed, f"{name} mode {mode}: {res.report.get('amenability', {}).get('failures')}")
    c.finish()


def test_criterion_8_concrete_values(criterion):
    c = criterion(8, 60)
    c.check(solve_families(path(6), Q(1, 2))[0] == 1, "path(6) R=1 D=2")
    c.check(solve_families(cycle(4), Q(1, 1))[0] == 1, "cycle(4) R=1 D=1")
    one = path(1)
    for R_ in (0, 1, 3):
        for D in (0, 1, 2):
            q = Q(R_, D)
            vals = {
                "ad": solve_ad(one, q),
                "rmult": solve_rmult(one, q),
                "families": solve_families(one, q)[0],
                "coarse": solve_coarse(one, entourage(one, R_), entourage(one, D), 8),
            }
            for k, v in vals.items():
                c.check(v == 0, f"one point {k} at R={R_} D={D} gave {v}")
    z12 = rotation_action(12)
    E = {11, 0, 1}
    c.check(dad_action(z12, E, 6, 8).value == 0, "Z/12 at B=6")
    c.check(dad_action(z12, E, 3, 8).value == 1, "Z/12 at B=3")
    c.finish()


def test_criterion_9_growth_preorder(criterion):
    c = criterion(9, 5)
    dom = range(1, 1006)
    lin = DimensionCurve.from_function(lambda x: x, dom)
    sq = DimensionCurve.from_function(lambda x: x * x, dom)
    w = preceq_witness(lin, sq, 5, (1, 100))
    c.check(w is not None and w.k == 1, f"x vs x^2 gave {w}")
    w = preceq_witness(sq, lin, 5, (1, 200))
    c.check(w is None, f"x^2 vs x gave {w}")
    rng = random.Random(9)
    for i in range(20):
        vals, acc = {}, 0
        for r in range(1, rng.randint(20, 200)):
            acc += rng.choice([0, 0, 1, 1, 2, 5])
            vals[r] = acc
        f = DimensionCurve.of(vals)
        got = str(equiv(f, f, 5))
        c.check(got == "equivalent(1,1)", f"curve {i}: {got}")
    c.finish()
