import math
from decimal import Decimal, getcontext
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adgrowth.dynamics import DadQuery, dad_groupoid
from adgrowth.errors import InvalidSpecError, VerificationError
from adgrowth.growth import DimensionCurve
from adgrowth.groupoids import build_pair_groupoid, power
from adgrowth.partitions import (
    ParameterError,
    build_pou,
    choose_parameters,
    dump_pou,
    growth_inequality_holds,
    iroot_floor,
    nested_families,
    p_for,
    power_round,
    c_lower_bound,
    verify_pou,
)
from adgrowth.spaces import cycle, path

getcontext().prec = 60


def dec_pow(x, a) -> Decimal:
    frac = lambda v: Decimal(v.numerator) / Decimal(v.denominator)  # noqa: E731
    x = frac(x) if isinstance(x, Fraction) else Decimal(x)
    a = frac(a) if isinstance(a, Fraction) else Decimal(str(a))
    return x**a if x > 0 else Decimal(0)


def dec_lhs(F, p, N) -> Decimal:
    a = Decimal(F + 1)
    return (2 * p * a + 2 * p * dec_pow(a, 1 + Fraction(1, p))) / N


# --- arithmetic ---------------------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**30), st.integers(1, 7))
def test_iroot_floor(n, k):
    r = iroot_floor(n, k)
    assert r**k <= n < (r + 1) ** k


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**9), st.sampled_from([0.3, 0.5, 0.7, 0.25, 0.9]))
def test_power_round_matches_decimal(x, a):
    v = dec_pow(x, a)
    assert power_round(x, a, "floor") == math.floor(v)
    if v != v.to_integral_value():
        assert power_round(x, a, "ceil") == math.floor(v) + 1


def test_power_round_exact_cases():
    assert power_round(16, 0.5) == 4
    assert power_round(17, 0.5) == 5
    assert power_round(17, 0.5, "floor") == 4
    with pytest.raises(InvalidSpecError):
        power_round(4, 0.5, "nearest")


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 200), st.integers(1, 4), st.integers(1, 10**6), st.sampled_from([0.1, 0.5, 1, 2]))
def test_growth_inequality_matches_decimal(F, p, N, eps):
    lhs = dec_lhs(F, p, N)
    if abs(lhs - Decimal(str(eps))) > Decimal("1e-40"):
        assert growth_inequality_holds(F, p, N, eps) == (lhs < Decimal(str(eps)))


# --- parameters ---------------------------------------------------------------------------


def test_p_for():
    assert p_for(0.5) == 2
    assert p_for(0.3) == 1
    assert p_for(0.7) == 3
    with pytest.raises(InvalidSpecError):
        p_for(1.0)


def test_search_mode_constant_zero():
    par = choose_parameters(0.5, 1, 1, f=lambda x: 0)
    assert (par.p, par.N) == (2, 9)
    assert par.mode == "search"


def test_search_mode_with_curve():
    curve = DimensionCurve.of({r: 0 for r in range(1, 40)})
    assert choose_parameters(0.5, 1, 1, f=curve).N == 9


def test_formula_mode_is_verified():
    par = choose_parameters(0.5, 2, 0.5)
    assert par.c >= c_lower_bound(0.5, 2, 0.5)
    assert par.N == math.ceil(3**par.c)
    assert growth_inequality_holds(par.F, par.p, par.N, 0.5)


def test_formula_mode_ceiling_failure_is_reported():
    with pytest.raises(ParameterError):
        choose_parameters(0.3, 4, 0.5)
    assert choose_parameters(0.3, 4, 0.5, rounding="floor").N == 513


def test_search_cap():
    with pytest.raises(ParameterError):
        choose_parameters(0.5, 1, 0.001, f=lambda x: x, search_cap=50)


# --- nested families and partitions -------------------------------------------------------


def pair(n, closed_cycle=False):
    G, ell = build_pair_groupoid(cycle(n) if closed_cycle else path(n))
    return G, ell, ell.below(G, 2)


def test_single_set_chain_is_trivial():
    G, ell, K = pair(6)
    nf = nested_families(G, ell, K, 3, [G.units])
    assert all(nf.level(0, n) == G.units for n in range(4))
    for mode, p in (("p-power", 2), ("flat", 1)):
        pou = build_pou(nf, p, mode)
        assert all(pou.value(0, x) == 1 for x in G.units)
        rep = verify_pou(G, ell, K, pou, 1e-6)
        assert rep.passed and rep.max_defect == 0


def test_two_set_base_cover_is_rejected():
    G, ell, K = pair(6)
    V0 = {(x, x) for x in range(4)}
    V1 = {(x, x) for x in range(2, 6)}
    with pytest.raises(VerificationError) as err:
        nested_families(G, ell, K, 2, [V0, V1])
    assert "(1)" in str(err.value)


@pytest.fixture(scope="module")
def cycle24():
    G, ell, K = pair(24, closed_cycle=True)
    big = power(G, K, 3)
    res = dad_groupoid(G, ell, DadQuery(big, 8, 8, orbit_condition=True))
    return G, ell, K, res


def test_cycle24_base_cover(cycle24):
    G, ell, K, res = cycle24
    assert res.value == 3
    assert frozenset().union(*res.cover) == G.units


def test_cycle24_nested_and_pou(cycle24):
    G, ell, K, res = cycle24
    nf = nested_families(G, ell, K, 2, res.cover, B=8)
    assert nf.report["passed"]
    for i in range(nf.size):
        assert nf.level(i, 0) <= nf.level(i, 1) <= nf.level(i, 2) <= nf.base[i]
    pou = build_pou(nf, 2, "p-power")
    rep = verify_pou(G, ell, K, pou, 10)
    assert rep.passed, rep.failures
    assert rep.max_psi_diff <= Fraction(2, 2)
    assert rep.max_norm_error <= 1e-9
    assert rep.max_index_diff <= rep.index_bound
    for x in G.units:
        assert sum(w.get(x, 0) for w in pou.weights) == 1
    flat = build_pou(nf, 1, "flat")
    frep = verify_pou(G, ell, K, flat, 1)
    assert frep.passed
    assert all(sum(ph.get(x, 0) for ph in flat.phi) == 1 for x in G.units)
    assert not verify_pou(G, ell, K, pou, 1).passed


def test_pou_exclusive_point():
    G, ell, K = pair(9)
    V0 = {(x, x) for x in range(6)}
    V1 = {(x, x) for x in range(3, 9)}
    nf = nested_families(G, ell, K, 1, [V0, V1])
    pou = build_pou(nf, 2)
    assert pou.value(0, (0, 0)) == 1 and pou.value(1, (0, 0)) == 0
    assert '"mode": "p-power"' in dump_pou(pou)


def test_build_pou_rejects_bad_mode():
    G, ell, K = pair(3)
    nf = nested_families(G, ell, K, 1, [G.units])
    with pytest.raises(InvalidSpecError):
        build_pou(nf, 2, "sharp")


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("R", [1, 2, 4])
@pytest.mark.parametrize("eps", [0.5, 0.1])
def test_formula_grid_with_integer_part(alpha, R, eps):
    par = choose_parameters(alpha, R, eps, rounding="floor")
    assert par.N == math.ceil((R + 1) ** par.c)
    assert dec_lhs(par.F, par.p, par.N) < Decimal(str(eps))
