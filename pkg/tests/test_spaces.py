import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adgrowth.errors import InvalidSpecError, ResourceCapError
from adgrowth.spaces import (
    GROUPS,
    cayley_ball,
    cycle,
    diagonal,
    dirsum,
    dump_space,
    entourage,
    entourage_compose,
    entourage_invert,
    free_abelian_group,
    free_group,
    from_matrix,
    full_square,
    gen_space,
    grid,
    load_space,
    path,
    random_connected_graph,
    word_lengths,
)


def small_spaces():
    yield path(1)
    yield path(5)
    yield cycle(6)
    yield grid([2, 3])
    yield dirsum([1, 2], 1)
    yield cayley_ball(free_group(2), 1)
    yield random_connected_graph(7, 3, random.Random(4))


def test_path_basics():
    assert path(1).dist == ((0,),) or [list(r) for r in path(1).dist] == [[0]]
    assert path(3).d(0, 2) == 2


def test_cycle_wraps():
    c = cycle(6)
    assert c.d(0, 5) == 1
    assert c.diameter() == 3


def test_dirsum_weighted_l1():
    s = dirsum([1, 2], 2)
    assert s.d((1, 0), (0, 1)) == 3


def test_metric_axioms_rejected():
    with pytest.raises(InvalidSpecError):
        from_matrix([0, 1, 2], [[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    with pytest.raises(InvalidSpecError):
        from_matrix([0, 1], [[0, 1], [2, 0]])
    with pytest.raises(InvalidSpecError):
        from_matrix([0, 1], [[0, 0], [0, 0]])


def test_distances_exact():
    s = from_matrix(["a", "b"], [[0, 0.5], [0.5, 0]])
    assert s.d("a", "b") == Fraction(1, 2)


@pytest.mark.parametrize("space", list(small_spaces()), ids=lambda s: s.name or "space")
def test_generated_spaces_are_metrics(space):
    pts = space.points
    for a, b, c in itertools.product(pts, repeat=3):
        assert space.d(a, c) <= space.d(a, b) + space.d(b, c)
    for a, b in itertools.product(pts, repeat=2):
        assert space.d(a, b) == space.d(b, a)
        assert (space.d(a, b) == 0) == (a == b)


def test_entourage_counts():
    assert len(entourage(path(3), 1)) == 7
    assert len(entourage(path(4), 2)) == 14
    for s in small_spaces():
        assert entourage(s, 0).pairs == diagonal(s).pairs


def test_open_entourage_is_strict():
    assert len(entourage(path(3), 1, closed=False)) == 3


@pytest.mark.parametrize("space", list(small_spaces()), ids=lambda s: s.name or "space")
def test_entourage_monotone_and_compose(space):
    vals = sorted(set(space.distance_values()))[:4]
    for R, S in itertools.product(vals, repeat=2):
        if R <= S:
            assert entourage(space, R) <= entourage(space, S)
        assert entourage_compose(entourage(space, R), entourage(space, S)) <= entourage(space, R + S)
    E = entourage(space, vals[-1])
    assert entourage_invert(E).pairs == E.pairs
    assert entourage(space, space.diameter()).pairs == full_square(space).pairs


def test_word_lengths_free_abelian():
    wl = word_lengths(free_abelian_group(2), 2, 1000)
    assert len(wl) == 13
    assert wl[(1, 1)] == 2


def test_cayley_ball_metric_is_word_metric():
    b = cayley_ball(GROUPS["cyclic"](8), 4)
    assert len(b) == 8
    assert b.d(0, 4) == 4


def test_point_cap():
    with pytest.raises(ResourceCapError):
        grid([100, 100])
    with pytest.raises(ResourceCapError):
        gen_space("path", cap=10, n=11)


def test_gen_space_rejects_bad_input():
    with pytest.raises(InvalidSpecError):
        gen_space("path", n=0)
    with pytest.raises(InvalidSpecError):
        gen_space("torus", n=3)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 6), st.integers(0, 10**6))
def test_random_graph_roundtrip(n, extra, seed):
    s = random_connected_graph(n, extra, random.Random(seed))
    assert len(s) == n
    assert max(s.distance_values()) < n
    assert load_space(dump_space(s)) == s


def test_roundtrip_tuple_points():
    for s in (grid([2, 2]), dirsum([1, 3], 1), cayley_ball(free_group(2), 1)):
        assert load_space(dump_space(s)) == s
